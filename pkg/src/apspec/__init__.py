"""Semiclassical spectral asymptotics for almost-periodic perturbations.

Pipeline: exact Weyl symbol calculus (``symbols``), Diophantine frequency
geometry and admissibility conditions (``freqgeom``), resonance-zone
decomposition of the energy shell (``zones``), iterative gauge
normal-form elimination (``gauge``), integrated-density-of-states
assembly and convergence studies (``spectra``), a Bloch-Floquet
eigensolver ground truth (``oracle``), and a configuration-driven command
line (``cli``).
"""

from .errors import (ApspecError, ConfigurationError, ConvergenceError,
                     InconsistencyError, QuadratureError, ResourceLimitError,
                     SmallDivisorError, UnsupportedConfigurationError)
from .freqgeom import (ConditionReport, FrequencyModule, SumsetK,
                       check_conditions, sumset, truncate)
from .gauge import GaugeChain, GaugeStep, build_P, conjugate_expand, eliminate
from .oracle import (FiberProblem, fiber_matrix, ids_oracle, propagation_norm,
                     spectral_function_oracle)
from .spectra import (PipelineResult, SpectralRow, SpectralTable,
                      convergence_study, ids_pipeline, kappa0_volume,
                      run_ids_pipeline, spectral_function_leading)
from .symbols import (APSymbol, BaseSymbol, CoefficientFn, Frequency,
                      commutator_i_over_h, weyl_compose)
from .zones import (CutoffSymbol, EnergyShell, ZoneComponent,
                    ZoneDecomposition, ZoneParams, build_cutoff, classify)

__version__ = "0.1.0"

__all__ = [
    "ApspecError", "ConfigurationError", "ConvergenceError",
    "InconsistencyError", "QuadratureError", "ResourceLimitError",
    "SmallDivisorError", "UnsupportedConfigurationError",
    "ConditionReport", "FrequencyModule", "SumsetK", "check_conditions",
    "sumset", "truncate",
    "GaugeChain", "GaugeStep", "build_P", "conjugate_expand", "eliminate",
    "FiberProblem", "fiber_matrix", "ids_oracle", "propagation_norm",
    "spectral_function_oracle",
    "PipelineResult", "SpectralRow", "SpectralTable", "convergence_study",
    "ids_pipeline", "kappa0_volume", "run_ids_pipeline",
    "spectral_function_leading",
    "APSymbol", "BaseSymbol", "CoefficientFn", "Frequency",
    "commutator_i_over_h", "weyl_compose",
    "CutoffSymbol", "EnergyShell", "ZoneComponent", "ZoneDecomposition",
    "ZoneParams", "build_cutoff", "classify",
    "__version__",
]
