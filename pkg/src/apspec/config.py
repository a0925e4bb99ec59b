"""Run configuration: strict JSON parsing and symbol builders.

A single configuration file drives every command.  Parsing is strict —
unknown keys are rejected with their JSON path so that no field can be
silently ignored — and the parsed structure round-trips exactly through
``to_dict``/``from_dict``.  The builders turn the declarative specs into
the numeric objects the pipeline consumes (base symbol, frequency module,
almost-periodic perturbation with auto-mirrored conjugate coefficients).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .freqgeom import FrequencyModule
from .symbols import APSymbol, BaseSymbol, CoefficientFn

__all__ = [
    "BaseSpec", "CoefficientSpec", "ModuleSpec", "OracleSpec", "ZoneSpec",
    "ConditionsSpec", "PropagateSpec", "RunConfig",
    "load_config", "parse_config", "serialize_config",
    "build_base", "build_module", "build_perturbation", "apply_overrides",
]

_BASE_KINDS = ("isotropic_quadratic", "diagonal_quadratic",
               "quadratic_plus_quartic")
_COEFF_KINDS = ("constant", "polynomial", "gaussian", "reciprocal_power")


@dataclass(frozen=True)
class BaseSpec:
    """Closed-form base symbol selection."""
    kind: str = "isotropic_quadratic"
    diagonal: tuple[float, ...] = ()      # for diagonal_quadratic
    quartic: float = 0.0                  # for quadratic_plus_quartic


@dataclass(frozen=True)
class CoefficientSpec:
    """One perturbation term b_theta; params depend on kind:

    constant:          params = [re, im]
    polynomial:        monomials = [[k_1..k_d, re, im], ...]
    gaussian:          params = [a, amplitude]    (amplitude e^{-a|xi|^2})
    reciprocal_power:  params = [s, amplitude]    (amplitude (1+|xi|^2)^{-s})
    """
    coords: tuple[int, ...] = ()
    kind: str = "constant"
    params: tuple[float, ...] = (1.0, 0.0)
    monomials: tuple[tuple[float, ...], ...] = ()


@dataclass(frozen=True)
class ModuleSpec:
    generators: tuple[tuple[float, ...], ...] = ((1.0,),)
    coordinates: tuple[tuple[int, ...], ...] = ((1,),)
    decay_rate: float = 0.0               # 0 means "no decay declared"
    decay_constant: float = 1.0


@dataclass(frozen=True)
class OracleSpec:
    nk: int = 200
    radius: float = 32.0
    exact_bands: bool = True


@dataclass(frozen=True)
class ZoneSpec:
    """Overrides for the zone/gauge bookkeeping parameters."""
    delta1: float = 0.0                   # 0 means module default theta/(6K)
    c_gamma: float = 1.0
    sumset_K: int = 0                     # 0 means default max(2, 2*steps)


@dataclass(frozen=True)
class ConditionsSpec:
    omega: float = 10.0
    K: int = 2
    L: int = 2


@dataclass(frozen=True)
class PropagateSpec:
    q1_center: tuple[float, ...] = (0.0,)
    q1_margin: float = 0.3
    q2_center: tuple[float, ...] = (2.0,)
    q2_margin: float = 0.3
    q_width: float = 0.5
    T: float = 1.0
    k_samples: int = 8


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 1
    base: BaseSpec = field(default_factory=BaseSpec)
    module: ModuleSpec = field(default_factory=ModuleSpec)
    coefficients: tuple[CoefficientSpec, ...] = ()
    eps: tuple[float, ...] = (0.1,)
    h: tuple[float, ...] = (0.1,)
    tau: tuple[float, ...] = (1.0,)
    theta_exp: float = 1.0                # the eps ~ h^theta coupling exponent
    K: tuple[int, ...] = (2,)             # gauge step counts
    M: int = 1
    zones: ZoneSpec = field(default_factory=ZoneSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    conditions: ConditionsSpec = field(default_factory=ConditionsSpec)
    propagate: PropagateSpec = field(default_factory=PropagateSpec)
    spectral_x: tuple[float, ...] = ()
    output_dir: str = "runs"
    seed: int = 0


# ---------------------------------------------------------------------------
# strict parsing

def _parse_value(ftype, value, path: str):
    origin = getattr(ftype, "__origin__", None)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list")
        args = ftype.__args__
        inner = args[0]
        return tuple(_parse_value(inner, v, f"{path}[{i}]")
                     for i, v in enumerate(value))
    if dataclasses.is_dataclass(ftype):
        return _parse_struct(ftype, value, path)
    if ftype is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number")
        return float(value)
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer")
        return int(value)
    if ftype is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false")
        return value
    if ftype is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string")
        return value
    raise ConfigurationError(f"{path}: unsupported field type {ftype}")


def _resolve_types(cls) -> dict[str, object]:
    import typing
    return typing.get_type_hints(cls)


def _parse_struct(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected an object")
    hints = _resolve_types(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown field(s) {sorted(unknown)}; "
            f"allowed: {sorted(names)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _parse_value(hints[f.name], data[f.name],
                                          f"{path}.{f.name}")
    return cls(**kwargs)


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    return obj


def parse_config(data: dict) -> RunConfig:
    """Parse a decoded JSON object into a validated RunConfig."""
    cfg = _parse_struct(RunConfig, data, "config")
    _validate(cfg)
    return cfg


def serialize_config(cfg: RunConfig, indent: int = 2) -> str:
    return json.dumps(_to_jsonable(cfg), indent=indent) + "\n"


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from None
    return parse_config(data)


def _validate(cfg: RunConfig) -> None:
    if cfg.dimension not in (1, 2):
        raise ConfigurationError("config.dimension: must be 1 or 2")
    if cfg.base.kind not in _BASE_KINDS:
        raise ConfigurationError(
            f"config.base.kind: {cfg.base.kind!r} not in {_BASE_KINDS}")
    if cfg.base.kind == "diagonal_quadratic" and \
            len(cfg.base.diagonal) != cfg.dimension:
        raise ConfigurationError(
            "config.base.diagonal: needs one entry per dimension")
    for g in cfg.module.generators:
        if len(g) != cfg.dimension:
            raise ConfigurationError(
                "config.module.generators: each generator needs "
                f"{cfg.dimension} component(s)")
    r = len(cfg.module.generators)
    for c in cfg.module.coordinates:
        if len(c) != r:
            raise ConfigurationError(
                "config.module.coordinates: each coordinate vector needs "
                f"{r} integer(s), one per generator")
    for i, spec in enumerate(cfg.coefficients):
        if spec.kind not in _COEFF_KINDS:
            raise ConfigurationError(
                f"config.coefficients[{i}].kind: {spec.kind!r} not in "
                f"{_COEFF_KINDS}")
        if len(spec.coords) != r:
            raise ConfigurationError(
                f"config.coefficients[{i}].coords: needs {r} integer(s)")
        if spec.kind != "polynomial" and len(spec.params) != 2:
            raise ConfigurationError(
                f"config.coefficients[{i}].params: expected [a, b]")
        if spec.kind == "polynomial":
            for m in spec.monomials:
                if len(m) != cfg.dimension + 2:
                    raise ConfigurationError(
                        f"config.coefficients[{i}].monomials: each entry is "
                        f"[k_1..k_{cfg.dimension}, re, im]")
    for name, vals in (("eps", cfg.eps), ("h", cfg.h), ("tau", cfg.tau)):
        if not vals:
            raise ConfigurationError(f"config.{name}: needs at least one value")
    if any(hv <= 0 for hv in cfg.h):
        raise ConfigurationError("config.h: values must be positive")
    if any(e < 0 for e in cfg.eps):
        raise ConfigurationError("config.eps: values must be nonnegative")
    if any(k < 0 for k in cfg.K):
        raise ConfigurationError("config.K: step counts must be nonnegative")
    if cfg.M < 1:
        raise ConfigurationError("config.M: target order must be >= 1")
    z = cfg.zones
    if z.delta1 < 0 or z.delta1 >= 0.5:
        raise ConfigurationError(
            "config.zones.delta1: must lie in [0, 1/2) so the divisor scale "
            "gamma = c sqrt(eps) h^{-delta} stays below the shell scale")
    if z.c_gamma <= 0:
        raise ConfigurationError("config.zones.c_gamma: must be positive")
    if cfg.oracle.nk < 2 or cfg.oracle.radius <= 0:
        raise ConfigurationError(
            "config.oracle: nk >= 2 and radius > 0 required")


# ---------------------------------------------------------------------------
# overrides

def apply_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply dotted-path key=value overrides, reusing the strict parser."""
    data = _to_jsonable(cfg)
    for key, raw in overrides.items():
        parts = key.split(".")
        node = data
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigurationError(f"override {key}: unknown field {p!r}")
            node = node[p]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigurationError(f"override {key}: unknown field {leaf!r}")
        try:
            node[leaf] = json.loads(raw)
        except json.JSONDecodeError:
            node[leaf] = raw
    return parse_config(data)


# ---------------------------------------------------------------------------
# builders

def build_base(cfg: RunConfig) -> BaseSymbol:
    b = cfg.base
    if b.kind == "isotropic_quadratic":
        return BaseSymbol.isotropic_quadratic(cfg.dimension)
    if b.kind == "diagonal_quadratic":
        return BaseSymbol.diagonal_quadratic(b.diagonal)
    return BaseSymbol.quadratic_plus_quartic(cfg.dimension, b.quartic)


def build_module(cfg: RunConfig) -> FrequencyModule:
    generators = [list(col) for col in zip(*cfg.module.generators)]
    decay = None
    if cfg.module.decay_rate > 0:
        decay = {"rate": cfg.module.decay_rate,
                 "constant": cfg.module.decay_constant}
    return FrequencyModule(generators, cfg.module.coordinates, decay=decay)


def _build_coefficient(spec: CoefficientSpec) -> CoefficientFn:
    if spec.kind == "constant":
        return CoefficientFn.constant(complex(spec.params[0], spec.params[1]))
    if spec.kind == "polynomial":
        monos = {tuple(int(k) for k in m[:-2]): complex(m[-2], m[-1])
                 for m in spec.monomials}
        return CoefficientFn.polynomial(monos)
    if spec.kind == "gaussian":
        return CoefficientFn.gaussian(spec.params[0], amplitude=spec.params[1])
    return CoefficientFn.reciprocal_power(spec.params[0],
                                          amplitude=spec.params[1])


def build_perturbation(cfg: RunConfig, module: FrequencyModule | None = None
                       ) -> APSymbol:
    """Hermitian perturbation symbol from the coefficient specs.

    Frequencies whose opposite is not explicitly configured get the
    conjugate coefficient mirrored in automatically, so a single entry per
    conjugate pair suffices.
    """
    if module is None:
        module = build_module(cfg)
    declared = {tuple(s.coords) for s in cfg.coefficients}
    terms = {}
    for spec in cfg.coefficients:
        coeff = _build_coefficient(spec)
        terms[module.frequency(spec.coords)] = coeff
        mirror = tuple(-x for x in spec.coords)
        if mirror not in declared:
            terms[module.frequency(mirror)] = coeff.conjugate()
    return APSymbol(module, terms, hermitian=True)
