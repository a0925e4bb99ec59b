import math

import numpy as np
import pytest

from apspec import fiber_matrix, ids_oracle, propagation_norm
from apspec.errors import ConfigurationError
from apspec.oracle import spectral_function_oracle
from apspec.symbols import APSymbol
from apspec.zones import build_cutoff


def test_free_case_exact(base_1d, mod_1d):
    pert = APSymbol(mod_1d, {}, hermitian=True)
    n = ids_oracle(base_1d, pert, 1.0, 0.1, 0.0, nk=100)
    # vol{xi^2 <= 1} / (2 pi h) = 2 / (2 pi 0.1)
    assert n == pytest.approx(10.0 / math.pi, abs=1e-12)


def test_exact_bands_stable_under_resolution(base_1d, mathieu):
    # d = 1 band tracing is quadrature-free: doubling nk or the plane-wave
    # radius must not move the answer beyond crossing tolerance
    args = (base_1d, mathieu, 1.0, 0.1, 0.05)
    ref = ids_oracle(*args, nk=100, radius=32.0)
    assert ids_oracle(*args, nk=200, radius=32.0) == pytest.approx(ref, abs=1e-12)
    assert ids_oracle(*args, nk=100, radius=64.0) == pytest.approx(ref, abs=1e-12)


def test_fiber_matrix_hermitian_and_diagonal(base_1d, mathieu):
    fp = fiber_matrix(base_1d, mathieu, [0.3], 16.0, 0.1, 0.05)
    m = fp.matrix
    assert np.abs(m - m.conj().T).max() < 1e-14
    # diagonal entries are A0 at the fiber momenta
    d = np.real(np.diag(m))
    assert d.min() >= 0.0 and d.max() == pytest.approx((0.1 * (0.3 + 16)) ** 2, rel=1e-12)


def test_truncation_margin_guard(base_1d, mathieu):
    with pytest.raises(ConfigurationError):
        ids_oracle(base_1d, mathieu, 1.0, 0.1, 0.05, nk=16, radius=4.0)


def test_midpoint_and_exact_band_modes_agree(base_1d, mathieu):
    exact = ids_oracle(base_1d, mathieu, 1.0, 0.1, 0.05, nk=100)
    mid = ids_oracle(base_1d, mathieu, 1.0, 0.1, 0.05, nk=4001,
                     exact_bands=False)
    assert mid == pytest.approx(exact, abs=2e-3)


def test_ids_monotone_in_tau(base_1d, mathieu):
    vals = [ids_oracle(base_1d, mathieu, t, 0.1, 0.05, nk=60)
            for t in (0.5, 1.0, 1.5)]
    assert vals[0] < vals[1] < vals[2]


def test_spectral_function_integrates_to_ids(base_1d, mathieu, mod_1d):
    # mean of e(x, x, tau) over a period equals the IDS
    h, eps, tau = 0.1, 0.05, 1.0
    xs = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    mean = np.mean([spectral_function_oracle(np.array([x]), tau, base_1d,
                                             mathieu, h=h, eps=eps, nk=40)
                    for x in xs])
    ids = ids_oracle(base_1d, mathieu, tau, h, eps, nk=40, exact_bands=False)
    assert mean == pytest.approx(ids, rel=2e-3)


def test_propagation_contrast(base_1d, mathieu):
    h = 0.05
    q1 = build_cutoff([(0.0, 0.2)], margin=0.1, h=h, varsigma=0.2)
    q_far = build_cutoff([(0.7, 0.9)], margin=0.1, h=h, varsigma=0.2)
    q_near = build_cutoff([(0.1, 0.3)], margin=0.1, h=h, varsigma=0.2)
    far = propagation_norm(base_1d, mathieu, q1, q_far, T=1.0, h=h, eps=0.01)
    near = propagation_norm(base_1d, mathieu, q1, q_near, T=1.0, h=h, eps=0.01)
    assert far < 1e-6
    assert near > 0.1
