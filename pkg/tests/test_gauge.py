import numpy as np
import pytest

from apspec import build_P, conjugate_expand, eliminate
from apspec.errors import SmallDivisorError
from apspec.freqgeom import sumset
from apspec.gauge import GridCoeff, grid_conjugate, sup_on_points
from apspec.symbols import APSymbol, CoefficientFn, commutator_i_over_h


def shell_points(n=33, lo=0.7, hi=1.3):
    pts = np.concatenate([np.linspace(-hi, -lo, n), np.linspace(lo, hi, n)])
    return pts[:, None]


def test_build_p_cancels_perturbation_exactly(base_1d, mathieu):
    # where the localizer q = 1, (i/h)[P, A0] reproduces the coefficients
    h = 0.1
    region = shell_points()
    p = build_P(mathieu, base_1d, (), 1e-6, h, region)
    comm = commutator_i_over_h(p, base_1d, h)
    for f, c in mathieu.terms.items():
        cc = comm.terms[f]
        for xi in region:
            assert abs(cc(xi) - c(xi)) < 1e-12


def test_build_p_small_divisor_guard(base_1d, mathieu):
    # xi = 0 puts the divisor 2 xi at zero, far below gamma/2
    with pytest.raises(SmallDivisorError):
        build_P(mathieu, base_1d, (), 0.5, 0.1, np.array([[0.0], [1.0]]))


def test_build_p_keeps_subspace_terms(base_1d, mathieu, mod_1d):
    p = build_P(mathieu, base_1d, ((1,),), 0.5, 0.1, shell_points())
    assert p.is_zero()  # every Mathieu frequency lies in the span of (1,)


def test_conjugate_expand_first_order_cancellation(base_1d, mathieu):
    h = 0.1
    eps = 0.01
    region = shell_points()
    w = mathieu.scale(eps)
    p = build_P(w, base_1d, (), 1e-6, h, region)
    full = w + APSymbol(
        w.module, {w.module.zero: CoefficientFn.from_callable(
            lambda xi: complex(base_1d(xi)))}, hermitian=True)
    out, rem = conjugate_expand(full, p, h, order=3, region=region)
    # the order-eps oscillation is gone; what is left at theta = +-1 is O(eps^2)
    resid = max(abs(out.coefficient(f)(pt))
                for f in mathieu.terms for pt in region)
    assert resid < 5 * eps ** 2
    assert 0 <= rem < 1.0


def test_grid_conjugate_matches_closure_path(base_1d, mathieu, mod_1d):
    h = 0.1
    eps = 0.01
    region = shell_points(n=17)
    w = mathieu.scale(eps)
    p = build_P(w, base_1d, (), 1e-6, h, region)
    full = w + APSymbol(
        mod_1d, {mod_1d.zero: CoefficientFn.from_callable(
            lambda xi: complex(base_1d(xi)))}, hermitian=True)
    closure, rem_c = conjugate_expand(full, p, h, order=3, region=region)

    axes = (np.linspace(-2.0, 2.0, 1601),)
    grid_full = {f: GridCoeff.sample(c, axes) for f, c in full.terms.items()}
    grid_p = {f: GridCoeff.sample(c, axes) for f, c in p.terms.items()}
    grid_out, rem_g = grid_conjugate(grid_full, grid_p, h, 3, mod_1d, axes,
                                     region)
    assert set(grid_out) == set(closure.terms)
    for f, gc in grid_out.items():
        cl = closure.coefficient(f)
        diff = max(abs(gc.at(pt[None, :])[0] - cl(pt)) for pt in region)
        assert diff < 1e-9, f"frequency {f.coords}: grid/closure gap {diff}"


def test_grid_coeff_shifted_vals_and_interp_error():
    axes = (np.linspace(-1.0, 1.0, 801),)
    fn = CoefficientFn.from_callable(lambda xi: complex(np.sin(3 * xi[0])))
    gc = GridCoeff.sample(fn, axes)
    sh = gc.shifted_vals(np.array([0.05]))
    interior = slice(50, -50)
    exact = np.sin(3 * (axes[0] + 0.05))
    assert np.max(np.abs(sh[interior] - exact[interior])) < 1e-8
    assert gc.interp_error() < 1e-8
    # clamping: queries beyond the grid return the edge value
    assert gc.at(np.array([[5.0]]))[0] == pytest.approx(np.sin(3.0), abs=1e-12)


def test_eliminate_mathieu_contracts_and_targets_zero(base_1d, mathieu, mod_1d):
    h = 0.05
    eps = 0.05
    region = shell_points()
    tk = sumset(mod_1d, 4)
    chain = eliminate(base_1d, mathieu, eps, h, gamma=0.6, region=region,
                      theta_k=tk, delta1=0.25, k_max=2, min_steps=2,
                      require_target=False)
    assert len(chain.steps) == 2
    assert chain.steps[0].eps_after < chain.steps[0].eps_before
    assert chain.steps[1].eps_before == chain.steps[0].eps_after
    # the effective symbol lives on the retained subspace: frequency 0 only
    assert all(f.is_zero for f in chain.effective.terms)
    assert chain.subspace_coords == ()
    assert chain.remainder_bound > 0
    a_eff = chain.effective_zero_fn()
    # the effective dispersion is a small real modulation of A0
    for xi in (0.8, 1.0, 1.2):
        assert abs(a_eff(np.array([xi])) - xi ** 2) < 2 * eps


def test_eliminate_respects_sumset_support(base_1d, mathieu, mod_1d):
    chain = eliminate(base_1d, mathieu, 0.05, 0.05, gamma=0.6,
                      region=shell_points(), theta_k=sumset(mod_1d, 4),
                      delta1=0.25, k_max=2, min_steps=2, require_target=False)
    tk = sumset(mod_1d, 4)
    for step in chain.steps:
        for f in step.generator.terms:
            assert f in tk or abs(f.coords[0]) <= 4
    for f in chain.effective.terms:
        assert f in tk


def test_sup_on_points(mathieu):
    pts = np.array([[0.0], [1.0]])
    assert sup_on_points(mathieu, pts) == pytest.approx(2.0)
