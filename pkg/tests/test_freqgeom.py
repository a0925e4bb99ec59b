import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apspec import FrequencyModule, check_conditions, sumset, truncate
from apspec.errors import ConfigurationError, ResourceLimitError
from apspec.freqgeom import (QuasiLatticeSubspace, decay_tail_bound,
                             hermite_normal_form, in_rational_span,
                             lattice_in_subspace, r_min, rational_kernel,
                             s_min, subspace_angle)

GOLDEN = (1 + math.sqrt(5)) / 2


def test_hermite_normal_form_known_case():
    # rows span the same lattice as [[1, 2, 3], [4, 5, 6]]; pivots positive,
    # entries below pivots zero
    hnf = hermite_normal_form([[1, 2, 3], [4, 5, 6]])
    assert hnf == [(1, 2, 3), (0, 3, 6)]
    assert hermite_normal_form([[2, 0], [0, 2], [1, 1]]) == [(1, 1), (0, 2)]


def test_rational_kernel_exact():
    # 2*(1,1) - 1*(2,2) = 0
    ker = rational_kernel([[1, 1], [2, 2]])
    assert ker is not None
    a, b = ker
    assert a * 1 + b * 2 == 0 and a * 1 + b * 2 == 0 and any(ker)
    assert rational_kernel([[1, 0], [0, 1]]) is None


def test_in_rational_span():
    assert in_rational_span([2, 4], [[1, 2]])
    assert not in_rational_span([1, 0], [[1, 2]])
    assert in_rational_span([0, 0], [])
    assert not in_rational_span([1, 0], [])
    assert in_rational_span([1, 1, 0], [[1, 0, 0], [0, 1, 0]])


def test_sumset_exact_counts(mod_1d):
    # zero-padded summands: the K-fold sumset of {-1, 0, 1} is every
    # integer in [-K, K], so lower-order sums stay reachable
    for k in (1, 2, 3):
        sk = sumset(mod_1d, k)
        assert {c[0] for c in sk.elements} == set(range(-k, k + 1))
    s3 = sumset(mod_1d, 3)
    # witness decompositions sum back to their element
    for c, wit in s3.witnesses.items():
        assert tuple(sum(col) for col in zip(*wit)) == c


@given(st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=20, deadline=None)
def test_sumset_additivity_property(k1, k2):
    mod = FrequencyModule([[1.0, 0.0], [0.0, 1.0]], [(1, 0), (0, 1), (-1, -1)])
    a = {tuple(x + y for x, y in zip(c1, c2))
         for c1 in sumset(mod, k1).elements for c2 in sumset(mod, k2).elements}
    assert a == sumset(mod, k1 + k2).elements


def test_sumset_cap_enforced(mod_2d):
    with pytest.raises(ResourceLimitError):
        sumset(mod_2d, 3, cap=5)


def test_truncate_keeps_ball():
    # the module closes its coordinate list under zero and negation
    mod = FrequencyModule([[1.0]], [(1,), (2,), (5,)])
    small = truncate(mod, 2.5)
    assert set(small.coords) == {(-2,), (-1,), (0,), (1,), (2,)}


def test_decay_tail_bound():
    mod = FrequencyModule([[1.0]], [(1,)], decay={"rate": 3.0, "constant": 2.0})
    tail = decay_tail_bound(mod, 10.0)
    assert tail is not None and 0 < tail < 2.0 * 11.0 ** (-2)
    flat = FrequencyModule([[1.0]], [(1,)], decay={"rate": 0.5, "constant": 1.0})
    assert decay_tail_bound(flat, 10.0) == float("inf")
    assert decay_tail_bound(FrequencyModule([[1.0]], [(1,)]), 10.0) is None


def test_conditions_square_lattice_passes(mod_2d):
    z2 = FrequencyModule([[1.0, 0.0], [0.0, 1.0]],
                         [(1, 0), (0, 1), (1, 1), (-1, 1)],
                         decay={"rate": 6.0, "constant": 1.0})
    report = check_conditions(z2, K=2, omega=10.0, L=2)
    assert report.all_pass()
    assert {r.condition for r in report.records} == {"A", "B", "C", "D"}


def test_conditions_near_parallel_fails_c_with_witness():
    npar = FrequencyModule([[1.0, 1.0], [0.0, 1e-7]], [(1, 0), (0, 1)])
    report = check_conditions(npar, K=2, omega=10.0, L=2)
    rec = report.record("C")
    assert rec.status == "fail"
    # the witness names the near-parallel pair (tiny subspace angle)
    assert rec.witness["s_min"] < 1e-6
    assert rec.witness["s_witness"] is not None


def test_conditions_golden_ratio_passes_a_exactly():
    golden = FrequencyModule([[1.0, GOLDEN]], [(1, 0), (0, 1)])
    report = check_conditions(golden, K=2, omega=10.0, L=2)
    rec = report.record("A")
    assert rec.status == "pass"
    assert rec.witness["real_dependent"] >= 1  # collinear in R^1, never in Z^2


def test_condition_a_flags_generators_with_hidden_integer_relation():
    # generator columns 1 and 0.5 are integrally dependent (2*0.5 - 1 = 0),
    # violating the declared independence: real-dependent coordinate tuples
    # then appear without an integer kernel and A must fail
    bad = FrequencyModule([[1.0, 0.5]], [(1, 0), (0, 1), (1, -2)])
    rec = check_conditions(bad, K=1, omega=10.0).record("A")
    assert rec.status == "fail"
    assert "empty integer kernel" in rec.note


def test_r_min_and_s_min(mod_2d):
    tk = sumset(mod_2d, 2)
    best, wit = r_min(tk)
    assert best == pytest.approx(1.0)
    assert wit is not None and wit.norm() == pytest.approx(1.0)
    s, switness = s_min(tk)
    assert 0 < s <= 1.0


def test_lattice_in_subspace_covolume(mod_2d):
    tk = sumset(mod_2d, 2)
    sub = QuasiLatticeSubspace.from_frequencies([mod_2d.frequency((1, 0))])
    lat = lattice_in_subspace(tk, sub)
    # 1-d lattice spanned by (1,0) and (2,0): covolume 1 (HNF reduces to (1,0))
    assert lat.covolume == pytest.approx(1.0)


@given(st.sampled_from([[[1, 0], [0, 1]], [[1, 1], [0, 1]], [[2, 1], [1, 1]],
                        [[1, 0], [3, 1]]]))
@settings(max_examples=8, deadline=None)
def test_covolume_invariant_under_unimodular_change(u):
    # the Z-span is invariant under unimodular row operations, so the HNF
    # and hence the covolume must not change
    mod = FrequencyModule([[1.0, 0.0], [0.0, 1.0]], [(1, 0), (0, 1)])
    rows = [[1, 2], [0, 3]]
    mixed = [[u[0][0] * rows[0][j] + u[0][1] * rows[1][j] for j in range(2)],
             [u[1][0] * rows[0][j] + u[1][1] * rows[1][j] for j in range(2)]]
    assert hermite_normal_form(rows) == hermite_normal_form(mixed)


def test_subspace_angle_orthogonal(mod_2d):
    a = QuasiLatticeSubspace.from_frequencies([mod_2d.frequency((1, 0))])
    b = QuasiLatticeSubspace.from_frequencies([mod_2d.frequency((0, 1))])
    assert subspace_angle(a, b) == pytest.approx(1.0)


def test_dependent_subspace_basis_rejected(mod_2d):
    with pytest.raises(ConfigurationError):
        QuasiLatticeSubspace.from_frequencies(
            [mod_2d.frequency((1, 0)), mod_2d.frequency((2, 0))])
