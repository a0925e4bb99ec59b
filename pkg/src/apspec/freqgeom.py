"""Exact frequency-set geometry.

Frequencies are integer coordinate vectors against a fixed real generator
matrix, so sumsets, lattice spans and integer-dependence tests are exact;
only genuinely real questions (spans, angles, embedded norms) are answered
in floating point at an explicit tolerance.

The four Diophantine-type admissibility checks are:

  A - real-dependent tuples of frequencies must be integer-dependent,
  B - declared coefficient decay must control the truncation tail,
  C - minimal subspace angles and minimal nonzero norms are bounded below,
  D - resonance lattices inside proper subspaces are not too dense.

The generator columns are assumed integrally independent (no nonzero
integer combination embeds to zero); with that, integer dependence of
frequencies reduces to the exact rational kernel of their coordinate
matrix.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, InconsistencyError, ResourceLimitError
from .symbols import Frequency

__all__ = [
    "FrequencyModule",
    "SumsetK",
    "QuasiLatticeSubspace",
    "ResonanceLattice",
    "ConditionRecord",
    "ConditionReport",
    "truncate",
    "sumset",
    "subspace_angle",
    "s_min",
    "r_min",
    "lattice_in_subspace",
    "check_conditions",
    "hermite_normal_form",
]

RANK_TOL = 1e-9
SUMSET_CAP = 200_000
SUBSPACE_CAP = 100_000


class FrequencyModule:
    """A finite, symmetric frequency set with its generator matrix."""

    def __init__(self, generators, coords: Iterable[Sequence[int]],
                 decay: dict | None = None):
        g = np.asarray(generators, dtype=float)
        if g.ndim != 2:
            raise ConfigurationError("generator matrix must be d x r")
        self.generators = g
        self.dimension, self.rank = g.shape
        self.decay = dict(decay) if decay else None
        self._freq_cache: dict[tuple[int, ...], Frequency] = {}

        coord_set = {tuple(int(x) for x in c) for c in coords}
        zero = (0,) * self.rank
        coord_set.add(zero)
        for c in list(coord_set):
            coord_set.add(tuple(-x for x in c))
        self.coords = frozenset(coord_set)

        emb = np.array([g @ np.array(c) for c in coord_set if c != zero])
        self.spans_rd = bool(len(emb)) and (
            np.linalg.matrix_rank(emb, tol=RANK_TOL) == self.dimension)

    def frequency(self, coords: Sequence[int]) -> Frequency:
        key = tuple(int(c) for c in coords)
        f = self._freq_cache.get(key)
        if f is None:
            f = Frequency(key, self.generators @ np.array(key, dtype=float))
            self._freq_cache[key] = f
        return f

    def frequencies(self) -> list[Frequency]:
        return [self.frequency(c) for c in sorted(self.coords)]

    def nonzero_frequencies(self) -> list[Frequency]:
        return [f for f in self.frequencies() if not f.is_zero]

    @property
    def zero(self) -> Frequency:
        return self.frequency((0,) * self.rank)

    def is_lattice_like(self) -> bool:
        """True when the module can serve as a periodic (lattice) case:
        square generator matrix of full rank."""
        return (self.rank == self.dimension
                and np.linalg.matrix_rank(self.generators, tol=RANK_TOL) == self.dimension)


@dataclass(frozen=True)
class SumsetK:
    """The K-fold algebraic sum of the nonzero-padded frequency set.

    A witness decomposition (tuple of summand coordinates) is retained per
    element for spot checks.
    """

    module: FrequencyModule
    K: int
    elements: frozenset[tuple[int, ...]]
    witnesses: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = field(repr=False, default_factory=dict)

    def frequencies(self) -> list[Frequency]:
        return [self.module.frequency(c) for c in sorted(self.elements)]

    def nonzero_frequencies(self) -> list[Frequency]:
        return [f for f in self.frequencies() if not f.is_zero]

    def __contains__(self, freq: Frequency) -> bool:
        return tuple(freq.coords) in self.elements


@dataclass(frozen=True)
class QuasiLatticeSubspace:
    """Span of linearly independent nonzero frequencies from a sumset."""

    basis: tuple[Frequency, ...]
    onb: np.ndarray  # d x q orthonormal basis of the span

    @property
    def dim(self) -> int:
        return self.onb.shape[1]

    @staticmethod
    def from_frequencies(freqs: Sequence[Frequency]) -> "QuasiLatticeSubspace":
        mat = np.array([f.embedding for f in freqs]).T
        if np.linalg.matrix_rank(mat, tol=RANK_TOL) != mat.shape[1]:
            raise ConfigurationError("subspace basis frequencies are dependent")
        q, _ = np.linalg.qr(mat)
        return QuasiLatticeSubspace(tuple(freqs), q[:, : mat.shape[1]])

    def projector(self) -> np.ndarray:
        return self.onb @ self.onb.T

    def contains_embedding(self, v: np.ndarray, tol: float = RANK_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        resid = v - self.onb @ (self.onb.T @ v)
        return float(np.linalg.norm(resid)) <= tol * max(1.0, float(np.linalg.norm(v)))


@dataclass(frozen=True)
class ResonanceLattice:
    """Integer lattice generated inside a quasi-lattice subspace."""

    subspace: QuasiLatticeSubspace
    basis_coords: tuple[tuple[int, ...], ...]  # HNF rows
    covolume: float


def truncate(module: FrequencyModule, omega: float, L: int | None = None) -> FrequencyModule:
    """Restrict the frequency list to the ball |theta| <= omega.

    Returns a new module; when decay parameters are declared the caller can
    obtain the tail bound via :func:`decay_tail_bound`.
    """
    if omega <= 0:
        raise ConfigurationError("omega must be positive")
    kept = [c for c in module.coords
            if np.linalg.norm(module.generators @ np.array(c)) <= omega]
    nonzero = [c for c in kept if any(c)]
    if not nonzero:
        warnings.warn("truncation removed every nonzero frequency", stacklevel=2)
    return FrequencyModule(module.generators, kept, decay=module.decay)


def decay_tail_bound(module: FrequencyModule, omega: float) -> float | None:
    """Integral-comparison bound on sum_{|theta|>omega} |b_theta|.

    Decay is declared as |b_theta| <= C (1+|theta|)^(-rho) with counting
    power p (number of frequencies in a ball of radius t grows like t^p).
    """
    if module.decay is None:
        return None
    rho = float(module.decay["rate"])
    c = float(module.decay.get("constant", 1.0))
    p = float(module.decay.get("count_power", module.rank))
    if rho <= p:
        return float("inf")
    # sum_{|theta|>omega} C (1+|theta|)^-rho <= C' integral_omega^inf t^(p-1-rho) dt
    return c * p / (rho - p) * (1.0 + omega) ** (p - rho)


def sumset(module: FrequencyModule, K: int, cap: int = SUMSET_CAP) -> SumsetK:
    """Exact deduplicated K-fold sumset via integer coordinates."""
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    base = sorted(module.coords)
    current: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {
        c: (c,) for c in base}
    for _ in range(K - 1):
        nxt: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {}
        for c, wit in current.items():
            for b in base:
                s = tuple(x + y for x, y in zip(c, b))
                if s not in nxt:
                    nxt[s] = wit + (b,)
                if len(nxt) > cap:
                    raise ResourceLimitError(
                        f"sumset exceeded the configured cap of {cap} elements")
        current = nxt
    return SumsetK(module, K, frozenset(current), current)


def subspace_angle(v: QuasiLatticeSubspace, u: QuasiLatticeSubspace) -> float:
    """sin of the angle between V (minus W) and U (minus W), W = U n V.

    Returns 0 exactly when one span contains the other (the pair is not
    strongly distinct).
    """
    from scipy.linalg import subspace_angles

    if v.dim == 0 or u.dim == 0:
        return 0.0
    angles = subspace_angles(v.onb, u.onb)  # descending
    angles = np.sort(angles)
    n_zero = int(np.sum(angles <= RANK_TOL))
    dim_w = n_zero
    if dim_w == min(v.dim, u.dim):
        return 0.0  # containment
    return float(np.sin(angles[n_zero]))


def _dedup_key(sub: QuasiLatticeSubspace) -> bytes:
    return np.round(sub.projector(), 7).tobytes()


def enumerate_subspaces(theta_k: SumsetK, max_dim: int | None = None,
                        cap: int = SUBSPACE_CAP) -> list[QuasiLatticeSubspace]:
    """All proper quasi-lattice subspaces: spans of <= d-1 sumset elements,
    deduplicated by the rounded orthogonal projector."""
    d = theta_k.module.dimension
    if max_dim is None:
        max_dim = d - 1
    freqs = theta_k.nonzero_frequencies()
    seen: dict[bytes, QuasiLatticeSubspace] = {}
    for q in range(1, max_dim + 1):
        for combo in itertools.combinations(freqs, q):
            mat = np.array([f.embedding for f in combo]).T
            if np.linalg.matrix_rank(mat, tol=RANK_TOL) != q:
                continue
            sub = QuasiLatticeSubspace.from_frequencies(combo)
            seen.setdefault(_dedup_key(sub), sub)
            if len(seen) > cap:
                raise ResourceLimitError(
                    f"subspace enumeration exceeded the cap of {cap}")
    return list(seen.values())


def r_min(theta_k: SumsetK) -> tuple[float, Frequency | None]:
    """Minimal nonzero embedded norm over the sumset, with witness."""
    best, wit = float("inf"), None
    for f in theta_k.nonzero_frequencies():
        n = f.norm()
        if n < best:
            best, wit = n, f
    return best, wit


def s_min(theta_k: SumsetK, cap: int = SUBSPACE_CAP
          ) -> tuple[float, tuple[QuasiLatticeSubspace, QuasiLatticeSubspace] | None]:
    """Minimal sin of the angle over strongly distinct subspace pairs.

    Vacuous in d = 1 (the only subspaces are {0} and the line itself);
    reported as 1 with no witness.
    """
    subs = enumerate_subspaces(theta_k, cap=cap)
    best, wit = 1.0, None
    for a, b in itertools.combinations(subs, 2):
        s = subspace_angle(a, b)
        if s > 0.0 and s < best:
            best, wit = s, (a, b)
    return best, wit


# -- integer linear algebra ------------------------------------------------

def hermite_normal_form(rows: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Row-style Hermite normal form basis of the integer row span.

    Returns the nonzero rows: pivots positive, entries below pivots zero,
    entries above reduced modulo the pivot.
    """
    m = [list(int(x) for x in r) for r in rows]
    if not m:
        return []
    ncols = len(m[0])
    rank = 0
    for col in range(ncols):
        piv = None
        for i in range(rank, len(m)):
            if m[i][col] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        # clear entries below via gcd steps
        for i in range(rank + 1, len(m)):
            while m[i][col] != 0:
                q = m[rank][col] // m[i][col]
                m[rank] = [a - q * b for a, b in zip(m[rank], m[i])]
                m[rank], m[i] = m[i], m[rank]
        if m[rank][col] < 0:
            m[rank] = [-a for a in m[rank]]
        for i in range(rank):
            q = m[i][col] // m[rank][col]
            if q:
                m[i] = [a - q * b for a, b in zip(m[i], m[rank])]
        rank += 1
    return [tuple(r) for r in m[:rank]]


def rational_kernel(columns: Sequence[Sequence[int]]) -> list[int] | None:
    """A nonzero integer kernel vector n with sum_i n_i * col_i = 0, or None.

    Exact Gaussian elimination over the rationals.
    """
    ncols = len(columns)
    if ncols == 0:
        return None
    nrows = len(columns[0])
    a = [[Fraction(columns[j][i]) for j in range(ncols)] for i in range(nrows)]
    pivots: list[tuple[int, int]] = []
    row = 0
    for col in range(ncols):
        piv = next((i for i in range(row, nrows) if a[i][col] != 0), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        inv = a[row][col]
        a[row] = [x / inv for x in a[row]]
        for i in range(nrows):
            if i != row and a[i][col] != 0:
                f = a[i][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[row])]
        pivots.append((row, col))
        row += 1
    pivot_cols = {c for _, c in pivots}
    free = [c for c in range(ncols) if c not in pivot_cols]
    if not free:
        return None
    fc = free[0]
    sol = [Fraction(0)] * ncols
    sol[fc] = Fraction(1)
    for r, c in pivots:
        sol[c] = -a[r][fc]
    lcm = 1
    for x in sol:
        lcm = lcm * x.denominator // np.gcd(lcm, x.denominator)
    return [int(x * lcm) for x in sol]


def in_rational_span(coords: Sequence[int], basis: Sequence[Sequence[int]]) -> bool:
    """Exact test: does the integer vector lie in the Q-span of the basis?"""
    if not basis:
        return not any(coords)
    cols = [list(b) for b in basis] + [list(coords)]
    ker = rational_kernel(cols)
    while ker is not None:
        if ker[-1] != 0:
            return True
        # kernel vector among basis columns only: remove a dependent column
        dep = next(i for i, x in enumerate(ker[:-1]) if x != 0)
        cols.pop(dep)
        ker = rational_kernel(cols)
    return False


def lattice_in_subspace(theta_k: SumsetK, sub: QuasiLatticeSubspace) -> ResonanceLattice:
    """HNF basis and covolume of the Z-span of the sumset elements lying in
    the subspace.

    This under-approximates the full resonance lattice (only finitely many
    frequencies are available), hence over-approximates the covolume.
    """
    module = theta_k.module
    members = [c for c in theta_k.elements
               if any(c) and sub.contains_embedding(module.generators @ np.array(c))]
    basis_c = [list(f.coords) for f in sub.basis]
    for c in members:
        if not in_rational_span(c, basis_c):
            raise InconsistencyError(
                f"sumset member {c} in the subspace but outside the Q-span of "
                f"its basis: integer-dependence (Condition A) violated")
    hnf = hermite_normal_form(members) if members else []
    if not hnf:
        raise ConfigurationError("no nonzero sumset elements in the subspace")
    emb = np.array([module.generators @ np.array(r, dtype=float) for r in hnf])
    gram = emb @ emb.T
    cov = float(np.sqrt(max(np.linalg.det(gram), 0.0)))
    if cov <= 0:
        raise InconsistencyError("degenerate resonance lattice basis")
    return ResonanceLattice(sub, tuple(hnf), cov)


# -- condition report --------------------------------------------------------

@dataclass
class ConditionRecord:
    condition: str
    status: str          # "pass" | "fail" | "not_checkable"
    margin: float | None
    witness: object = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "status": self.status,
            "margin": self.margin,
            "witness": self.witness,
            "note": self.note,
        }


@dataclass
class ConditionReport:
    omega: float
    K: int
    records: list[ConditionRecord]

    def record(self, condition: str) -> ConditionRecord:
        return next(r for r in self.records if r.condition == condition)

    def all_pass(self) -> bool:
        return all(r.status == "pass" for r in self.records)

    def to_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


def _check_condition_a(module: FrequencyModule, tuple_cap: int = 200_000) -> ConditionRecord:
    d = module.dimension
    freqs = module.frequencies()
    n_tuples = 0
    n_dependent = 0
    for combo in itertools.combinations(freqs, d):
        n_tuples += 1
        if n_tuples > tuple_cap:
            raise ResourceLimitError(f"Condition A tuple cap of {tuple_cap} exceeded")
        mat = np.array([f.embedding for f in combo])
        scale = max(1.0, float(np.abs(mat).max()))
        if np.linalg.matrix_rank(mat, tol=RANK_TOL * scale) == d:
            continue
        n_dependent += 1
        cols = [list(f.coords) for f in combo]
        ker = rational_kernel(cols)
        if ker is None:
            return ConditionRecord(
                "A", "fail", None,
                witness=[list(f.coords) for f in combo],
                note="real-dependent tuple with empty integer kernel")
        resid = sum((k * f.embedding for k, f in zip(ker, combo)),
                    np.zeros(d))
        if np.linalg.norm(resid) > 1e-7:
            return ConditionRecord(
                "A", "fail", float(np.linalg.norm(resid)),
                witness={"tuple": [list(f.coords) for f in combo], "kernel": ker},
                note="integer kernel does not annihilate the embeddings; "
                     "generator matrix has integer relations")
    return ConditionRecord(
        "A", "pass", None,
        witness={"tuples_checked": n_tuples, "real_dependent": n_dependent},
        note="every real-dependent tuple carries an exact integer kernel")


def check_conditions(module: FrequencyModule, K: int, omega: float,
                     L: int | None = None,
                     subspace_cap: int = SUBSPACE_CAP) -> ConditionReport:
    """Pass/fail report for the four admissibility conditions at scale omega.

    The module is taken as already finite (post-truncation); Condition B is
    judged from declared decay parameters when present, reported
    "not_checkable" when an infinite set is intended but no decay is given.
    Condition D uses the computable under-approximation of each resonance
    lattice, so it is necessary but possibly not sufficient.
    """
    records: list[ConditionRecord] = []
    threshold = 1.0 / omega

    records.append(_check_condition_a(module))

    tail = decay_tail_bound(module, omega)
    target = omega ** (-float(L)) if L is not None else None
    if tail is None:
        if L is None:
            records.append(ConditionRecord(
                "B", "pass", None, note="finite frequency set taken verbatim; "
                "truncation difference is identically zero"))
        else:
            records.append(ConditionRecord(
                "B", "not_checkable", None,
                note="no decay declaration; tail bound unavailable"))
    else:
        ok = target is None or tail <= target
        records.append(ConditionRecord(
            "B", "pass" if ok else "fail", tail,
            witness={"tail_bound": tail, "target": target},
            note="integral-comparison tail bound from declared decay"))

    theta_k = sumset(module, K)
    rmin, rwit = r_min(theta_k)
    smin, swit = s_min(theta_k, cap=subspace_cap)
    c_ok = smin >= threshold and rmin >= threshold
    c_witness = {"r_min": rmin, "r_witness": list(rwit.coords) if rwit else None,
                 "s_min": smin}
    if swit is not None:
        c_witness["s_witness"] = [[list(f.coords) for f in s.basis] for s in swit]
    records.append(ConditionRecord(
        "C", "pass" if c_ok else "fail", min(smin, rmin) - threshold,
        witness=c_witness))

    subs = enumerate_subspaces(theta_k, cap=subspace_cap)
    worst = float("inf")
    d_wit = None
    for sub in subs:
        lat = lattice_in_subspace(theta_k, sub)
        if lat.covolume < worst:
            worst = lat.covolume
            d_wit = {"subspace": [list(f.coords) for f in sub.basis],
                     "covolume": lat.covolume}
    if not subs:
        records.append(ConditionRecord(
            "D", "pass", None, note="no proper quasi-lattice subspaces (d = 1); "
            "lattice over-approximates covolume from finite data"))
    else:
        records.append(ConditionRecord(
            "D", "pass" if worst >= threshold else "fail", worst - threshold,
            witness=d_wit,
            note="covolume computed from the Z-span of the finite sumset "
                 "intersection: an over-approximation"))

    is_lattice = module.is_lattice_like()
    if is_lattice:
        records[0].note += "; module is a full-rank lattice"
    elif records[0].status == "pass":
        records[0].note += ("; finite set satisfying A: the union of all "
                            "K-sumsets is a lattice")
    return ConditionReport(omega, K, records)
