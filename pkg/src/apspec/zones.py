"""Resonance-zone decomposition of momentum space near an energy shell.

Cells of a regular grid covering the shell are classified by how many
linearly independent frequencies have a small symbol-gradient pairing
|<grad A0(xi), theta>| at the level-dependent thresholds gamma_j; connected
components of each level carry a resonance subspace and witness
frequencies.  A component at level j touching level j+1 is absorbed
upward, so components end up small (diameter of order gamma_j) and well
separated from the frequencies outside their subspace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ResourceLimitError
from .freqgeom import RANK_TOL, QuasiLatticeSubspace, SumsetK
from .symbols import BaseSymbol, Frequency

__all__ = [
    "ZoneParams",
    "EnergyShell",
    "ZoneComponent",
    "ZoneDecomposition",
    "CutoffSymbol",
    "microhyperbolicity_margin",
    "convexity_margin",
    "classify",
    "arc_measure",
    "build_cutoff",
]

GRID_CELL_CAP = 2_000_000

NONRESONANT = 0


@dataclass(frozen=True)
class ZoneParams:
    """Scale parameters of the decomposition.

    gamma_j = c * eps^(1/2) * h^(-delta_j) with an increasing exponent
    ladder delta_1 < ... < delta_{d-1}; the shell thickness uses
    C0 * eps + h^(1 - varsigma).
    """

    eps: float
    h: float
    theta_exp: float                  # h^theta_exp >= eps >= h
    deltas: tuple[float, ...]         # one exponent per resonance level
    varsigma: float
    sigma: float
    c: float = 1.0
    C0: float = 1.0

    def __post_init__(self):
        if not (0 < self.h < 1):
            raise ConfigurationError("need 0 < h < 1")
        if self.eps > 0:
            if self.eps < self.h * (1 - 1e-12):
                warnings.warn("eps below h: outside the nominal regime h <= eps",
                              stacklevel=2)
            if self.eps > self.h ** self.theta_exp * (1 + 1e-12):
                raise ConfigurationError("need eps <= h^theta_exp")
        ds = self.deltas
        if any(d <= 0 for d in ds) or any(b <= a for a, b in zip(ds, ds[1:])):
            raise ConfigurationError("zone exponents must be positive and increasing")
        if self.varsigma >= ds[0]:
            raise ConfigurationError("varsigma must be below delta_1")
        if self.eps > 0 and self.gamma(1) >= 1.0:
            raise ConfigurationError(
                f"gamma_1 = {self.gamma(1):.3g} >= 1: no non-resonant regime")

    def gamma(self, j: int) -> float:
        if not 1 <= j <= len(self.deltas):
            raise ConfigurationError(f"no zone level {j}")
        return self.c * math.sqrt(self.eps) * self.h ** (-self.deltas[j - 1])

    @property
    def shell_width(self) -> float:
        return self.C0 * self.eps + self.h ** (1.0 - self.varsigma)

    @property
    def cutoff_scale(self) -> float:
        return self.h ** (1.0 - self.varsigma)

    @staticmethod
    def defaults(eps: float, h: float, d: int, K: int,
                 sup_b: float = 1.0, theta_exp: float | None = None,
                 c: float = 1.0) -> "ZoneParams":
        """Exponent ladder delta_j = theta_exp/(6K) * j, varsigma = delta_1/2,
        sigma = delta_1/4, C0 = 2 sup|B|."""
        if theta_exp is None:
            theta_exp = min(1.0, math.log(eps) / math.log(h)) if eps > 0 else 1.0
        n_levels = max(d - 1, 1)
        d1 = theta_exp / (6.0 * K)
        deltas = tuple(d1 * j for j in range(1, n_levels + 1))
        return ZoneParams(eps=eps, h=h, theta_exp=theta_exp, deltas=deltas,
                          varsigma=d1 / 2.0, sigma=d1 / 4.0, c=c,
                          C0=2.0 * sup_b)


@dataclass
class EnergyShell:
    """Sampled grid covering Omega_tau = {|A0(xi) - tau| <= C0 eps + h^(1-vs)}."""

    base: BaseSymbol
    tau: float
    params: ZoneParams
    box: list[tuple[float, float]]
    step: float
    shape: tuple[int, ...]
    centers: np.ndarray = field(repr=False)        # (n_cells, d)
    values: np.ndarray = field(repr=False)         # A0 at centers
    inside: np.ndarray = field(repr=False)         # bool, |A0 - tau| <= width

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def shell_indices(self) -> np.ndarray:
        return np.flatnonzero(self.inside)

    @staticmethod
    def build(base: BaseSymbol, tau: float, params: ZoneParams, d: int,
              step: float | None = None, cell_cap: int = GRID_CELL_CAP) -> "EnergyShell":
        width = params.shell_width
        # ellipticity bound A0 >= c0 |xi|^m - C0 confines the shell
        r = ((max(tau, 0.0) + width + base.C0) / base.c0) ** (1.0 / base.m) + 0.1
        box = [(-r, r)] * d
        if step is None:
            g1 = params.gamma(1) if params.eps > 0 else 1.0
            step = min(g1 / 8.0, params.cutoff_scale / 4.0)
        n = max(2, int(math.ceil(2 * r / step)))
        if n ** d > cell_cap:
            raise ResourceLimitError(
                f"shell grid would need {n ** d} cells (cap {cell_cap}); "
                f"pass a coarser step")
        axes = [np.linspace(-r + step / 2, r - step / 2, n) for _ in range(d)]
        centers = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")],
                           axis=-1)
        values = np.array([base(c) for c in centers])
        inside = np.abs(values - tau) <= width
        return EnergyShell(base, tau, params, box, step, (n,) * d,
                           centers, values, inside)


@dataclass
class ZoneComponent:
    level: int
    component_id: int
    cell_indices: tuple[int, ...]
    subspace: QuasiLatticeSubspace
    witnesses: tuple[Frequency, ...]
    diameter: float
    off_subspace_margin: float

    def bounding_box(self, shell: EnergyShell) -> list[tuple[float, float]]:
        pts = shell.centers[list(self.cell_indices)]
        pad = shell.step / 2
        return [(float(pts[:, i].min() - pad), float(pts[:, i].max() + pad))
                for i in range(pts.shape[1])]


@dataclass
class ZoneDecomposition:
    shell: EnergyShell
    theta_k: SumsetK
    levels: np.ndarray          # per cell: -1 outside shell, 0 nonresonant, j >= 1
    component_ids: np.ndarray   # per cell: -1 where not resonant
    components: list[ZoneComponent]
    failures: list[str]

    def nonresonant_indices(self) -> np.ndarray:
        return np.flatnonzero(self.levels == NONRESONANT)

    def to_rows(self) -> list[dict]:
        rows = []
        d = self.shell.dimension
        for i in self.shell.shell_indices():
            comp = int(self.component_ids[i])
            sub = ""
            if comp >= 0:
                sub = ";".join(str(list(f.coords))
                               for f in self.components[comp].witnesses)
            row = {f"xi{j}": float(self.shell.centers[i, j]) for j in range(d)}
            row.update(label="resonant" if self.levels[i] > 0 else "nonresonant",
                       level=int(max(self.levels[i], 0)),
                       component=comp, subspace=sub)
            rows.append(row)
        return rows


def microhyperbolicity_margin(base: BaseSymbol, lam: float, shell: EnergyShell) -> float:
    """min over shell cells of |A0 - lam| + |grad A0|."""
    idx = shell.shell_indices()
    vals = np.abs(shell.values[idx] - lam)
    grads = np.array([np.linalg.norm(base.grad(shell.centers[i])) for i in idx])
    if len(idx) == 0:
        return float("inf")
    return float(np.min(vals + grads))


def convexity_margin(base: BaseSymbol, lam: float, shell: EnergyShell) -> float:
    """Smallest |eigenvalue| of the tangentially restricted Hessian on the
    sampled level surface; 0 when the tangential eigenvalues change sign or
    degenerate.  Vacuously +inf in d = 1."""
    d = shell.dimension
    if d == 1:
        return float("inf")
    idx = shell.shell_indices()
    lip = max(np.linalg.norm(base.grad(shell.centers[i])) for i in idx) + 1.0
    near = [i for i in idx
            if abs(shell.values[i] - lam) <= lip * shell.step]
    margin = float("inf")
    for i in near:
        xi = shell.centers[i]
        g = base.grad(xi)
        gn = np.linalg.norm(g)
        if gn < 1e-12:
            return 0.0
        n = g / gn
        t_basis = np.linalg.qr(np.eye(d) - np.outer(n, n))[0][:, : d - 1]
        ht = t_basis.T @ base.hess(xi) @ t_basis
        eigs = np.linalg.eigvalsh(ht)
        if eigs.min() * eigs.max() < -RANK_TOL or np.any(np.abs(eigs) < RANK_TOL):
            return 0.0
        margin = min(margin, float(np.min(np.abs(eigs))))
    return margin


def _flood(cells: set[int], shape: tuple[int, ...]) -> list[list[int]]:
    """Face-adjacency connected components; stable ids from sorted seeds."""
    strides = np.cumprod((1,) + shape[:0:-1])[::-1]

    def neighbors(flat: int):
        coords = []
        rem = flat
        for s in strides:
            coords.append(rem // s)
            rem %= s
        for axis, s in enumerate(strides):
            if coords[axis] > 0:
                yield flat - s
            if coords[axis] < shape[axis] - 1:
                yield flat + s

    remaining = set(cells)
    comps = []
    for seed in sorted(cells):
        if seed not in remaining:
            continue
        stack, comp = [seed], []
        remaining.discard(seed)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nb in neighbors(cur):
                if nb in remaining:
                    remaining.discard(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
    return comps


def _greedy_independent(freqs: list[Frequency], target: int) -> list[Frequency]:
    """Maximal independent subset, lexicographic on sorted coordinates."""
    chosen: list[Frequency] = []
    for f in sorted(freqs, key=lambda f: f.coords):
        if len(chosen) == target:
            break
        mat = np.array([g.embedding for g in chosen + [f]])
        if np.linalg.matrix_rank(mat, tol=RANK_TOL) == len(chosen) + 1:
            chosen.append(f)
    return chosen


def classify(shell: EnergyShell, theta_k: SumsetK, params: ZoneParams) -> ZoneDecomposition:
    """Partition the shell cells into the non-resonant zone and leveled
    resonant components with attached subspaces.

    A cell sits at level j when j linearly independent frequencies violate
    the non-resonance inequality at threshold gamma_j; the maximal such j
    wins.  Components are face-adjacency flood fills; a level-j component
    touching level j+1 cells is merged upward.  In d = 1 there are no
    proper resonance subspaces, so every violation is a failure report
    rather than a zone.
    """
    d = shell.dimension
    base = shell.base
    idx = shell.shell_indices()
    freqs = theta_k.nonzero_frequencies()
    embs = np.array([f.embedding for f in freqs]) if freqs else np.zeros((0, d))
    grads = np.array([base.grad(shell.centers[i]) for i in idx])
    dots = np.abs(grads @ embs.T) if len(freqs) else np.zeros((len(idx), 0))

    max_level = min(d - 1, len(params.deltas))
    levels = np.full(shell.centers.shape[0], -1, dtype=int)
    failures: list[str] = []
    viol_sets: dict[int, np.ndarray] = {}

    for pos, i in enumerate(idx):
        level = NONRESONANT
        for j in range(max_level, 0, -1):
            viol = dots[pos] < params.gamma(j)
            if not np.any(viol):
                continue
            if np.linalg.matrix_rank(embs[viol], tol=RANK_TOL) >= j:
                level = j
                viol_sets[i] = viol
                break
        if level == NONRESONANT and len(freqs) and np.any(dots[pos] < params.gamma(1)):
            # small divisor with no available resonance level (d = 1 case)
            failures.append(
                f"cell at {shell.centers[i].tolist()} violates non-resonance "
                f"but no resonance level exists at dimension {d}")
        levels[i] = level

    # absorption: level-j components touching level > j are merged upward
    shape = shell.shape
    strides = np.cumprod((1,) + shape[:0:-1])[::-1]

    def face_neighbors(flat):
        rem, coords = flat, []
        for s in strides:
            coords.append(rem // s)
            rem %= s
        for axis, s in enumerate(strides):
            if coords[axis] > 0:
                yield flat - s
            if coords[axis] < shape[axis] - 1:
                yield flat + s

    for _ in range(max(max_level - 1, 0) + 1):
        changed = False
        for j in range(1, max_level):
            cells_j = set(np.flatnonzero(levels == j))
            for comp in _flood(cells_j, shape):
                touches = any(levels[nb] > j
                              for c in comp for nb in face_neighbors(c))
                if touches:
                    levels[list(comp)] = j + 1
                    changed = True
        if not changed:
            break

    component_ids = np.full_like(levels, -1)
    components: list[ZoneComponent] = []
    for j in range(1, max_level + 1):
        cells_j = set(np.flatnonzero(levels == j))
        for comp in _flood(cells_j, shape):
            cid = len(components)
            component_ids[list(comp)] = cid
            # frequencies violated on every cell of the component
            common = None
            for c in comp:
                v = viol_sets.get(c)
                vset = {freqs[t] for t in np.flatnonzero(v)} if v is not None else set()
                common = vset if common is None else (common & vset)
            pool = sorted(common or set(), key=lambda f: f.coords)
            if len(pool) < j:
                pool = sorted({freqs[t] for c in comp
                               for t in np.flatnonzero(viol_sets.get(c, []))},
                              key=lambda f: f.coords)
            witnesses = _greedy_independent(pool, j)
            if len(witnesses) < j:
                failures.append(f"component {cid}: could not assemble {j} "
                                f"independent witness frequencies")
                witnesses = _greedy_independent(pool, len(witnesses))
            sub = QuasiLatticeSubspace.from_frequencies(witnesses)
            pts = shell.centers[comp]
            diam = 0.0
            if len(pts) > 1:
                diff = pts[:, None, :] - pts[None, :, :]
                diam = float(np.sqrt((diff ** 2).sum(-1)).max())
            slack = math.sqrt(d) * shell.step
            if diam > params.c * params.gamma(j) + slack:
                failures.append(
                    f"component {cid} at level {j} has diameter {diam:.4g} "
                    f"> c*gamma_{j} = {params.c * params.gamma(j):.4g}")
            off_margin = float("inf")
            for c in comp:
                g = base.grad(shell.centers[c])
                for f in freqs:
                    if not sub.contains_embedding(f.embedding):
                        off_margin = min(off_margin, abs(float(np.dot(g, f.embedding))))
            components.append(ZoneComponent(
                level=j, component_id=cid, cell_indices=tuple(comp),
                subspace=sub, witnesses=tuple(witnesses), diameter=diam,
                off_subspace_margin=off_margin))
    return ZoneDecomposition(shell, theta_k, levels, component_ids,
                             components, failures)


def arc_measure(base: BaseSymbol, theta: Frequency, gamma: float, lam: float,
                n: int = 8192) -> float:
    """Arc length of {|<grad A0, theta>| < gamma} on the level curve
    A0 = lam (d = 2 only), by radial parametrization and quadrature."""
    if theta.embedding.shape[0] != 2:
        raise ConfigurationError("arc_measure is defined for d = 2")

    def radius(t: float) -> float:
        u = np.array([math.cos(t), math.sin(t)])
        lo, hi = 0.0, 1.0
        while base(hi * u) < lam:
            hi *= 2.0
            if hi > 1e6:
                raise ConfigurationError("level set unbounded in this direction")
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if base(mid * u) < lam:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    ts = np.linspace(0.0, 2.0 * math.pi, n + 1)
    pts = np.array([radius(t) * np.array([math.cos(t), math.sin(t)]) for t in ts])
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        if abs(float(np.dot(base.grad(mid), theta.embedding))) < gamma:
            total += float(np.linalg.norm(b - a))
    return total


def _smoothstep(t: float) -> float:
    """C-infinity transition: 0 for t <= 0, 1 for t >= 1."""
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    a = math.exp(-1.0 / t)
    b = math.exp(-1.0 / (1.0 - t))
    return a / (a + b)


@dataclass(frozen=True)
class CutoffSymbol:
    """Mollified indicator of a box, 1 inside, 0 beyond the margin."""

    region: tuple[tuple[float, float], ...]
    margin: float

    def __call__(self, xi) -> float:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        q = 1.0
        for x, (lo, hi) in zip(xi, self.region):
            if x < lo:
                q *= _smoothstep(1.0 - (lo - x) / self.margin)
            elif x > hi:
                q *= _smoothstep(1.0 - (x - hi) / self.margin)
            if q == 0.0:
                break
        return q


def build_cutoff(region, margin: float, h: float, varsigma: float) -> CutoffSymbol:
    """Smooth cutoff with transition width ``margin``; the width must respect
    the uncertainty scale h^(1-varsigma), which also bounds the derivative
    growth |D^a Q| <= C_a h^(-(1-varsigma)|a|)."""
    floor = h ** (1.0 - varsigma)
    if margin < floor * (1 - 1e-12):
        raise ConfigurationError(
            f"cutoff margin {margin:.4g} below the uncertainty scale {floor:.4g}")
    region = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(region))
    return CutoffSymbol(region, float(margin))
