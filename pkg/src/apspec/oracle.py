"""Bloch-Floquet plane-wave ground truth for periodic configurations.

For a lattice frequency set the operator A0(hD) + eps B(x,hD) decomposes
into Hermitian fiber matrices over the quasimomentum cell; eigenvalue
counting, eigenfunction sums and fiber propagators then provide the
reference values the pipeline is verified against.  The matrix elements
follow the Weyl convention: the coefficient of frequency gamma - gamma'
is evaluated at the midpoint momentum h (k + (gamma + gamma')/2).

The oracle is deliberately periodic-only: lattices satisfy all four
admissibility conditions, so the verification domain matches what the
pipeline accepts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ApspecError, ConfigurationError, UnsupportedConfigurationError
from .symbols import APSymbol, BaseSymbol, sup_norm_estimate

__all__ = [
    "FiberProblem",
    "fiber_basis",
    "symbol_fiber_matrix",
    "fiber_matrix",
    "ids_oracle",
    "spectral_function_oracle",
    "propagation_norm",
]

HERMITICITY_TOL = 1e-12


@dataclass
class FiberProblem:
    k: np.ndarray
    basis: list[tuple[int, ...]]
    embeddings: np.ndarray           # (n, d)
    matrix: np.ndarray               # Hermitian (n, n)

    @property
    def size(self) -> int:
        return len(self.basis)


def _require_lattice(module) -> None:
    if not module.is_lattice_like():
        raise UnsupportedConfigurationError(
            "the oracle handles periodic (full-rank lattice) frequency "
            "modules only")


def fiber_basis(module, radius: float) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Lattice points with embedded norm <= radius, sorted by coordinates."""
    _require_lattice(module)
    g = module.generators
    d = module.dimension
    # conservative integer bounding box from the generator inverse
    ginv = np.linalg.inv(g)
    bound = int(math.ceil(radius * np.abs(ginv).sum(axis=1).max())) + 1
    pts = []
    for combo in itertools.product(range(-bound, bound + 1), repeat=d):
        emb = g @ np.array(combo, dtype=float)
        if np.linalg.norm(emb) <= radius + 1e-12:
            pts.append(tuple(combo))
    pts.sort()
    embs = np.array([g @ np.array(p, dtype=float) for p in pts])
    return pts, embs


def symbol_fiber_matrix(sym: APSymbol, k, basis: list[tuple[int, ...]],
                        embeddings: np.ndarray, h: float) -> np.ndarray:
    """Plane-wave matrix of an exponential-type Weyl symbol on one fiber."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    n = len(basis)
    m = np.zeros((n, n), dtype=complex)
    index = {b: i for i, b in enumerate(basis)}
    for theta, coeff in sym.terms.items():
        tc = theta.coords
        for j, b in enumerate(basis):
            target = tuple(t + x for t, x in zip(tc, b))
            i = index.get(target)
            if i is None:
                continue
            mid = h * (k + 0.5 * (embeddings[i] + embeddings[j]))
            m[i, j] += coeff(mid)
    return m


def fiber_matrix(base: BaseSymbol, pert: APSymbol, k, radius: float,
                 h: float, eps: float) -> FiberProblem:
    """Hermitian fiber of A0(hD) + eps B(x,hD) at quasimomentum k."""
    module = pert.module
    basis, embs = fiber_basis(module, radius)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    diag = np.array([base(h * (k + e)) for e in embs])
    m = np.diag(diag).astype(complex)
    if eps != 0.0 and not pert.is_zero():
        m += eps * symbol_fiber_matrix(pert, k, basis, embs, h)
    dev = float(np.abs(m - m.conj().T).max())
    if dev > HERMITICITY_TOL * max(1.0, float(np.abs(m).max())):
        raise ApspecError(f"fiber matrix not Hermitian: deviation {dev:.3g}")
    m = 0.5 * (m + m.conj().T)
    return FiberProblem(k, basis, embs, m)


def _check_truncation_margin(base: BaseSymbol, pert: APSymbol, tau: float,
                             h: float, eps: float, radius: float,
                             embs: np.ndarray, margin: float = 0.5) -> None:
    border = [e for e in embs if np.linalg.norm(e) >= radius - 1.0]
    if not border:
        raise ConfigurationError("fiber basis radius too small")
    sup_b = 0.0
    if eps != 0.0 and not pert.is_zero():
        box = [(-1.5 * h * radius, 1.5 * h * radius)] * pert.module.dimension
        sup_b = sup_norm_estimate(pert, box, n=9)
    floor = min(base(h * e) for e in border)
    if floor <= tau + abs(eps) * sup_b + margin:
        raise ConfigurationError(
            f"plane-wave truncation radius {radius} too small: boundary "
            f"symbol value {floor:.3g} not above tau + eps*sup|B| + margin")


def _k_cell_grid(module, nk: int) -> tuple[np.ndarray, float]:
    """Midpoint grid on the fundamental quasimomentum cell, with its volume."""
    g = module.generators
    d = module.dimension
    ticks = (np.arange(nk) + 0.5) / nk
    fracs = np.stack([a.ravel() for a in np.meshgrid(*([ticks] * d), indexing="ij")],
                     axis=-1)
    return fracs @ g.T, abs(float(np.linalg.det(g)))


def ids_oracle(base: BaseSymbol, pert: APSymbol, tau: float, h: float,
               eps: float, nk: int = 200, radius: float = 32.0,
               exact_bands: bool | None = None,
               check_truncation: bool = True) -> float:
    """Eigenvalue-counting IDS: (2pi)^-d average over the quasimomentum cell
    of the number of fiber eigenvalues <= tau.

    In d = 1 (``exact_bands``, the default there) band crossings of tau are
    located by bisection so the k-quadrature is exact up to the crossing
    tolerance rather than midpoint-rule limited.
    """
    module = pert.module
    _require_lattice(module)
    d = module.dimension
    if exact_bands is None:
        exact_bands = d == 1
    basis, embs = fiber_basis(module, radius)
    if check_truncation:
        _check_truncation_margin(base, pert, tau, h, eps, radius, embs)

    if exact_bands:
        if d != 1:
            raise UnsupportedConfigurationError("exact band tracing is d = 1 only")
        g = abs(float(module.generators[0, 0]))

        def bands(k: float) -> np.ndarray:
            fp = fiber_matrix(base, pert, [k], radius, h, eps)
            return np.linalg.eigvalsh(fp.matrix)

        ks = np.linspace(0.0, g, nk + 1)
        table = np.array([bands(k) for k in ks])
        total = 0.0
        for j in range(table.shape[1]):
            col = table[:, j] - tau
            if np.all(col <= 0):
                total += g
                continue
            if np.all(col > 0):
                continue
            meas = 0.0
            for a in range(nk):
                fa, fb = col[a], col[a + 1]
                ka, kb = ks[a], ks[a + 1]
                if fa <= 0 and fb <= 0:
                    meas += kb - ka
                elif fa * fb < 0:
                    lo, hi = ka, kb
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        fm = bands(mid)[j] - tau
                        if (fm < 0) == (fa < 0):
                            lo = mid
                        else:
                            hi = mid
                    cross = 0.5 * (lo + hi)
                    meas += (cross - ka) if fa <= 0 else (kb - cross)
            total += meas
        return (2.0 * math.pi) ** (-d) * total

    ks, cell_vol = _k_cell_grid(module, nk)
    counts = []
    for k in ks:
        fp = fiber_matrix(base, pert, k, radius, h, eps)
        counts.append(int(np.sum(np.linalg.eigvalsh(fp.matrix) <= tau)))
    return (2.0 * math.pi) ** (-d) * cell_vol * float(np.mean(counts))


def spectral_function_oracle(x, tau: float, base: BaseSymbol, pert: APSymbol,
                             h: float, eps: float, nk: int = 200,
                             radius: float = 32.0) -> float:
    """Diagonal spectral-projector kernel e(x, x, tau) via eigenfunction sums."""
    module = pert.module
    _require_lattice(module)
    d = module.dimension
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ks, cell_vol = _k_cell_grid(module, nk)
    basis, embs = fiber_basis(module, radius)
    phases = np.exp(1j * embs @ x)
    acc = 0.0
    for k in ks:
        fp = fiber_matrix(base, pert, k, radius, h, eps)
        evals, evecs = np.linalg.eigh(fp.matrix)
        sel = evals <= tau
        if np.any(sel):
            amps = phases @ evecs[:, sel]
            acc += float(np.sum(np.abs(amps) ** 2))
    return (2.0 * math.pi) ** (-d) * cell_vol * acc / len(ks)


def propagation_norm(base: BaseSymbol, pert: APSymbol, q1, q2, T: float,
                     h: float, eps: float, k_samples: int = 16,
                     radius: float = 32.0) -> float:
    """sup over sampled quasimomenta and t in {T/4, T/2, T} of the spectral
    norm of Q2 exp(i t A / h) Q1, with Q_j diagonal functions of momentum.

    The exponential is taken through the eigendecomposition of the
    Hermitian fiber, so unitarity is exact up to rounding; a deviation
    beyond 1e-10 raises.
    """
    module = pert.module
    _require_lattice(module)
    ks, _ = _k_cell_grid(module, k_samples)
    basis, embs = fiber_basis(module, radius)
    worst = 0.0
    for k in ks:
        fp = fiber_matrix(base, pert, k, radius, h, eps)
        evals, evecs = np.linalg.eigh(fp.matrix)
        mom = h * (np.atleast_1d(k)[None, :] + embs)
        d1 = np.array([q1(p) for p in mom])
        d2 = np.array([q2(p) for p in mom])
        for t in (T / 4.0, T / 2.0, T):
            u = (evecs * np.exp(1j * t * evals / h)) @ evecs.conj().T
            sv = np.linalg.svd(u, compute_uv=False)
            if np.abs(sv - 1.0).max() > 1e-10:
                raise ApspecError("fiber propagator lost unitarity")
            m = d2[:, None] * u * d1[None, :]
            worst = max(worst, float(np.linalg.norm(m, 2)))
    return worst
