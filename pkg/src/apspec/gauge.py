"""Iterative gauge (normal-form) transformation.

Conjugating A = A0(hD) + W(x,hD) by exp(i P/h) with the generator

    P_theta(xi) = i h (A0(xi + h theta/2) - A0(xi - h theta/2))^{-1} w_theta(xi)

cancels the oscillating part of W to first order; the Ad-series of the
conjugation is evaluated termwise with the exact Weyl product, so each
step replaces the off-subspace perturbation by a quadratically smaller
one.  The perturbation magnitude eps is folded into the coefficients of W
(and hence of P); the textbook recursion eps' = eps^2 / gamma^2 is kept as
bookkeeping while measured sup-norm proxies drive termination.

A target region is a finite set of xi sample points (zone cells); the
divisor guard requires the denominator to stay above gamma/2 on all of
them, and all sup-norm proxies are coefficient maxima over the same
points times the frequency count (a Schur-type upper bound for
trigonometric-polynomial symbols).  No pole regularization is applied:
the guard precondition excludes poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, SmallDivisorError
from .freqgeom import SumsetK, in_rational_span
from .symbols import APSymbol, BaseSymbol, CoefficientFn, Frequency, weyl_compose
from .zones import ZoneComponent, _smoothstep

__all__ = ["GaugeStep", "GaugeChain", "build_P", "conjugate_expand", "eliminate",
           "sup_on_points"]

AD_ORDER_CAP = 16
DEFAULT_K_MAX = 6
NORM_POINT_CAP = 32


def _as_points(region) -> np.ndarray:
    pts = np.asarray(region, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or len(pts) == 0:
        raise ConvergenceError("gauge target region needs at least one xi point")
    return pts


def _norm_points(pts: np.ndarray, cap: int = NORM_POINT_CAP) -> np.ndarray:
    if len(pts) <= cap:
        return pts
    stride = int(math.ceil(len(pts) / cap))
    return pts[::stride]


def sup_on_points(sym: APSymbol, pts: np.ndarray) -> float:
    """sum_theta max_points |b_theta|: the norm proxy used by the chain."""
    total = 0.0
    for coeff in sym.terms.values():
        total += max(abs(coeff(p)) for p in pts)
    return total


@dataclass
class GaugeStep:
    generator: APSymbol
    eliminated: frozenset[Frequency]
    gamma: float
    eps_before: float
    eps_after: float
    residual_norm: float          # measured off-subspace sup proxy after the step
    remainder_proxy: float        # Ad-series tail + dropped-term bookkeeping
    ad_order: int


@dataclass
class GaugeChain:
    base: BaseSymbol
    steps: list[GaugeStep]
    effective: APSymbol           # B''-part: support inside V (and Theta'_K)
    subspace_coords: tuple[tuple[int, ...], ...]   # () for the non-resonant target
    remainder_bound: float
    target: float
    converged: bool

    def generator_total(self) -> APSymbol | None:
        """Sum of all step generators (first-order composition of the chain)."""
        if not self.steps:
            return None
        total = self.steps[0].generator
        for s in self.steps[1:]:
            total = total + s.generator
        return total

    def effective_zero_fn(self):
        """Real-valued effective symbol A0 + b_0 as a plain callable of xi."""
        zero = next((f for f in self.effective.terms if f.is_zero), None)
        b0 = self.effective.terms.get(zero) if zero is not None else None
        base = self.base

        def a_eff(xi):
            v = base(xi)
            if b0 is not None:
                v += b0(np.asarray(xi, dtype=float)).real
            return v

        return a_eff

    def summary_rows(self) -> list[dict]:
        return [{
            "step": i,
            "gamma": s.gamma,
            "eps_k": s.eps_before,
            "eliminated": len(s.eliminated),
            "residual_norm": s.residual_norm,
            "remainder_proxy": s.remainder_proxy,
            "ad_order": s.ad_order,
        } for i, s in enumerate(self.steps)]


def _subspace_membership(v_coords: tuple[tuple[int, ...], ...]):
    """Exact integer test theta in span(V) + frequency-0, cached per coords."""
    basis = tuple(tuple(int(x) for x in c) for c in v_coords)

    @lru_cache(maxsize=None)
    def member(coords: tuple[int, ...]) -> bool:
        if not any(coords):
            return True
        if not basis:
            return False
        return in_rational_span(coords, basis)

    return lambda f: member(f.coords)


def _energy_window(base: BaseSymbol, pts: np.ndarray, h: float
                   ) -> tuple[float, float, float]:
    """(lo, hi, margin): the A0 range of the target points plus a margin.

    The margin must be generous: the Ad-series samples the generator at
    half-shifted momenta far off the target shell, and cutting it off too
    close to the shell leaves an elimination error that does not shrink
    with more steps (it scales with the window width, not with eps).  Ten
    window widths keeps that truncation below 1e-10 in the tested regimes
    while still vanishing long before the divisor poles.
    """
    vals = [base(p) for p in pts]
    lo, hi = min(vals), max(vals)
    return lo, hi, 10.0 * max(hi - lo, h)


def _p_coefficient(bcoeff: CoefficientFn, base: BaseSymbol,
                   theta_emb: np.ndarray, gamma: float, h: float,
                   window: tuple[float, float, float]) -> CoefficientFn:
    """i h q(xi) b(xi) / (A0(xi + h theta/2) - A0(xi - h theta/2)).

    The smooth factor q localizes the generator: an energy-window cutoff
    (1 on the target's A0 range) times a divisor ramp that vanishes where
    |<grad A0, theta>| <= gamma/2, so Weyl half-shifts never sample the
    quotient near its poles.  q = 1 at every admitted target point, where
    the cancellation ih^-1 [P, A0] = q b is exact.
    """
    lo, hi, marg = window
    half = 0.5 * h * theta_emb

    def fn(xi):
        a0 = float(base.value(xi))
        s = (_smoothstep((a0 - (lo - marg)) / marg)
             * _smoothstep(((hi + marg) - a0) / marg))
        if s == 0.0:
            return 0j
        div = abs(float(np.dot(base.grad(xi), theta_emb)))
        q = s * _smoothstep(2.0 * div / gamma - 1.0)
        if q == 0.0:
            return 0j
        denom = complex(base.value(xi + half) - base.value(xi - half))
        return q * (1j * h) * complex(bcoeff(xi)) / denom

    return CoefficientFn(fn)


def build_P(b_cur: APSymbol, base: BaseSymbol, v_coords: tuple[tuple[int, ...], ...],
            gamma: float, h: float, region,
            window: tuple[float, float, float] | None = None) -> APSymbol:
    """Localized generator cancelling the off-subspace part of ``b_cur``.

    v_coords are the integer coordinates spanning the retained subspace
    (empty tuple for the non-resonant target, where only frequency 0 is
    kept).  Raises SmallDivisorError when the denominator
    h^{-1}(A0(xi + h theta/2) - A0(xi - h theta/2)) dips below gamma/2 at
    any region point; elsewhere the built-in cutoff turns the generator
    off smoothly instead of letting the quotient blow up.
    """
    in_v = _subspace_membership(v_coords)
    pts = _as_points(region)
    if window is None:
        window = _energy_window(base, pts, h)
    terms: dict[Frequency, CoefficientFn] = {}
    for theta, coeff in b_cur.terms.items():
        if in_v(theta):
            continue
        half = 0.5 * h * theta.embedding

        def denom(xi, half=half, a=base.value):
            return complex(a(xi + half) - a(xi - half))

        worst_pt = min(pts, key=lambda p: abs(denom(p)))
        worst = abs(denom(worst_pt)) / h
        if worst < gamma / 2.0:
            raise SmallDivisorError(
                f"divisor {worst:.4g} below gamma/2 = {gamma / 2:.4g} for "
                f"frequency {theta.coords}", frequency=theta, xi=worst_pt)
        terms[theta] = _p_coefficient(coeff, base, theta.embedding, gamma, h,
                                      window)
    return APSymbol(b_cur.module, terms, hermitian=b_cur.hermitian)


def conjugate_expand(full: APSymbol, p: APSymbol, h: float, order: int,
                     region, tol: float = 0.0,
                     keep=None) -> tuple[APSymbol, float]:
    """Termwise Ad-series of exp(-iP/h) full exp(iP/h) up to ``order``.

    Returns the truncated symbol and a remainder proxy: the sup proxy of
    the first omitted raw term scaled by the integral-form constant
    1/(order-1)!, plus everything pruned along the way.  Between levels,
    frequencies rejected by ``keep`` and coefficients whose scaled sup
    proxy falls below ``tol`` are dropped (and charged to the proxy) so the
    closure trees stay narrow.  The series is cut early once a whole term
    drops below ``tol``; a term growing past 100x its predecessor reports
    divergence through an infinite proxy.
    """
    if order < 1:
        raise ConvergenceError("Ad-series order must be >= 1")
    if p.is_zero():
        return full, 0.0
    pts = _norm_points(_as_points(region))
    acc = full
    ad = full
    prev_norm = None
    tail = 0.0
    pruned = 0.0
    for n in range(1, order + 1):
        ad = weyl_compose(p, ad, h) - weyl_compose(ad, p, h)   # Ad_P^n(full)
        scale = (-1j / h) ** n / math.factorial(n)
        kept: dict[Frequency, CoefficientFn] = {}
        term_norm = 0.0
        for f, c in ad.terms.items():
            m = max(abs(c(pt)) for pt in pts) * abs(scale)
            if (keep is not None and not keep(f)) or m < tol:
                pruned += m
                continue
            term_norm += m
            kept[f] = c
        ad = APSymbol(ad.module, kept, hermitian=ad.hermitian)
        # raw n-th term over (n-1)! is the integral-form remainder size
        tail = term_norm * n
        if prev_norm is not None and term_norm > 100.0 * max(prev_norm, 1e-300):
            return acc, float("inf")
        if n < order:
            acc = acc + ad.scale(scale)
        prev_norm = term_norm
        if term_norm <= tol:
            break
    return acc, tail + pruned


def _smoothstep_vec(t: np.ndarray) -> np.ndarray:
    """Vectorized C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    lo = np.clip(t, 1e-12, 1.0)
    hi = np.clip(1.0 - t, 1e-12, 1.0)
    a = np.exp(-1.0 / lo)
    b = np.exp(-1.0 / hi)
    out = a / (a + b)
    out[t <= 0.0] = 0.0
    out[t >= 1.0] = 1.0
    return out


class GridCoeff:
    """A coefficient tabulated on a shared tensor grid (d = 1 or 2).

    The exact Weyl product only needs coefficients at half-shifted
    arguments; representing them as value arrays with vectorized spline
    shifts keeps the Ad-series cost linear in grid size per level, where
    closure trees accumulate one cache entry per (node, shift-path) pair
    and exhaust memory after two gauge steps.  Queries outside the grid
    clamp to the edge (the generator's built-in cutoffs make every
    conjugation-produced coefficient constant or zero there).
    """

    __slots__ = ("axes", "vals", "_splines", "_shift_cache")

    def __init__(self, axes: tuple[np.ndarray, ...], vals: np.ndarray):
        self.axes = axes
        self.vals = np.asarray(vals, dtype=complex)
        self._splines = None
        self._shift_cache: dict[tuple[float, ...], np.ndarray] = {}

    @staticmethod
    def sample(fn, axes: tuple[np.ndarray, ...]) -> "GridCoeff":
        if len(axes) == 1:
            vals = np.array([fn(np.array([x])) for x in axes[0]],
                            dtype=complex)
        else:
            xs, ys = axes
            vals = np.array([[fn(np.array([x, y])) for y in ys] for x in xs],
                            dtype=complex)
        return GridCoeff(axes, vals)

    def _fit(self):
        if self._splines is None:
            from scipy.interpolate import CubicSpline, RectBivariateSpline
            if len(self.axes) == 1:
                self._splines = (CubicSpline(self.axes[0], self.vals.real),
                                 CubicSpline(self.axes[0], self.vals.imag))
            else:
                self._splines = (
                    RectBivariateSpline(self.axes[0], self.axes[1],
                                        self.vals.real),
                    RectBivariateSpline(self.axes[0], self.axes[1],
                                        self.vals.imag))
        return self._splines

    def shifted_vals(self, shift) -> np.ndarray:
        """Values of the coefficient at (grid + shift), clamped to the grid."""
        key = tuple(float(s) for s in np.atleast_1d(shift))
        if not any(key):
            return self.vals
        hit = self._shift_cache.get(key)
        if hit is not None:
            return hit
        sre, sim = self._fit()
        if len(self.axes) == 1:
            ax = self.axes[0]
            x = np.clip(ax + key[0], ax[0], ax[-1])
            out = sre(x) + 1j * sim(x)
        else:
            xs, ys = self.axes
            x = np.clip(xs + key[0], xs[0], xs[-1])
            y = np.clip(ys + key[1], ys[0], ys[-1])
            out = sre(x, y) + 1j * sim(x, y)
        cap = 32 if self.vals.size <= 100_000 else 4
        if len(self._shift_cache) < cap:
            self._shift_cache[key] = out
        return out

    def at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sre, sim = self._fit()
        if len(self.axes) == 1:
            ax = self.axes[0]
            x = np.clip(pts[:, 0], ax[0], ax[-1])
            return sre(x) + 1j * sim(x)
        xs, ys = self.axes
        x = np.clip(pts[:, 0], xs[0], xs[-1])
        y = np.clip(pts[:, 1], ys[0], ys[-1])
        return (sre(x, y, grid=False) + 1j * sim(x, y, grid=False))

    def max_abs(self, pts: np.ndarray) -> float:
        return float(np.max(np.abs(self.at(pts))))

    def interp_error(self) -> float:
        """Richardson estimate of the tabulation error (coarse-grid refit)."""
        from scipy.interpolate import CubicSpline, RectBivariateSpline
        if len(self.axes) == 1:
            ax = self.axes[0]
            if len(ax) < 9:
                return 0.0
            sub_r = CubicSpline(ax[::2], self.vals.real[::2])
            sub_i = CubicSpline(ax[::2], self.vals.imag[::2])
            diff = (sub_r(ax[1::2]) + 1j * sub_i(ax[1::2])) - self.vals[1::2]
            return float(np.max(np.abs(diff))) / 15.0
        xs, ys = self.axes
        if len(xs) < 9 or len(ys) < 9:
            return 0.0
        sub_r = RectBivariateSpline(xs[::2], ys[::2], self.vals.real[::2, ::2])
        sub_i = RectBivariateSpline(xs[::2], ys[::2], self.vals.imag[::2, ::2])
        diff = (sub_r(xs[1::2], ys[1::2]) + 1j * sub_i(xs[1::2], ys[1::2])
                - self.vals[1::2, 1::2])
        return float(np.max(np.abs(diff))) / 15.0

    def to_coefficient(self) -> CoefficientFn:
        sre, sim = self._fit()
        if len(self.axes) == 1:
            ax = self.axes[0]
            lo, hi = float(ax[0]), float(ax[-1])

            def fn(xi, sre=sre, sim=sim, lo=lo, hi=hi):
                x = float(np.asarray(xi).reshape(-1)[0])
                x = lo if x < lo else (hi if x > hi else x)
                return complex(float(sre(x)), float(sim(x)))
        else:
            xs, ys = self.axes
            lim = (float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]))

            def fn(xi, sre=sre, sim=sim, lim=lim):
                v = np.asarray(xi, dtype=float).reshape(-1)
                x = min(max(v[0], lim[0]), lim[1])
                y = min(max(v[1], lim[2]), lim[3])
                return complex(float(sre(x, y)[0, 0]), float(sim(x, y)[0, 0]))
        return CoefficientFn(fn)


def _grid_compose(s1: dict[Frequency, GridCoeff],
                  s2: dict[Frequency, GridCoeff], h: float, module,
                  out: dict[Frequency, np.ndarray] | None = None,
                  sign: float = 1.0) -> dict[Frequency, np.ndarray]:
    """Exact Weyl product on the grid: value arrays keyed by frequency."""
    if out is None:
        out = {}
    for f1, t1 in s1.items():
        for f2, t2 in s2.items():
            v = (t1.shifted_vals(0.5 * h * f2.embedding)
                 * t2.shifted_vals(-0.5 * h * f1.embedding))
            fsum = module.frequency(tuple(a + b for a, b in
                                          zip(f1.coords, f2.coords)))
            if fsum in out:
                out[fsum] = out[fsum] + sign * v
            else:
                out[fsum] = sign * v
    return out


def grid_conjugate(full: dict[Frequency, GridCoeff],
                   p: dict[Frequency, GridCoeff], h: float, order: int,
                   module, axes: tuple[np.ndarray, ...], norm_pts: np.ndarray,
                   tol: float = 0.0, keep=None
                   ) -> tuple[dict[Frequency, GridCoeff], float]:
    """Grid-tabulated Ad-series of exp(-iP/h) full exp(iP/h).

    Same contract as :func:`conjugate_expand` (truncated result plus a
    remainder proxy that absorbs the first omitted term and everything
    pruned by ``keep``/``tol``), but with coefficients as value arrays on a
    shared grid so cost stays linear in grid size per level.
    """
    if order < 1:
        raise ConvergenceError("Ad-series order must be >= 1")
    if not p:
        return dict(full), 0.0
    acc: dict[Frequency, np.ndarray] = {f: g.vals.copy()
                                        for f, g in full.items()}
    ad = dict(full)
    prev_norm = None
    tail = 0.0
    pruned = 0.0
    for n in range(1, order + 1):
        raw = _grid_compose(p, ad, h, module)
        raw = _grid_compose(ad, p, h, module, out=raw, sign=-1.0)
        scale = (-1j / h) ** n / math.factorial(n)
        kept: dict[Frequency, GridCoeff] = {}
        term_norm = 0.0
        for f, v in raw.items():
            gc = GridCoeff(axes, v)
            m = gc.max_abs(norm_pts) * abs(scale)
            if (keep is not None and not keep(f)) or m < tol:
                pruned += m
                continue
            term_norm += m
            kept[f] = gc
        ad = kept
        tail = term_norm * n
        if prev_norm is not None and term_norm > 100.0 * max(prev_norm, 1e-300):
            return {f: GridCoeff(axes, v) for f, v in acc.items()}, float("inf")
        if n < order:
            for f, gc in ad.items():
                if f in acc:
                    acc[f] = acc[f] + scale * gc.vals
                else:
                    acc[f] = scale * gc.vals
        prev_norm = term_norm
        if term_norm <= tol:
            break
    return {f: GridCoeff(axes, v) for f, v in acc.items()}, tail + pruned


def _split_support(sym: APSymbol, in_v, theta_k: SumsetK | None):
    """Partition terms into (kept in V and Theta'_K, off-V, out-of-sumset)."""
    kept, off, out = {}, {}, {}
    for f, c in sym.terms.items():
        if theta_k is not None and f not in theta_k:
            out[f] = c
        elif in_v(f):
            kept[f] = c
        else:
            off[f] = c
    mod = sym.module
    return (APSymbol(mod, kept, hermitian=sym.hermitian),
            APSymbol(mod, off, hermitian=False),
            APSymbol(mod, out, hermitian=False))


def eliminate(base: BaseSymbol, pert: APSymbol, eps: float, h: float,
              gamma: float, region, M: int = 1,
              theta_k: SumsetK | None = None,
              component: ZoneComponent | None = None,
              delta1: float | None = None, k_max: int = DEFAULT_K_MAX,
              min_steps: int = 0, drop_floor: float | None = None,
              require_target: bool = True,
              ad_order: int | None = None) -> GaugeChain:
    """Iterate build_P / conjugate_expand until the off-subspace residual
    falls below h^(3M) (or the step budget runs out) and return the chain.

    ``component`` selects the resonant target (its witness subspace is
    retained); with no component the non-resonant target keeps only
    frequency 0.  Frequencies outside the K-fold sumset are dropped each
    step with their sup proxy charged to the remainder bound, so the final
    support is exactly inside V intersected with Theta'_K.  ``min_steps``
    forces that many steps even when the target is already met (used by
    convergence studies to pin the step count).
    """
    target = h ** (3 * M)
    v_coords = (tuple(tuple(f.coords) for f in component.witnesses)
                if component is not None else ())
    in_v = _subspace_membership(v_coords)
    if delta1 is None:
        delta1 = 1.0 / (6.0 * (theta_k.K if theta_k is not None else 2))
    if ad_order is None:
        ad_order = min(AD_ORDER_CAP, max(2, math.ceil(3 * M / delta1)))
    if drop_floor is None:
        drop_floor = target * 1e-6

    module = pert.module
    pts = _norm_points(_as_points(region))
    window = _energy_window(base, pts, h)

    # shared tabulation grid: target hull widened by the worst-case shift
    # excursion of the Ad-series (half-shifts of h theta / 2, ad_order deep),
    # spaced finely enough to resolve the generator's divisor ramps
    d = pts.shape[1]
    support = (theta_k.elements if theta_k is not None
               else {f.coords for f in pert.terms})
    max_emb = max((float(np.max(np.abs(module.frequency(c).embedding)))
                   for c in support if any(c)), default=1.0)
    reach = 0.5 * ad_order * h * max_emb + 0.5
    ramp = gamma / (8.0 * max(max_emb, 1.0))
    axes = []
    for i in range(d):
        lo = float(pts[:, i].min()) - reach
        hi = float(pts[:, i].max()) + reach
        spacing = min(h / 16.0, ramp / 4.0) if d == 1 else min(h / 4.0, ramp)
        spacing = max(spacing, (hi - lo) / (20_000 if d == 1 else 500))
        axes.append(np.arange(lo, hi + spacing, spacing))
    axes = tuple(axes)

    # base tabulation on the grid: A0 values and grad A0 components
    if d == 1:
        grid_pts = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        grid_pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    shape = tuple(len(a) for a in axes)
    a0_vals = np.array([base.value(p) for p in grid_pts]).reshape(shape)
    grad_vals = np.array([base.grad(p) for p in grid_pts]
                         ).reshape(shape + (d,))
    a0_tab = GridCoeff(axes, a0_vals)
    lo_w, hi_w, marg = window
    win_q = (_smoothstep_vec((a0_vals - (lo_w - marg)) / marg)
             * _smoothstep_vec(((hi_w + marg) - a0_vals) / marg))
    # the tabulated generator must vanish before the grid edge so that the
    # clamped spline extension stays consistent with the true coefficients
    for i, ax in enumerate(axes):
        edge = np.minimum(1.0, np.minimum(ax - ax[0], ax[-1] - ax)
                          / (0.45 * reach))
        win_q = win_q * _smoothstep_vec(edge).reshape(
            [-1 if j == i else 1 for j in range(d)])

    def tabulate_p(off: dict[Frequency, GridCoeff]) -> dict[Frequency, GridCoeff]:
        out = {}
        for f, gc in off.items():
            emb = f.embedding
            div = np.abs(np.tensordot(grad_vals, emb, axes=([-1], [0])))
            q = win_q * _smoothstep_vec(2.0 * div / gamma - 1.0)
            denom = (a0_tab.shifted_vals(0.5 * h * emb)
                     - a0_tab.shifted_vals(-0.5 * h * emb)).real
            safe = np.where(q == 0.0, 1.0, denom)
            out[f] = GridCoeff(axes, np.where(q == 0.0, 0.0,
                                              q * (1j * h) * gc.vals / safe))
        return out

    def split_dict(terms: dict[Frequency, GridCoeff]):
        kept, off, out = {}, {}, {}
        for f, gc in terms.items():
            if theta_k is not None and f not in theta_k:
                out[f] = gc
            elif in_v(f):
                kept[f] = gc
            else:
                off[f] = gc
        return kept, off, out

    def grid_sup(terms: dict[Frequency, GridCoeff]) -> float:
        return sum(gc.max_abs(pts) for gc in terms.values())

    w: dict[Frequency, GridCoeff] = {
        f: GridCoeff.sample(lambda xi, c=c: eps * complex(c(xi)), axes)
        for f, c in pert.terms.items()}
    dropped = 0.0
    steps: list[GaugeStep] = []
    eps_k = eps
    zero = module.zero
    in_sumset = (lambda f: f in theta_k) if theta_k is not None else None

    k_max = max(k_max, min_steps)
    for step_idx in range(k_max):
        kept, off, out = split_dict(w)
        dropped += grid_sup(out)
        off_norm = grid_sup(off)
        if not off or (off_norm <= target and step_idx >= min_steps):
            w = kept
            dropped += off_norm
            break
        w = {**kept, **off}

        # closure-form generator (records the chain, runs the divisor guard)
        off_sym = APSymbol(module, {f: gc.to_coefficient()
                                    for f, gc in off.items()}, hermitian=False)
        p_sym = build_P(off_sym, base, v_coords, gamma, h, pts, window=window)
        p_grid = tabulate_p(off)

        full = dict(w)
        full[zero] = GridCoeff(axes, (full[zero].vals + a0_vals)
                               if zero in full else a0_vals)
        new_full, tail = grid_conjugate(full, p_grid, h, ad_order, module,
                                        axes, pts, tol=drop_floor,
                                        keep=in_sumset)
        if math.isinf(tail):
            raise ConvergenceError(
                f"Ad-series diverged at step {step_idx}; eps sequence "
                f"{[s.eps_before for s in steps] + [eps_k]}")

        # peel A0 back off the frequency-0 coefficient and drop tiny terms
        if zero in new_full:
            new_full[zero] = GridCoeff(axes, new_full[zero].vals - a0_vals)
        tiny = 0.0
        interp_err = 0.0
        pruned: dict[Frequency, GridCoeff] = {}
        for f, gc in new_full.items():
            n = gc.max_abs(pts)
            if n < drop_floor:
                tiny += n
            else:
                pruned[f] = gc
                interp_err += gc.interp_error()

        kept2, off2, out2 = split_dict(pruned)
        out_norm = grid_sup(out2)
        residual = grid_sup(off2)
        eps_next = eps_k ** 2 / gamma ** 2
        steps.append(GaugeStep(
            generator=p_sym, eliminated=frozenset(off),
            gamma=gamma, eps_before=eps_k, eps_after=eps_next,
            residual_norm=residual,
            remainder_proxy=tail + tiny + out_norm + interp_err,
            ad_order=ad_order))
        dropped += tiny + out_norm + interp_err
        eps_k = eps_next
        w = {**kept2, **off2}
    else:
        kept, off, _ = split_dict(w)
        off_norm = grid_sup(off)
        if off_norm > target and require_target:
            raise ConvergenceError(
                f"gauge chain failed to reach h^(3M) = {target:.3g} within "
                f"{k_max} steps; eps sequence "
                f"{[s.eps_before for s in steps] + [eps_k]}, residual {off_norm:.3g}")
        w = kept
        dropped += off_norm

    kept, off, out = split_dict(w)
    dropped += grid_sup(off) + grid_sup(out)
    remainder = dropped + sum(s.remainder_proxy for s in steps)
    effective = APSymbol(module, {f: gc.to_coefficient()
                                  for f, gc in kept.items()},
                         hermitian=pert.hermitian)
    return GaugeChain(base=base, steps=steps, effective=effective,
                      subspace_coords=v_coords, remainder_bound=remainder,
                      target=target, converged=True)
