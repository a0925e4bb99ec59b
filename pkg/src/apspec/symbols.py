"""Exponential-type Weyl symbols and their exact composition calculus.

A perturbation symbol is a finite sum  B(x, xi) = sum_theta b_theta(xi)
exp(i <theta, x>)  over a discrete frequency set.  For this class the Weyl
product is exact: no asymptotic Moyal expansion is involved, only
half-frequency argument shifts of the coefficient functions,

    (b e^{i<theta,x>}) # (c e^{i<phi,x>})
        = b(xi + h phi / 2) c(xi - h theta / 2) e^{i<theta+phi, x>}.

Coefficients are composable pure evaluators (closures), not grids, so the
identity above holds to rounding error.  Every object here is immutable
after construction; per-node memoization makes repeated evaluation of the
deeply nested closures produced by the gauge iteration affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Frequency",
    "CoefficientFn",
    "APSymbol",
    "BaseSymbol",
    "weyl_compose",
    "commutator_i_over_h",
    "evaluate",
    "sup_norm_estimate",
    "verify_hermitian",
]


class Frequency:
    """A frequency as integer coordinates against a generator matrix.

    Equality and hashing are by the integer coordinates, never by the
    floating-point embedding.
    """

    __slots__ = ("coords", "embedding")

    def __init__(self, coords: tuple[int, ...], embedding: np.ndarray):
        object.__setattr__(self, "coords", tuple(int(c) for c in coords))
        emb = np.asarray(embedding, dtype=float).copy()
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)

    def __setattr__(self, name, value):
        raise AttributeError("Frequency is immutable")

    def __eq__(self, other):
        return isinstance(other, Frequency) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __neg__(self) -> "Frequency":
        return Frequency(tuple(-c for c in self.coords), -self.embedding)

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coords)

    def norm(self) -> float:
        return float(np.linalg.norm(self.embedding))

    def __repr__(self):
        return f"Frequency{self.coords}"


class CoefficientFn:
    """Pure evaluator xi -> complex, closed under the closure algebra.

    Supports pointwise addition and multiplication, argument shift
    xi -> xi + v, complex conjugation and division by a scalar-valued
    evaluator.  Shifts accumulate additively on the node, so shifting by
    v and then by w is bit-identical to shifting by v + w.

    Evaluation is memoized per node, keyed by the raw bytes of xi.
    """

    __slots__ = ("_fn", "_shift", "_cache")

    def __init__(self, fn: Callable[[np.ndarray], complex], shift: np.ndarray | None = None):
        self._fn = fn
        self._shift = None if shift is None else np.asarray(shift, dtype=float)
        self._cache: dict[bytes, complex] = {}

    def __call__(self, xi) -> complex:
        xi = np.asarray(xi, dtype=float)
        key = xi.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        arg = xi if self._shift is None else xi + self._shift
        val = complex(self._fn(arg))
        if len(self._cache) < 200_000:
            self._cache[key] = val
        return val

    # -- closure algebra ---------------------------------------------------

    def shift(self, v) -> "CoefficientFn":
        v = np.asarray(v, dtype=float)
        total = v if self._shift is None else self._shift + v
        return CoefficientFn(self._fn, total)

    def __add__(self, other: "CoefficientFn") -> "CoefficientFn":
        return CoefficientFn(lambda xi, a=self, b=other: a(xi) + b(xi))

    def __mul__(self, other) -> "CoefficientFn":
        if isinstance(other, CoefficientFn):
            return CoefficientFn(lambda xi, a=self, b=other: a(xi) * b(xi))
        c = complex(other)
        return CoefficientFn(lambda xi, a=self, c=c: c * a(xi))

    __rmul__ = __mul__

    def __neg__(self) -> "CoefficientFn":
        return self * (-1.0)

    def conjugate(self) -> "CoefficientFn":
        return CoefficientFn(lambda xi, a=self: a(xi).conjugate())

    def divided_by(self, denom: "CoefficientFn") -> "CoefficientFn":
        return CoefficientFn(lambda xi, a=self, d=denom: a(xi) / d(xi))

    # -- primitives --------------------------------------------------------

    @staticmethod
    def constant(c) -> "CoefficientFn":
        c = complex(c)
        return CoefficientFn(lambda xi, c=c: c)

    @staticmethod
    def polynomial(monomials: Mapping[tuple[int, ...], complex]) -> "CoefficientFn":
        """Multivariate polynomial: {exponent tuple: coefficient}."""
        mono = {tuple(int(e) for e in k): complex(v) for k, v in monomials.items()}

        def ev(xi, mono=mono):
            out = 0j
            for exps, c in mono.items():
                term = c
                for x, e in zip(xi, exps):
                    if e:
                        term *= x ** e
                out += term
            return out

        return CoefficientFn(ev)

    @staticmethod
    def gaussian(a: float, amplitude=1.0) -> "CoefficientFn":
        a = float(a)
        amp = complex(amplitude)
        return CoefficientFn(lambda xi, a=a, amp=amp: amp * math.exp(-a * float(np.dot(xi, xi))))

    @staticmethod
    def reciprocal_power(s: float, amplitude=1.0) -> "CoefficientFn":
        """amplitude * (1 + |xi|^2)^(-s)."""
        s = float(s)
        amp = complex(amplitude)
        return CoefficientFn(lambda xi, s=s, amp=amp: amp * (1.0 + float(np.dot(xi, xi))) ** (-s))

    @staticmethod
    def from_callable(fn: Callable[[np.ndarray], complex]) -> "CoefficientFn":
        return CoefficientFn(fn)


@dataclass(frozen=True)
class BaseSymbol:
    """Unperturbed symbol A0(xi) with closed-form derivatives.

    Restricted to shapes whose gradient and Hessian are analytic, since
    the strong-convexity check needs exact second derivatives.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    m: float
    c0: float
    C0: float
    name: str = "base"

    def __call__(self, xi) -> float:
        return float(self.value(np.asarray(xi, dtype=float)))

    @staticmethod
    def isotropic_quadratic(d: int) -> "BaseSymbol":
        """A0(xi) = |xi|^2."""
        return BaseSymbol(
            value=lambda xi: float(np.dot(xi, xi)),
            grad=lambda xi: 2.0 * np.asarray(xi, dtype=float),
            hess=lambda xi: 2.0 * np.eye(len(np.atleast_1d(xi))),
            m=2.0,
            c0=1.0,
            C0=0.0,
            name="quadratic",
        )

    @staticmethod
    def diagonal_quadratic(a: Iterable[float]) -> "BaseSymbol":
        """A0(xi) = sum_i a_i xi_i^2 with a_i > 0."""
        a = np.asarray(list(a), dtype=float)
        if np.any(a <= 0):
            raise ConfigurationError("diagonal quadratic needs positive weights")
        return BaseSymbol(
            value=lambda xi, a=a: float(np.dot(a, np.asarray(xi) ** 2)),
            grad=lambda xi, a=a: 2.0 * a * np.asarray(xi, dtype=float),
            hess=lambda xi, a=a: np.diag(2.0 * a),
            m=2.0,
            c0=float(a.min()),
            C0=0.0,
            name="diag_quadratic",
        )

    @staticmethod
    def quadratic_plus_quartic(d: int, q: float) -> "BaseSymbol":
        """A0(xi) = |xi|^2 + q |xi|^4 with q >= 0."""
        q = float(q)
        if q < 0:
            raise ConfigurationError("quartic correction must be nonnegative")

        def hess(xi, q=q):
            xi = np.asarray(xi, dtype=float)
            n = len(xi)
            r2 = float(np.dot(xi, xi))
            return 2.0 * np.eye(n) + 4.0 * q * (r2 * np.eye(n) + 2.0 * np.outer(xi, xi))

        return BaseSymbol(
            value=lambda xi, q=q: float(np.dot(xi, xi)) + q * float(np.dot(xi, xi)) ** 2,
            grad=lambda xi, q=q: (2.0 + 4.0 * q * float(np.dot(xi, xi))) * np.asarray(xi, dtype=float),
            hess=hess,
            m=4.0 if q > 0 else 2.0,
            c0=q if q > 0 else 1.0,
            C0=1.0,
            name="quadratic_plus_quartic",
        )


@dataclass(frozen=True)
class APSymbol:
    """Finite map frequency -> coefficient, with an owning frequency module.

    The ``hermitian`` flag declares that the Weyl operator is self-adjoint:
    for every theta in the support, -theta is present and
    b_{-theta} = conj(b_theta).  The flag is verified by sampling
    (see :func:`verify_hermitian`), not enforced symbolically.
    """

    module: object
    terms: dict[Frequency, CoefficientFn] = field(default_factory=dict)
    hermitian: bool = False

    def support(self) -> set[Frequency]:
        return set(self.terms)

    def coefficient(self, freq: Frequency) -> CoefficientFn:
        return self.terms.get(freq, CoefficientFn.constant(0.0))

    def is_zero(self) -> bool:
        return not self.terms

    def restrict(self, keep: Callable[[Frequency], bool]) -> "APSymbol":
        kept = {f: c for f, c in self.terms.items() if keep(f)}
        return APSymbol(self.module, kept, hermitian=self.hermitian)

    def scale(self, c) -> "APSymbol":
        c = complex(c)
        herm = self.hermitian and c.imag == 0.0
        return APSymbol(self.module, {f: co * c for f, co in self.terms.items()}, hermitian=herm)

    def __add__(self, other: "APSymbol") -> "APSymbol":
        if other.module is not self.module:
            raise ConfigurationError("cannot add symbols over different frequency modules")
        out = dict(self.terms)
        for f, c in other.terms.items():
            out[f] = out[f] + c if f in out else c
        return APSymbol(self.module, out, hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "APSymbol") -> "APSymbol":
        return self + other.scale(-1.0)


def _as_apsymbol(s, module) -> APSymbol:
    """Lift a BaseSymbol to a frequency-0 APSymbol over ``module``."""
    if isinstance(s, APSymbol):
        return s
    if isinstance(s, BaseSymbol):
        zero = module.frequency((0,) * module.rank)
        return APSymbol(module, {zero: CoefficientFn(lambda xi, a=s.value: complex(a(xi)))},
                        hermitian=True)
    raise ConfigurationError(f"not a symbol: {type(s).__name__}")


def _shared_module(s1, s2):
    m1 = s1.module if isinstance(s1, APSymbol) else None
    m2 = s2.module if isinstance(s2, APSymbol) else None
    if m1 is not None and m2 is not None and m1 is not m2:
        raise ConfigurationError("symbols belong to different frequency modules")
    mod = m1 or m2
    if mod is None:
        raise ConfigurationError("at least one operand must be an APSymbol")
    return mod


def weyl_compose(s1, s2, h: float) -> APSymbol:
    """Exact Weyl symbol of the operator product s1(x,hD) s2(x,hD).

    Each pair of terms contributes on the sum frequency with half-shifted
    arguments; the frequency support of the result is the exact sumset of
    the input supports.  A BaseSymbol operand is treated as frequency 0.
    """
    if h <= 0:
        raise ConfigurationError("h must be positive")
    mod = _shared_module(s1, s2)
    a = _as_apsymbol(s1, mod)
    b = _as_apsymbol(s2, mod)
    out: dict[Frequency, CoefficientFn] = {}
    for theta, bt in a.terms.items():
        half_theta = 0.5 * h * theta.embedding
        for phi, cp in b.terms.items():
            coeff = bt.shift(0.5 * h * phi.embedding) * cp.shift(-half_theta)
            f = mod.frequency(tuple(t + p for t, p in zip(theta.coords, phi.coords)))
            out[f] = out[f] + coeff if f in out else coeff
    hermitian = a is b and a.hermitian
    return APSymbol(mod, out, hermitian=hermitian)


def commutator_i_over_h(p: APSymbol, s, h: float) -> APSymbol:
    """(i/h) (p # s - s # p), exact; Hermitian inputs give Hermitian output."""
    ps = weyl_compose(p, s, h)
    sp = weyl_compose(s, p, h)
    out = (ps - sp).scale(1j / h)
    s_herm = s.hermitian if isinstance(s, APSymbol) else True
    if p.hermitian and s_herm:
        out = APSymbol(out.module, out.terms, hermitian=True)
    return out


def evaluate(s: APSymbol, x, xi) -> complex:
    """Pointwise value sum_theta b_theta(xi) exp(i <theta, x>)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    total = 0j
    for theta, coeff in s.terms.items():
        total += coeff(xi) * np.exp(1j * float(np.dot(theta.embedding, x)))
    return total


def sup_norm_estimate(s: APSymbol, box: list[tuple[float, float]], n: int = 32) -> float:
    """sum_theta max_grid |b_theta| over a xi-box: an upper proxy for the
    operator-norm contribution of ``s`` on that region (Schur bound for
    trigonometric-polynomial symbols)."""
    if n < 1 or any(hi < lo for lo, hi in box):
        raise ConfigurationError("sup_norm_estimate needs a nonempty region and grid")
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    total = 0.0
    for coeff in s.terms.values():
        total += max(abs(coeff(pt)) for pt in mesh)
    return total


def verify_hermitian(s: APSymbol, box: list[tuple[float, float]], n: int = 64,
                     tol: float = 1e-10) -> bool:
    """Sampled check of the self-adjointness invariant.

    For every theta in the support, -theta must be present and
    b_{-theta}(xi) == conj(b_theta(xi)) at each sampled xi.
    """
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    for theta, coeff in s.terms.items():
        minus = -theta
        if minus not in s.terms:
            return False
        other = s.terms[minus]
        for pt in mesh[:: max(1, len(mesh) // n)]:
            if abs(other(pt) - coeff(pt).conjugate()) > tol:
                return False
    return True
