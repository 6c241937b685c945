"""Univariate real polynomials: arithmetic, Sturm root isolation, partial fractions.

Coefficients are stored ascending (coeffs[k] multiplies t**k), matching the
JSON wire format ``[c0, c1, ...]``.  Everything is double precision; intended
degrees are desk scale (<= 20 or so).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npp

from .errors import DegenerateRootError, MultipleRootError, NonPolynomialError

# Coefficients below this relative size are treated as zero when trimming.
TRIM_REL = 1e-14


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing coefficients that are negligible relative to the largest."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1:
        raise ValueError("coefficient array must be one-dimensional")
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(0)
    keep = np.nonzero(np.abs(c) > TRIM_REL * scale)[0]
    if keep.size == 0:
        return np.zeros(0)
    return c[: keep[-1] + 1].copy()


class Poly:
    """Real polynomial in one variable, ascending coefficients.

    The zero polynomial is canonically represented by an empty coefficient
    array.  Instances are immutable value objects.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = _trim(np.atleast_1d(np.asarray(coeffs, dtype=float)))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- basic queries -------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return self.coeffs.size - 1

    def __call__(self, t):
        """Evaluate by Horner's scheme; accepts scalars or arrays."""
        if self.is_zero:
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            return float(out) if out.ndim == 0 else out
        out = npp.polyval(np.asarray(t, dtype=float), self.coeffs)
        return float(out) if np.ndim(out) == 0 else out

    # -- calculus ------------------------------------------------------

    def deriv(self) -> "Poly":
        if self.degree < 1:
            return Poly()
        return Poly(npp.polyder(self.coeffs))

    def integ(self, const: float = 0.0) -> "Poly":
        """Antiderivative with constant term ``const``."""
        if self.is_zero:
            return Poly([const])
        return Poly(npp.polyint(self.coeffs, k=const))

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Poly):
            return other
        return Poly([float(other)])

    def __add__(self, other):
        other = self._coerce(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return Poly(npp.polyadd(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero or other.is_zero:
            return Poly()
        return Poly(npp.polymul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()})"

    # -- serialization ---------------------------------------------------

    def to_json(self) -> list[float]:
        return self.coeffs.tolist()

    @classmethod
    def from_json(cls, data) -> "Poly":
        return cls(list(data))

    @classmethod
    def from_roots(cls, roots, leading: float = 1.0) -> "Poly":
        return cls(leading * npp.polyfromroots(np.asarray(roots, dtype=float)))

    def deflate(self, r: float) -> "Poly":
        """Synthetic division by (t - r); the remainder is discarded."""
        if self.is_zero:
            return Poly()
        c = self.coeffs
        n = c.size
        out = np.empty(n - 1)
        acc = c[-1]
        for k in range(n - 2, -1, -1):
            out[k] = acc
            acc = c[k] + r * acc
        return Poly(out)


def divide(q: Poly, p: Poly) -> tuple[Poly, Poly]:
    """Polynomial long division: q = quot * p + rem with deg rem < deg p."""
    if p.is_zero:
        raise ZeroDivisionError("division by the zero polynomial")
    if q.is_zero:
        return Poly(), Poly()
    quot, rem = npp.polydiv(q.coeffs, p.coeffs)
    return Poly(quot), Poly(rem)


# ---------------------------------------------------------------------------
# Sturm sequences and real root isolation
# ---------------------------------------------------------------------------


def sturm_sequence(p: Poly) -> list[Poly]:
    """Sturm chain p0 = p, p1 = p', p_{k+1} = -rem(p_{k-1}, p_k).

    The chain stops at the first (numerically) vanishing remainder.  For a
    square-free p the last element is a nonzero constant; a nonconstant tail
    signals a multiple root.
    """
    seq = [p, p.deriv()]
    scale = np.max(np.abs(p.coeffs))
    while not seq[-1].is_zero:
        _, rem = divide(seq[-2], seq[-1])
        if rem.is_zero or np.max(np.abs(rem.coeffs)) < 1e-13 * scale:
            break
        seq.append(-rem)
    return seq


def _sign_variations(values) -> int:
    signs = [v for v in values if v != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def sturm_count(seq: list[Poly], a: float, b: float) -> int:
    """Number of distinct real roots in (a, b] per Sturm's theorem."""
    va = _sign_variations([s(a) for s in seq])
    vb = _sign_variations([s(b) for s in seq])
    return va - vb


def cauchy_root_bound(p: Poly) -> float:
    """All roots of p lie in |t| < bound."""
    c = p.coeffs
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1]))) if c.size > 1 else 1.0


def _newton_polish(p: Poly, dp: Poly, lo: float, hi: float, tol: float) -> float:
    """Refine the single root in [lo, hi] by bisection-guarded Newton."""
    flo = p(lo)
    x = 0.5 * (lo + hi)
    for _ in range(120):
        fx = p(x)
        if abs(fx) <= tol:
            break
        # keep the bracket valid
        if (fx > 0) == (flo > 0):
            lo = x
            flo = fx
        else:
            hi = x
        d = dp(x)
        xn = x - fx / d if d != 0.0 else lo - 1.0
        x = xn if lo < xn < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-17 * max(1.0, abs(x)):
            break
    return x


def real_simple_roots(p: Poly, tol: float = 1e-12) -> list[float]:
    """All real roots of p, sorted increasing, each refined by Newton.

    Isolation is by Sturm-sequence bisection, so every distinct real root is
    found regardless of clustering.  Raises :class:`MultipleRootError` when a
    root is not simple (|p'| below the guard at the root, or the Sturm chain
    terminates at a nonconstant polynomial).
    """
    if p.is_zero:
        raise NonPolynomialError("zero polynomial has no well-defined root set")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p.degree == 0:
        return []

    seq = sturm_sequence(p)
    if seq[-1].degree >= 1:
        raise MultipleRootError(
            "Sturm chain ends at a nonconstant polynomial: p has a multiple root"
        )

    bound = cauchy_root_bound(p)
    total = sturm_count(seq, -bound, bound)
    if total == 0:
        return []

    dp = p.deriv()
    scale = float(np.max(np.abs(p.coeffs)))
    residual_tol = tol * max(1.0, scale)

    roots: list[float] = []
    stack = [(-bound, bound, total)]
    while stack:
        lo, hi, n = stack.pop()
        if n == 0:
            continue
        if n == 1:
            roots.append(_newton_polish(p, dp, lo, hi, residual_tol))
            continue
        mid = 0.5 * (lo + hi)
        # nudge off an exact root so the Sturm counts stay clean
        while p(mid) == 0.0:
            mid += (hi - lo) * 1e-9
        n_left = sturm_count(seq, lo, mid)
        stack.append((lo, mid, n_left))
        stack.append((mid, hi, n - n_left))

    roots.sort()
    guard = 1e-8 * max(1.0, scale)
    for r in roots:
        if abs(dp(r)) <= guard:
            raise MultipleRootError(
                f"root t = {r:.12g} fails the simple-root guard |p'(t)| > {guard:.3g}"
            )
    return roots


# ---------------------------------------------------------------------------
# Partial fractions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialFractions:
    """Decomposition q/p = quotient + sum c_j / (t - t_j) (+ smooth leftover).

    ``poles`` holds (t_j, c_j) with c_j the residue of q/p at the simple real
    root t_j.  When p also has complex root pairs their contribution is not
    represented here; it stays in the smooth remainder handled downstream.
    """

    quotient: Poly
    poles: list[tuple[float, float]]

    def __call__(self, t):
        """Evaluate quotient + sum of pole terms (away from the poles)."""
        t = np.asarray(t, dtype=float)
        out = self.quotient(t) if not self.quotient.is_zero else np.zeros_like(t)
        for tj, cj in self.poles:
            out = out + cj / (t - tj)
        return out


def partial_fractions(q: Poly, p: Poly, roots: list[float]) -> PartialFractions:
    """Residues of q/p at the given simple real roots of p.

    ``roots`` must be exactly the real roots of p (all simple).  The residue
    at t_j is rem(t_j)/p'(t_j) where rem is the long-division remainder,
    which equals q(t_j)/p'(t_j) because p(t_j) = 0.
    """
    if p.is_zero:
        raise ZeroDivisionError("division by the zero polynomial")
    quot, rem = divide(q, p)
    dp = p.deriv()
    guard = 1e-8 * max(1.0, float(np.max(np.abs(p.coeffs))))
    poles = []
    for tj in roots:
        d = dp(tj)
        if abs(d) <= guard:
            raise DegenerateRootError(
                f"|p'({tj:.12g})| = {abs(d):.3g} too small for a stable residue"
            )
        poles.append((float(tj), float(rem(tj) / d)))
    return PartialFractions(quotient=quot, poles=poles)
