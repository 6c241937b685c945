"""Planar vector fields p(t) d/dt + q(t) d/dx: strips, separatrices, flow.

The model field is L = p(t)*du/dt + q(t)*du/dx with polynomial p, q sharing
no real zero.  The lines t = t_j at the real roots of p are degenerate
characteristics; the open bands between them are "strips".  A bounded strip
is a separatrix when every characteristic curve inside escapes to the same
infinity at both ends, which happens exactly when the two residue constants
c_j = q(t_j)/p'(t_j) at its edges share a sign, equivalently when q changes
sign inside the strip.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.polynomial import chebyshev as ncheb

from .errors import (
    CrossesCharacteristicError,
    HypothesisViolationError,
)
from .poly import Poly, divide, partial_fractions, real_simple_roots

INF = float("inf")


@dataclass(frozen=True)
class VectorField:
    """The field L = p(t) d/dt + q(t) d/dx."""

    p: Poly
    q: Poly

    def __post_init__(self):
        if self.p.is_zero:
            raise HypothesisViolationError("p must be a nonzero polynomial")

    def apply(self, u_t, u_x, t):
        """Pointwise L u from the two partials of u at parameter t."""
        t = np.asarray(t, dtype=float)
        return self.p(t) * u_t + self.q(t) * u_x

    def to_json(self):
        return {"p": self.p.to_json(), "q": self.q.to_json()}

    @classmethod
    def from_json(cls, data):
        return cls(p=Poly.from_json(data["p"]), q=Poly.from_json(data["q"]))


def lambda_k_field(lam: float, k: int) -> VectorField:
    """The family (1 - t^2) d/dt + lam * t^k d/dx."""
    return VectorField(p=Poly([1.0, 0.0, -1.0]), q=Poly([0.0] * k + [lam]))


L0 = lambda_k_field(-2.0, 1)  # (1 - t^2) d/dt - 2t d/dx


@dataclass(frozen=True)
class Strip:
    """One open band between adjacent characteristics (or beyond the extremes).

    ``theta`` is the base point used to anchor solution formulas: the
    sign-change zero of q for separatrix strips, otherwise an arbitrary
    interior anchor (midpoint, or one unit beyond the extreme root for the
    unbounded strips).  ``nu`` is the slope of the transversal line
    x + nu*t = 0 for non-separatrix bounded strips; unbounded strips use the
    vertical line t = theta instead and keep nu for reporting only.
    """

    index: int
    lower: float
    upper: float
    c_lower: float
    c_upper: float
    separatrix: bool
    theta: float
    nu: float | None = None

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def contains(self, t: float, margin: float = 0.0) -> bool:
        return self.lower + margin < t < self.upper - margin

    def to_json(self):
        return {
            "index": self.index,
            "lower": self.lower,
            "upper": self.upper,
            "c_lower": self.c_lower,
            "c_upper": self.c_upper,
            "separatrix": self.separatrix,
            "theta": self.theta,
            "nu": self.nu,
        }


@dataclass(frozen=True)
class StripDecomposition:
    roots: list[float]
    kappas: list[float]
    c: list[float]
    strips: list[Strip]
    i_l: list[float]
    warnings: list[str] = dc_field(default_factory=list)

    @property
    def surjective(self) -> bool:
        return not self.i_l

    def strip_of(self, t: float) -> Strip:
        for s in self.strips:
            if s.lower < t < s.upper:
                return s
        raise CrossesCharacteristicError(f"t = {t:.12g} lies on a characteristic")

    def to_json(self):
        return {
            "roots": self.roots,
            "kappas": self.kappas,
            "c": self.c,
            "strips": [s.to_json() for s in self.strips],
            "I_L": self.i_l,
            "surjective": self.surjective,
            "warnings": self.warnings,
        }


def _q_roots_in(q: Poly, a: float, b: float):
    """Distinct real roots of q in (a, b) with multiplicities, via clustering
    of companion-matrix eigenvalues."""
    if q.degree < 1:
        return []
    all_roots = np.roots(q.coeffs[::-1])
    scale = max(1.0, float(np.max(np.abs(all_roots))))
    real = all_roots[np.abs(all_roots.imag) < 1e-7 * scale].real
    real = np.sort(real[(real > a) & (real < b)])
    clusters: list[list[float]] = []
    for r in real:
        if clusters and abs(r - clusters[-1][-1]) < 1e-6 * scale:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    return [(float(np.mean(c)), len(c)) for c in clusters]


def _sign_change_zero(q: Poly, a: float, b: float) -> float | None:
    """A zero of q in (a, b) across which q changes sign, or None.

    Located by bisection on the endpoint signs, then snapped to the nearest
    odd-multiplicity root cluster for accuracy.
    """
    qa, qb = q(a), q(b)
    if qa == 0.0 or qb == 0.0 or (qa > 0) == (qb > 0):
        return None
    lo, hi = a, b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        qm = q(mid)
        if qm == 0.0:
            return mid
        if (qm > 0) == (qa > 0):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def decompose(v: VectorField) -> StripDecomposition:
    """Classify every strip of the field and locate the separatrices.

    Raises :class:`HypothesisViolationError` on a multiple root of p or a
    common real zero of p and q.  A strip with several interior sign-change
    zeros of q violates the at-most-one-zero hypothesis; that is reported as
    a warning (the parity classification is still correct).
    """
    roots = real_simple_roots(v.p)
    dp = v.p.deriv()
    q = v.q

    for tj in roots:
        if abs(q(tj)) <= 1e-10 * max(1.0, float(np.max(np.abs(q.coeffs))) if not q.is_zero else 1.0):
            raise HypothesisViolationError(
                f"p and q share the real zero t = {tj:.12g}; the field is singular there"
            )

    kappas = [1.0 / dp(tj) for tj in roots]
    c = [k * q(tj) for k, tj in zip(kappas, roots)]
    n = len(roots)
    warns: list[str] = []
    strips: list[Strip] = []

    for j in range(n + 1):
        lower = roots[j - 1] if j >= 1 else -INF
        upper = roots[j] if j <= n - 1 else INF
        c_lower = c[j - 1] if j >= 1 else 0.0
        c_upper = c[j] if j <= n - 1 else 0.0
        bounded = j >= 1 and j <= n - 1

        separatrix = False
        theta: float
        if bounded:
            interior = _q_roots_in(q, lower, upper)
            odd_count = sum(1 for _, m in interior if m % 2 == 1)
            if odd_count > 1:
                warns.append(
                    f"strip {j} ({lower:.6g}, {upper:.6g}) has {odd_count} "
                    "sign-change zeros of q; at-most-one-zero hypothesis violated"
                )
            separatrix = c_lower * c_upper > 0.0
            theta_sc = _sign_change_zero(q, lower, upper)
            # three-way consistency: residue signs, parity, sign-change zero
            parity_odd = odd_count % 2 == 1
            if separatrix != parity_odd or separatrix != (theta_sc is not None):
                raise HypothesisViolationError(
                    f"classification criteria disagree on strip {j}; "
                    "field too close to a degenerate configuration"
                )
            theta = theta_sc if separatrix else 0.5 * (lower + upper)
        elif n == 0:
            theta = 0.0
        else:
            theta = upper - 1.0 if j == 0 else lower + 1.0

        nu = None
        if not separatrix:
            pq = v.p(theta) * q(theta)
            if pq == 0.0:
                # q vanishes at the anchor; probe nearby for the sign
                h = 0.25 if not bounded else 0.25 * (upper - lower)
                pq = v.p(theta + 1e-3 * h) * q(theta + 1e-3 * h)
            nu = math.copysign(1.0, pq) if pq != 0.0 else 1.0

        strips.append(
            Strip(
                index=j,
                lower=lower,
                upper=upper,
                c_lower=c_lower,
                c_upper=c_upper,
                separatrix=separatrix,
                theta=theta,
                nu=nu,
            )
        )

    adjacent = set()
    for s in strips:
        if s.separatrix:
            adjacent.add(roots[s.index - 1])
            adjacent.add(roots[s.index])
    i_l = sorted(adjacent)
    for w in warns:
        warnings.warn(w, stacklevel=2)
    return StripDecomposition(
        roots=[float(r) for r in roots],
        kappas=[float(k) for k in kappas],
        c=[float(x) for x in c],
        strips=strips,
        i_l=i_l,
        warnings=warns,
    )


def is_surjective(v: VectorField, dec: StripDecomposition | None = None):
    """Theorem-level verdict plus construction witnesses.

    Returns (surjective, witnesses): the separatrix strips when the field is
    not surjective, otherwise the per-strip transversal slopes nu from the
    piecewise transversal construction.
    """
    if dec is None:
        dec = decompose(v)
    if dec.surjective:
        return True, {s.index: s.nu for s in dec.strips}
    return False, [s for s in dec.strips if s.separatrix]


# ---------------------------------------------------------------------------
# The global primitive rho of q/p
# ---------------------------------------------------------------------------


class Primitive:
    """Global primitive rho(t) of q/p: log terms at the real roots plus a
    smooth part.

    rho(t) = sum_j c_j ln|t - t_j| + smooth(t).  The smooth part is the exact
    polynomial primitive of the long-division quotient plus, when p has
    complex root pairs, a per-strip Chebyshev antiderivative of the leftover
    proper rational remainder (which has no real poles).
    """

    def __init__(self, log_terms, quot_primitive: Poly, segments, offset=0.0,
                 extra_fun=None, fit_residual=0.0):
        self.log_terms = log_terms
        self._quot_primitive = quot_primitive
        self._segments = segments  # list of (lo, hi, Chebyshev antiderivative)
        self._offset = offset
        self._extra_fun = extra_fun  # smooth remainder h(t), for diagnostics
        self.fit_residual = fit_residual

    def smooth_part(self, t):
        t = np.asarray(t, dtype=float)
        out = self._quot_primitive(t) + np.zeros_like(t)
        if self._segments:
            out = out + self._eval_extra(t)
        out = out - self._offset
        return float(out) if out.ndim == 0 else out

    def _eval_extra(self, t):
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        for lo, hi, ch in self._segments:
            mask = (t >= lo) & (t <= hi)
            if np.any(mask):
                out[mask] = ch(t[mask])
        below = t < self._segments[0][0]
        above = t > self._segments[-1][1]
        for mask, (lo, hi, ch) in ((below, self._segments[0]), (above, self._segments[-1])):
            if np.any(mask):
                out[mask] = self._tail(t[mask], lo, hi, ch)
        return out

    def _tail(self, t, lo, hi, ch):
        # beyond the tabulated window: continue by direct quadrature of h
        from .quadrature import gauss_kronrod

        edge = lo if np.all(t < lo) else hi
        base = float(ch(edge))
        return np.array(
            [
                base + gauss_kronrod(self._extra_fun, edge, float(ti)).value
                for ti in np.atleast_1d(t)
            ]
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t, dtype=float)
        for tj, cj in self.log_terms:
            out = out + cj * np.log(np.abs(t - tj))
        out = out + self.smooth_part(t)
        return float(out) if out.ndim == 0 else out

    def deriv_exact(self, t):
        """q/p reconstructed from the decomposition (for verification)."""
        t = np.asarray(t, dtype=float)
        out = self._quot_primitive.deriv()(t) + np.zeros_like(t)
        for tj, cj in self.log_terms:
            out = out + cj / (t - tj)
        if self._extra_fun is not None:
            out = out + self._extra_fun(t)
        return out


def rho(v: VectorField, dec: StripDecomposition, window: float = 10.0) -> Primitive:
    """Build the global primitive of q/p for the decomposed field.

    Normalization: the smooth part vanishes at t = 0 when 0 is off every
    root, otherwise at the base point of the strip containing the anchor.
    """
    pf = partial_fractions(v.q, v.p, dec.roots)
    quot_prim = pf.quotient.integ()

    # leftover h = (rem - sum c_j p/(t - t_j)) / p, a proper rational function
    # with no real poles; exact polynomial cancellation keeps it evaluable
    # everywhere, including at the roots themselves.
    _, rem = divide(v.q, v.p)
    g = rem
    for tj, cj in pf.poles:
        g = g - cj * v.p.deflate(tj)
    w = v.p
    gt = g
    for tj, _ in pf.poles:
        w = w.deflate(tj)
        gt = gt.deflate(tj)
    has_complex = w.degree >= 1

    segments = []
    fit_residual = 0.0
    extra = None
    if has_complex and not gt.is_zero:
        def extra(t, _gt=gt, _w=w):
            t = np.asarray(t, dtype=float)
            return _gt(t) / _w(t)

        if dec.roots:
            knots = [dec.roots[0] - window] + dec.roots + [dec.roots[-1] + window]
        else:
            knots = [-window, window]
        level = 0.0
        for lo, hi in zip(knots, knots[1:]):
            best = None
            for deg in (16, 32, 64):
                ch = ncheb.Chebyshev.interpolate(extra, deg, domain=[lo, hi])
                probe = np.linspace(lo, hi, 4 * deg + 3)
                resid = float(np.max(np.abs(ch(probe) - extra(probe))))
                best = (ch, resid)
                if resid <= 1e-10 * max(1.0, float(np.max(np.abs(extra(probe))))):
                    break
            ch, resid = best
            fit_residual = max(fit_residual, resid)
            anti = ch.integ()
            anti = anti - anti(lo) + level
            level = float(anti(hi))
            segments.append((lo, hi, anti))

    prim = Primitive(
        log_terms=list(zip(dec.roots, dec.c)),
        quot_primitive=quot_prim,
        segments=segments,
        extra_fun=extra,
        fit_residual=fit_residual,
    )
    anchor = 0.0
    if any(abs(anchor - tj) < 1e-12 for tj in dec.roots):
        anchor = min((s.theta for s in dec.strips), key=abs)
    prim._offset = float(prim.smooth_part(anchor))
    return prim


def flow(
    v: VectorField,
    primitive: Primitive,
    t,
    tau: float,
    y,
    dec: StripDecomposition | None = None,
):
    """Characteristic flow x(t; tau, y) = y + rho(t) - rho(tau).

    t and tau must lie in the same open strip; crossing a root of p is a
    :class:`CrossesCharacteristicError`.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    roots = [tj for tj, _ in primitive.log_terms]
    for tj in roots:
        lo = min(float(np.min(t_arr)), tau)
        hi = max(float(np.max(t_arr)), tau)
        if lo < tj < hi or tj in (lo, hi):
            raise CrossesCharacteristicError(
                f"flow from tau = {tau:.6g} to t spanning [{lo:.6g}, {hi:.6g}] "
                f"crosses the characteristic t = {tj:.6g}"
            )
    out = np.asarray(y, dtype=float) + primitive(t) - primitive(tau)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Curve emission (phase portraits)
# ---------------------------------------------------------------------------


def emit_curves(
    v: VectorField,
    t_window: tuple[float, float],
    y_seeds,
    samples: int = 400,
    clip_x: float = 12.0,
    margin: float = 1e-6,
    dec: StripDecomposition | None = None,
    primitive: Primitive | None = None,
):
    """Sample integral curves through (theta_j, y) for each seed y.

    Returns a list of (seed, t, x) rows covering every strip that intersects
    the window; x values are clipped to [-clip_x, clip_x].  Rows are ordered
    by seed, then strip, then t.
    """
    if dec is None:
        dec = decompose(v)
    if primitive is None:
        primitive = rho(v, dec)
    lo_w, hi_w = t_window
    rows = []
    for seed in y_seeds:
        for s in dec.strips:
            lo = max(lo_w, (s.lower + margin) if math.isfinite(s.lower) else lo_w)
            hi = min(hi_w, (s.upper - margin) if math.isfinite(s.upper) else hi_w)
            if lo >= hi:
                continue
            tgrid = np.linspace(lo, hi, samples)
            x = seed + primitive(tgrid) - primitive(s.theta)
            x = np.clip(x, -clip_x, clip_x)
            rows.extend(
                (float(seed), float(ti), float(xi)) for ti, xi in zip(tgrid, x)
            )
    return rows


def curves_to_svg(
    rows,
    roots,
    t_window,
    clip_x: float = 12.0,
    width: int = 640,
    height: int = 480,
) -> str:
    """Render emitted curves as a standalone SVG document.

    One polyline per (seed, strip) run of consecutive samples, dashed
    vertical lines at the characteristic roots, plain axes.
    """
    lo, hi = t_window

    def sx(t):
        return (t - lo) / (hi - lo) * (width - 40) + 20

    def sy(x):
        return height - ((x + clip_x) / (2 * clip_x) * (height - 40) + 20)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{sx(lo):.1f}" y1="{sy(0):.1f}" x2="{sx(hi):.1f}" '
        f'y2="{sy(0):.1f}" stroke="#888" stroke-width="1"/>',
    ]
    if lo < 0 < hi:
        parts.append(
            f'<line x1="{sx(0):.1f}" y1="{sy(-clip_x):.1f}" x2="{sx(0):.1f}" '
            f'y2="{sy(clip_x):.1f}" stroke="#888" stroke-width="1"/>'
        )
    for r in roots:
        if lo < r < hi:
            parts.append(
                f'<line x1="{sx(r):.1f}" y1="{sy(-clip_x):.1f}" x2="{sx(r):.1f}" '
                f'y2="{sy(clip_x):.1f}" stroke="#c33" stroke-width="1" '
                'stroke-dasharray="6 4"/>'
            )
    # split rows into polylines at seed changes and characteristic crossings
    def crosses_root(t0, t1):
        return any(min(t0, t1) < r < max(t0, t1) for r in roots)

    run: list[str] = []
    prev = None
    for seed, t, x in rows:
        if prev is not None and (
            seed != prev[0] or t < prev[1] or crosses_root(prev[1], t)
        ):
            if len(run) > 1:
                parts.append(
                    f'<polyline points="{" ".join(run)}" fill="none" '
                    'stroke="#236" stroke-width="1.2"/>'
                )
            run = []
        run.append(f"{sx(t):.2f},{sy(x):.2f}")
        prev = (seed, t)
    if len(run) > 1:
        parts.append(
            f'<polyline points="{" ".join(run)}" fill="none" '
            'stroke="#236" stroke-width="1.2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Known kernel elements of the lambda-k family
# ---------------------------------------------------------------------------


def kernel_element(lam: float, k: int):
    """A smooth function annihilated by (1 - t^2) d/dt + lam t^k d/dx.

    These witness that the family is intrinsically Hamiltonian.  Returns a
    callable (t, x) -> value, vectorized over numpy arrays.
    """
    # powers i < k sharing the opposite parity of k, skipping i = 0
    idx = [i for i in range(1, k) if i % 2 != k % 2]

    def phase(t, x):
        s = x / lam
        for i in idx:
            s = s + t**i / i
        return 2.0 * s

    if k % 2 == 1:

        def fn(t, x):
            t = np.asarray(t, dtype=float)
            return (1.0 - t**2) * np.exp(phase(t, x))

    else:

        def fn(t, x):
            t = np.asarray(t, dtype=float)
            return np.arctan((1.0 - t) / (1.0 + t) * np.exp(phase(t, x)))

    return fn
