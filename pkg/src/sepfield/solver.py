"""Strip-wise right inverses and the glued global weak solution.

Separatrix strips get the base-point integral along characteristics

    u(t, x) = integral_theta^t f(tau, x + rho(tau) - rho(t)) / p(tau) dtau,

which blows up near the strip edges like a power |t - t_j|^{-eps |c_j|} (or
log powers for polynomially bounded f) but stays locally integrable in t.
Non-separatrix bounded strips get the Green (Cauchy) solution vanishing on
the transversal x + nu t = 0; unbounded strips use Cauchy data on a vertical
line one unit beyond the extreme root.  The per-strip solutions glue into a
global weak solution because the boundary flux p(t) u(t, .) vanishes at the
shared characteristics; `weak_residual` and `flux_check` verify exactly that.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    CrossingNotFoundError,
    OnCharacteristicError,
    ToleranceNotMetError,
)
from .field import Primitive, Strip, StripDecomposition, VectorField, decompose, rho
from .quadrature import gauss_kronrod, gauss_legendre_nodes, tanh_sinh
from .rhs import GROWTH, PolyInX, Rhs

DEFAULT_TOL = 1e-9
_UNBOUNDED_MARGIN = 1.0


@dataclass
class QuadDiagnostics:
    calls: int = 0
    max_nodes: int = 0
    max_levels: int = 0
    max_error: float = 0.0
    failures: int = 0

    def record(self, res):
        self.calls += 1
        self.max_nodes = max(self.max_nodes, res.nodes)
        self.max_levels = max(self.max_levels, max(res.levels, res.subdivisions))
        self.max_error = max(self.max_error, res.error)
        if not res.converged:
            self.failures += 1


@dataclass
class StripSolution:
    """Right-inverse evaluator on one strip plus its singularity metadata."""

    strip: Strip
    kind: str  # "separatrix" | "green" | "cauchy-line"
    evaluator: object = dc_field(repr=False, default=None)
    diagnostics: QuadDiagnostics = dc_field(default_factory=QuadDiagnostics)
    endpoint_exponents: dict = dc_field(default_factory=dict)

    def __call__(self, t, x):
        return self.evaluator(t, x)


def _check_off_characteristic(t: float, strip: Strip):
    for edge in (strip.lower, strip.upper):
        if math.isfinite(edge) and abs(t - edge) < 1e-14 * max(1.0, abs(edge)):
            raise OnCharacteristicError(f"t = {t!r} sits on the characteristic t = {edge!r}")
    if not strip.lower < t < strip.upper:
        raise OnCharacteristicError(
            f"t = {t!r} outside strip ({strip.lower}, {strip.upper})"
        )


def _base_integral(
    v: VectorField,
    primitive: Primitive,
    strip: Strip,
    f: Rhs,
    t: float,
    x,
    base: float,
    tol: float,
    diagnostics: QuadDiagnostics | None = None,
):
    """integral_base^t f(tau, x + rho(tau) - rho(t)) / p(tau) dtau, batched in x.

    When t sits close to a strip-edge root (relative to the base distance)
    the integration variable is switched to sigma with
    tau = root + (base - root) e^{-sigma}, which absorbs the 1/(tau - root)
    near-singularity of 1/p exactly; otherwise adaptive Gauss-Kronrod on the
    raw variable suffices.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x)
    rho_t = primitive(t)

    if t == base:
        out = np.zeros_like(x1)
        return float(out[0]) if scalar else out

    # the strip edge the integration endpoint t is approaching
    root = strip.upper if t > base else strip.lower
    near_root = math.isfinite(root) and abs(t - root) <= 0.1 * abs(base - root)

    if near_root:
        p_defl = v.p.deflate(root)
        span = base - root
        s_max = math.log(abs(span) / abs(t - root))

        def g(sigma):
            tau = root + span * np.exp(-sigma)
            shift = primitive(tau) - rho_t
            vals = f(tau[:, None], x1[None, :] + shift[:, None])
            return -np.asarray(vals) / p_defl(tau)[:, None]

        res = tanh_sinh(g, 0.0, s_max, abs_tol=tol, rel_tol=tol)
    else:

        def g(tau):
            tau = np.asarray(tau)
            shift = primitive(tau) - rho_t
            vals = f(tau[:, None], x1[None, :] + shift[:, None])
            return np.asarray(vals) / v.p(tau)[:, None]

        res = gauss_kronrod(g, base, t, abs_tol=tol, rel_tol=tol)

    if diagnostics is not None:
        diagnostics.record(res)
    if not res.converged:
        raise ToleranceNotMetError(
            f"quadrature stalled at error {res.error:.3e} (target {tol:.3e})",
            achieved=res.error,
        )
    out = np.atleast_1d(np.asarray(res.value, dtype=float))
    return float(out[0]) if scalar else out


def _admissibility_warning(strip: Strip, f: Rhs):
    if f.mode != GROWTH or f.eps == 0.0:
        return
    bounds = [abs(c) for c in (strip.c_lower, strip.c_upper) if c != 0.0]
    if not bounds:
        return
    limit = min(1.0 / b for b in bounds)
    if f.eps >= limit:
        warnings.warn(
            f"growth rate eps = {f.eps:.4g} is not below the admissible "
            f"bound {limit:.4g} on strip {strip.index}; the inverse may not "
            "be integrable up to the strip edges",
            stacklevel=3,
        )


def predicted_endpoint_exponents(strip: Strip, f: Rhs) -> dict:
    """Expected blow-up at each finite strip edge: power eps*|c| for
    exponentially growing f, log power (degree + 1) for polynomial f."""
    out = {}
    for edge, c in ((strip.lower, strip.c_lower), (strip.upper, strip.c_upper)):
        if not math.isfinite(edge):
            continue
        if isinstance(f, PolyInX):
            out[edge] = {"type": "log", "power": f.degree + 1}
        elif f.mode == GROWTH and f.eps > 0:
            out[edge] = {"type": "power", "exponent": f.eps * abs(c)}
        else:
            out[edge] = {"type": "log", "power": 1}
    return out


def separatrix_inverse(
    v: VectorField,
    strip: Strip,
    f: Rhs,
    primitive: Primitive | None = None,
    tol: float = DEFAULT_TOL,
) -> StripSolution:
    """Right inverse on a separatrix strip, anchored at the interior zero of q."""
    if not strip.separatrix:
        raise ValueError("separatrix_inverse requires a separatrix strip")
    if primitive is None:
        primitive = rho(v, decompose(v))
    _admissibility_warning(strip, f)
    sol = StripSolution(
        strip=strip,
        kind="separatrix",
        endpoint_exponents=predicted_endpoint_exponents(strip, f),
    )

    def u(t, x):
        _check_off_characteristic(t, strip)
        return _base_integral(
            v, primitive, strip, f, float(t), x, strip.theta, tol, sol.diagnostics
        )

    sol.evaluator = u
    return sol


def _solve_crossing(primitive: Primitive, strip: Strip, nu: float, t: float, x):
    """s0 with x + rho(s0) - rho(t) + nu s0 = 0, batched over x by bisection.

    The crossing function is monotone in s (nu shares the sign of q/p on the
    strip), and spans all of R because the residue constants at the two edges
    have opposite signs, so a root always exists strictly inside.
    """
    x1 = np.atleast_1d(np.asarray(x, dtype=float))
    rho_t = primitive(t)

    def phi(s):
        return x1 + primitive(s) - rho_t + nu * s

    width = strip.upper - strip.lower
    delta = 1e-3 * width
    lo = np.full_like(x1, strip.lower + delta)
    hi = np.full_like(x1, strip.upper - delta)
    flo, fhi = phi(lo[0]), phi(hi[0])
    for _ in range(40):
        bad = (np.sign(flo) == np.sign(fhi)) & (flo != 0.0)
        if not np.any(bad):
            break
        delta *= 0.05
        if delta < 1e-16 * width:
            raise CrossingNotFoundError(
                "characteristic does not meet the transversal inside the strip"
            )
        lo[bad] = strip.lower + delta
        hi[bad] = strip.upper - delta
        flo = np.where(bad, phi(strip.lower + delta), flo)
        fhi = np.where(bad, phi(strip.upper - delta), fhi)
    increasing = fhi[0] > flo[0] if np.ndim(fhi) else fhi > flo
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        fm = phi(mid) if mid.size > 1 else np.atleast_1d(phi(float(mid[0])))
        go_right = (fm < 0.0) if increasing else (fm > 0.0)
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def green_inverse(
    v: VectorField,
    strip: Strip,
    f: Rhs,
    nu: float | None = None,
    primitive: Primitive | None = None,
    tol: float = DEFAULT_TOL,
) -> StripSolution:
    """Cauchy-problem solution vanishing on the strip transversal.

    Bounded strips use the slanted line x + nu t = 0; unbounded strips take
    zero data on the vertical line t = theta (noncharacteristic since p does
    not vanish there), so the solution extends smoothly to the closed strip.
    """
    if strip.separatrix:
        raise ValueError("green_inverse requires a non-separatrix strip")
    if primitive is None:
        primitive = rho(v, decompose(v))
    if nu is None:
        nu = strip.nu if strip.nu is not None else 1.0

    if not strip.bounded:
        sol = StripSolution(
            strip=strip,
            kind="cauchy-line",
            endpoint_exponents=predicted_endpoint_exponents(strip, f),
        )

        def u(t, x):
            _check_off_characteristic(t, strip)
            return _base_integral(
                v, primitive, strip, f, float(t), x, strip.theta, tol,
                sol.diagnostics,
            )

        sol.evaluator = u
        return sol

    sol = StripSolution(
        strip=strip,
        kind="green",
        endpoint_exponents=predicted_endpoint_exponents(strip, f),
    )

    def u(t, x):
        t = float(t)
        _check_off_characteristic(t, strip)
        x_arr = np.asarray(x, dtype=float)
        scalar = x_arr.ndim == 0
        x1 = np.atleast_1d(x_arr)
        s0 = _solve_crossing(primitive, strip, nu, t, x1)
        rho_t = primitive(t)

        # one tanh-sinh pass on the normalized interval serves every column,
        # each column carrying its own affine map [0,1] -> [s0_i, t]
        span = t - s0

        def g(w):
            w = np.asarray(w)
            tau = s0[None, :] + np.outer(w, span)
            shift = primitive(tau.ravel()).reshape(tau.shape) - rho_t
            vals = np.asarray(f(tau, x1[None, :] + shift))
            return vals * (span[None, :] / v.p(tau.ravel()).reshape(tau.shape))

        res = tanh_sinh(g, 0.0, 1.0, abs_tol=tol, rel_tol=tol)
        sol.diagnostics.record(res)
        if not res.converged:
            raise ToleranceNotMetError(
                f"quadrature stalled at error {res.error:.3e}", achieved=res.error
            )
        out = np.atleast_1d(np.asarray(res.value, dtype=float))
        return float(out[0]) if scalar else out

    sol.evaluator = u
    return sol


@dataclass
class GlobalWeakSolution:
    """Per-strip right inverses glued along the characteristics."""

    field: VectorField
    dec: StripDecomposition
    primitive: Primitive
    rhs: Rhs
    solutions: list[StripSolution]

    def solution_at(self, t: float) -> StripSolution:
        for sol in self.solutions:
            if sol.strip.lower < t < sol.strip.upper:
                return sol
        raise OnCharacteristicError(f"t = {t!r} lies on a characteristic line")

    def __call__(self, t, x):
        return self.solution_at(float(t))(t, x)

    def eval_grid(self, t_values, x_values):
        """Matrix u[i, j] = u(t_i, x_j); rows batched per t."""
        t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
        x_values = np.atleast_1d(np.asarray(x_values, dtype=float))
        out = np.empty((t_values.size, x_values.size))
        for i, t in enumerate(t_values):
            out[i] = self(float(t), x_values)
        return out

    @property
    def predicted_singularities(self):
        return {
            sol.strip.index: sol.endpoint_exponents for sol in self.solutions
        }


def global_inverse(
    v: VectorField,
    f: Rhs,
    dec: StripDecomposition | None = None,
    primitive: Primitive | None = None,
    tol: float = DEFAULT_TOL,
) -> GlobalWeakSolution:
    """Assemble the global right inverse strip by strip."""
    if dec is None:
        dec = decompose(v)
    if primitive is None:
        primitive = rho(v, dec)
    sols = []
    for strip in dec.strips:
        if strip.separatrix:
            sols.append(separatrix_inverse(v, strip, f, primitive, tol))
        else:
            sols.append(green_inverse(v, strip, f, strip.nu, primitive, tol))
    return GlobalWeakSolution(
        field=v, dec=dec, primitive=primitive, rhs=f, solutions=sols
    )


# ---------------------------------------------------------------------------
# Verification: strong residual, weak pairing, boundary flux
# ---------------------------------------------------------------------------


def _group_probes(probes):
    by_t: dict[float, list[float]] = {}
    for t, x in probes:
        by_t.setdefault(float(t), []).append(float(x))
    return by_t


def strong_residual(
    v: VectorField,
    u,
    f,
    probes,
    dec: StripDecomposition | None = None,
    hx: float = 5e-3,
):
    """max |p u_t + q u_x - f| over probe points, derivatives by 5-point
    central differences with the t-step shrunk near the characteristics.

    ``u`` is any (t, x)->value evaluator accepting an x array; ``probes`` is
    an iterable of (t, x) pairs.  Probes must keep a margin >= 1e-3 from the
    roots of p.
    """
    roots: list[float] = dec.roots if dec is not None else (
        decompose(v).roots if v.p.degree >= 1 else []
    )
    worst = 0.0
    for t, xs in _group_probes(probes).items():
        dist = min((abs(t - r) for r in roots), default=1.0)
        ht = min(2e-3, 0.2 * dist)
        xs = np.asarray(sorted(xs))
        stencil_x = np.concatenate([xs - 2 * hx, xs - hx, xs, xs + hx, xs + 2 * hx])
        row = np.asarray(u(t, stencil_x), dtype=float).reshape(5, xs.size)
        u_x = (row[0] - 8 * row[1] + 8 * row[3] - row[4]) / (12 * hx)
        u_ctr = row[2]
        cols = [np.asarray(u(t + k * ht, xs), dtype=float) for k in (-2, -1, 1, 2)]
        u_t = (cols[0] - 8 * cols[1] + 8 * cols[2] - cols[3]) / (12 * ht)
        fv = np.asarray(f(t, xs)) if callable(f) else float(f)
        res = v.p(t) * u_t + v.q(t) * u_x - fv
        del u_ctr
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


class Bump:
    """Compactly supported 1-D test profile on [-1, 1].

    ``poly`` kind: (1 - r^2)^4; ``smooth`` kind: exp(-1/(1 - r^2)).
    """

    def __init__(self, kind: str = "poly"):
        if kind not in ("poly", "smooth"):
            raise ValueError("kind must be 'poly' or 'smooth'")
        self.kind = kind

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) < 1.0
        out = np.zeros_like(r)
        if self.kind == "poly":
            out[inside] = (1.0 - r[inside] ** 2) ** 4
        else:
            out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) < 1.0
        out = np.zeros_like(r)
        ri = r[inside]
        if self.kind == "poly":
            out[inside] = -8.0 * ri * (1.0 - ri**2) ** 3
        else:
            out[inside] = (
                np.exp(-1.0 / (1.0 - ri**2)) * (-2.0 * ri) / (1.0 - ri**2) ** 2
            )
        return out


class TestFunction2D:
    """Tensor-product bump phi(t, x) = B((t-ct)/rt) B((x-cx)/rx)."""

    def __init__(self, center, radii, kind: str = "poly"):
        self.ct, self.cx = center
        self.rt, self.rx = radii
        self.bump = Bump(kind)

    def __call__(self, t, x):
        return self.bump((t - self.ct) / self.rt) * self.bump((x - self.cx) / self.rx)

    def d_t(self, t, x):
        return (
            self.bump.deriv((t - self.ct) / self.rt)
            / self.rt
            * self.bump((x - self.cx) / self.rx)
        )

    def d_x(self, t, x):
        return (
            self.bump((t - self.ct) / self.rt)
            * self.bump.deriv((x - self.cx) / self.rx)
            / self.rx
        )

    @property
    def t_support(self):
        return self.ct - self.rt, self.ct + self.rt

    @property
    def x_support(self):
        return self.cx - self.rx, self.cx + self.rx


def _t_panels(lo: float, hi: float, roots, max_shell: int = 24):
    """Split [lo, hi] into panels, dyadically refined toward interior roots."""
    cuts = {lo, hi}
    inner = [r for r in roots if lo < r < hi]
    for r in inner:
        for side_len in (r - lo, hi - r):
            if side_len <= 0:
                continue
        left = r - lo
        right = hi - r
        for m in range(max_shell + 1):
            if left > 0:
                cuts.add(r - left * 0.5**m)
            if right > 0:
                cuts.add(r + right * 0.5**m)
    pts = sorted(cuts)
    panels = []
    for a, b in zip(pts, pts[1:]):
        mid = 0.5 * (a + b)
        if any(abs(mid - r) < 1e-30 for r in inner):
            continue
        panels.append((a, b))
    return panels, inner


def weak_residual(
    v: VectorField,
    u,
    f,
    testfns,
    dec: StripDecomposition | None = None,
    n_gl_t: int = 8,
    n_gl_x: int = 32,
    max_shell: int = 24,
):
    """max over test functions of |<u, L* phi> - <f, phi>|.

    The adjoint is L* phi = -d_t(p phi) - q d_x phi.  The t-integration uses
    dyadic shells toward each singular line t = t_j inside the support, where
    u is merely locally integrable; panels contribute until they fall below
    roundoff.  u evaluations are batched over the x nodes.
    """
    if dec is None:
        dec = decompose(v)
    dp = v.p.deriv()
    worst = 0.0
    for phi in testfns:
        t_lo, t_hi = phi.t_support
        x_lo, x_hi = phi.x_support
        xn, xw = gauss_legendre_nodes(n_gl_x, x_lo, x_hi)
        panels, _ = _t_panels(t_lo, t_hi, dec.roots, max_shell)
        pairing = 0.0
        rhs_pairing = 0.0
        for a, b in panels:
            tn, tw = gauss_legendre_nodes(n_gl_t, a, b)
            for t, wt in zip(tn, tw):
                uvals = np.asarray(u(float(t), xn), dtype=float)
                lstar = (
                    -v.p(t) * phi.d_t(t, xn)
                    - dp(t) * phi(t, xn)
                    - v.q(t) * phi.d_x(t, xn)
                )
                pairing += wt * float(np.dot(xw, uvals * lstar))
                fv = np.asarray(f(t, xn)) if callable(f) else float(f)
                rhs_pairing += wt * float(np.dot(xw, fv * phi(t, xn)))
        worst = max(worst, abs(pairing - rhs_pairing))
    return worst


def flux_check(
    v: VectorField,
    u,
    t_j: float,
    phi,
    t_sequence=None,
    x_window=None,
    n_gl_x: int = 64,
):
    """Boundary-flux terms F_m = p(t_m) * integral u(t_m, x) phi(t_m, x) dx.

    For an admissible glued solution these must decrease to zero as t_m
    approaches the characteristic; a divergent sequence flags an
    inadmissible right-hand side.  Returns (values, decreasing_verdict).
    """
    if t_sequence is None:
        t_sequence = [t_j + 2.0**-m for m in range(3, 21)]
    if x_window is None:
        x_window = getattr(phi, "x_support", (-10.0, 10.0))
    xn, xw = gauss_legendre_nodes(n_gl_x, *x_window)
    values = []
    for t_m in t_sequence:
        uvals = np.asarray(u(float(t_m), xn), dtype=float)
        phv = phi(t_m, xn) if callable(phi) else np.ones_like(xn)
        values.append(float(v.p(t_m)) * float(np.dot(xw, uvals * phv)))
    mags = np.abs(values)
    tail_decreasing = bool(np.all(np.diff(mags[len(mags) // 2 :]) <= 1e-12 + mags[len(mags) // 2 : -1] * 0.5)) if len(mags) > 3 else True
    return values, tail_decreasing
