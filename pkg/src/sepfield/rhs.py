"""Right-hand sides f(t, x) with growth metadata, and the growth seminorms.

Three representations: polynomial in x with polynomial-in-t coefficients
(exact derivatives), a callable under a declared exponential envelope
e^{+-eps|x|}, and grid samples.  The seminorm family measures
sup e^{-eps|x|} |d^a f| over a compact t-window, which is the topology the
solver estimates live in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitFailureError, NonEvaluableError
from .poly import Poly

GROWTH = "growth"
DECAY = "decay"


@dataclass(frozen=True)
class SobolevParams:
    """Orders (s1 regularity, s2 weight) of the weighted Sobolev space."""

    s1: float = 0.0
    s2: float = 0.0


class Rhs:
    """Common interface: vectorized evaluation and mixed partials."""

    eps: float = 0.0
    mode: str = GROWTH

    def __call__(self, t, x):
        raise NotImplementedError

    def partial(self, t, x, jt: int, kx: int):
        raise NotImplementedError


class PolyInX(Rhs):
    """f(t, x) = sum_l coeff_fns[l](t) * x**l with Poly coefficients."""

    def __init__(self, coeff_fns):
        fns = [f if isinstance(f, Poly) else Poly(f) for f in coeff_fns]
        while len(fns) > 1 and fns[-1].is_zero:
            fns.pop()
        self.coeff_fns = fns
        self.eps = 0.0
        self.mode = GROWTH

    @property
    def degree(self) -> int:
        return len(self.coeff_fns) - 1

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
        for fl in reversed(self.coeff_fns):
            out = out * x + fl(t)
        return float(out) if out.ndim == 0 else out

    def partial(self, t, x, jt: int, kx: int):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
        for ell in range(len(self.coeff_fns) - 1, kx - 1, -1):
            fl = self.coeff_fns[ell]
            for _ in range(jt):
                fl = fl.deriv()
            fall = math.perm(ell, kx)
            out = out * x + fall * fl(t)
        return float(out) if out.ndim == 0 else out

    def diff_x(self) -> "PolyInX":
        """d/dx, one degree lower."""
        fns = [
            (ell + 1) * self.coeff_fns[ell + 1]
            for ell in range(len(self.coeff_fns) - 1)
        ]
        return PolyInX(fns or [Poly()])

    def to_json(self):
        return {"poly_in_x": [f.to_json() for f in self.coeff_fns]}


class ExpEnvelope(Rhs):
    """Callable f under a declared envelope |f| <= C e^{+-eps|x|}.

    The constant C is estimated on a 64x256 spot-check grid at construction;
    the declared eps is trusted metadata, not proven.
    """

    def __init__(self, fn, eps: float, mode: str = GROWTH,
                 t_window=(-1.0, 1.0), x_window=30.0, name: str | None = None,
                 params: dict | None = None):
        if mode not in (GROWTH, DECAY):
            raise ValueError(f"mode must be '{GROWTH}' or '{DECAY}'")
        self.fn = fn
        self.eps = float(eps)
        self.mode = mode
        self.t_window = t_window
        self.x_window = float(x_window)
        self.name = name
        self.params = params or {}
        self.envelope_const = self._spot_check()

    def _spot_check(self) -> float:
        tg = np.linspace(self.t_window[0], self.t_window[1], 64)
        xg = np.linspace(-self.x_window, self.x_window, 256)
        vals = np.abs(self.fn(tg[:, None], xg[None, :]))
        if not np.all(np.isfinite(vals)):
            raise ValueError("right-hand side is not finite on the check grid")
        sign = -1.0 if self.mode == GROWTH else 1.0
        weighted = vals * np.exp(sign * self.eps * np.abs(xg[None, :]))
        return float(np.max(weighted))

    def __call__(self, t, x):
        out = np.asarray(self.fn(np.asarray(t, dtype=float), np.asarray(x, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def partial(self, t, x, jt: int, kx: int, ht: float = 1e-5, hx: float = 1e-5):
        """Central-difference mixed partial (iterated binomial stencil)."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(t.shape, x.shape))
        for a in range(jt + 1):
            ca = (-1.0) ** a * math.comb(jt, a)
            tt = t + (jt - 2 * a) * ht
            for b in range(kx + 1):
                cb = (-1.0) ** b * math.comb(kx, b)
                out = out + ca * cb * self.fn(tt, x + (kx - 2 * b) * hx)
        out = out / ((2.0 * ht) ** jt * (2.0 * hx) ** kx)
        return float(out) if out.ndim == 0 else out

    def to_json(self):
        return {
            "exp_envelope": {
                "eps": self.eps,
                "mode": self.mode,
                "expr": self.name or "custom",
                "params": self.params,
            }
        }


class GridSampled(Rhs):
    """f given by samples on a rectangular (t, x) grid, spline interpolated."""

    def __init__(self, t_grid, x_grid, values, eps: float = 0.0,
                 mode: str = GROWTH, spline_degree: int = 3):
        from scipy.interpolate import RectBivariateSpline

        self.t_grid = np.asarray(t_grid, dtype=float)
        self.x_grid = np.asarray(x_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.eps = float(eps)
        self.mode = mode
        self.spline_degree = spline_degree
        self._spline = RectBivariateSpline(
            self.t_grid, self.x_grid, self.values,
            kx=spline_degree, ky=spline_degree,
        )

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        t, x = np.broadcast_arrays(t, x)
        out = self._spline.ev(
            np.clip(t, self.t_grid[0], self.t_grid[-1]),
            np.clip(x, self.x_grid[0], self.x_grid[-1]),
        )
        # zero-fill outside the sampled x-range rather than extrapolating
        out = np.where(
            (x < self.x_grid[0]) | (x > self.x_grid[-1]), 0.0, out
        )
        return float(out) if out.ndim == 0 else out

    def partial(self, t, x, jt: int, kx: int):
        if jt >= self.spline_degree or kx >= self.spline_degree:
            raise NonEvaluableError(
                f"grid samples support derivatives below order {self.spline_degree}"
            )
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        t, x = np.broadcast_arrays(t, x)
        out = self._spline.ev(t, x, dx=jt, dy=kx)
        return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Builtins (named constructors for the JSON interface)
# ---------------------------------------------------------------------------


def constant(c: float = 1.0) -> PolyInX:
    return PolyInX([Poly([c])])


def monomial_x(k: int, coeff: float = 1.0) -> PolyInX:
    return PolyInX([Poly()] * k + [Poly([coeff])])


def exp_ax(a: float = 0.5, t_window=(-1.0, 1.0), x_window: float = 30.0) -> ExpEnvelope:
    fn = lambda t, x: np.exp(a * x) + 0.0 * np.asarray(t, dtype=float)
    return ExpEnvelope(fn, eps=abs(a), mode=GROWTH, t_window=t_window,
                       x_window=x_window, name="exp_ax", params={"a": a})


def cos_x(omega: float = 1.0, t_window=(-1.0, 1.0), x_window: float = 30.0) -> ExpEnvelope:
    fn = lambda t, x: np.cos(omega * x) + 0.0 * np.asarray(t, dtype=float)
    return ExpEnvelope(fn, eps=0.0, mode=GROWTH, t_window=t_window,
                       x_window=x_window, name="cos_x", params={"omega": omega})


def gaussian_x(sigma: float = 1.0, t_window=(-1.0, 1.0), x_window: float = 30.0) -> ExpEnvelope:
    fn = lambda t, x: np.exp(-0.5 * (x / sigma) ** 2) + 0.0 * np.asarray(t, dtype=float)
    # decays faster than any exponential; declare a representative rate
    return ExpEnvelope(fn, eps=1.0 / sigma, mode=DECAY, t_window=t_window,
                       x_window=x_window, name="gaussian_x", params={"sigma": sigma})


BUILTINS = {
    "constant": constant,
    "monomial_x": monomial_x,
    "exp_ax": exp_ax,
    "cos_x": cos_x,
    "gaussian_x": gaussian_x,
}


def rhs_from_json(data) -> Rhs:
    """Decode `{"poly_in_x": ...}` or `{"exp_envelope": ...}`."""
    if "poly_in_x" in data:
        return PolyInX([Poly.from_json(c) for c in data["poly_in_x"]])
    if "exp_envelope" in data:
        d = data["exp_envelope"]
        name = d.get("expr")
        if name not in BUILTINS:
            raise ValueError(f"unknown builtin rhs {name!r}")
        obj = BUILTINS[name](**d.get("params", {}))
        if "eps" in d:
            obj.eps = float(d["eps"])
        if "mode" in d:
            obj.mode = d["mode"]
        return obj
    raise ValueError("rhs spec must contain 'poly_in_x' or 'exp_envelope'")


# ---------------------------------------------------------------------------
# Seminorms and growth fitting
# ---------------------------------------------------------------------------


def default_grid(T: float, X: float = 30.0, nt: int = 257, nx: int = 1025):
    """Chebyshev points in t on [-T, T], uniform in x on [-X, X]."""
    kk = np.arange(nt)
    t = -T * np.cos(np.pi * kk / (nt - 1))
    x = np.linspace(-X, X, nx)
    return t, x


def seminorm(f: Rhs, eps: float, j: int, k: int, T: float, grid=None) -> float:
    """sup over the grid of e^{-eps|x|} |d_t^a1 d_x^a2 f| for a1<=j, a2<=k.

    This is a grid estimate of the sup; the default grid is documented in
    :func:`default_grid`.
    """
    if grid is None:
        grid = default_grid(T)
    t, x = grid
    t = np.asarray(t, dtype=float)
    t = t[np.abs(t) <= T + 1e-12]
    x = np.asarray(x, dtype=float)
    weight = np.exp(-eps * np.abs(x))[None, :]
    best = 0.0
    for a1 in range(j + 1):
        for a2 in range(k + 1):
            vals = f.partial(t[:, None], x[None, :], a1, a2)
            best = max(best, float(np.max(np.abs(vals) * weight)))
    return best


def fit_growth_eps(f: Rhs, strip=None, x_range=(10.0, 200.0), n_x: int = 48,
                   n_t: int = 33):
    """Fitted envelope rate: least-squares slope of ln sup_t |f(t, +-x)| vs |x|.

    The t-sup runs over the strip (clipped to a finite window) or [-1, 1].
    Raises :class:`FitFailureError` when the tail is non-monotone (for
    example an oscillating f) or vanishes.
    """
    if strip is not None:
        lo = strip.lower if math.isfinite(strip.lower) else strip.theta - 1.0
        hi = strip.upper if math.isfinite(strip.upper) else strip.theta + 1.0
        pad = 1e-6 * (hi - lo)
        tg = np.linspace(lo + pad, hi - pad, n_t)
    else:
        tg = np.linspace(-1.0, 1.0, n_t)
    xs = np.linspace(x_range[0], x_range[1], n_x)
    sup = np.empty(n_x)
    for i, xv in enumerate(xs):
        vals = np.abs(
            np.concatenate([np.atleast_1d(f(tg, xv)), np.atleast_1d(f(tg, -xv))])
        )
        sup[i] = np.max(vals)
    if np.any(sup <= 0.0):
        raise FitFailureError("sup |f| vanishes on the fit range")
    drops = np.sum(sup[1:] < 0.8 * sup[:-1])
    if drops > n_x // 10:
        raise FitFailureError("non-monotone tail; envelope slope is ill-defined")
    slope, _ = np.polyfit(xs, np.log(sup), 1)
    return float(slope)
