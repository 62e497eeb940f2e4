"""One-dimensional model measures ``exp(-psi(x)) dx`` on an interval.

A :class:`ModelMeasure1D` bundles the potential and its derivatives, the
normalisation, CDF / quantile, the semi-convexity modulus
``kappa = sup max(-psi'', 0)`` and a composite Gauss-Legendre grid whose
weights are the mu-masses of the nodes.  Functions on the measure are
represented by their samples on that grid (:class:`GridFunction`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

_GL16 = np.polynomial.legendre.leggauss(16)

from .quadrature import gauss_legendre_panels

# rho < TAIL_CUT * max(rho) is dropped from unbounded supports
TAIL_CUT = 1e-16
LOG_TAIL = -math.log(TAIL_CUT)
GL_ORDER = 8
DEFAULT_GRID = 2048
MASS_DEFECT_MAX = 1e-8


@dataclass(frozen=True)
class GridFunction:
    """Samples of a function (and optionally its derivative) on grid nodes."""

    values: np.ndarray
    grad: np.ndarray | None = None

    @classmethod
    def from_callable(cls, nodes, f, df=None) -> "GridFunction":
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(f(nodes), dtype=float)
        if df is None:
            h = 1e-6 * np.maximum(1.0, np.abs(nodes))
            grad = (np.asarray(f(nodes + h)) - np.asarray(f(nodes - h))) / (2 * h)
        else:
            grad = np.asarray(df(nodes), dtype=float)
        return cls(values, grad)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_values(f) -> np.ndarray:
    if isinstance(f, GridFunction):
        return np.asarray(f.values, dtype=float)
    return np.asarray(f, dtype=float)


def as_weights(mu) -> np.ndarray:
    """mu-weights of anything carrying a discrete measure (or a raw array)."""
    w = getattr(mu, "weights", mu)
    return np.asarray(w, dtype=float)


@dataclass(frozen=True, eq=False)
class ModelMeasure1D:
    name: str
    params: dict
    support: tuple[float, float]          # nominal support, may be infinite
    x_lo: float                            # effective (truncated) support
    x_hi: float
    V: Callable                            # unnormalised potential; psi = V + log_norm
    dV: Callable
    d2V: Callable
    log_norm: float
    kappa: float
    log_concave: bool
    semi_convex: bool
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    breaks: np.ndarray = field(repr=False)
    mass_defect: float = 0.0
    _cdf: Callable | None = field(default=None, repr=False)
    _quantile: Callable | None = field(default=None, repr=False)
    _table: tuple | None = field(default=None, repr=False)

    # -- potential and density -------------------------------------------
    def psi(self, x):
        return self.V(np.asarray(x, dtype=float)) + self.log_norm

    def psi1(self, x):
        return self.dV(np.asarray(x, dtype=float))

    def psi2(self, x):
        return self.d2V(np.asarray(x, dtype=float))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            rho = np.exp(-self.psi(x))
        inside = (x >= self.support[0]) & (x <= self.support[1])
        return np.where(inside, np.nan_to_num(rho, nan=0.0), 0.0)

    # -- distribution ----------------------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self._cdf is not None:
            out = self._cdf(np.clip(x, self.support[0], self.support[1]))
        else:
            out = self._table_cdf(np.clip(x, self.x_lo, self.x_hi))
        out = np.where(x <= self.support[0], 0.0, out)
        return np.clip(np.where(x >= self.support[1], 1.0, out), 0.0, 1.0)

    def quantile(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)) or np.any(np.isnan(t)):
            raise ValueError("quantile level must lie in [0, 1]")
        if self._quantile is not None:
            x = self._quantile(t)
        else:
            x = self._table_quantile(t)
        x = np.where(t <= 0, self.x_lo, x)
        return np.clip(np.where(t >= 1, self.x_hi, x), self.x_lo, self.x_hi)

    def _table_cdf(self, x):
        breaks, cum = self._table
        k = np.clip(np.searchsorted(breaks, x, side="right") - 1, 0, len(breaks) - 2)
        left = breaks[k]
        gx, gw = _GL16
        half = 0.5 * (x - left)
        pts = (left + half)[..., None] + half[..., None] * gx
        part = np.sum(half[..., None] * gw * self.density(pts), axis=-1)
        return cum[k] + part

    def _table_quantile(self, t):
        breaks, cum = self._table
        t = np.asarray(t, dtype=float)
        shape = t.shape
        t = t.ravel()
        x = np.clip(np.interp(t, cum, breaks), self.x_lo, self.x_hi)
        lo = np.full_like(x, self.x_lo)
        hi = np.full_like(x, self.x_hi)
        active = np.arange(x.size)
        for _ in range(60):
            if active.size == 0:
                break
            xa, ta = x[active], t[active]
            F = self._table_cdf(xa) - ta
            lo[active] = np.where(F < 0, xa, lo[active])
            hi[active] = np.where(F >= 0, xa, hi[active])
            rho = self.density(xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                nxt = xa - np.where(rho > 0, F / rho, np.inf)
            la, ha = lo[active], hi[active]
            bad = ~np.isfinite(nxt) | (nxt <= la) | (nxt >= ha)
            nxt = np.where(bad, 0.5 * (la + ha), nxt)
            x[active] = nxt
            scale = np.maximum(1.0, np.abs(nxt))
            done = (np.abs(nxt - xa) <= 1e-14 * scale) | (ha - la <= 1e-15 * scale)
            active = active[~done]
        return x.reshape(shape)

    # -- integration against mu -------------------------------------------
    def expectation_of(self, f) -> float:
        return expectation_of(self, f)

    def median_of(self, f) -> float:
        return median_of(self, f)

    def effective_domain(self) -> dict:
        return {"nominal": list(self.support), "effective": [self.x_lo, self.x_hi]}


def expectation_of(mu, f) -> float:
    w = as_weights(mu)
    v = as_values(f)
    if v.shape != w.shape:
        raise ValueError("function is not sampled on the measure's grid")
    return float(np.dot(w, v) / w.sum())


def median_of(mu, f) -> float:
    """Smallest value M with mu(f <= M) >= 1/2 (then also mu(f >= M) >= 1/2)."""
    w = as_weights(mu)
    v = as_values(f)
    if v.shape != w.shape:
        raise ValueError("function is not sampled on the measure's grid")
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order]) / w.sum()
    k = int(np.searchsorted(cum, 0.5 - 1e-12))
    return float(v[order][min(k, v.size - 1)])


# ---------------------------------------------------------------------------
# grid construction


def _geometric_breaks(point, far, layers, ratio=0.5):
    # breakpoints from `far` toward `point` with geometrically shrinking panels
    d = far - point
    return point + d * ratio ** np.arange(0, layers + 1)


def _build_breaks(lo, hi, n_panels, dV, graded=()):
    graded = sorted(p for p in graded if lo < p < hi)
    cuts = [lo, *graded, hi]
    pieces = list(zip(cuts[:-1], cuts[1:]))
    n_geo = min(max(n_panels // 8, 0), 48) if graded else 0
    n_rest = max(n_panels - 2 * n_geo * len(graded), len(pieces))

    # monitor: mild clustering where |psi'| is large
    probe = np.linspace(lo, hi, 4097)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        g = np.abs(np.asarray(dV(probe), dtype=float))
    g = np.where(np.isfinite(g), g, 0.0)
    scale = np.max(g) if np.max(g) > 0 else 1.0
    monitor = 1.0 + np.minimum(g / scale, 1.0)

    breaks = []
    lengths = np.array([b - a for a, b in pieces])
    share = np.maximum(1, np.round(n_rest * lengths / lengths.sum()).astype(int))
    for (a, b), n in zip(pieces, share):
        lo_geo = a in graded
        hi_geo = b in graded
        a_in = a + (b - a) / 4 if lo_geo and n_geo else a
        b_in = b - (b - a) / 4 if hi_geo and n_geo else b
        if lo_geo and n_geo:
            breaks.extend(_geometric_breaks(a, a_in, n_geo)[::-1][1:-1])
            breaks.append(a)
        xs = np.linspace(a_in, b_in, 257)
        m = np.interp(xs, probe, monitor)
        cm = np.concatenate([[0.0], np.cumsum(0.5 * (m[1:] + m[:-1]) * np.diff(xs))])
        inner = np.interp(np.linspace(0, cm[-1], n + 1), cm, xs)
        breaks.extend(inner)
        if hi_geo and n_geo:
            breaks.extend(_geometric_breaks(b, b_in, n_geo)[1:-1])
    breaks.append(hi)
    return np.unique(np.array(breaks, dtype=float))


def _make(name, params, support, x_lo, x_hi, V, dV, d2V, *, kappa, log_concave,
          semi_convex, grid_size, log_norm=None, cdf=None, quantile=None, graded=()):
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    n_panels = max(grid_size // GL_ORDER, 8)
    breaks = _build_breaks(x_lo, x_hi, n_panels, dV, graded)
    nodes, gw = gauss_legendre_panels(breaks, GL_ORDER)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vmin = np.nanmin(np.where(np.isfinite(V(nodes)), V(nodes), np.inf))
    table = None
    if log_norm is None:
        # normalisation from a fine independent panel rule
        fine = np.linspace(x_lo, x_hi, 4001)
        fine = np.unique(np.concatenate([fine, breaks]))
        fn, fw = gauss_legendre_panels(fine, 16)
        with np.errstate(divide="ignore", over="ignore"):
            Z = float(np.dot(fw, np.exp(-(V(fn) - vmin))))
        log_norm = math.log(Z) - vmin
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        rho = np.exp(-(V(nodes) + log_norm))
    rho = np.nan_to_num(rho, nan=0.0, posinf=0.0)
    weights = gw * rho
    defect = abs(weights.sum() - 1.0)
    if defect > MASS_DEFECT_MAX:
        raise ValueError(f"grid too small to resolve {name}: mass defect {defect:.2e}")
    mu = ModelMeasure1D(name=name, params=dict(params), support=support, x_lo=x_lo, x_hi=x_hi,
                        V=V, dV=dV, d2V=d2V, log_norm=float(log_norm), kappa=float(kappa),
                        log_concave=log_concave, semi_convex=semi_convex, nodes=nodes,
                        weights=weights, breaks=breaks, mass_defect=float(defect),
                        _cdf=cdf, _quantile=quantile)
    if cdf is None:
        tb = np.unique(np.concatenate([np.linspace(x_lo, x_hi, 2049), breaks]))
        pn, pw = gauss_legendre_panels(tb, 16)
        cell = (pw * mu.density(pn)).reshape(-1, 16).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(cell)])
        cum /= cum[-1]
        object.__setattr__(mu, "_table", (tb, cum))
    return mu


# ---------------------------------------------------------------------------
# built-in measures


def gaussian(grid_size: int = DEFAULT_GRID) -> ModelMeasure1D:
    cut = math.sqrt(2 * LOG_TAIL)
    return _make("gaussian", {}, (-math.inf, math.inf), -cut, cut,
                 lambda x: 0.5 * np.square(x), lambda x: np.asarray(x, float),
                 lambda x: np.ones_like(np.asarray(x, float)),
                 kappa=0.0, log_concave=True, semi_convex=True, grid_size=grid_size,
                 log_norm=0.5 * math.log(2 * math.pi), cdf=special.ndtr, quantile=special.ndtri)


def p_exponential(p: float, grid_size: int = DEFAULT_GRID) -> ModelMeasure1D:
    """Density exp(-|x|^p) / Z_p with Z_p = 2 Gamma(1 + 1/p)."""
    if not p >= 1:
        raise ValueError("p_exponential needs p >= 1")
    cut = LOG_TAIL ** (1.0 / p)

    def V(x):
        return np.abs(x) ** p

    def dV(x):
        x = np.asarray(x, float)
        return p * np.sign(x) * np.abs(x) ** (p - 1)

    def d2V(x):
        # essential value away from 0 for p < 2
        x = np.asarray(x, float)
        if p == 1:
            return np.zeros_like(x)
        with np.errstate(divide="ignore"):
            return p * (p - 1) * np.abs(x) ** (p - 2)

    def cdf(x):
        return 0.5 + 0.5 * np.sign(x) * special.gammainc(1.0 / p, np.abs(x) ** p)

    def quantile(t):
        s = 2.0 * t - 1.0
        return np.sign(s) * special.gammaincinv(1.0 / p, np.abs(s)) ** (1.0 / p)

    smooth = float(p).is_integer() and int(p) % 2 == 0
    return _make(f"p_exponential({p:g})", {"p": p}, (-math.inf, math.inf), -cut, cut, V, dV, d2V,
                 kappa=0.0, log_concave=True, semi_convex=True, grid_size=grid_size,
                 log_norm=math.log(2 * math.gamma(1 + 1 / p)), cdf=cdf, quantile=quantile,
                 graded=() if smooth else (0.0,))


def uniform_interval(a: float = -1.0, b: float = 1.0, grid_size: int = DEFAULT_GRID) -> ModelMeasure1D:
    if not b > a:
        raise ValueError("uniform_interval needs a < b")
    zero = lambda x: np.zeros_like(np.asarray(x, float))  # noqa: E731
    return _make(f"uniform_interval({a:g},{b:g})", {"a": a, "b": b}, (a, b), a, b, zero, zero, zero,
                 kappa=0.0, log_concave=True, semi_convex=True, grid_size=grid_size,
                 log_norm=math.log(b - a), cdf=lambda x: (x - a) / (b - a),
                 quantile=lambda t: a + (b - a) * t)


def power_alpha(alpha: float, grid_size: int = DEFAULT_GRID) -> ModelMeasure1D:
    """(1+alpha)/2 |x|^alpha on [-1, 1]; vanishes at 0, hence not semi-convex."""
    if not alpha > 0:
        raise ValueError("power_alpha needs alpha > 0")

    def V(x):
        with np.errstate(divide="ignore"):
            return -alpha * np.log(np.abs(x))

    def dV(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return -alpha / np.asarray(x, float)

    def d2V(x):
        with np.errstate(divide="ignore"):
            return alpha / np.square(x)

    def cdf(x):
        return 0.5 + 0.5 * np.sign(x) * np.abs(x) ** (1 + alpha)

    def quantile(t):
        s = 2.0 * t - 1.0
        return np.sign(s) * np.abs(s) ** (1.0 / (1 + alpha))

    return _make(f"power_alpha({alpha:g})", {"alpha": alpha}, (-1.0, 1.0), -1.0, 1.0, V, dV, d2V,
                 kappa=math.inf, log_concave=False, semi_convex=False, grid_size=grid_size,
                 log_norm=-math.log((1 + alpha) / 2), cdf=cdf, quantile=quantile, graded=(0.0,))


def double_well(grid_size: int = DEFAULT_GRID) -> ModelMeasure1D:
    """psi = x^4/4 - x^2/2 (+ const); psi'' = 3x^2 - 1 >= -1, so kappa = 1."""
    V = lambda x: 0.25 * np.asarray(x, float) ** 4 - 0.5 * np.asarray(x, float) ** 2  # noqa: E731
    dV = lambda x: np.asarray(x, float) ** 3 - np.asarray(x, float)  # noqa: E731
    d2V = lambda x: 3 * np.asarray(x, float) ** 2 - 1  # noqa: E731
    # V - min V = (x^2 - 1)^2 / 4
    cut = math.sqrt(1 + 2 * math.sqrt(LOG_TAIL))
    return _make("double_well", {}, (-math.inf, math.inf), -cut, cut, V, dV, d2V,
                 kappa=1.0, log_concave=False, semi_convex=True, grid_size=grid_size)


def tabulated(x, psi, grid_size: int = DEFAULT_GRID, name: str = "tabulated") -> ModelMeasure1D:
    """Custom measure from (x, psi(x)) pairs, cubic-spline interpolated."""
    x = np.asarray(x, float)
    psi = np.asarray(psi, float)
    if x.ndim != 1 or x.size < 4 or x.shape != psi.shape or np.any(np.diff(x) <= 0):
        raise ValueError("tabulated measure needs >= 4 increasing x with matching psi")
    spl = CubicSpline(x, psi)
    d1, d2 = spl.derivative(1), spl.derivative(2)
    probe = np.linspace(x[0], x[-1], 8193)
    kappa = float(max(0.0, np.max(-d2(probe))))
    return _make(name, {"x": x.tolist(), "psi": psi.tolist()}, (float(x[0]), float(x[-1])),
                 float(x[0]), float(x[-1]), spl, d1, d2, kappa=kappa,
                 log_concave=kappa == 0.0, semi_convex=True, grid_size=grid_size)


BUILTINS = {
    "gaussian": gaussian,
    "p_exponential": p_exponential,
    "uniform_interval": uniform_interval,
    "power_alpha": power_alpha,
    "double_well": double_well,
}


def make_builtin(kind: str, *args, grid_size: int = DEFAULT_GRID, **kwargs) -> ModelMeasure1D:
    if kind not in BUILTINS:
        raise ValueError(f"unknown measure kind {kind!r}")
    return BUILTINS[kind](*args, grid_size=grid_size, **kwargs)


def from_config(spec) -> ModelMeasure1D:
    """Build a measure from a JSON object or string.

    ``{"kind": "p_exponential", "p": 4, "grid_size": 2048}``,
    ``{"kind": "tabulated", "x": [...], "psi": [...]}``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    spec = dict(spec)
    kind = spec.pop("kind")
    grid_size = int(spec.pop("grid_size", DEFAULT_GRID))
    if kind == "tabulated":
        return tabulated(spec["x"], spec["psi"], grid_size=grid_size)
    return make_builtin(kind, grid_size=grid_size, **spec)

