"""Orlicz-generating functions and the norms they induce on a discrete measure.

An :class:`NFunction` is an increasing continuous bijection of ``[0, inf)``
with ``N(0) = 0``.  Its adjoint ``N^(t) = 1 / N^{-1}(1/t)`` is again such a
function and the map ``N -> N^`` is an involution; ``N^(mu(A))`` is the
Orlicz norm of the indicator of ``A``.

All norm routines take ``mu`` as anything exposing ``.weights`` (a model
measure, a semigroup solver) or a raw array of node masses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .measure import as_values, as_weights, expectation_of, median_of

PROBES = np.logspace(-6, 6, 512)


def _bisect_increasing(fn, y, lo=1e-300, hi=1e300, iters=200):
    """Vectorised solve of fn(t) = y for increasing fn, bisecting in log t."""
    y = np.asarray(y, dtype=float)
    llo = np.full(y.shape, math.log(lo))
    lhi = np.full(y.shape, math.log(hi))
    for _ in range(iters):
        mid = 0.5 * (llo + lhi)
        with np.errstate(over="ignore", invalid="ignore"):
            above = fn(np.exp(mid)) >= y
        lhi = np.where(above, mid, lhi)
        llo = np.where(above, llo, mid)
        if np.all(lhi - llo < 1e-15):
            break
    return np.exp(0.5 * (llo + lhi))


@dataclass(frozen=True, eq=False)
class NFunction:
    name: str
    fn: Callable
    inv: Callable | None = None
    deriv: Callable | None = None
    conj: Callable | None = None
    is_young: bool = False
    spec: dict = field(default_factory=dict)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self.fn(np.maximum(t, 0.0)), 0.0)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.inv is not None:
            out = self.inv(np.maximum(y, 0.0))
        else:
            out = _bisect_increasing(self.fn, np.maximum(y, 1e-300))
        return np.where(y > 0, out, 0.0)

    def adjoint(self, t):
        """N^(t) = 1 / N^{-1}(1/t), extended by N^(0) = 0."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("adjoint is defined on [0, inf)")
        with np.errstate(divide="ignore", over="ignore"):
            inv = self.inverse(np.where(t > 0, 1.0 / np.where(t > 0, t, 1.0), 1.0))
            out = np.where(t > 0, 1.0 / inv, 0.0)
        if np.any(~np.isfinite(out)):
            raise OverflowError("adjoint out of floating point range")
        return out

    def wedge(self) -> "NFunction":
        """The adjoint as an NFunction in its own right."""
        base = self
        return NFunction(
            name=f"({self.name})^",
            fn=lambda t: 1.0 / base.inverse(1.0 / t),
            inv=lambda s: 1.0 / base(1.0 / s),
            spec={"kind": "adjoint", "of": self.spec},
        )

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.deriv is not None:
            return self.deriv(t)
        h = 1e-7 * np.maximum(t, 1e-300)
        return (self(t + h) - self(np.maximum(t - h, 0.0))) / (t + h - np.maximum(t - h, 0.0))

    def conjugate(self, s):
        """Legendre transform N*(s) = sup_t (s t - N(t)) for Young N."""
        s = np.asarray(s, dtype=float)
        if self.conj is not None:
            return self.conj(s)
        t = _bisect_increasing(lambda u: self.derivative(u), np.maximum(s, 1e-300))
        return np.where(s > 0, np.maximum(s * t - self(t), 0.0), 0.0)

    def qmono(self, q: float) -> bool:
        """Is N(t)^(1/q) / t non-decreasing (checked on log-spaced probes)?"""
        with np.errstate(divide="ignore"):
            g = np.log(self(PROBES)) / q - np.log(PROBES)
        return bool(np.all(np.diff(g) >= -1e-9 * np.maximum(1.0, np.abs(g[1:]))))

    def check_young(self) -> bool:
        t = np.logspace(-4, 4, 801)
        v = self(t)
        slope = np.diff(v) / np.diff(t)
        return bool(np.all(np.diff(slope) >= -1e-9 * np.abs(slope[1:])) and np.all(slope >= 0))


def power(q: float) -> NFunction:
    if not q >= 1:
        raise ValueError("power N-function needs exponent >= 1")

    def conj(s):
        if q == 1:
            return np.where(s <= 1, 0.0, np.inf)
        return (q - 1) * (s / q) ** (q / (q - 1))

    return NFunction(
        name=f"t^{q:g}",
        fn=lambda t: t ** q,
        inv=lambda y: y ** (1.0 / q),
        deriv=lambda t: q * t ** (q - 1) if q != 1 else np.ones_like(t),
        conj=conj,
        is_young=True,
        spec={"kind": "power", "q": q},
    )


def _log_log1p_exp(s):
    # log(log(1 + e^s)) without underflow for very negative s
    e = np.exp(np.minimum(s, 700.0))
    big = np.log(np.where(s > -30, np.log1p(e), 1.0))
    small = s - 0.5 * np.exp(np.minimum(s, 0.0))
    return np.where(s > -30, big, small)


def _phi_inverse(q):
    def inv(y):
        y = np.asarray(y, dtype=float)
        ly = np.log(np.where(y > 0, y, 1.0))
        # s = log(u), u = t^q; solve s + log log(1+e^s) = log y
        s = np.where(ly < 0, 0.5 * ly, ly - np.log(np.log1p(np.where(y > 0, y, 1.0))))
        for _ in range(100):
            h = s + _log_log1p_exp(s) - ly
            e = np.exp(np.minimum(s, 700.0))
            l1 = np.where(s > -30, np.log1p(e), np.exp(np.minimum(s, 0.0)))
            dh = 1.0 + np.where(s > -30, e / ((1.0 + e) * l1), 1.0)
            step = np.clip(h / dh, -5.0, 5.0)
            s = s - step
            if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(s))):
                break
        return np.where(y > 0, np.exp(s / q), 0.0)

    return inv


def phi_q(q: float) -> NFunction:
    """t^q log(1 + t^q): the Orlicz form of the q-log-Sobolev inequality."""
    if not 1 <= q <= 2:
        raise ValueError("phi_q is provided for q in [1, 2]")

    def fn(t):
        u = t ** q
        return u * np.log1p(u)

    def deriv(t):
        u = t ** q
        with np.errstate(divide="ignore", invalid="ignore"):
            out = q * t ** (q - 1) * (np.log1p(u) + u / (1 + u))
        return np.where(t > 0, out, 0.0)

    N = NFunction(name=f"phi_{q:g}", fn=fn, inv=_phi_inverse(q), deriv=deriv,
                  spec={"kind": "phi_q", "q": q})
    object.__setattr__(N, "is_young", N.check_young())
    return N


def table(points) -> NFunction:
    """N-function from (t, N(t)) pairs, log-log linear with power-law ends."""
    pts = np.asarray(points, dtype=float)
    pts = pts[pts[:, 0] > 0]
    t, v = pts[:, 0], pts[:, 1]
    if t.size < 2 or np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0) or np.any(v <= 0):
        raise ValueError("table N-function needs increasing positive points")
    lt, lv = np.log(t), np.log(v)
    s0 = (lv[1] - lv[0]) / (lt[1] - lt[0])
    s1 = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])
    if s0 <= 0 or s1 <= 0:
        raise ValueError("table N-function must be strictly increasing at its ends")

    def interp(x, xs, ys, a0, a1):
        x = np.asarray(x, dtype=float)
        y = np.interp(x, xs, ys)
        y = np.where(x < xs[0], ys[0] + a0 * (x - xs[0]), y)
        return np.where(x > xs[-1], ys[-1] + a1 * (x - xs[-1]), y)

    def fn(x):
        with np.errstate(divide="ignore"):
            return np.exp(interp(np.log(x), lt, lv, s0, s1))

    def inv(y):
        with np.errstate(divide="ignore"):
            return np.exp(interp(np.log(y), lv, lt, 1 / s0, 1 / s1))

    N = NFunction(name="table", fn=fn, inv=inv, spec={"kind": "table", "points": pts.tolist()})
    object.__setattr__(N, "is_young", N.check_young())
    return N


def from_config(spec) -> NFunction:
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    if kind == "power":
        return power(float(spec["q"]))
    if kind == "phi_q":
        return phi_q(float(spec["q"]))
    if kind == "table":
        return table(spec["points"])
    raise ValueError(f"unknown N-function kind {kind!r}")


# ---------------------------------------------------------------------------
# norms


def _prob_weights(mu):
    w = as_weights(mu)
    return w / w.sum()


def orlicz_norm(mu, f, N: NFunction) -> float:
    """Luxemburg norm inf{v > 0 : int N(|f|/v) dmu <= 1}."""
    w = _prob_weights(mu)
    a = np.abs(as_values(f))
    if a.shape != w.shape:
        raise ValueError("function is not sampled on the measure's grid")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite samples")
    a = np.where(w > 0, a, 0.0)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0

    def excess(v):
        with np.errstate(over="ignore"):
            return float(np.dot(w, N(a / v))) - 1.0

    v_hi = top / float(N.inverse(1.0))
    while excess(v_hi) > 0:
        v_hi *= 2.0
    v_lo = v_hi
    for _ in range(2000):
        if excess(v_lo) >= 0:
            break
        v_lo *= 0.5
    else:
        return 0.0
    lo, hi = math.log(v_lo), math.log(v_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(math.exp(mid)) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return math.exp(0.5 * (lo + hi))


def weak_orlicz_norm(mu, f, N: NFunction) -> float:
    """sup_t N^(mu{|f| >= t}) t over the distinct levels of |f| and their midpoints."""
    w = _prob_weights(mu)
    a = np.abs(as_values(f))
    if a.shape != w.shape:
        raise ValueError("function is not sampled on the measure's grid")
    keep = (a > 0) & (w > 0)
    if not np.any(keep):
        return 0.0
    a, w = a[keep], w[keep]
    levels, inv = np.unique(a, return_inverse=True)
    mass = np.bincount(inv, weights=w)
    tail = np.cumsum(mass[::-1])[::-1]          # mu{|f| >= level_k}
    tail = np.minimum(tail, 1.0)
    best = np.max(N.adjoint(tail) * levels)
    if levels.size > 1:
        mids = 0.5 * (levels[1:] + levels[:-1])
        best = max(best, float(np.max(N.adjoint(tail[1:]) * mids)))
    return float(best)


def dual_norm_indicator(mu, A_mass: float, N: NFunction) -> float:
    """Dual-norm of an indicator: mu(A) N^{-1}(1/mu(A)) = mu(A) / N^(mu(A))."""
    if not 0 < A_mass <= 1:
        raise ValueError("indicator mass must lie in (0, 1]")
    return float(A_mass / N.adjoint(A_mass))


def centered_indicator_dual_bound(m: float, N: NFunction, crude: bool = False) -> float:
    """Upper bound for the dual norm of chi_A - mu(A) with mu(A) = m."""
    if not 0 < m < 1:
        raise ValueError("mass must lie in (0, 1)")
    if crude:
        return float(2 * m * (1 - m) / N.adjoint(min(m, 1 - m)))
    return float(m * (1 - m) * (1 / N.adjoint(m) + 1 / N.adjoint(1 - m)))


def dual_norm(mu, f, N: NFunction) -> float:
    """Norm of f in the dual of the Luxemburg space L_N(mu).

    Uses the Amemiya formula inf_k (1 + int N*(k|f|) dmu) / k; every k gives
    an upper bound, the minimiser gives the exact value on the discrete
    measure.
    """
    w = _prob_weights(mu)
    a = np.abs(as_values(f))
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    if N.spec.get("kind") == "power" and N.spec.get("q") == 1:
        return top

    def obj(lk):
        k = math.exp(lk)
        with np.errstate(over="ignore"):
            return (1.0 + float(np.dot(w, N.conjugate(k * a)))) / k

    # bracket the minimiser in log k
    l0 = -math.log(top)
    lo, hi = l0 - 40, l0 + 40
    grid = np.linspace(lo, hi, 161)
    vals = np.empty_like(grid)
    rows = max(1, 400_000 // max(a.size, 1))
    for i in range(0, grid.size, rows):
        k = np.exp(grid[i:i + rows])
        with np.errstate(over="ignore"):
            vals[i:i + rows] = (1.0 + N.conjugate(np.outer(k, a)) @ w) / k
    i = int(np.nanargmin(vals))
    a_, b_ = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(obj, bounds=(a_, b_), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, vals[i]))


def recentering_ratio(mu, f, N: NFunction) -> float:
    """||f - M f||_N / ||f - E f||_N; lies in [1/2, 3] for Young N."""
    v = as_values(f)
    spread = v.max() - v.min() if v.size else 0.0
    if spread <= 1e-14 * max(1.0, float(np.max(np.abs(v)))):
        raise ValueError("degenerate input: constant function")
    med = median_of(mu, v)
    mean = expectation_of(mu, v)
    return orlicz_norm(mu, v - med, N) / orlicz_norm(mu, v - mean, N)
