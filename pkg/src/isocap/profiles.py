"""Isoperimetric and capacity profiles of one-dimensional measures.

Half-lines are the candidate family for the isoperimetric and capacity
problems; they are extremal for symmetric log-concave measures.  For
measures that are not log-concave the isoperimetric search is widened to
unions of at most two intervals, and every returned value is then only an
upper bound (a "candidate-family value").

Two independent oracles are provided: :func:`cap1_grid_oracle` solves the
discrete 1-capacity problem by enumeration and :func:`capq_grid_oracle`
solves the discrete q-capacity problem in closed form on a uniform cell
grid.  Neither touches the quantile function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .quadrature import tanh_sinh

INF = math.inf


# ---------------------------------------------------------------------------
# isoperimetric profile


def _boundary_cost(mu, u):
    """rho(Q(u)) with zero cost at u in {0, 1} (support ends carry no boundary)."""
    u = np.asarray(u, dtype=float)
    inner = (u > 0) & (u < 1)
    x = mu.quantile(np.where(inner, u, 0.5))
    return np.where(inner, mu.density(x), 0.0)


def _halfline(mu, t):
    t = np.asarray(t, dtype=float)
    left = _boundary_cost(mu, t)          # A = (-inf, Q(t)]
    right = _boundary_cost(mu, 1.0 - t)   # A = [Q(1 - t), inf)
    return left, right


@dataclass(frozen=True)
class IsoCandidate:
    value: float
    kind: str           # "halfline-left", "halfline-right", "interval", "two-interval"
    endpoints: tuple


def _special_points(mu, n_coarse):
    u = list(np.linspace(0.0, 1.0, n_coarse + 1))
    rho = mu.density(mu.nodes)
    interior = np.flatnonzero((rho[1:-1] <= rho[:-2]) & (rho[1:-1] <= rho[2:])) + 1
    if interior.size:
        u.extend(np.clip(mu.cdf(mu.nodes[interior]), 0.0, 1.0))
    # exact zeros of the density inside the support sit at breakpoints
    zeros = mu.breaks[1:-1][mu.density(mu.breaks[1:-1]) == 0.0]
    if zeros.size:
        u.extend(np.clip(mu.cdf(zeros), 0.0, 1.0))
    return np.unique(np.asarray(u))


@lru_cache(maxsize=16)
def _cost_table(mu):
    # (u, rho(Q(u))) sampled at the quadrature nodes, used only for screening
    x = np.concatenate([[mu.x_lo], mu.nodes, [mu.x_hi]])
    u = np.clip(mu.cdf(x), 0.0, 1.0)
    b = mu.density(x)
    b[0] = b[-1] = 0.0
    u, keep = np.unique(u, return_index=True)
    return u, b[keep]


def _screen_cost(mu, u):
    tu, tb = _cost_table(mu)
    out = np.interp(u, tu, tb)
    return np.where((u > 0) & (u < 1), out, 0.0)


def _search_mass(mu, t, S, n_fine=2048, n_exact=64):
    """Best union of <= 2 intervals of mass t, in quantile coordinates.

    Candidates are ranked with an interpolated boundary cost; the best
    ``n_exact`` of each family are then re-evaluated exactly, so the returned
    value is the boundary measure of an actual set.
    """
    shortlist = []   # (kind, stacked endpoints of the screened candidates)

    def consider(ends, kind):
        ends = [np.asarray(e) for e in ends]
        approx = sum(_screen_cost(mu, e) for e in ends)
        k = min(n_exact, approx.size)
        if k == 0:
            return
        idx = np.argpartition(approx, k - 1)[:k]
        shortlist.append((kind, np.stack([e[idx] for e in ends])))

    # one interval [u1, u1 + t], u1 on a fine grid and at special points
    u1 = np.concatenate([np.linspace(0.0, 1.0 - t, n_fine + 1), S[S <= 1.0 - t], S[S >= t] - t])
    u1 = np.clip(u1, 0.0, 1.0 - t)
    consider((u1, u1 + t), "interval")
    # two intervals [u1,u2] u [u3,u4] with three endpoints special, one solved
    A, B, C = np.meshgrid(np.arange(S.size), np.arange(S.size), np.arange(S.size), indexing="ij")
    ok = (A < B) & (B < C)
    a, b, c = S[A[ok]], S[B[ok]], S[C[ok]]
    layouts = (
        (c + t - (b - a), lambda f: (f > c) & (f <= 1.0), lambda f: (a, b, c, f)),
        (c - t + (b - a), lambda f: (f > b) & (f < c), lambda f: (a, b, f, c)),
        (a + t - (c - b), lambda f: (f > a) & (f < b), lambda f: (a, f, b, c)),
        (a - t + (c - b), lambda f: (f >= 0.0) & (f < a), lambda f: (f, a, b, c)),
    )
    for free, valid, ends in layouts:
        m = valid(free)
        if np.any(m):
            consider([e[m] for e in ends(free)], "two-interval")
    if not shortlist:
        return IsoCandidate(INF, "", ())
    # exact re-evaluation of every shortlisted set in a single quantile call
    flat = np.concatenate([e.ravel() for _, e in shortlist])
    cost = _boundary_cost(mu, flat)
    best, pos = IsoCandidate(INF, "", ()), 0
    for kind, e in shortlist:
        exact = cost[pos:pos + e.size].reshape(e.shape).sum(axis=0)
        pos += e.size
        j = int(np.argmin(exact))
        if exact[j] < best.value:
            best = IsoCandidate(float(exact[j]), kind, tuple(float(v) for v in e[:, j]))
    return best


def iso_candidate(mu, t: float, *, search: bool | None = None, n_coarse: int = 64) -> IsoCandidate:
    """Best boundary measure found for sets of mass ``t``, with the winning set."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t in (0.0, 1.0):
        return IsoCandidate(0.0, "empty" if t == 0 else "full", ())
    left, right = (float(v) for v in _halfline(mu, t))
    if left <= right:
        best = IsoCandidate(left, "halfline-left", (0.0, t))
    else:
        best = IsoCandidate(right, "halfline-right", (1.0 - t, 1.0))
    if search is None:
        search = not mu.log_concave
    if search:
        S = _special_points(mu, n_coarse)
        for mass, flip in ((t, False), (1.0 - t, True)):
            cand = _search_mass(mu, mass, S)
            if cand.value < best.value:
                best = IsoCandidate(cand.value, cand.kind + ("-complement" if flip else ""),
                                    cand.endpoints)
    return best


def iso_profile(mu, t, *, search: bool | None = None):
    """Isoperimetric profile I(t); scalar or array ``t``.

    For log-concave measures this is the boundary density of the best
    half-line of mass ``t``.  Otherwise the two-interval search is added and
    the value is an upper bound.
    """
    if search is None:
        search = not mu.log_concave
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1)):
        raise ValueError("t must lie in [0, 1]")
    if not search:
        left, right = _halfline(mu, t_arr)
        out = np.minimum(left, right)
        out = np.where((t_arr == 0) | (t_arr == 1), 0.0, out)
    else:
        flat = [iso_candidate(mu, s, search=True).value for s in t_arr.ravel()]
        out = np.asarray(flat).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def iso_tilde(mu, t, *, search: bool | None = None):
    """Two-sided profile min(I(t), I(1 - t)) for t in [0, 1/2]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 0.5)):
        raise ValueError("t must lie in [0, 1/2]")
    a = np.asarray(iso_profile(mu, t_arr, search=search))
    b = np.asarray(iso_profile(mu, 1.0 - t_arr, search=search))
    out = np.minimum(a, b)
    return float(out) if out.ndim == 0 else out


def d_lin_estimate(mu, t_grid, *, search: bool | None = None) -> tuple[float, float]:
    """min over the grid of I~(t) / t; returns (value, minimising t)."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any((t_grid <= 0) | (t_grid > 0.5)):
        raise ValueError("t-grid must lie in (0, 1/2]")
    ratio = np.asarray(iso_tilde(mu, t_grid, search=search)) / t_grid
    k = int(np.argmin(ratio))
    return float(ratio[k]), float(t_grid[k])


# ---------------------------------------------------------------------------
# 1-capacity


@dataclass(frozen=True)
class Cap1Result:
    value: float
    argmin: float
    jump_detected: bool


def cap1_detail(mu, a: float, b: float, *, n: int = 2048, search: bool | None = None) -> Cap1Result:
    if not 0 < a <= b < 1:
        raise ValueError("need 0 < a <= b < 1")
    if a == b:
        v = iso_profile(mu, a, search=search)
        return Cap1Result(float(v), a, False)
    if search is None:
        search = not mu.log_concave
    if mu.log_concave and not search:
        # I is concave for log-concave measures, so the infimum over an
        # interval sits at an endpoint
        va, vb = iso_profile(mu, a, search=False), iso_profile(mu, b, search=False)
        return Cap1Result(float(min(va, vb)), a if va <= vb else b, False)
    ts = np.linspace(a, b, (n if not search else 64) + 1)
    vals = np.asarray(iso_profile(mu, ts, search=search))
    k = int(np.argmin(vals))
    best, where = float(vals[k]), float(ts[k])
    if 0 < k < ts.size - 1:
        res = minimize_scalar(lambda s: iso_profile(mu, s, search=search),
                              bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                              options={"xatol": 1e-13})
        if res.fun < best:
            best, where = float(res.fun), float(res.x)
    steps = np.abs(np.diff(vals))
    scale = np.median(steps) if steps.size else 0.0
    jump = bool(steps.size and steps.max() > 1e3 * max(scale, 1e-15) and steps.max() > 1e-6)
    return Cap1Result(best, where, jump)


def cap1_profile(mu, a: float, b: float, **kw) -> float:
    """Cap_1(a, b) as the infimum of I over the closed interval [a, b]."""
    return cap1_detail(mu, a, b, **kw).value


def _cells(mu, n):
    lo, hi = mu.x_lo, mu.x_hi
    faces = np.linspace(lo, hi, n + 1)
    h = (hi - lo) / n
    g, w = np.polynomial.legendre.leggauss(3)
    mid = 0.5 * (faces[1:] + faces[:-1])
    pts = mid[:, None] + 0.5 * h * g[None, :]
    mass = 0.5 * h * (mu.density(pts) * w[None, :]).sum(axis=1)
    return faces, h, mass / mass.sum()


def cap1_grid_oracle(mu, a: float, b: float, grid_size: int = 2048, *,
                     two_transitions: bool | None = None, chunk: int = 512) -> float:
    """Discrete 1-capacity by enumeration of transition configurations.

    The domain is cut into ``grid_size`` equal cells; a competitor is 0 or 1
    on every cell except one or two transition cells where it ramps linearly.
    A ramp across cell i costs its mass divided by its width.
    """
    if not 0 < a <= b < 1:
        raise ValueError("need 0 < a <= b < 1")
    _, h, m = _cells(mu, grid_size)
    w = m / h
    left = np.concatenate([[0.0], np.cumsum(m)[:-1]])      # mass strictly left of cell i
    right = 1.0 - left - m                                  # mass strictly right
    tol = 1e-12
    best = INF
    # one transition: 0 on one side, 1 on the other
    ok = ((right >= a - tol) & (left >= 1 - b - tol)) | ((left >= a - tol) & (right >= 1 - b - tol))
    if np.any(ok):
        best = float(w[ok].min())
    if two_transitions is None:
        two_transitions = not mu.log_concave
    if two_transitions:
        n = m.size
        for s in range(0, n, chunk):
            i = np.arange(s, min(s + chunk, n))[:, None]
            j = np.arange(n)[None, :]
            inner = left[j] - left[i] - m[i]        # mass strictly between i and j (j > i)
            outer = left[i] + right[j]
            valid = j > i
            one_in = (inner >= a - tol) & (outer >= 1 - b - tol)
            one_out = (outer >= a - tol) & (inner >= 1 - b - tol)
            cost = np.where(valid & (one_in | one_out), w[i] + w[j], INF)
            best = min(best, float(cost.min()))
    return best


# ---------------------------------------------------------------------------
# q-capacity


@dataclass(frozen=True)
class CapacityQuery:
    a: float
    b: float
    q: float

    def __post_init__(self):
        if not 0 < self.a <= self.b < 1:
            raise ValueError("need 0 < a <= b < 1")
        if not self.q >= 1:
            raise ValueError("need q >= 1")


@dataclass(frozen=True)
class HalflineCapacity:
    value: float
    status: str         # "ok", "degenerate" (no gap), "divergent" (density vanishes too fast)
    log_integral: float


def _log_resistance(mu, q, lo, hi):
    """log of int_lo^hi rho^{-1/(q-1)} dx, computed with a scaled integrand."""
    r = 1.0 / (q - 1.0)
    probe = np.linspace(lo, hi, 257)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(mu.density(probe) > 0, mu.psi(probe), -np.inf)
    finite = psi[np.isfinite(psi)]
    shift = r * float(finite.max()) if finite.size else 0.0

    def integrand(x):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            rho = mu.density(x)
            val = np.exp(r * mu.psi(x) - shift)
        return np.where(rho > 0, val, np.inf)

    # split at density zeros inside the support, where the integrand may blow up
    cuts = [lo]
    inner = mu.breaks[(mu.breaks > lo) & (mu.breaks < hi)]
    zeros = inner[mu.density(inner) == 0.0] if inner.size else inner
    cuts.extend(zeros.tolist())
    cuts.append(hi)
    total, converged = 0.0, True
    for u, v in zip(cuts[:-1], cuts[1:]):
        # further split long pieces so the double-exponential rule resolves
        # integrands that grow like a Gaussian tail
        pieces = np.linspace(u, v, 9)
        for s, e in zip(pieces[:-1], pieces[1:]):
            val, ok = tanh_sinh(integrand, float(s), float(e), rtol=1e-12, max_level=10)
            total += val
            converged &= ok and math.isfinite(val)
    if not converged or not math.isfinite(total):
        return INF
    return math.log(total) + shift


def capq_halfline_detail(mu, q: float, x_b: float, x_a: float, side: str = "right") -> HalflineCapacity:
    if not q > 1:
        raise ValueError("capq_halfline needs q > 1")
    if side == "right":
        lo, hi = x_b, x_a
    elif side == "left":
        lo, hi = x_a, x_b
    else:
        raise ValueError("side must be 'right' or 'left'")
    if not lo < hi:
        return HalflineCapacity(INF, "degenerate", -INF)
    lo, hi = max(lo, mu.x_lo), min(hi, mu.x_hi)
    if not lo < hi:
        return HalflineCapacity(INF, "degenerate", -INF)
    log_r = _log_resistance(mu, q, lo, hi)
    if not math.isfinite(log_r):
        return HalflineCapacity(0.0, "divergent", INF)
    p = q / (q - 1.0)
    return HalflineCapacity(math.exp(-log_r / p), "ok", log_r)


def capq_halfline(mu, q: float, x_b: float, x_a: float, side: str = "right") -> float:
    """Exact 1-D q-capacity of a half-line relative to a larger half-line.

    ``side="right"``: Phi = 0 left of ``x_b`` and 1 right of ``x_a``.
    ``side="left"`` mirrors this.  The minimiser has Phi' proportional to
    rho^{-1/(q-1)}, so the value is (int rho^{-1/(q-1)} dx)^{-1/p}, p = q/(q-1).
    Returns +inf when there is no gap and 0 when the integral diverges.
    """
    return capq_halfline_detail(mu, q, x_b, x_a, side).value


@dataclass(frozen=True)
class CapqResult:
    value: float
    side: str
    status: str


def capq_detail(mu, q: float, t: float, b: float = 0.5) -> CapqResult:
    if not q > 1:
        raise ValueError("capq_profile needs q > 1")
    if not 0 < t <= b:
        raise ValueError("need 0 < t <= b")
    if b >= 1:
        raise ValueError("need b < 1")
    right = capq_halfline_detail(mu, q, float(mu.quantile(1.0 - b)), float(mu.quantile(1.0 - t)), "right")
    left = capq_halfline_detail(mu, q, float(mu.quantile(b)), float(mu.quantile(t)), "left")
    if left.value < right.value:
        return CapqResult(left.value, "left", left.status)
    return CapqResult(right.value, "right", right.status)


def capq_profile(mu, q: float, t, b: float = 0.5):
    """q-capacity profile Cap_q(t, b) over the half-line candidate family."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr > b):
        raise ValueError("t must not exceed b")
    flat = [capq_detail(mu, q, s, b).value for s in t_arr.ravel()]
    out = np.asarray(flat).reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out


def capq_grid_oracle(mu, q: float, t: float, grid_size: int = 4096, b: float = 0.5) -> float:
    """Discrete q-capacity on a uniform cell grid, solved in closed form.

    Density is taken constant within each cell (cell mass over width).  Phi
    is 0 on the leftmost stretch of mass 1 - b, 1 on the rightmost stretch of
    mass t (or the mirror image), and each cell part in between carries a
    constant slope.  Minimising sum m_i |delta_i / h_i|^q with
    sum delta_i = 1 gives delta_i proportional to h_i (m_i/h_i)^{-1/(q-1)}.
    """
    if not q > 1:
        raise ValueError("capq_grid_oracle needs q > 1")
    if not 0 < t <= b < 1:
        raise ValueError("need 0 < t <= b < 1")
    if t == b:
        return INF
    _, h, m = _cells(mu, grid_size)
    p = q / (q - 1.0)
    r = 1.0 / (q - 1.0)
    best = INF
    for mm in (m, m[::-1]):
        c = np.cumsum(mm)
        lo_mass, hi_mass = 1.0 - b, 1.0 - t          # the gap is this mass window
        i0 = min(int(np.searchsorted(c, lo_mass, side="right")), mm.size - 1)
        i1 = min(int(np.searchsorted(c, hi_mass, side="left")), mm.size - 1)
        if i1 < i0:
            raise ValueError("infeasible set specification")
        idx = np.arange(i0, i1 + 1)
        start = np.concatenate([[0.0], c[:-1]])[idx]
        covered = np.minimum(c[idx], hi_mass) - np.maximum(start, lo_mass)
        frac = np.clip(covered / np.where(mm[idx] > 0, mm[idx], 1.0), 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            res = float(np.sum(frac * h * (mm[idx] / h) ** (-r)))
        val = 0.0 if not math.isfinite(res) else (INF if res == 0 else res ** (-1.0 / p))
        best = min(best, val)
    return best


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True, eq=False)
class ProfileTable:
    t_grid: np.ndarray
    values: np.ndarray
    kind: str                  # "iso", "iso_tilde" or "cap_q"
    q: float | None = None

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t_grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0) or np.any((t <= 0) | (t > 0.5)):
            raise ValueError("t_grid must be strictly increasing in (0, 1/2]")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("profile values must be finite and nonnegative")
        if self.kind not in ("iso", "iso_tilde", "cap_q"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "cap_q" and np.any(np.diff(v) < -1e-9 * np.abs(v[1:])):
            raise ValueError("capacity profile must be nondecreasing in t")

    def __call__(self, t):
        """Interpolate linearly in log t."""
        return np.interp(np.log(np.asarray(t, dtype=float)), np.log(self.t_grid), self.values)

    @classmethod
    def build(cls, mu, t_grid, kind: str, q: float | None = None) -> "ProfileTable":
        t_grid = np.asarray(t_grid, dtype=float)
        if kind == "iso":
            v = iso_profile(mu, t_grid)
        elif kind == "iso_tilde":
            v = iso_tilde(mu, t_grid)
        elif kind == "cap_q":
            v = capq_profile(mu, q, t_grid)
        else:
            raise ValueError(f"unknown profile kind {kind!r}")
        return cls(t_grid, np.atleast_1d(v), kind, q)
