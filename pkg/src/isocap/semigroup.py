"""Diffusion semigroup P_t generated by f'' - psi' f' on a truncated 1-D support.

Space: finite volumes on a uniform grid with reflecting ends.  Cell masses
are mu-masses of the cells, face conductances are rho(face) / h, so the
discrete generator L = -M^{-1} S is self-adjoint for the mass inner product
and annihilates constants.  Time: the theta-scheme
(M + theta dt S) f_{n+1} = (M - (1 - theta) dt S) f_n with one sparse LU
factorisation per (theta, dt).  Crank-Nicolson (theta = 1/2) is the default;
when a nonnegative input would produce a negative output the evolution is
redone with theta = 1, whose matrix is an M-matrix and preserves order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import splu

from . import orlicz as orl
from .measure import GridFunction, ModelMeasure1D, as_values
from .quadrature import _gl_reference
from .report import Leg, VerificationReport
from .transitions import InequalityConstant, K_const, K_power_integral, inv_sqrt_K_integral

REF_BAKRY_LEDOUX = "gradient estimate K(kappa,t)|grad P_t f|^2 <= P_t(f^2) - (P_t f)^2"
REF_DUAL_L1 = "||f - P_t f||_1 <= int_0^t ds/sqrt(K(kappa,s)) ||grad f||_1"
REF_ROUGH = "int_0^t ds/sqrt(K(kappa,s)) <= 2 sqrt(t) for t <= 1/(2 kappa)"
REF_DECAY_HIGH = "L2 decay under an (N,q) Orlicz-Sobolev inequality, q >= 2"
REF_DECAY_LOW = "Lq decay under an (N,q) Orlicz-Sobolev inequality, 1 < q <= 2"

POSITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    grid_size: int = 4001
    dt: float = 1e-3
    theta: float = 0.5


@dataclass(eq=False)
class SemigroupSolver:
    measure: ModelMeasure1D
    grid_size: int = 4001
    dt: float = 1e-3
    theta: float = 0.5
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)       # cell masses, sum 1
    conductance: np.ndarray = field(init=False, repr=False)   # rho(face) / h
    h: float = field(init=False)
    last_theta: float = field(init=False)
    _lu: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        if self.grid_size < 3:
            raise ValueError("grid_size must be >= 3")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [1/2, 1]; smaller values are only conditionally stable")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        mu = self.measure
        x = np.linspace(mu.x_lo, mu.x_hi, self.grid_size)
        h = float(x[1] - x[0])
        left = np.maximum(x - h / 2, mu.x_lo)
        right = np.minimum(x + h / 2, mu.x_hi)
        gx, gw = _gl_reference(3)
        half = 0.5 * (right - left)
        pts = (left + half)[:, None] + half[:, None] * gx[None, :]
        mass = (half[:, None] * gw[None, :] * mu.density(pts)).sum(axis=1)
        z = mass.sum()
        self.nodes = x
        self.h = h
        self.weights = mass / z
        self.conductance = mu.density(x[:-1] + h / 2) / (h * z)
        self.last_theta = self.theta

    # -- operators ---------------------------------------------------------

    def stiffness(self) -> sparse.csc_matrix:
        c = self.conductance
        diag = np.concatenate([[0.0], c]) + np.concatenate([c, [0.0]])
        return sparse.diags([-c, diag, -c], [-1, 0, 1], format="csc")

    def generator(self) -> sparse.csr_matrix:
        """Discrete weighted Laplacian L = -M^{-1} S."""
        return (-sparse.diags(1.0 / self.weights) @ self.stiffness()).tocsr()

    def _factor(self, theta: float, dt: float):
        key = (theta, dt)
        if key not in self._lu:
            S = self.stiffness()
            M = sparse.diags(self.weights, format="csc")
            A = (M + theta * dt * S).tocsc()
            B = (M - (1.0 - theta) * dt * S).tocsr()
            self._lu[key] = (splu(A), B)
        return self._lu[key]

    def _run(self, F, t, theta):
        if t < 0:
            raise ValueError("t must be nonnegative")
        n_full = int(math.floor(t / self.dt + 1e-9))
        rest = t - n_full * self.dt
        out = F.copy()
        if n_full:
            lu, B = self._factor(theta, self.dt)
            for _ in range(n_full):
                out = lu.solve(B @ out)
        if rest > 1e-12 * max(1.0, t):
            lu, B = self._factor(theta, rest)
            out = lu.solve(B @ out)
        return out

    def evolve_array(self, F, t: float, *, theta: float | None = None) -> np.ndarray:
        """P_t applied to the columns of F (shape (n,) or (n, k))."""
        F = np.asarray(F, dtype=float)
        if F.shape[0] != self.grid_size or not np.all(np.isfinite(F)):
            raise ValueError("input must be finite samples on the solver grid")
        th = self.theta if theta is None else theta
        out = self._run(F, t, th)
        self.last_theta = th
        if th < 1.0 and np.min(F) >= 0 and np.min(out) < -POSITIVITY_TOL:
            out = self._run(F, t, 1.0)
            self.last_theta = 1.0
        return out

    def evolve_sweep(self, F, times, *, theta: float | None = None) -> list[np.ndarray]:
        """P_t F for increasing times, reusing the evolution between them."""
        times = [float(s) for s in times]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("times must be nondecreasing")
        th = self.theta if theta is None else theta
        F = np.asarray(F, dtype=float)
        out, cur, now = [], F.copy(), 0.0
        for s in times:
            cur = self._run(cur, s - now, th)
            now = s
            out.append(cur.copy())
        if th < 1.0 and np.min(F) >= 0 and min(np.min(o) for o in out) < -POSITIVITY_TOL:
            return self.evolve_sweep(F, times, theta=1.0)
        self.last_theta = th
        return out

    # -- helpers -----------------------------------------------------------

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, as_values(f)))

    def face_gradient(self, f) -> np.ndarray:
        return np.diff(as_values(f)) / self.h

    def gradient_l1(self, f) -> float:
        """int |f'| dmu in the discrete form matching the stiffness matrix."""
        return float(np.sum(self.conductance * np.abs(np.diff(as_values(f)))) * self.h)

    def sample(self, fn, dfn=None) -> GridFunction:
        return GridFunction.from_callable(self.nodes, fn, dfn)

    def mollified_indicator(self, x0: float, cells: float = 3.0) -> np.ndarray:
        """Indicator of [x0, inf) smoothed by a linear ramp over ``cells`` grid cells."""
        w = cells * self.h
        return np.clip((self.nodes - x0) / w + 0.5, 0.0, 1.0)

    def centered(self, f) -> np.ndarray:
        v = as_values(f)
        return v - self.integrate(v)


def evolve(S: SemigroupSolver, f0, t: float) -> GridFunction:
    v = S.evolve_array(as_values(f0), t)
    return GridFunction(v, np.gradient(v, S.nodes))


def _interior(S: SemigroupSolver, tail: float = 1e-8):
    """Faces well inside the support, away from the reflecting truncation points."""
    mu = S.measure
    lo, hi = float(mu.quantile(tail)), float(mu.quantile(1 - tail))
    faces = S.nodes[:-1] + S.h / 2
    return (faces >= lo) & (faces <= hi)


# ---------------------------------------------------------------------------
# lemma checks


def verify_gradient_estimate(S: SemigroupSolver, f0, times, *, tol: float = 1e-3) -> VerificationReport:
    """Pointwise K(kappa,t)|grad P_t f|^2 <= P_t(f^2) - (P_t f)^2 at faces."""
    kappa = S.measure.kappa
    if not math.isfinite(kappa):
        raise ValueError("the gradient estimate needs a finite semi-convexity constant")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    f = as_values(f0)
    rep = VerificationReport(f"gradient estimate on {S.measure.name}")
    rep.environment.update(_env(S, kappa=kappa, tol=tol))
    mask = _interior(S)
    cols = S.evolve_sweep(np.column_stack([f, f * f]), times)
    for t, col in zip(times, cols):
        pf, pf2 = col[:, 0], col[:, 1]
        var = pf2 - pf * pf
        var_face = 0.5 * (var[1:] + var[:-1])
        lhs = K_const(kappa, t) * S.face_gradient(pf) ** 2
        viol = (lhs - var_face)[mask]
        j = int(np.argmax(viol))
        rep.add(Leg(f"gradient estimate t={t:g}", REF_BAKRY_LEDOUX, lhs[mask][j], var_face[mask][j],
                    tolerance=tol, note=f"max violation {max(viol[j], 0.0):.3g}"))
    rep.environment["theta_used"] = S.last_theta
    return rep


def ou_linear_case(S: SemigroupSolver, t: float, *, window: float = 3.0):
    """Max deviation of both sides from 2t e^{-2t} and 1 - e^{-2t} for f(x) = x on |x| <= window."""
    x = S.nodes
    cols = S.evolve_array(np.column_stack([x, x * x]), t)
    pf, pf2 = cols[:, 0], cols[:, 1]
    var = 0.5 * ((pf2 - pf * pf)[1:] + (pf2 - pf * pf)[:-1])
    lhs = K_const(0.0, t) * S.face_gradient(pf) ** 2
    faces = x[:-1] + S.h / 2
    m = np.abs(faces) <= window
    return (float(np.max(np.abs(lhs[m] - 2 * t * math.exp(-2 * t)))),
            float(np.max(np.abs(var[m] + math.expm1(-2 * t)))))


def verify_dual_L1(S: SemigroupSolver, f0, times, *, rtol: float = 1e-9) -> VerificationReport:
    kappa = S.measure.kappa
    if not math.isfinite(kappa):
        raise ValueError("the dual L1 bound needs a finite semi-convexity constant")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    f = as_values(f0)
    grad_l1 = S.gradient_l1(f)
    rep = VerificationReport(f"dual L1 bound on {S.measure.name}")
    rep.environment.update(_env(S, kappa=kappa))
    for t, pf in zip(times, S.evolve_sweep(f, times)):
        lhs = float(np.dot(S.weights, np.abs(f - pf)))
        J = inv_sqrt_K_integral(kappa, t)
        rhs = J * grad_l1
        rep.add(Leg(f"dual L1 t={t:g}", REF_DUAL_L1, lhs, rhs, tolerance=rtol * max(rhs, 1e-300)))
        if kappa == 0 or t <= 1 / (2 * kappa):
            rep.add(Leg(f"rough time integral t={t:g}", REF_ROUGH, J, 2 * math.sqrt(t),
                        tolerance=1e-14))
    return rep


# ---------------------------------------------------------------------------
# decay propositions


def _check_decay_inputs(S, f0, D):
    if not isinstance(D, InequalityConstant):
        raise TypeError("D must be a verified InequalityConstant (use its certified lower edge)")
    f = as_values(f0)
    if abs(S.integrate(f)) > 1e-10:
        raise ValueError("the decay propositions need a mean-zero function")
    return f, D.lower


def dual_norm_on_grid(S: SemigroupSolver, f, N: orl.NFunction) -> float:
    """Certified upper bound for ||f||_{N*} on the solver's discrete measure."""
    v = as_values(f)
    best = orl.dual_norm(S, v, N)
    levels = np.unique(v)
    if levels.size == 2:
        m = float(np.sum(S.weights[v == levels[1]]))
        best = min(best, orl.centered_indicator_dual_bound(m, N))
    return best


def decay_rhs_high(q, D, dual, f2, finf, kappa, t):
    if D == 0 or t == 0:
        return f2
    a = (q - 1) * 2 * D ** q / (dual ** q * finf ** (q - 2)) * f2 ** (q - 1)
    return f2 * (1.0 + a * K_power_integral(kappa, t, (q - 2) / 2)) ** (-1.0 / (q - 1))


def decay_rhs_low(q, D, dual, fq, f1, t):
    if D == 0 or t == 0:
        return fq
    a = 2 * D ** 2 / (f1 ** (2 * (2 - q) / (q - 1)) * dual ** 2) * fq ** (2 / (q * (q - 1)))
    return fq * (1.0 + a * t) ** (-q * (q - 1) / 2)


def verify_decay_high_q(S: SemigroupSolver, f0, q: float, N: orl.NFunction,
                        D: InequalityConstant, times, *, tol: float = 1e-6) -> VerificationReport:
    if q < 2:
        raise ValueError("the L2 decay proposition needs q >= 2")
    f, d = _check_decay_inputs(S, f0, D)
    kappa = S.measure.kappa
    dual = dual_norm_on_grid(S, f, N)
    f2 = S.integrate(f * f)
    finf = float(np.max(np.abs(f)))
    rep = VerificationReport(f"L2 decay q={q:g} on {S.measure.name}")
    rep.environment.update(_env(S, kappa=kappa, D=d, dual_norm=dual, q=q, N=N.name))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    for t, pf in zip(times, S.evolve_sweep(f, times)):
        lhs = S.integrate(pf * pf)
        rhs = decay_rhs_high(q, d, dual, f2, finf, kappa, t)
        rep.add(Leg(f"L2 decay t={t:g}", REF_DECAY_HIGH, lhs, rhs, tolerance=tol))
    return rep


def verify_decay_low_q(S: SemigroupSolver, f0, q: float, N: orl.NFunction,
                       D: InequalityConstant, times, *, tol: float = 1e-6) -> VerificationReport:
    if not 1 < q <= 2:
        raise ValueError("the Lq decay proposition needs 1 < q <= 2")
    f, d = _check_decay_inputs(S, f0, D)
    dual = dual_norm_on_grid(S, f, N)
    fq = S.integrate(np.abs(f) ** q)
    f1 = S.integrate(np.abs(f))
    rep = VerificationReport(f"Lq decay q={q:g} on {S.measure.name}")
    rep.environment.update(_env(S, kappa=S.measure.kappa, D=d, dual_norm=dual, q=q, N=N.name))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    for t, pf in zip(times, S.evolve_sweep(f, times)):
        lhs = S.integrate(np.abs(pf) ** q)
        rhs = decay_rhs_low(q, d, dual, fq, f1, t)
        rep.add(Leg(f"Lq decay t={t:g}", REF_DECAY_LOW, lhs, rhs, tolerance=tol))
    return rep


# ---------------------------------------------------------------------------
# spectral gap and isoperimetry


@dataclass(frozen=True)
class SpectralGap:
    value: float
    refined: float            # same quantity on the grid with halved spacing
    rel_change: float

    @property
    def poincare_constant(self) -> float:
        return math.sqrt(self.value)


def _lambda1(S: SemigroupSolver) -> float:
    c, m = S.conductance, S.weights
    d = (np.concatenate([[0.0], c]) + np.concatenate([c, [0.0]])) / m
    e = -c / np.sqrt(m[:-1] * m[1:])
    try:
        vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 1))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("tridiagonal eigensolve failed") from exc
    return float(vals[1])


def spectral_gap(S: SemigroupSolver, *, richardson: bool = True) -> SpectralGap:
    """Smallest nonzero eigenvalue of -L; D_Poin is its square root."""
    lam = _lambda1(S)
    if not richardson:
        return SpectralGap(lam, math.nan, math.nan)
    fine = SemigroupSolver(S.measure, grid_size=2 * S.grid_size - 1, dt=S.dt, theta=S.theta)
    lam2 = _lambda1(fine)
    return SpectralGap(lam, lam2, abs(lam - lam2) / lam2)


def isoperimetric_via_semigroup(S: SemigroupSolver, A_mass: float, t: float, *,
                                cells: float = 3.0) -> float:
    """Lower estimate int |chi_A - P_t chi_A| dmu / (2 sqrt t) for mu+ of a right half-line."""
    kappa = S.measure.kappa
    if not 0 <= A_mass <= 1:
        raise ValueError("A_mass must be a probability")
    if not t > 0 or (kappa > 0 and t > 1 / (2 * kappa)):
        raise ValueError("need 0 < t <= 1/(2 kappa)")
    if A_mass in (0.0, 1.0):
        return 0.0
    chi = S.mollified_indicator(float(S.measure.quantile(1 - A_mass)), cells)
    pchi = S.evolve_array(chi, t)
    return float(np.dot(S.weights, np.abs(chi - pchi))) / (2 * math.sqrt(t))


def indicator_identity(S: SemigroupSolver, A_mass: float, t: float) -> tuple[float, float]:
    """Both sides of int|chi - P_t chi| = 2(int|chi - m|^2 - int|P_{t/2}(chi - m)|^2).

    Uses the exact grid indicator and theta = 1 so that 0 <= P_t chi <= 1.
    """
    x0 = float(S.measure.quantile(1 - A_mass))
    chi = (S.nodes >= x0).astype(float)
    m = S.integrate(chi)
    half = S.evolve_array(chi - m, t / 2, theta=1.0)
    full = S.evolve_array(half, t / 2, theta=1.0) + m
    lhs = float(np.dot(S.weights, np.abs(chi - full)))
    rhs = 2 * (S.integrate((chi - m) ** 2) - S.integrate(half * half))
    return lhs, rhs


def _env(S, **extra):
    env = {"measure": S.measure.name, "grid_size": S.grid_size, "h": S.h, "dt": S.dt,
           "theta": S.theta}
    env.update(extra)
    return env
