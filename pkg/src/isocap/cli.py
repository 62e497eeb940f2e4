"""Command-line front end: profiles, verification reports and constant tables.

Exit codes: 0 all legs pass, 1 a numeric leg failed, 2 a hypothesis leg
failed, 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import measure as meas
from . import orlicz as orl
from . import profiles as prof
from . import semigroup as sg
from . import transitions as tr
from .report import Leg, VerificationReport

EXIT_USAGE = 64
VERIFY_CHOICES = ("sandwich", "lift", "bracket", "forward", "converse", "gradient", "dual_l1",
                  "decay", "all")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    measure: dict = field(default_factory=lambda: {"kind": "gaussian"})
    nfunc: dict = field(default_factory=lambda: {"kind": "power", "q": 2.0})
    q: float = 2.0
    tgrid: tuple = (0.01, 0.5, 50)
    grid: int | None = None
    dt: float = 1e-3
    theta: float = 0.5
    seed: int = 0
    out: str | None = None
    constants: dict = field(default_factory=dict)

    def t_values(self) -> np.ndarray:
        lo, hi, n = self.tgrid
        n = int(n)
        if n < 1:
            raise UsageError("empty t-grid")
        if not 0 < lo <= hi <= 0.5:
            raise UsageError("t-grid must lie in (0, 1/2]")
        return np.linspace(lo, hi, n)

    def build_measure(self):
        try:
            return meas.from_config(self.measure)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad measure spec: {exc}") from exc

    def build_nfunc(self):
        try:
            return orl.from_config(self.nfunc)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad N-function spec: {exc}") from exc


def _parse_measure(text: str) -> dict:
    """``gaussian``, ``p_exponential:2``, ``uniform_interval:-1,1`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    name, _, args = text.partition(":")
    vals = [float(a) for a in args.split(",")] if args else []
    keys = {"p_exponential": ["p"], "uniform_interval": ["a", "b"], "power_alpha": ["alpha"]}
    spec = {"kind": name}
    if len(vals) > len(keys.get(name, [])):
        raise UsageError(f"too many parameters for measure {name!r}")
    spec.update(zip(keys.get(name, []), vals))
    return spec


def _parse_nfunc(text: str, q: float) -> dict:
    """``power``, ``power:3``, ``phi:1.5`` or a JSON object; the exponent defaults to q."""
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    name, _, arg = text.partition(":")
    kind = {"phi": "phi_q", "phi_q": "phi_q", "power": "power"}.get(name)
    if kind is None:
        raise UsageError(f"unknown N-function {name!r}")
    return {"kind": kind, "q": float(arg) if arg else (q if kind == "power" else min(q, 2.0))}


def _parse_tgrid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("--tgrid expects lo:hi:n")
    return float(parts[0]), float(parts[1]), int(parts[2])


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--measure", default="gaussian")
    common.add_argument("--nfunc", default="power")
    common.add_argument("--q", type=float, default=2.0)
    common.add_argument("--tgrid", default="0.01:0.5:50", help="lo:hi:n")
    common.add_argument("--grid", type=int, default=None, help="spatial grid size")
    common.add_argument("--dt", type=float, default=1e-3)
    common.add_argument("--theta", type=float, default=0.5)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--constants-file", default=None,
                        help="JSON overrides for the converse constant set (method, c2)")
    common.add_argument("--config", default=None, help="JSON run config; overrides flags")
    p = _Parser(prog="isocap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    pp = sub.add_parser("profile", parents=[common], help="write I, I~, Cap_1, Cap_q to CSV")
    pp.add_argument("--sweep", action="store_true",
                    help="also write the q-capacity profile for q in {1.5, 2, 3}")
    pv = sub.add_parser("verify", parents=[common], help="run verification legs")
    pv.add_argument("which", choices=VERIFY_CHOICES)
    sub.add_parser("constants", parents=[common], help="print constant brackets")
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(measure=_parse_measure(args.measure), q=args.q,
                    nfunc=_parse_nfunc(args.nfunc, args.q), tgrid=_parse_tgrid(args.tgrid),
                    grid=args.grid, dt=args.dt, theta=args.theta, seed=args.seed, out=args.out)
    if args.constants_file:
        with open(args.constants_file) as fh:
            cfg.constants = json.load(fh)
    if args.config:
        with open(args.config) as fh:
            over = json.load(fh)
        unknown = set(over) - set(cfg.__dict__)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        for k, v in over.items():
            if k == "measure" and isinstance(v, str):
                v = _parse_measure(v)
            if k == "nfunc" and isinstance(v, str):
                v = _parse_nfunc(v, over.get("q", cfg.q))
            if k == "tgrid" and isinstance(v, str):
                v = _parse_tgrid(v)
            setattr(cfg, k, v)
    return cfg


# ---------------------------------------------------------------------------
# profile


def cmd_profile(cfg: RunConfig, sweep: bool = False) -> int:
    mu = cfg.build_measure()
    t = cfg.t_values()
    cols = {"t": t,
            "I": np.asarray(prof.iso_profile(mu, t), dtype=float),
            "I_tilde": np.asarray(prof.iso_tilde(mu, t), dtype=float),
            "cap1": np.array([prof.cap1_profile(mu, s, 0.5) for s in t]),
            "capq": np.atleast_1d(prof.capq_profile(mu, cfg.q, t)) if cfg.q > 1
            else np.array([prof.cap1_profile(mu, s, 0.5) for s in t])}
    if sweep:
        for qq in (1.5, 2.0, 3.0):
            cols[f"capq_{qq:g}"] = np.atleast_1d(prof.capq_profile(mu, qq, t))
    text = _csv(cols)
    _emit(text, cfg.out)
    return 0


def _csv(cols: dict) -> str:
    names = list(cols)
    lines = [",".join(names)]
    for row in zip(*cols.values()):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# verify


def _converse_constants(cfg, N, q):
    method = cfg.constants.get("method", "chain")
    if method == "capacity":
        return tr.capacity_route_constants(N, q, c2=float(cfg.constants.get("c2", 1.0)))
    if method == "chain":
        return tr.semigroup_chain_constants(N, q)
    if method == "replay":
        return None
    raise UsageError(f"unknown constant method {method!r}")


def verify_sandwich(cfg, mu, N) -> VerificationReport:
    rep = VerificationReport(f"co-area sandwich on {mu.name}")
    grid = cfg.grid or 2048
    t = cfg.t_values()
    t = t[t < 0.5]
    a_vals = np.unique(t[np.linspace(0, t.size - 1, min(10, t.size)).round().astype(int)])
    pairs = [(a, b) for a in a_vals for b in (0.5, 0.6, 0.7, 0.8, 0.9)]
    worst, wp = -1.0, None
    for a, b in pairs:
        oracle = prof.cap1_grid_oracle(mu, a, b, grid)
        exact = prof.cap1_profile(mu, a, b)
        err = abs(oracle - exact) / exact if exact > 0 else abs(oracle)
        if err > worst:
            worst, wp = err, (a, b)
    rep.add(Leg("grid Cap_1 vs inf I (relative error)", tr.REF_SANDWICH, worst, 0.05,
                note=f"worst pair {wp}, spatial grid {grid}"))
    rep.environment.update({"measure": mu.name, "pairs": len(pairs), "grid": grid})
    return rep


def verify_lift(cfg, mu, N) -> VerificationReport:
    q = cfg.q
    rep = VerificationReport(f"capacity lifting on {mu.name}, q0=1 -> q={q:g}")
    t = cfg.t_values()
    t = t[t < 0.5]
    lift = np.array([tr.lift_capacity(1.0, q, lambda s: tr._cap_q0(mu, 1.0, s), s, 0.5) for s in t])
    exact = np.asarray(prof.capq_profile(mu, q, t))
    for s, lb, ex in zip(t, lift, exact):
        rep.add(Leg(f"lift t={s:.6g}", tr.REF_LIFT, lb, ex, tolerance=1e-6))
    pos = lift > 0
    rep.environment.update({"measure": mu.name, "q": q,
                            "worst_ratio": float(np.max(exact[pos] / lift[pos])) if pos.any() else math.inf})
    return rep


def verify_bracket(cfg, mu, N) -> VerificationReport:
    q = cfg.q
    rep = VerificationReport(f"capacity/Orlicz bracket on {mu.name} N={N.name} q={q:g}")
    cc = tr.capacity_constant(mu, N, q)
    try:
        br = tr.cap_to_orlicz_bracket(q, N, cc.value)
    except tr.HypothesisError as exc:
        rep.add(Leg("qmono hypothesis", tr.REF_BRACKET, 1.0, 0.0, kind="hypothesis", note=str(exc)))
        return rep
    probes = tr.probe_family(mu, q, seed=cfg.seed)
    if q > 1 and cc.argmin < 0.5:
        ext = tr.capacity_extremal(mu, q, cc.argmin)
        if ext is not None:
            probes.append(tr.Probe("extremal", f"t={cc.argmin:.6g}", ext))
    ratios = tr.orlicz_sobolev_ratios(mu, N, q, probes)
    best = float(np.min(ratios))
    rep.add(Leg("D2/4 <= probe ratio", tr.REF_BRACKET, br.lower, best, tolerance=1e-9 * best))
    rep.add(Leg("probe ratio <= D2 (extremal probe)", tr.REF_BRACKET, best, cc.grid_value,
                tolerance=1e-3 * cc.grid_value, note="capacity extremal at the argmin"))
    rep.environment.update({"measure": mu.name, "N": N.name, "q": q, "D2": cc.value,
                            "D2_at_edge": cc.at_edge, "probe_min": best})
    return rep


def verify_forward(cfg, mu, N) -> VerificationReport:
    return tr.forward_theorem_check(mu, N, cfg.q, t_grid=cfg.t_values(), seed=cfg.seed)


def verify_converse(cfg, mu, N) -> VerificationReport:
    q = cfg.q
    rep = VerificationReport(f"converse bound on {mu.name} N={N.name} q={q:g}")
    rep.environment.update({"measure": mu.name, "N": N.name, "q": q, "kappa": mu.kappa})
    if not math.isfinite(mu.kappa):
        rep.add(Leg("semi-convexity", tr.REF_CONVERSE, 1.0, 0.0, kind="hypothesis",
                    note="kappa = +inf: the measure is not semi-convex"))
        return rep
    t = cfg.t_values()
    cc = tr.capacity_constant(mu, N, q)
    D = cc.value / 4.0
    consts = _converse_constants(cfg, N, q)
    if consts is None:
        bound = np.asarray(tr.replay_iso_bound(q, N, D, mu.kappa, t))
        rep.environment["constant_set"] = "replay"
    else:
        bound = np.asarray(tr.converse_iso_bound(q, N, D, mu.kappa, t, constants=consts))
        rep.environment["constant_set"] = consts.to_dict()
    iso = np.asarray(prof.iso_tilde(mu, t))
    for s, b, i in zip(t, bound, iso):
        rep.add(Leg(f"converse t={s:.6g}", tr.REF_CONVERSE, b, i, tolerance=1e-6))
    rep.environment.update({"D": D, "D2_at_edge": cc.at_edge})
    return rep


def _solver(cfg, mu):
    return sg.SemigroupSolver(mu, grid_size=cfg.grid or 4001, dt=cfg.dt, theta=cfg.theta)


def _needs_kappa(rep, mu, ref):
    if not math.isfinite(mu.kappa):
        rep.add(Leg("semi-convexity", ref, 1.0, 0.0, kind="hypothesis",
                    note="kappa = +inf: the measure is not semi-convex"))
        return True
    return False


def verify_gradient(cfg, mu, N) -> VerificationReport:
    rep = VerificationReport(f"gradient estimate on {mu.name}")
    if _needs_kappa(rep, mu, sg.REF_BAKRY_LEDOUX):
        return rep
    S = _solver(cfg, mu)
    rng = np.random.default_rng(cfg.seed)
    a = rng.standard_normal(4)
    scale = (mu.x_hi - mu.x_lo) / 8
    f = sum(a[k] * np.sin((k + 1) * S.nodes / scale + k) / (k + 1) for k in range(4))
    rep.extend(sg.verify_gradient_estimate(S, f, [0.1, 0.5, 1.0]))
    return rep


def verify_dual_l1(cfg, mu, N) -> VerificationReport:
    rep = VerificationReport(f"dual L1 bound on {mu.name}")
    if _needs_kappa(rep, mu, sg.REF_DUAL_L1):
        return rep
    S = _solver(cfg, mu)
    f = 2 * S.mollified_indicator(float(mu.quantile(0.5))) - 1
    rep.extend(sg.verify_dual_L1(S, f, [0.1, 0.5, 1.0]))
    return rep


def mean_centred_constant(mu, N, q) -> tr.InequalityConstant:
    """Verified (N, q) Orlicz-Sobolev lower bound for mean-centred functions: D2 / 8."""
    cc = tr.capacity_constant(mu, N, q)
    br = tr.cap_to_orlicz_bracket(q, N, cc.value)
    return tr.InequalityConstant(f"D_orlicz({N.name},{q:g})_mean", br.lower / 2, math.inf,
                                 "capacity bracket lower edge, halved for mean centring")


def verify_decay(cfg, mu, N) -> VerificationReport:
    q = cfg.q
    rep = VerificationReport(f"decay on {mu.name} N={N.name} q={q:g}")
    if _needs_kappa(rep, mu, sg.REF_DECAY_HIGH if q >= 2 else sg.REF_DECAY_LOW):
        return rep
    try:
        D = mean_centred_constant(mu, N, q)
    except tr.HypothesisError as exc:
        rep.add(Leg("qmono hypothesis", tr.REF_BRACKET, 1.0, 0.0, kind="hypothesis", note=str(exc)))
        return rep
    S = _solver(cfg, mu)
    f = S.centered(S.mollified_indicator(float(mu.quantile(0.5))))
    times = [0.0, 0.1, 0.5, 1.0, 2.0]
    if q >= 2:
        rep.extend(sg.verify_decay_high_q(S, f, q, N, D, times))
    if q <= 2:
        rep.extend(sg.verify_decay_low_q(S, f, q, N, D, times))
    return rep


VERIFIERS = {
    "sandwich": verify_sandwich, "lift": verify_lift, "bracket": verify_bracket,
    "forward": verify_forward, "converse": verify_converse, "gradient": verify_gradient,
    "dual_l1": verify_dual_l1, "decay": verify_decay,
}


def cmd_verify(cfg: RunConfig, which: str) -> int:
    mu, N = cfg.build_measure(), cfg.build_nfunc()
    cfg.t_values()
    names = list(VERIFIERS) if which == "all" else [which]
    rep = VerificationReport(f"verify {which}: {mu.name} N={N.name} q={cfg.q:g}")
    rep.environment.update({"seed": cfg.seed, "dt": cfg.dt, "theta": cfg.theta,
                            "grid": cfg.grid, "tgrid": list(cfg.tgrid)})
    for name in names:
        sub = VERIFIERS[name](cfg, mu, N)
        for leg in sub.legs:
            leg.name = f"{name}: {leg.name}"
        rep.extend(sub)
    sys.stdout.write(rep.table() + "\n")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(rep.to_json() + "\n")
    return rep.exit_code()


# ---------------------------------------------------------------------------
# constants


def constants_table(cfg: RunConfig) -> list[tr.InequalityConstant]:
    mu, N, q = cfg.build_measure(), cfg.build_nfunc(), cfg.q
    t = cfg.t_values()
    iso = np.asarray(prof.iso_tilde(mu, t))
    out = []
    d_lin = float(np.min(iso / t))
    out.append(tr.InequalityConstant("D_Lin", 0.0, d_lin, "min of I~(t)/t over the t-grid"))
    inner = t[t < 0.5]
    if inner.size:
        gau = float(np.min(iso[t < 0.5] / (inner * np.sqrt(np.log(1 / inner)))))
        out.append(tr.InequalityConstant("D_Gau", 0.0, gau,
                                         "min of I~(t)/(t log^{1/2}(1/t)) over the t-grid"))
        if q > 1:
            exq = float(np.min(iso[t < 0.5] / (inner * np.log(1 / inner) ** (1 / q))))
            out.append(tr.InequalityConstant(f"D_Exp_q({q:g})", 0.0, exq,
                                             "min of I~(t)/(t log^{1/q}(1/t)) over the t-grid"))
    if math.isfinite(mu.kappa):
        S = _solver(cfg, mu)
        gap = sg.spectral_gap(S)
        d = math.sqrt(gap.value)
        out.append(tr.InequalityConstant("D_Poin", d, d,
                                         f"sqrt of the discrete spectral gap, grid {S.grid_size}, "
                                         f"refinement change {gap.rel_change:.2g}"))
    cc = tr.capacity_constant(mu, N, q)
    if N.qmono(q):
        br = tr.cap_to_orlicz_bracket(q, N, cc.value)
        out.append(tr.InequalityConstant(br.name, br.lower, br.upper, br.provenance))
    if q > 1 and N.qmono(q):
        B = tr.forward_constant_B(N, q)
        out.append(tr.InequalityConstant(f"B({N.name},{q:g})", B, B, "forward constant"))
        ch = tr.semigroup_chain_constants(N, q)
        out.append(tr.InequalityConstant(f"C_chain({N.name},{q:g})", ch.C, ch.C,
                                         "explicit semigroup chain constants"))
        if q <= 2:
            c2 = float(cfg.constants.get("c2", 1.0))
            C = tr.converse_constant_C(N, q, c2=c2)
            out.append(tr.InequalityConstant(f"C({N.name},{q:g})", C, C,
                                             f"capacity-route constant with c2 = {c2:g} (unverified)"))
    return out


def cmd_constants(cfg: RunConfig) -> int:
    rows = constants_table(cfg)
    lines = [f"{'constant':<28} {'lower':>14} {'upper':>14}  provenance"]
    for c in rows:
        lines.append(f"{c.name:<28} {c.lower:>14.6g} {c.upper:>14.6g}  {c.provenance}")
    sys.stdout.write("\n".join(lines) + "\n")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            json.dump([{"name": c.name, "lower": _fmt(c.lower), "upper": _fmt(c.upper),
                        "provenance": c.provenance} for c in rows], fh, indent=2)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        try:
            cfg = config_from_args(args)
        except ValueError as exc:     # malformed numbers in flags or config
            raise UsageError(str(exc)) from exc
        if args.command == "profile":
            return cmd_profile(cfg, sweep=args.sweep)
        if args.command == "verify":
            return cmd_verify(cfg, args.which)
        return cmd_constants(cfg)
    except (UsageError, json.JSONDecodeError, OSError) as exc:
        sys.stderr.write(f"isocap: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
