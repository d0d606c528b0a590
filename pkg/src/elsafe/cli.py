"""Command-line front end: ``elsafe {cover,check,simulate,compare,probe,bench}``.

Exit codes: 0 success, 1 validation failure (bad config or a failed
check), 2 runtime failure (I/O, infeasible filter, other errors).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .basis import verify_coverage
from .conditions import check_parameter_conditions, lipschitz_certificate
from .config import Built, build, load_config
from .dynamics import estimate_mu_bounds
from .errors import ConfigError, ElsafeError, FilterInfeasible
from .geometry import check_assumption3
from .scenario import (WParams, bench_csv, bench_iteration, command_rate, lipschitz_probe,
                       monitor_W, probe_pairs, run_closed_loop)

OK, INVALID, RUNTIME = 0, 1, 2
COINCIDE_TOL = 1e-3


def _out_dir(args, built: Built) -> Path:
    d = Path(args.out or built.cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _need_scenario(built: Built):
    if built.scenario is None:
        raise ConfigError("this command needs model, gains and scenario sections")
    return built.scenario


def _v_c_d(built: Built) -> float:
    sat = built.scenario.sat_gain if built.scenario is not None else 0.5236
    return sat * built.params.v_bar


def cmd_cover(built: Built, args):
    if built.field is None:
        raise ConfigError("no obstacles section")
    path = _out_dir(args, built) / "obstacles.txt"
    built.field.save(path)
    return OK, f"{len(built.field)} balls written to {path}"


def cmd_check(built: Built, args):
    seed = built.cfg.seed
    chk = built.cfg.check
    lines = []
    cert = lipschitz_certificate(built.params, built.shaping, built.basis, built.field,
                                 samples=chk.lipschitz_samples, seed=seed)
    mu = None
    if built.model is not None:
        mu = estimate_mu_bounds(built.model, chk.mu_samples, seed)
    k_D = built.gains.k_D if built.gains is not None else None
    n = built.basis.n
    rep = check_parameter_conditions(built.params, built.shaping, built.basis, mu_bounds=mu,
                                     L=cert.L if mu is not None else None, k_D=k_D,
                                     v_c_d=_v_c_d(built), n=n)
    ok = rep.passed
    lines.append("[parameter conditions]")
    lines.append(rep.to_text())
    lines.append("[basis coverage]")
    cov = verify_coverage(built.basis, chk.coverage_samples, seed)
    ok &= cov.passed
    lines.append(f"{'PASS' if cov.passed else 'FAIL'} m={built.basis.m} samples={cov.samples} "
                 f"min|S(v)|={cov.min_cardinality} max residual={cov.max_residual:.3g} "
                 f"coefficient sums in [{cov.coef_sum_range[0]:.10g}, {cov.coef_sum_range[1]:.10g}] {cov.reason}")
    if built.field is not None:
        a3 = check_assumption3(built.field, built.distances, chk.ball_distance_pitch)
        ok &= a3.passed
        lines.append("[ball distances]")
        lines.append(a3.summary())
    lines.append("[lipschitz certificate]")
    lines.append(cert.to_text())
    if mu is not None:
        lines.append("[inertia bounds]")
        lines.append(f"mu_m1 = {mu[0]:.10g}\nmu_m2 = {mu[1]:.10g}")
    lines.append("overall: " + ("PASS" if ok else "FAIL"))
    text = "\n".join(lines)
    (_out_dir(args, built) / "check.txt").write_text(text + "\n")
    return (OK if ok else INVALID), text


def _w_params(built: Built, log_scenario):
    mu = estimate_mu_bounds(built.model, built.cfg.check.mu_samples, built.cfg.seed)
    cert = lipschitz_certificate(built.params, built.shaping, built.basis, built.field,
                                 samples=built.cfg.check.lipschitz_samples, seed=built.cfg.seed)
    p = built.params
    return WParams.from_constants(log_scenario.n, cert.L, mu[0], mu[1], built.gains.k_D,
                                  log_scenario.v_c_d, p.v_bar, p.d_r, p.Delta_h)


def summarize(log, built: Built, wrep=None) -> str:
    sc = built.scenario
    p = built.params
    target = sc.waypoints[-1]
    speed = log.speed().max()
    vs = np.linalg.norm(log.vs, axis=1).max()
    lines = [
        f"filter = {sc.filter_kind}",
        f"records = {len(log)}",
        f"min h = {log.minh.min():.10g}",
        f"max |qdot| = {speed:.10g} (cap {p.v_bar:.10g})",
        f"max |v*| = {vs:.10g} (cap {p.v_bar - p.d_r:.10g})",
        f"final |q - target| = {np.linalg.norm(log.q[-1] - target):.10g}",
        f"waypoint switches at steps {log.switch_steps}",
        f"max command rate away from switches = {command_rate(log):.6g} (bound {sc.v_c_d:.6g})",
        f"mean solve time = {np.mean(log.solve_ms):.4g} ms",
    ]
    if wrep is not None:
        lines.append(f"W: {wrep.verdict} ({wrep.reason}); W(0) = {wrep.W0:.6g}, max W = {wrep.W_max:.6g}")
    return "\n".join(lines)


def cmd_simulate(built: Built, args):
    sc = _need_scenario(built)
    log = run_closed_loop(sc)
    wrep = monitor_W(log, built.model, _w_params(built, sc), built.field)
    out = _out_dir(args, built)
    log.to_csv(out / "trajectory.csv")
    text = summarize(log, built, wrep)
    (out / "summary.txt").write_text(text + "\n")
    p = built.params
    ok = log.minh.min() >= -1e-9 and log.speed().max() <= p.v_bar + 1e-6
    return (OK if ok else INVALID), text


def cmd_compare(built: Built, args):
    sc = _need_scenario(built)
    full = run_closed_loop(sc, "full")
    red = run_closed_loop(sc, "reduced")
    diff = np.linalg.norm(full.vs - red.vs, axis=1)
    n = sc.n
    cols = ["t"] + [f"vs_full{i + 1}" for i in range(n)] + [f"vs_reduced{i + 1}" for i in range(n)] + ["dv"]
    rows = np.column_stack([full.t, full.vs, red.vs, diff])
    out = _out_dir(args, built)
    text = ",".join(cols) + "\n" + "".join(",".join(f"{x:.17g}" for x in r) + "\n" for r in rows)
    (out / "compare.csv").write_text(text)
    worst = float(diff.max())
    k = int(diff.argmax())
    msg = f"max |v*_full - v*_reduced| = {worst:.6g} at t = {full.t[k]:.6g} (tolerance {COINCIDE_TOL:g})"
    return (OK if worst <= COINCIDE_TOL else INVALID), msg


def cmd_probe(built: Built, args):
    sc = _need_scenario(built)
    pc = built.cfg.probe
    cert = lipschitz_certificate(built.params, built.shaping, built.basis, built.field,
                                 samples=built.cfg.check.lipschitz_samples, seed=built.cfg.seed)
    pairs = probe_pairs(sc, pc.pairs, built.cfg.seed, tuple(pc.separations), pc.band)
    out = _out_dir(args, built)
    results = {}
    lines = [f"certificate L = {cert.L:.10g}"]
    ok = True
    for kind in pc.kinds:
        res = lipschitz_probe(kind, sc, pairs=pairs)
        results[kind] = res
        q, vc, sep = res.location
        line = (f"{kind}: max quotient {res.max_quotient:.6g} at q={np.array2string(q, precision=6)} "
                f"separation {sep:g}; infeasible pairs {res.infeasible}")
        if kind != "baseline":
            bound_ok = res.max_quotient <= cert.L
            ok &= bound_ok
            line += f"; <= L: {'PASS' if bound_ok else 'FAIL'}"
        lines.append(line)
        n = sc.n
        cols = ([f"q{i + 1}" for i in range(n)] + [f"vc{i + 1}" for i in range(n)] + ["separation", "quotient"])
        tab = np.column_stack([pairs.q1, pairs.vc1, pairs.separation, res.quotients])
        (out / f"probe_{kind}.csv").write_text(
            ",".join(cols) + "\n" + "".join(",".join(f"{x:.17g}" for x in r) + "\n" for r in tab))
    if "baseline" in results and "full" in results:
        ratio = results["baseline"].quotients / results["full"].quotients
        if np.isfinite(ratio).any():
            k = int(np.nanargmax(ratio))
            lines.append(f"largest baseline/full quotient ratio {ratio[k]:.6g} at q="
                         f"{np.array2string(pairs.q1[k], precision=6)} (>= 10: "
                         f"{'yes' if ratio[k] >= 10 else 'no, report only'})")
    text = "\n".join(lines)
    (out / "probe.txt").write_text(text + "\n")
    return (OK if ok else INVALID), text


def cmd_bench(built: Built, args):
    bc = built.cfg.bench
    rows = bench_iteration(bc.sizes, bc.trials, built.cfg.seed, built.params, built.shaping, built.basis)
    text = bench_csv(rows)
    (_out_dir(args, built) / "bench.csv").write_text(text)
    return OK, text.rstrip()


COMMANDS = {
    "cover": cmd_cover,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "probe": cmd_probe,
    "bench": cmd_bench,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elsafe", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", default="arm_sim", help="config path or bundled name (arm_sim, arm_hardware)")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    ap.add_argument("--filter", choices=["baseline", "full", "reduced"], default=None,
                    help="filter variant (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg, base = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        built = build(cfg, base, args.filter)
        code, text = COMMANDS[args.command](built, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return INVALID
    except FilterInfeasible as exc:
        print(f"runtime error: {exc} (q={exc.q}, qdot={exc.qdot})", file=sys.stderr)
        return RUNTIME
    except (ElsafeError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return RUNTIME
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
