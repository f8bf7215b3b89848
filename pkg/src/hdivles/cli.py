"""Command-line entry points: run, convergence, sweep, stats."""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import appio
from .appio import ConfigError, RunConfig, parse_config


def _cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        cfg = parse_config(f.read())
    out_dir = args.out_dir or cfg.out_dir
    result = appio.execute_run(cfg, out_dir=out_dir)
    last = result.records[-1]
    print(f"run finished: t={last.t:g}, ke={last.ke:.6e}, "
          f"div_max={last.div_max:.2e} -> {out_dir}")
    return 0


def observed_orders(errors):
    """log2(err(h)/err(h/2)) between successive halvings."""
    return [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]


def spatial_convergence(case_name, orders, cells, nu, dt, t_end, scheme="bdf2"):
    """Final-time L2 errors and observed orders for an (h, k) matrix."""
    from . import timestepping as ts
    from .cases import make_case

    table = []
    for k in orders:
        errs = []
        for n in cells:
            case = make_case(case_name, nu=nu)
            problem = ts.discretize(case, k, n)
            cfg = ts.SchemeConfig(scheme=scheme, dt=dt, t_end=t_end)
            res = ts.run(problem, cfg, record_every=0)
            errs.append(res.records[-1].err_l2)
        table.append((k, list(cells), errs, observed_orders(errs)))
    return table


def temporal_convergence(case_name, dts, nu, k=4, n=8, t_end=0.1,
                         scheme="bdf2", ref_refine=4):
    """Observed time order via a same-mesh reference run at dt/ref_refine.

    Richardson-style self-reference cancels the h-dependent error component,
    which would otherwise floor the measurement.
    """
    from . import timestepping as ts
    from .cases import make_case

    case = make_case(case_name, nu=nu)
    problem = ts.discretize(case, k, n)
    M = problem.ops.M

    def final_u(dt):
        cfg = ts.SchemeConfig(scheme=scheme, dt=dt, t_end=t_end)
        res = ts.run(problem, cfg, record_every=0, with_errors=False)
        return res.final_state.u

    ref = final_u(min(dts) / ref_refine)
    errs = []
    for dt in dts:
        diff = final_u(dt) - ref
        errs.append(math.sqrt(diff @ (M @ diff)))
    return list(dts), errs, observed_orders(errs)


def _cmd_convergence(args) -> int:
    orders = [int(tok) for tok in args.orders.split(",")]
    rows = []
    if args.dts:
        dts = sorted((float(tok) for tok in args.dts.split(",")), reverse=True)
        dt_list, errs, obs = temporal_convergence(
            args.case, dts, nu=args.nu, k=orders[0],
            n=args.cells_temporal, t_end=args.t_end, scheme=args.scheme)
        print("temporal study (same-mesh reference):")
        print("dt,err_l2,order")
        rows.append("dt,err_l2,order")
        for i, (dt, err) in enumerate(zip(dt_list, errs)):
            order = "" if i == 0 else f"{obs[i - 1]:.3f}"
            line = f"{dt!r},{err!r},{order}"
            print(line)
            rows.append(line)
    else:
        cells = [int(tok) for tok in args.cells.split(",")]
        table = spatial_convergence(args.case, orders, cells, nu=args.nu,
                                    dt=args.dt, t_end=args.t_end,
                                    scheme=args.scheme)
        print("spatial study:")
        print("k,N,err_l2,order")
        rows.append("k,N,err_l2,order")
        for k, ns, errs, obs in table:
            for i, (n, err) in enumerate(zip(ns, errs)):
                order = "" if i == 0 else f"{obs[i - 1]:.3f}"
                line = f"{k},{n},{err!r},{order}"
                print(line)
                rows.append(line)
    if args.output:
        os.makedirs(os.path.dirname(args.output) or ".", exist_ok=True)
        with open(args.output, "w", encoding="utf-8") as f:
            f.write("\n".join(rows) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        base = parse_config(f.read())
    import dataclasses

    out_root = args.out_dir or base.out_dir
    summary = ["nu,ke_final,eps_visc_final,eps_upw_final"]
    for tok in args.nus.split(","):
        nu = float(tok)
        cfg = dataclasses.replace(base, nu=nu,
                                  out_dir=os.path.join(out_root, f"nu_{tok}"))
        result = appio.execute_run(cfg)
        last = result.records[-1]
        summary.append(f"{nu!r},{last.ke!r},{last.eps_visc!r},{last.eps_upw!r}")
        print(f"nu={nu:g}: ke(T)={last.ke:.6e}")
    os.makedirs(out_root, exist_ok=True)
    with open(os.path.join(out_root, "sweep_summary.csv"), "w", encoding="utf-8") as f:
        f.write("\n".join(summary) + "\n")
    return 0


def _cmd_stats(args) -> int:
    from . import diagnostics, timestepping as ts
    from .cases import make_case

    manifest = appio.read_manifest(args.run_dir)
    conf = manifest["config"]
    cfg = RunConfig(
        case=conf["case"], k=conf["k"], cells=tuple(conf["cells"]),
        dt=conf["dt"], t_end=conf["t_end"], scheme=conf["scheme"],
        sigma=conf.get("sigma"), nu=conf.get("nu"), re=conf.get("re"),
        re_tau=conf.get("re_tau"), H=conf.get("H"), F=conf.get("F"),
        U=conf.get("U"), L=conf.get("L"), dim=conf.get("dim"),
        gamma=conf.get("gamma"), trip_amplitude=conf.get("trip_amplitude"),
        seed=conf.get("seed", 0))
    case = make_case(cfg.case, **cfg.case_params())
    problem = ts.discretize(case, cfg.k, cfg.cells, sigma=cfg.sigma)

    window = None
    if args.window:
        lo, _, hi = args.window.partition(":")
        window = (float(lo), float(hi))
    states = [appio.read_state(os.path.join(args.run_dir, name))
              for name in manifest["files"]["states"]]
    if not states:
        print("error: run directory contains no saved states", file=sys.stderr)
        return 1
    half_width = case.params.get("H", 1.0)
    stats = diagnostics.channel_stats(problem.vel, [(s.t, s) for s in states],
                                      case.nu, half_width, window=window)

    out_path = args.output or os.path.join(args.run_dir, "channel_stats.csv")
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("# " + ",".join(f"{k}={v!r}" for k, v in [
            ("tau_w", stats.tau_w), ("u_tau", stats.u_tau),
            ("re_tau", stats.re_tau), ("nu", stats.nu),
            ("n_samples", stats.n_samples), ("window", stats.window)]) + "\n")
        cols = ["x2", "y_plus", "u_mean", "u_plus", "uv_stress",
                "uv_stress_plus"] + \
               [f"rms{c + 1}" for c in range(stats.rms.shape[1])] + \
               [f"rms{c + 1}_plus" for c in range(stats.rms.shape[1])]
        f.write(",".join(cols) + "\n")
        for i in range(len(stats.x2)):
            row = [stats.x2[i], stats.y_plus[i], stats.u_mean[i],
                   stats.u_plus[i], stats.uv_stress[i], stats.uv_stress_plus[i]]
            row += list(stats.rms[i]) + list(stats.rms_plus[i])
            f.write(",".join(repr(float(x)) for x in row) + "\n")
    print(f"channel stats: u_tau={stats.u_tau:.6e} re_tau={stats.re_tau:.4f} "
          f"({stats.n_samples} samples) -> {out_path}")
    return 0


def _build_parser():
    p = argparse.ArgumentParser(prog="hdivles",
                                description="divergence-free H(div) DG flow solver")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute a run config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out-dir", default=None)
    pr.set_defaults(func=_cmd_run)

    pc = sub.add_parser("convergence", help="(h, k) or dt refinement study")
    pc.add_argument("--case", default="lattice2d")
    pc.add_argument("--orders", default="1,2", help="comma list of k")
    pc.add_argument("--cells", default="4,8,16", help="comma list of N")
    pc.add_argument("--nu", type=float, default=1e-2)
    pc.add_argument("--dt", type=float, default=5e-4)
    pc.add_argument("--t-end", type=float, default=0.05)
    pc.add_argument("--scheme", default="bdf2", choices=("be", "bdf2"))
    pc.add_argument("--dts", default=None,
                    help="comma list of dt for a temporal study")
    pc.add_argument("--cells-temporal", type=int, default=8)
    pc.add_argument("-o", "--output", default=None)
    pc.set_defaults(func=_cmd_convergence)

    ps = sub.add_parser("sweep", help="rerun a config over several viscosities")
    ps.add_argument("--config", required=True)
    ps.add_argument("--nus", required=True, help="comma list of nu")
    ps.add_argument("--out-dir", default=None)
    ps.set_defaults(func=_cmd_sweep)

    pt = sub.add_parser("stats", help="channel statistics from saved states")
    pt.add_argument("--run-dir", required=True)
    pt.add_argument("--window", default=None, help="t0:t1")
    pt.add_argument("-o", "--output", default=None)
    pt.set_defaults(func=_cmd_stats)
    return p


def cli_main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli_main())
