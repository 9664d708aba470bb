"""Command line entry point: ``sparsedft {run,optimal-u,pattern,overhead}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import harness
from . import training as tr
from .channel import SystemConfig, UserLocation
from .codebooks import q_count
from .numerics import beta_params, closed_form_pattern

log = logging.getLogger("sparsedft")


def _cmd_run(args) -> int:
    sc = harness.load_scenario(args.scenario)
    if args.seed is not None:
        sc.master_seed = args.seed
    if args.trials is not None:
        sc.n_trials = args.trials
    log.info("running %s: %d sweep points x %d trials", sc.name, len(sc.sweep_values), sc.n_trials)
    report = harness.run(sc, threads=args.threads)
    if args.out:
        harness.emit(report, args.format, args.out)
    else:
        text = harness.report_to_csv(report) if args.format == "csv" else harness.report_to_json(report)
        sys.stdout.write(text)
    return 0


def _cmd_optimal_u(args) -> int:
    u = tr.optimal_interval(args.antennas, args.ranges)
    print(f"optimal_interval: {u}")
    print(f"three_phase_overhead: {tr.overhead_three_phase(args.antennas, u, args.ranges)}")
    return 0


def _cmd_overhead(args) -> int:
    N, U, V, K = args.antennas, args.interval, args.ranges, args.k
    if U < 1 or (N - 1) % U:
        raise ValueError(f"(N-1)/U must be an integer, got N={N}, U={U}")
    t3 = tr.overhead_three_phase(N, U, V, K)
    tex = tr.overhead_exhaustive(N, U, V)
    rows = [
        ("three_phase", t3),
        ("exhaustive", tex),
        ("two_phase", tr.overhead_two_phase(N, U, V, K)),
        ("far_field", tr.overhead_far_field(N, U)),
        ("ls", tr.overhead_ls(N)),
    ]
    for name, t in rows:
        print(f"{name}: {t}")
    print(f"reduction_vs_exhaustive: {100.0 * (1.0 - t3 / tex):.2f}%")
    return 0


def _cmd_pattern(args) -> int:
    cfg = SystemConfig(n_antennas=args.antennas, carrier_freq=args.freq_ghz * 1e9)
    loc = UserLocation(args.range, args.angle)
    U = args.interval
    Q = q_count(cfg.n_antennas, U)
    thetas = np.linspace(-1.0, 1.0, args.points, endpoint=False)
    exact = tr.beam_pattern(cfg, loc, thetas, U)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["theta", "exact"] + (["closed_form"] if args.closed_form else []))
        period = 2.0 / U
        for th, f in zip(thetas, exact):
            row = [repr(float(th)), repr(float(f))]
            if args.closed_form:
                # fold the offset into one period around the user angle
                delta = (th - loc.spatial_angle + period / 2) % period - period / 2
                p = beta_params(loc.range_m, loc.spatial_angle, delta, Q, U, cfg.antenna_spacing)
                row.append(repr(closed_form_pattern(p)))
            w.writerow(row)
    finally:
        if args.out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparsedft", description="Near-field beam training with a sparse DFT codebook")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario file (or a shipped scenario name)")
    r.add_argument("scenario")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("optimal-u", help="overhead-minimising activation interval")
    o.add_argument("--antennas", type=int, required=True)
    o.add_argument("--ranges", type=int, required=True)
    o.set_defaults(func=_cmd_optimal_u)

    b = sub.add_parser("pattern", help="received beam pattern samples of the sparse array")
    b.add_argument("--range", type=float, required=True)
    b.add_argument("--angle", type=float, required=True)
    b.add_argument("--interval", type=int, required=True)
    b.add_argument("--antennas", type=int, default=257)
    b.add_argument("--freq-ghz", type=float, default=30.0)
    b.add_argument("--points", type=int, default=2048)
    b.add_argument("--closed-form", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=_cmd_pattern)

    v = sub.add_parser("overhead", help="pilot counts of every scheme")
    v.add_argument("--antennas", type=int, required=True)
    v.add_argument("--interval", type=int, required=True)
    v.add_argument("--ranges", type=int, required=True)
    v.add_argument("--k", type=int, default=1)
    v.set_defaults(func=_cmd_overhead)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, FileNotFoundError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
