"""Command line entry point.

Exit codes: 0 success, 1 a checked assertion failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..core import ArrowField, Window, make_trajectory
from ..errors import InvalidArgumentError
from ..scales import Rect, blocks_in, classify, desk_schedule, write_verdicts_csv
from ..walker import DEFAULT_RATES, RateSet, simulate_replica
from . import experiments as ex
from .config import KINDS, load_config
from .report import dumps
from .svg import arrows_svg, curve_svg, spacetime_svg, verdict_heatmap_svg

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, required=False, help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--replicas", type=int)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssepwalk", description="Random walk on the simple symmetric exclusion process")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a stationary exclusion trajectory and export it")
    _common(p)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--xmin", type=int, default=-20)
    p.add_argument("--xmax", type=int, default=20)
    p.add_argument("--tmax", type=float, default=10.0)

    p = sub.add_parser("walk", help="run one walk replica")
    _common(p)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--rates", type=float, nargs=4, metavar=("A0", "B0", "A1", "B1"))

    p = sub.add_parser("blocks", help="classify the r-blocks of a space-time region")
    _common(p)
    p.add_argument("--rho", type=float, default=0.9996)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--nx", type=int, default=8, help="blocks along space")
    p.add_argument("--nt", type=int, default=4, help="blocks along time")

    p = sub.add_parser("perc", help="sample a homogeneous percolative field and compute its path supremum")
    _common(p)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--size", type=int, default=5)
    p.add_argument("--ell", type=float, default=2.3)

    p = sub.add_parser("isrw", help="exclusion vs independent walkers domination sweep")
    _common(p)
    p.add_argument("--sites", type=int, default=6)
    p.add_argument("--particles", type=int, default=3)

    p = sub.add_parser("experiment", help="run a configured replica experiment")
    p.add_argument("kind", choices=KINDS)
    _common(p)

    p = sub.add_parser("plot", help="render SVG from exported files")
    p.add_argument("what", choices=("spacetime", "curve"))
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _seed(args, default: int = 42) -> int:
    s = default if args.seed is None else args.seed
    if not 0 <= s < 2 ** 64:
        raise _UsageError("seed must be an unsigned 64-bit integer")
    return s


def cmd_simulate(args) -> int:
    seed = _seed(args)
    window = Window(args.xmin, args.xmax, args.tmax)
    traj = make_trajectory(window, args.rho, seed, 0)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv", range(int(args.tmax) + 1))
    traj.field.to_csv(out / "arrows.csv")
    meta = {"x_min": args.xmin, "x_max": args.xmax, "t_max": args.tmax, "buffer": window.buffer,
            "rho": args.rho, "seed": seed, "particles": traj.particle_count(0.0)}
    _write(out / "meta.json", dumps(meta))
    return EXIT_OK


def cmd_walk(args) -> int:
    seed = _seed(args)
    rates = RateSet(*args.rates) if args.rates else DEFAULT_RATES
    path, traj = simulate_replica(rates, args.rho, args.T, seed, 0)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    path.to_csv(out / "path.csv")
    _write(out / "summary.json", path.summary_json(seed) + "\n")
    a = int(min(0, path.after.min(initial=0))) - 5
    b = int(max(0, path.after.max(initial=0))) + 5
    traj.to_csv(out / "trajectory.csv", range(int(args.T) + 1), (a, b))
    _write(out / "meta.json", dumps({"x_min": a, "x_max": b, "t_max": args.T, "rho": args.rho, "seed": seed}))
    return EXIT_OK


def cmd_blocks(args) -> int:
    seed = _seed(args)
    schedule = desk_schedule()
    d = schedule.delta(args.r)
    x_lo, t_lo = 0, 2 * d
    region = Rect(x_lo, x_lo + args.nx * d, t_lo, t_lo + args.nt * d)
    D = schedule.delta(args.r + 1)
    window = Window(region.x_lo - 6 * D, region.x_hi + 6 * D, float(region.t_hi + d), buffer=0)
    traj = make_trajectory(window, args.rho, seed, 0)
    verdicts = [classify(traj, b, schedule) for b in blocks_in(region, args.r, schedule)]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_verdicts_csv(out / "verdicts.csv", verdicts)
    _write(out / "verdicts.svg", verdict_heatmap_svg(verdicts))
    return EXIT_OK


def cmd_perc(args) -> int:
    from ..percolation import psi_sup_lattice, psi_sup_oracle, sample_pps

    seed = _seed(args)
    half = args.size // 2
    sys_ = sample_pps(2, 1.0, args.p, (-half, -half), (args.size, args.size), seed)
    res = psi_sup_oracle(args.ell, sys_)
    lattice = psi_sup_lattice(args.ell, sys_)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    sys_.to_csv(out / "system.csv")
    report = {"ell": args.ell, "p": args.p, "seed": seed, "sup": res.value, "lattice_sup": lattice,
              "witness": [list(v) for v in res.witness.vertices], "witness_psi": res.witness_psi,
              "tight": res.tight, "agree": res.value == lattice}
    _write(out / "perc.json", dumps(report))
    return EXIT_OK if res.value == lattice else EXIT_FAIL


def cmd_isrw(args) -> int:
    from ..isrw import domination_check, srw_facts_check

    rep = domination_check(args.sites, args.particles)
    facts = srw_facts_check()
    _write(args.out / "isrw.json", dumps({"domination": rep.as_dict(), "srw_facts": facts.as_dict()}))
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_experiment(args) -> int:
    if args.config is None:
        raise _UsageError("experiment needs --config PATH")
    try:
        cfg = load_config(args.config, kind=args.kind, master_seed=args.seed, replicas=args.replicas,
                          threads=args.threads, out_dir=str(args.out))
    except FileNotFoundError as exc:
        raise _UsageError(str(exc)) from None
    if args.kind == "pilot":
        cal = ex.run_pilot(cfg)
        cal["decay"] = ex.run_decay_pilot(cfg.master_seed)
        _write(args.out / "calibration.json", dumps(cal))
        return EXIT_OK
    runner = {
        "speed": ex.run_speed_experiment,
        "smooth": ex.estimate_smooth_jump_prob,
        "decay": ex.run_decay_curves,
        "static": ex.run_static_env_demo,
    }[args.kind]
    rep = runner(cfg)
    rep.write(args.out, args.kind, args.format)
    for name, a in sorted(rep.assertions.items()):
        print(f"{'PASS' if a['passed'] else 'FAIL'} {name}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _read_grid(path: Path):
    rows = list(csv.DictReader(open(path, newline="")))
    ts = sorted({float(r["t"]) for r in rows})
    xs = sorted({int(r["x"]) for r in rows})
    ti = {t: i for i, t in enumerate(ts)}
    grid = np.zeros((len(ts), len(xs)), dtype=np.int8)
    for r in rows:
        grid[ti[float(r["t"])], int(r["x"]) - xs[0]] = int(r["occupancy"])
    return grid, xs[0], ts


def cmd_plot(args) -> int:
    src = args.input
    if args.what == "spacetime":
        if not (src / "trajectory.csv").is_file():
            raise _UsageError(f"{src} holds no trajectory.csv")
        grid, x0, _ = _read_grid(src / "trajectory.csv")
        meta = json.loads((src / "meta.json").read_text()) if (src / "meta.json").is_file() else {}
        if (src / "arrows.csv").is_file() and "buffer" in meta and grid.shape[1] <= 60:
            w = Window(meta["x_min"], meta["x_max"], meta["t_max"], meta["buffer"])
            field = ArrowField.from_csv(src / "arrows.csv", w)
            mid = (meta["x_min"] + meta["x_max"]) // 2
            svg = arrows_svg(field, meta["x_min"], meta["x_max"], zeta_from=(mid, meta["t_max"]))
        else:
            wt = wx = None
            if (src / "path.csv").is_file():
                pr = list(csv.DictReader(open(src / "path.csv", newline="")))
                wt = [float(r["t"]) for r in pr]
                wx = [int(r["W_t"]) for r in pr]
            svg = spacetime_svg(grid, x0, wt, wx)
        _write(args.out, svg)
        return EXIT_OK
    data = json.loads(src.read_text())
    kind = data.get("kind")
    agg = data.get("aggregates", {})
    if kind == "static":
        series = {
            "heavy tail": (agg["T"], [m for m, _ in agg["speed"]], [s for _, s in agg["speed"]]),
            "control": (agg["T"], [m for m, _ in agg["control_speed"]], [s for _, s in agg["control_speed"]]),
        }
        svg = curve_svg(series, "T", "W_T / T", logx=True, title="static interval environment")
    elif kind == "decay":
        per = agg["per_r"]
        rs = sorted(int(r) for r in per)
        series = {
            "bad": (rs, [per[str(r)]["bad"]["mean"] for r in rs], [per[str(r)]["bad"]["se"] for r in rs]),
            "not stuck": (rs, [per[str(r)]["not_stuck"]["mean"] for r in rs],
                          [per[str(r)]["not_stuck"]["se"] for r in rs]),
        }
        svg = curve_svg(series, "r", "probability", title="block probabilities by scale")
    else:
        raise _UsageError(f"no curve defined for report kind {kind!r}")
    _write(args.out, svg)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "walk": cmd_walk,
    "blocks": cmd_blocks,
    "perc": cmd_perc,
    "isrw": cmd_isrw,
    "experiment": cmd_experiment,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (_UsageError, InvalidArgumentError, json.JSONDecodeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
