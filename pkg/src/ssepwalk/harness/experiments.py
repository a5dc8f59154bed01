"""Replica experiments: speed functionals, jump frequency on smooth blocks, decay of
block probabilities across scales, and the static interval environment."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np

from ..core import (
    STREAM_CLOCK,
    STREAM_EXTRA,
    STREAM_MARKS,
    ArrowField,
    Configuration,
    Trajectory,
    Window,
    make_trajectory,
    stream_seed,
)
from ..errors import OutOfWindowError
from ..percolation import stochdom_log_bounds
from ..scales import (
    BlockId,
    ScaleSchedule,
    base_is_dense,
    blocks_in,
    block_of,
    geometry,
    _kind_test,
    is_bad,
    is_locally_spoiled,
    is_stuck,
    stuck_partition_class,
    theta_star,
)
from ..walker import (
    RateSet,
    jump_counts,
    particle_jump_indicators,
    sample_marks,
    sandwich_range,
    sandwich_violations,
    sandwich_walks,
    simulate_replica,
    simulate_walk,
    speed_functionals,
    verify_representation,
)
from .config import ExperimentConfig
from .report import SummaryReport, mean_se, wilson_interval

log = logging.getLogger(__name__)


def map_replicas(fn, n: int, threads: int = 1) -> list:
    """fn(i) for i < n; results come back in replica order whatever the thread count."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def load_calibration(path=None) -> dict:
    if path is None:
        text = resources.files("ssepwalk.harness").joinpath("calibration.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def _replica_with_retry(cfg: ExperimentConfig, i: int, t_max=None):
    buffer = cfg.buffer
    for attempt in range(4):
        try:
            return simulate_replica(cfg.rates, cfg.rho, cfg.T, cfg.master_seed, i, cfg.env, t_max, buffer)
        except OutOfWindowError:
            base = buffer if buffer is not None else math.ceil(2 * (t_max or cfg.T)) + 20
            buffer = 2 * base
            log.warning("replica %d left the simulated region; retrying with buffer %d", i, buffer)
    raise OutOfWindowError(f"replica {i} left the simulated region after enlarging the buffer")


# ---------------------------------------------------------------- speed

def _speed_row(cfg: ExperimentConfig, i: int) -> dict:
    path, _ = _replica_with_retry(cfg, i)
    f = speed_functionals(path)
    lower, upper = sandwich_walks(path)
    n1, n0 = jump_counts(path, path.T)
    return {
        "replica": i,
        "speed": f.speed,
        "particle_fraction": f.particle_fraction,
        "hole_fraction": f.hole_fraction,
        "length": f.length,
        "n_jumps": path.n_jumps,
        "length_identity": f.length == path.T + path.n_jumps and n1 + n0 == path.n_jumps,
        "lower_speed": lower.final() / path.T,
        "upper_speed": upper.final() / path.T,
        "sandwich_violations": sandwich_violations(path),
        "representation_ok": verify_representation(path),
    }


def _calibration_matches(cfg: ExperimentConfig, cal: dict) -> bool:
    c = cal.get("speed", {})
    return (
        c.get("rates") == cfg.rates.as_dict()
        and c.get("rho") == cfg.rho
        and c.get("T") == cfg.T
        and cfg.env == "ssep"
    )


def run_speed_experiment(cfg: ExperimentConfig, calibration: dict | None = None) -> SummaryReport:
    rows = map_replicas(lambda i: _speed_row(cfg, i), cfg.replicas, cfg.threads)
    rep = SummaryReport("speed", cfg.as_dict(), cfg.master_seed, rows=rows, digest=cfg.digest())
    agg = {}
    for key in ("speed", "particle_fraction", "hole_fraction", "lower_speed", "upper_speed"):
        m, se = mean_se([r[key] for r in rows])
        agg[key] = {"mean": m, "se": se}
    rates = cfg.rates
    agg["v0"], agg["v1"] = rates.v0, rates.v1
    rep.aggregates = agg
    rep.check("representation", all(r["representation_ok"] for r in rows))
    rep.check("length_identity", all(r["length_identity"] for r in rows))
    rep.check("pathwise_sandwich", sum(r["sandwich_violations"] for r in rows) == 0,
              violations=sum(r["sandwich_violations"] for r in rows))
    rep.check("mean_sandwich", agg["lower_speed"]["mean"] <= agg["speed"]["mean"] <= agg["upper_speed"]["mean"])
    if cfg.env in ("ones", "zeros"):
        v = rates.v1 if cfg.env == "ones" else rates.v0
        m, se = agg["speed"]["mean"], agg["speed"]["se"]
        rep.check("homogeneous_speed", abs(m - v) <= 3 * se if se == se else m == v, target=v, mean=m, se=se)
        return rep
    cal = calibration if calibration is not None else load_calibration()
    if _calibration_matches(cfg, cal):
        c = cal["speed"]
        p, h = agg["particle_fraction"]["mean"], agg["hole_fraction"]["mean"]
        rep.check("particle_fraction_floor", p >= c["floor_particle_fraction"], mean=p, floor=c["floor_particle_fraction"])
        rep.check("hole_fraction_floor", h >= c["floor_hole_fraction"], mean=h, floor=c["floor_hole_fraction"])
        s = agg["speed"]["mean"]
        lo = rates.v0 + (rates.v1 - rates.v0) * c["floor_particle_fraction"]
        hi = rates.v1 - (rates.v1 - rates.v0) * c["floor_hole_fraction"]
        rep.check("speed_inside_band", lo <= s <= hi, mean=s, lower=lo, upper=hi)
    else:
        rep.notes.append("no calibration stored for this configuration; floors not asserted")
    return rep


def run_pilot(cfg: ExperimentConfig, n_se: float = 4.0) -> dict:
    """Pilot run fixing the floors later asserted by the speed experiment:
    floor = pilot mean - n_se * pilot standard error."""
    rows = map_replicas(lambda i: _speed_row(cfg, i), cfg.replicas, cfg.threads)
    p_m, p_se = mean_se([r["particle_fraction"] for r in rows])
    h_m, h_se = mean_se([r["hole_fraction"] for r in rows])
    s_m, s_se = mean_se([r["speed"] for r in rows])
    from .. import __version__

    return {
        "schema_version": 1,
        "version": __version__,
        "pilot": {"seed": cfg.master_seed, "replicas": cfg.replicas, "config_digest": cfg.digest(), "n_se": n_se},
        "speed": {
            "rates": cfg.rates.as_dict(),
            "rho": cfg.rho,
            "T": cfg.T,
            "pilot_particle_fraction": [p_m, p_se],
            "pilot_hole_fraction": [h_m, h_se],
            "pilot_speed": [s_m, s_se],
            "floor_particle_fraction": p_m - n_se * p_se,
            "floor_hole_fraction": h_m - n_se * h_se,
        },
    }


def run_decay_pilot(master_seed: int, replicas: int = 400, ls_replicas: int = 20,
                    required_factor: float = 10.0) -> dict:
    """Observed scale-to-scale ratios on the desk schedule, stored next to the factor
    the decay check demands."""
    cfg = ExperimentConfig(kind="decay", rho=0.9996, decay_replicas=replicas, decay_ls_replicas=ls_replicas,
                           master_seed=master_seed)
    rep = run_decay_curves(cfg, required_factor)
    return {
        "seed": master_seed,
        "config_digest": cfg.digest(),
        "required_factor": required_factor,
        "observed_bad_ratio": rep.assertions["bad_decreases"]["ratio"],
        "observed_spoiled_ratio": rep.assertions["spoiled_decreases"]["ratio"],
        "per_r": rep.aggregates["per_r"],
    }


# ---------------------------------------------------------------- jumps on smooth blocks

def _smooth_row(cfg: ExperimentConfig, schedule: ScaleSchedule, r_star: int, i: int) -> dict:
    d = schedule.delta(r_star)
    t_max = (math.floor(cfg.T / d) + 1) * d + 1.0
    path, traj = _replica_with_retry(cfg, i, t_max=t_max)
    n = int(math.floor(cfg.T))
    pos = path.positions(np.arange(n, dtype=np.float64))
    y = particle_jump_indicators(path, n)
    rough = _kind_test("rough")
    memo = traj.cache.setdefault(("kind", "rough", schedule.knobs), {})
    smooth_times = successes = 0
    for s in range(n):
        b = block_of(r_star, int(pos[s]), s, schedule)
        if b not in memo:
            memo[b] = bool(rough(traj, b, schedule))
        if not memo[b]:
            smooth_times += 1
            successes += int(y[s])
    th = theta_star(path, traj, r_star, schedule, t=n - 1 if n else 0)
    n1, _ = jump_counts(path, path.T)
    return {
        "replica": i,
        "smooth_times": smooth_times,
        "successes": successes,
        "times": n,
        "theta": th.theta,
        "theta_bound": th.bound,
        "theta_ok": th.ok,
        "particle_fraction": n1 / (cfg.rates.gamma * path.T),
        "rough_blocks_visited": th.rough_blocks_on_path,
    }


def estimate_smooth_jump_prob(cfg: ExperimentConfig, r_star: int | None = None, min_smooth: int = 30) -> SummaryReport:
    """Frequency of a particle jump in (s, s+1] over integer times s at which the
    r*-block containing (W_s, s) is neither rarefied nor turbulent."""
    schedule = cfg.schedule
    r_star = cfg.r_star if r_star is None else r_star
    rows = map_replicas(lambda i: _smooth_row(cfg, schedule, r_star, i), cfg.replicas, cfg.threads)
    rep = SummaryReport("smooth", cfg.as_dict(), cfg.master_seed, rows=rows, digest=cfg.digest())
    k = sum(r["smooth_times"] for r in rows)
    x = sum(r["successes"] for r in rows)
    total = sum(r["times"] for r in rows)
    lo, hi = wilson_interval(x, k, 0.99)
    rep.aggregates = {
        "r_star": r_star,
        "Delta_r_star": schedule.delta(r_star),
        "smooth_times": k,
        "all_times": total,
        "smooth_fraction": k / total if total else math.nan,
        "delta_hat": x / k if k else math.nan,
        "wilson99": [lo, hi],
        "theta_over_t": (sum(r["theta"] for r in rows) / total) if total else math.nan,
        "particle_fraction": mean_se([r["particle_fraction"] for r in rows]),
        "clock_jump_prob": 1 - math.exp(-cfg.rates.gamma),
    }
    rep.check("theta_bound", all(r["theta_ok"] for r in rows))
    if k < min_smooth:
        rep.notes.append(f"inconclusive: only {k} smooth times observed")
    else:
        rep.check("delta_positive", lo > 0, wilson99_lower=lo)
    return rep


# ---------------------------------------------------------------- decay across scales

def _decay_realization(schedule: ScaleSchedule, rho: float, env: str, master_seed: int, replica: int,
                       r: int, children: bool = True) -> dict:
    """One realization on the superblock of a single (r+1)-block P; records its r-children
    (bad, not stuck), P itself (bad, dense base, locally spoiled)."""
    D = schedule.delta(r + 1)
    parent = BlockId(r + 1, 0, 2 * D)
    window = Window(-5 * D, 6 * D - 1, float(3 * D), buffer=0)
    traj = make_trajectory(window, rho, master_seed, replica, env)
    out = {"replica": replica, "r": r}
    if children:
        kids = blocks_in(geometry(parent, "block", schedule), r, schedule)
        bad = [is_bad(traj, c, schedule) for c in kids]
        stuck = [is_stuck(traj.field, c, schedule) for c in kids]
        classes = {"even": [0, 0], "odd": [0, 0]}
        for c, st in zip(kids, stuck):
            cl = classes[stuck_partition_class(c, schedule)]
            cl[0] += 1
            cl[1] += int(not st)
        out.update(n_children=len(kids), n_bad=int(sum(bad)), n_not_stuck=int(len(kids) - sum(stuck)),
                   stuck_classes=classes)
    dense = base_is_dense(traj, parent, schedule)
    out.update(parent_bad=bool(is_bad(traj, parent, schedule)), parent_base_dense=bool(dense),
               parent_spoiled=bool(is_locally_spoiled(traj, parent, schedule)) if dense else False)
    return out


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else math.nan
    return a / b


def run_decay_curves(cfg: ExperimentConfig, required_factor: float = 10.0) -> SummaryReport:
    """Block probabilities at consecutive scales.

    Scale r: bad and not-stuck r-blocks (children of one (r+1)-block per realization),
    and locally spoiled (r+1)-blocks given a dense base, whose windows live at scale r.
    The bad probability at r+1 also uses the parent of each scale-r realization.
    """
    schedule = cfg.schedule
    rs = sorted(cfg.decay_r)
    rep = SummaryReport("decay", cfg.as_dict(), cfg.master_seed, digest=cfg.digest())
    per_r = {}
    for idx, r in enumerate(rs):
        n_rep = cfg.decay_replicas if idx == 0 else cfg.decay_ls_replicas
        seed = stream_seed(cfg.master_seed, r, STREAM_EXTRA)
        rows = map_replicas(lambda i: _decay_realization(schedule, cfg.rho, cfg.env, seed, i, r), n_rep, cfg.threads)
        per_r[r] = rows
        rep.rows.extend(rows)
    rho_bar_inf = schedule.rho_bar_inf_lower
    agg = {}
    for idx, r in enumerate(rs):
        rows = per_r[r]
        bad_frac = [x["n_bad"] / x["n_children"] for x in rows]
        ns_frac = [x["n_not_stuck"] / x["n_children"] for x in rows]
        n_dense = sum(x["parent_base_dense"] for x in rows)
        n_ls = sum(x["parent_spoiled"] for x in rows)
        d = schedule.delta(r)
        classes = {}
        for name in ("even", "odd"):
            tot = sum(x["stuck_classes"][name][0] for x in rows)
            hits = sum(x["stuck_classes"][name][1] for x in rows)
            p = hits / tot if tot else math.nan
            classes[name] = {"n": tot, "freq": p, "se": math.sqrt(p * (1 - p) / tot) if tot else math.nan}
        p_ls = n_ls / n_dense if n_dense else math.nan
        log_bounds = stochdom_log_bounds(schedule.N0, schedule.E, rho_bar_inf, [r + 1])[0]
        agg[str(r)] = {
            "realizations": len(rows),
            "bad": dict(zip(("mean", "se"), mean_se(bad_frac))),
            "not_stuck": dict(zip(("mean", "se"), mean_se(ns_frac))),
            "not_stuck_bound": 2 * d * d * math.exp(-d),
            "not_stuck_classes": classes,
            "spoiled_given_dense": {
                "n_dense": n_dense,
                "n_spoiled": n_ls,
                "mean": p_ls,
                "se": math.sqrt(p_ls * (1 - p_ls) / n_dense) if n_dense else math.nan,
            },
            "spoiled_bound_log": log_bounds[2],
            "spoiled_bound_vacuous": log_bounds[2] >= 0,
            "parent_bad": dict(zip(("mean", "se"), mean_se([float(x["parent_bad"]) for x in rows]))),
        }
    # bad at the next scale from the parents of the first level
    r0 = rs[0]
    rep.aggregates = {"per_r": agg, "required_factor": required_factor}
    for r in rs:
        a = agg[str(r)]
        m, se, b = a["not_stuck"]["mean"], a["not_stuck"]["se"], a["not_stuck_bound"]
        rep.check(f"not_stuck_r{r}", m <= b + 3 * (se if se == se else 0.0), mean=m, se=se, bound=b)
        for name, c in a["not_stuck_classes"].items():
            rep.check(f"not_stuck_r{r}_{name}", c["freq"] <= b + 3 * (c["se"] if c["se"] == c["se"] else 0.0),
                      freq=c["freq"], bound=b)
    if len(rs) >= 2 and rs[1] == r0 + 1:
        r1 = rs[1]
        p_bad_0 = agg[str(r0)]["bad"]["mean"]
        p_bad_1 = agg[str(r0)]["parent_bad"]["mean"]
        rep.check("bad_decreases", p_bad_1 < p_bad_0 and p_bad_1 * required_factor <= p_bad_0,
                  p_r=p_bad_0, p_r_plus_1=p_bad_1, ratio=_ratio(p_bad_0, p_bad_1))
        q0 = agg[str(r0)]["spoiled_given_dense"]["mean"]
        q1 = agg[str(r1)]["spoiled_given_dense"]["mean"]
        ok = q0 == q0 and q1 == q1 and q1 < q0 and q1 * required_factor <= q0
        rep.check("spoiled_decreases", ok, p_r=q0, p_r_plus_1=q1, ratio=_ratio(q0, q1))
    if cfg.env == "ones":
        rep.check("all_ones_never_bad", all(agg[str(r)]["bad"]["mean"] == 0 for r in rs))
    return rep


# ---------------------------------------------------------------- static environment

def static_interval_environment(lo: int, hi: int, pareto_index: float, rng: np.random.Generator,
                                colour_p: float = 0.5) -> Configuration:
    """Sites lo..hi of a partition of Z into intervals with i.i.d. lengths ceil(X),
    X Pareto(pareto_index) on [1, inf), each coloured 1 with probability colour_p.

    The interval covering the origin is drawn size-biased (Pareto(index - 1) in the
    continuous approximation) with the origin uniform inside it.
    """
    def length(a):
        return int(math.ceil(rng.pareto(a) + 1.0))

    L0 = min(length(pareto_index - 1.0) if pareto_index > 1 else length(pareto_index), 4 * (hi - lo + 1) + 4)
    u = int(rng.integers(L0))
    vals = np.empty(hi - lo + 1, dtype=np.int8)
    a, b = -u, L0 - u - 1

    def paint(x0, x1, c):
        s, e = max(x0, lo), min(x1, hi)
        if s <= e:
            vals[s - lo:e - lo + 1] = c

    paint(a, b, int(rng.random() < colour_p))
    right = b
    while right < hi:
        L = length(pareto_index)
        paint(right + 1, right + L, int(rng.random() < colour_p))
        right += L
    left = a
    while left > lo:
        L = length(pareto_index)
        paint(left - L, left - 1, int(rng.random() < colour_p))
        left -= L
    return Configuration(lo, vals)


def _static_speed(rates: RateSet, T: float, pareto_index: float, master_seed: int, replica: int,
                  colour_p: float = 0.5) -> float:
    marks = sample_marks(rates, T, stream_seed(master_seed, replica, STREAM_CLOCK),
                         stream_seed(master_seed, replica, STREAM_MARKS))
    a, b = sandwich_range(marks, rates)
    window = Window(a - 1, b + 1, float(T), buffer=0)
    env = static_interval_environment(window.lo, window.hi, pareto_index,
                                      np.random.default_rng(np.uint64(stream_seed(master_seed, replica, STREAM_EXTRA))),
                                      colour_p)
    traj = Trajectory(ArrowField.empty(window), env)
    return simulate_walk(traj, rates, T, marks=marks).final() / T


STATIC_RATES = RateSet(0.5, 0.5, 1.0 - 1e-3, 1e-3)


def run_static_env_demo(cfg: ExperimentConfig, control_index: float = 3.0) -> SummaryReport:
    """Walk with drift 0 on holes and nearly 1 on particles, in a static environment of
    fair-coin coloured intervals whose lengths have finite mean and infinite variance,
    against a finite-variance control."""
    rates = STATIC_RATES
    rep = SummaryReport("static", cfg.as_dict(), cfg.master_seed, digest=cfg.digest())
    rep.notes.append("beta1 = 1e-3 keeps every rate positive; the zero-speed mechanism needs beta1 = 0 only in the limit")
    heavy, control = [], []
    for j, T in enumerate(cfg.static_T):
        seed_h = stream_seed(cfg.master_seed, j, 0)
        seed_c = stream_seed(cfg.master_seed, j, 1)
        sh = map_replicas(lambda i: _static_speed(rates, T, cfg.pareto_index, seed_h, i), cfg.replicas, cfg.threads)
        sc = map_replicas(lambda i: _static_speed(rates, T, control_index, seed_c, i), cfg.replicas, cfg.threads)
        heavy.append(mean_se(sh))
        control.append(mean_se(sc))
        for i, (x, y) in enumerate(zip(sh, sc)):
            rep.rows.append({"T": T, "replica": i, "speed": x, "control_speed": y})
    rep.aggregates = {
        "rates": rates.as_dict(),
        "T": list(cfg.static_T),
        "pareto_index": cfg.pareto_index,
        "control_index": control_index,
        "speed": [list(h) for h in heavy],
        "control_speed": [list(c) for c in control],
    }
    means = [h[0] for h in heavy]
    rep.check("heavy_tail_speed_decreasing", all(x > y for x, y in zip(means, means[1:])), means=means)
    m, se = control[-1]
    rep.check("control_speed_positive", m - 3 * se > means[-1] and m - 3 * se > 0, control=m, se=se)
    return rep
