"""Acceptance suite: twelve numbered checks, each writing one JSON report.

Reports hold no timings or paths, so two runs with the same master seed give
byte-identical files.
"""
from __future__ import annotations

import filecmp
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..core import Window, make_trajectory, stream_seed, trace_many, trace_path
from ..isrw import domination_check
from ..percolation import (
    Polyline,
    bernstein_bound,
    binomial_excess_tail,
    blocks_intersected,
    fit_geom_constants,
    psi_sup_lattice,
    psi_sup_oracle,
    sample_pps,
    tail_psi_rhs,
)
from ..scales import BlockId, desk_schedule, geometry, recursion_check
from ..walker import DEFAULT_RATES, simulate_replica, sandwich_violations, jump_counts, verify_representation
from .config import ExperimentConfig
from .experiments import load_calibration, run_decay_curves, run_speed_experiment
from .report import dumps, mean_se

TITLES = {
    1: "duality along stirring paths",
    2: "particle conservation and path bijectivity",
    3: "stationarity of the product measure",
    4: "walker representation and sandwich",
    5: "homogeneous environments",
    6: "jump fractions above calibrated floors",
    7: "exclusion dominated by independent walkers",
    8: "Bernstein bound against exact binomial tails",
    9: "path supremum oracle and tail bound",
    10: "bad blocks sit in bad or locally spoiled parents",
    11: "decay of block probabilities across scales",
    12: "determinism of the suite",
}


@dataclass
class CriterionResult:
    number: int
    passed: bool
    details: dict

    @property
    def title(self) -> str:
        return TITLES[self.number]

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}"

    def as_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def _rng(seed: int, criterion: int, replica: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.uint64(stream_seed(seed, 1000 + criterion, replica)))


# ---------------------------------------------------------------- 1-3 exclusion dynamics

def criterion_1(seed: int, realizations: int = 50, triples: int = 500) -> CriterionResult:
    window = Window(-50, 50, 20.0)
    failures = 0
    for i in range(realizations):
        traj = make_trajectory(window, 0.5, stream_seed(seed, 1, 0), i)
        rng = _rng(seed, 1, i)
        xs = rng.integers(window.x_min, window.x_max + 1, size=triples)
        ts = rng.random((triples, 2)) * window.t_max
        cache = {}
        for x, (a, b) in zip(xs.tolist(), ts.tolist()):
            s, t = min(a, b), max(a, b)
            y = trace_path(traj.field, x, t, s, allow_boundary=True)
            for u in (s, t):
                if u not in cache:
                    cache[u] = traj.config_at(u)
            lo = window.lo
            failures += int(cache[t][x - lo] != cache[s][y - lo])
    return CriterionResult(1, failures == 0, {"realizations": realizations, "triples": triples, "failures": failures})


def criterion_2(seed: int, realizations: int = 50) -> CriterionResult:
    window = Window(-30, 30, 10.0)
    count_failures = bijection_failures = 0
    sites = window.sites()
    for i in range(realizations):
        traj = make_trajectory(window, 0.5, stream_seed(seed, 2, 0), i)
        counts = {traj.particle_count(t) for t in np.linspace(0, window.t_max, 21)}
        count_failures += int(len(counts) != 1)
        rng = _rng(seed, 2, i)
        for _ in range(5):
            s, t = sorted(rng.random(2) * window.t_max)
            img = trace_many(traj.field, sites, t, s, allow_boundary=True)
            bijection_failures += int(not np.array_equal(np.sort(img), sites))
    ok = count_failures == 0 and bijection_failures == 0
    return CriterionResult(2, ok, {"realizations": realizations, "count_failures": count_failures,
                                   "bijection_failures": bijection_failures})


def criterion_3(seed: int, replicas: int = 400, t: float = 50.0) -> CriterionResult:
    window = Window(-10, 10, t)
    samples = []
    for i in range(replicas):
        traj = make_trajectory(window, 0.5, stream_seed(seed, 3, 0), i)
        cfg = traj.config_at(t)
        samples.append(cfg[0 - window.lo: 6 - window.lo].astype(float))
    a = np.array(samples)
    checks = {}
    m, se = mean_se(a[:, 0])
    checks["one_point"] = {"mean": m, "se": se, "target": 0.5, "ok": abs(m - 0.5) <= 3 * se}
    for k in range(1, 6):
        m, se = mean_se(a[:, 0] * a[:, k])
        checks[f"two_point_{k}"] = {"mean": m, "se": se, "target": 0.25, "ok": abs(m - 0.25) <= 3 * se}
    return CriterionResult(3, all(c["ok"] for c in checks.values()), {"replicas": replicas, "t": t, "checks": checks})


# ---------------------------------------------------------------- 4-6 walker

def criterion_4(seed: int, replicas: int = 200, T: float = 200.0) -> CriterionResult:
    rep_fail = count_fail = violations = 0
    for i in range(replicas):
        path, _ = simulate_replica(DEFAULT_RATES, 0.5, T, seed, i)
        rep_fail += int(not verify_representation(path))
        n1, n0 = jump_counts(path, T)
        count_fail += int(n1 + n0 != path.n_jumps)
        violations += sandwich_violations(path)
    ok = rep_fail == 0 and count_fail == 0 and violations == 0
    return CriterionResult(4, ok, {"replicas": replicas, "T": T, "representation_failures": rep_fail,
                                   "count_failures": count_fail, "sandwich_violations": violations})


def criterion_5(seed: int, replicas: int = 200, T: float = 500.0) -> CriterionResult:
    out = {}
    for env in ("ones", "zeros"):
        cfg = ExperimentConfig(env=env, T=T, replicas=replicas, master_seed=seed)
        rep = run_speed_experiment(cfg)
        a = rep.assertions["homogeneous_speed"]
        out[env] = {"mean": a["mean"], "se": a["se"], "target": a["target"], "ok": rep.passed}
    return CriterionResult(5, all(v["ok"] for v in out.values()), out)


def criterion_6(seed: int, calibration: dict | None = None) -> CriterionResult:
    cal = calibration if calibration is not None else load_calibration()
    rep = run_speed_experiment(ExperimentConfig(master_seed=seed), calibration=cal)
    needed = ("particle_fraction_floor", "hole_fraction_floor", "speed_inside_band", "pathwise_sandwich")
    ok = all(k in rep.assertions for k in needed) and rep.passed
    return CriterionResult(6, ok, {"aggregates": rep.aggregates, "assertions": rep.assertions,
                                   "calibration_pilot": cal.get("pilot", {})})


# ---------------------------------------------------------------- 7-9 inequalities and oracles

def criterion_7(seed: int) -> CriterionResult:
    rep = domination_check(6, 3, (0.5, 1.0, 2.0), (0.25, 0.5, 1.0), 1e-9)
    return CriterionResult(7, rep.ok, rep.as_dict())


def criterion_8(seed: int) -> CriterionResult:
    violations = []
    n_checked = 0
    for n in (5, 10, 20):
        for p in (Fraction(1, 10), Fraction(1, 2), Fraction(9, 10)):
            var = float(p * (1 - p))
            for x in range(1, n + 1):
                exact = binomial_excess_tail(n, p, x)
                bound = bernstein_bound(n, var, 1.0, x)
                n_checked += 1
                if float(exact) > bound:
                    violations.append({"n": n, "p": str(p), "x": x, "exact": float(exact), "bound": bound})
    tail = binomial_excess_tail(10, Fraction(1, 2), 3)
    bound = bernstein_bound(10, 0.25, 1.0, 3)
    worked = {"tail": str(tail), "bound": bound, "ok": tail == Fraction(11, 1024) and abs(bound - 0.4412) < 5e-5}
    return CriterionResult(8, not violations and worked["ok"],
                           {"n_checked": n_checked, "violations": violations, "worked_instance": worked})


def _random_polyline(rng: np.random.Generator, ell: float, n_legs: int = 4) -> Polyline:
    cuts = np.sort(rng.random(n_legs - 1))
    legs = np.diff(np.concatenate(([0.0], cuts, [1.0]))) * ell
    verts = [(0.0, 0.0)]
    for leg in legs:
        a = rng.random() * 2 * math.pi
        x, y = verts[-1]
        verts.append((x + leg * math.cos(a), y + leg * math.sin(a)))
    return Polyline(tuple(verts))


def criterion_9(seed: int, samples: int = 100, ell: float = 2.3, mc_samples: int = 10_000) -> CriterionResult:
    mismatches = []
    tight = 0
    for i in range(samples):
        p = (0.3, 0.5, 0.7)[i % 3]
        sys_ = sample_pps(2, 1.0, p, (-2, -2), (5, 5), stream_seed(seed, 9, i))
        res = psi_sup_oracle(ell, sys_)
        lat = psi_sup_lattice(ell, sys_)
        tight += int(res.tight)
        if res.value != lat:
            mismatches.append({"sample": i, "oracle": res.value, "lattice": lat})
    consts = fit_geom_constants(2)
    tails = {}
    delta = 1.0
    L = 10 * delta
    for theta in (0.3, 0.6, 1.0):
        p = theta ** 2
        tb = tail_psi_rhs(1, consts, theta, L, delta, p)
        rng = _rng(seed, 9, int(theta * 10))
        hits = 0
        best = 0
        for _ in range(mc_samples):
            blocks = blocks_intersected(_random_polyline(rng, L), delta, 2)
            val = int((rng.random(len(blocks)) < p).sum())
            best = max(best, val)
            hits += int(val >= tb.threshold)
        freq = hits / mc_samples
        se = math.sqrt(freq * (1 - freq) / mc_samples)
        tails[str(theta)] = {"threshold": tb.threshold, "bound": tb.bound, "exceedance": freq, "se": se,
                             "max_lower_bound": best, "ok": freq <= tb.bound + 3 * se}
    ok = not mismatches and all(t["ok"] for t in tails.values())
    return CriterionResult(9, ok, {"samples": samples, "ell": ell, "mismatches": mismatches,
                                   "tight_witnesses": tight, "constants": consts.report | {"K1": consts.K1, "K2": consts.K2},
                                   "tail": tails})


# ---------------------------------------------------------------- 10-11 multiscale

def _paths_in_block(rng: np.random.Generator, parent, schedule, n: int) -> list[Polyline]:
    rect = geometry(parent, "block", schedule)
    D = rect.x_hi - rect.x_lo
    out = []
    while len(out) < n:
        x = rect.x_lo + rng.random() * D
        t = rect.t_lo + rng.random() * D
        verts = [(x, t)]
        for _ in range(3):
            a = rng.random() * 2 * math.pi
            leg = rng.random() * D / 2
            verts.append((verts[-1][0] + leg * math.cos(a), verts[-1][1] + leg * math.sin(a)))
        if all(rect.x_lo < vx < rect.x_hi and rect.t_lo < vt < rect.t_hi for vx, vt in verts):
            out.append(Polyline(tuple(verts)))
    return out


def criterion_10(seed: int, realizations: int = 1000, n_paths: int = 10) -> CriterionResult:
    schedule = desk_schedule()
    D = schedule.delta(2)
    parent = BlockId(2, 0, 2 * D)
    window = Window(-5 * D, 6 * D - 1, float(3 * D), buffer=0)
    region = geometry(parent, "block", schedule)
    rhos = (0.5, 0.9, 0.999)
    counter = []
    path_fail = 0
    totals = {"n_bad_children": 0, "n_parent_bad": 0, "n_parent_spoiled_only": 0}
    per_rho = {str(r): 0 for r in rhos}
    for i in range(realizations):
        rho = rhos[i % 3]
        traj = make_trajectory(window, rho, stream_seed(seed, 10, 0), i)
        paths = _paths_in_block(_rng(seed, 10, i), parent, schedule, n_paths)
        rep = recursion_check(traj, region, 1, schedule, paths)
        for k in totals:
            totals[k] += getattr(rep, k)
        per_rho[str(rho)] += rep.n_bad_children
        if rep.counterexamples:
            counter.append({"realization": i, "rho": rho, "blocks": rep.as_dict()["counterexamples"]})
        path_fail += sum(not c["ok"] for c in rep.path_checks)
    ok = not counter and path_fail == 0
    return CriterionResult(10, ok, {"realizations": realizations, "paths_per_realization": n_paths,
                                    "counterexamples": counter, "path_failures": path_fail,
                                    "bad_children_by_rho": per_rho, **totals})


def criterion_11(seed: int, calibration: dict | None = None) -> CriterionResult:
    cal = calibration if calibration is not None else load_calibration()
    factor = cal.get("decay", {}).get("required_factor", 10.0)
    cfg = ExperimentConfig(kind="decay", rho=0.9996, decay_replicas=1000, decay_ls_replicas=40, master_seed=seed)
    rep = run_decay_curves(cfg, required_factor=factor)
    ns = rep.assertions["not_stuck_r1"]
    ok = ns["passed"] and rep.assertions["bad_decreases"]["passed"] and rep.assertions["spoiled_decreases"]["passed"]
    return CriterionResult(11, ok, {"required_factor": factor, "assertions": rep.assertions,
                                    "per_r": rep.aggregates["per_r"]})


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def write_result(res: CriterionResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = out / f"criterion_{res.number:02d}.json"
    p.write_text(dumps(res.as_dict()))
    return p


def run_suite(seed: int, out_dir, numbers=tuple(range(1, 12)), echo=print) -> dict[int, CriterionResult]:
    results = {}
    for n in numbers:
        res = CRITERIA[n](seed)
        write_result(res, out_dir)
        if echo:
            echo(res.line())
        results[n] = res
    return results


def compare_dirs(a, b) -> dict:
    a, b = Path(a), Path(b)
    names = sorted({p.name for p in a.glob("*.json")} | {p.name for p in b.glob("*.json")})
    differ = [n for n in names if not ((a / n).is_file() and (b / n).is_file()
                                       and filecmp.cmp(a / n, b / n, shallow=False))]
    return {"files": names, "differ": differ}


def criterion_12(seed: int, first_dir, second_dir, numbers=tuple(range(1, 12))) -> CriterionResult:
    """Rerun the suite into second_dir and compare bytes with first_dir."""
    run_suite(seed, second_dir, numbers, echo=None)
    cmp = compare_dirs(first_dir, second_dir)
    return CriterionResult(12, bool(cmp["files"]) and not cmp["differ"], cmp)
