"""Summary reports: per-replica rows, aggregates, assertions and provenance.

Output bytes depend only on the configuration and seed: keys are sorted, floats
are written with repr precision and nothing time-dependent is stored.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

SCHEMA_VERSION = 1


def mean_se(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        return math.nan, math.nan
    if a.size == 1:
        return float(a[0]), math.nan
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def wilson_interval(successes: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class SummaryReport:
    kind: str
    config: dict
    seed: int
    rows: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    assertions: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    digest: str = ""

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions.values())

    def check(self, name: str, passed: bool, **detail) -> bool:
        self.assertions[name] = {"passed": bool(passed), **detail}
        return bool(passed)

    def as_dict(self) -> dict:
        from .. import __version__

        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "provenance": {"config_digest": self.digest, "seed": self.seed, "version": __version__},
            "config": self.config,
            "aggregates": self.aggregates,
            "assertions": self.assertions,
            "passed": self.passed,
            "notes": self.notes,
            "rows": self.rows,
        }

    def write(self, out_dir, stem: str | None = None, fmt: str = "json") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = stem or self.kind
        paths = [out / f"{stem}.json"]
        paths[0].write_text(dumps(self.as_dict()))
        if fmt == "csv" and self.rows:
            p = out / f"{stem}_rows.csv"
            keys = sorted({k for row in self.rows for k in row})
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(keys)
                for row in self.rows:
                    w.writerow([_csv_value(row.get(k, "")) for k in keys])
            paths.append(p)
        return paths


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    return v
