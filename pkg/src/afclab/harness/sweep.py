"""Parameter sweeps over scenario replicates and their CSV form."""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .scenario import run_scenario

AXES = ("L_GN", "alpha", "snr_db")
METRICS = ("msg_db", "asg_db", "kappa", "misalignment_db")


@dataclass
class SweepRow:
    value: object
    seed: int
    report: object = None
    error: str = None

    @property
    def ok(self):
        return self.report is not None

    def metric(self, name):
        return getattr(self.report, name) if self.ok else math.nan

    @property
    def flags(self):
        if not self.ok:
            return (f"error:{self.error}",)
        return self.report.flags


@dataclass
class SweepResult:
    axis: str
    base: object
    rows: list = field(default_factory=list)

    def values(self):
        return list(dict.fromkeys(r.value for r in self.rows))

    def select(self, predicate=lambda v: True):
        return [r for r in self.rows if predicate(r.value)]

    def mean(self, metric, predicate=lambda v: True):
        """Mean of ``metric`` over all successful rows whose axis value passes ``predicate``."""
        vals = [r.metric(metric) for r in self.select(predicate) if r.ok]
        return float(np.mean(vals)) if vals else math.nan

    def aggregate(self):
        """Per axis value: count, mean and (population) std of every metric across seeds."""
        out = []
        for v in self.values():
            ok = [r for r in self.rows if r.value == v and r.ok]
            entry = {self.axis: v, "n": len(ok)}
            for name in METRICS:
                x = np.array([r.metric(name) for r in ok], dtype=float)
                entry[f"{name}_mean"] = float(x.mean()) if x.size else math.nan
                entry[f"{name}_std"] = float(x.std()) if x.size else math.nan
            out.append(entry)
        return out

    def to_csv(self):
        return rows_to_csv(self.axis, self.rows, self.base)

    def summary_csv(self):
        buf = io.StringIO()
        agg = self.aggregate()
        header = [self.axis, "n"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]
        writer = csv.writer(buf, lineterminator="\n")
        buf.write(f"# config_sha256={self.base.digest()} axis={self.axis}\n")
        writer.writerow(header)
        for entry in agg:
            writer.writerow([fmt(entry[h]) for h in header])
        return buf.getvalue()


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".6g")
    return "" if x is None else str(x)


def rows_to_csv(axis, rows, base):
    """CSV text: one comment line with the config hash, one header row, one row per run."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={base.digest()} axis={axis}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([axis, "seed", *METRICS, "flags"])
    for r in rows:
        writer.writerow([fmt(r.value), r.seed, *(fmt(r.metric(m)) for m in METRICS), ";".join(r.flags)])
    return buf.getvalue()


def config_for(base, axis, value, seed):
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return base.replace(**{axis: value, "seed": seed})


def _run_row(args):
    value, seed, cfg = args
    try:
        return SweepRow(value, seed, report=run_scenario(cfg))
    except Exception as exc:  # noqa: BLE001 - failures are recorded per row
        return SweepRow(value, seed, error=f"{type(exc).__name__}: {exc}")


def sweep(base, axis, values, seeds=(0, 1, 2), workers=1):
    """
    Run ``base`` for every (value, seed) pair along ``axis``.

    Configurations are validated up front; a run that fails is recorded as an
    error row and the sweep continues. Rows are returned in (value, seed)
    order regardless of ``workers``.
    """
    jobs = [(v, s, config_for(base, axis, v, s)) for v in values for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_row, jobs))
    else:
        rows = [_run_row(j) for j in jobs]
    return SweepResult(axis, base, rows)
