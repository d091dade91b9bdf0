"""Experiment records and deterministic emission.

One record per (algorithm, seed, epoch).  Emission is byte-deterministic
for a fixed record set: rows sorted by (algorithm, seed, epoch), floats
printed at 12 significant digits, '\\n' newlines, UTF-8.  Optional
columns (tracking error for mobility runs, schedule digest for
multi-source runs) appear only when some record carries them, so
single-source files keep the base schema exactly.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .mobility import MobilityRun
from .multi_source import MultiSourceRun
from .single_source import SingleSourceRun

__all__ = [
    "BASE_FIELDS",
    "ExperimentRecord",
    "emit_records",
    "parse_records",
    "records_from_mobility_run",
    "records_from_multi_run",
    "records_from_single_run",
]

BASE_FIELDS = (
    "experiment", "algorithm", "seed", "epoch",
    "cost_raw", "cost_norm", "regret_static", "regret_dynamic", "comparator",
)


@dataclass(frozen=True)
class ExperimentRecord:
    """One epoch of one algorithm under one seed.

    Regret fields are cumulative up to this epoch and None when the
    comparator was unavailable (enumeration over budget); ``comparator``
    names the provenance either way.
    """

    experiment: str
    algorithm: str
    seed: int
    epoch: int
    cost_raw: float
    cost_norm: float
    regret_static: Optional[float]
    regret_dynamic: Optional[float]
    comparator: str
    tracking_error: Optional[float] = None
    schedule_digest: Optional[str] = None


def _clean(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def records_from_single_run(
    run: SingleSourceRun, experiment: str, seed: int
) -> list[ExperimentRecord]:
    return [
        ExperimentRecord(
            experiment=experiment,
            algorithm=run.algorithm,
            seed=seed,
            epoch=k + 1,
            cost_raw=float(run.cost_raw[k]),
            cost_norm=float(run.cost_norm[k]),
            regret_static=_clean(run.static_cum[k]),
            regret_dynamic=_clean(run.dynamic_cum[k]),
            comparator=run.comparator,
        )
        for k in range(run.cost_raw.size)
    ]


def records_from_multi_run(
    run: MultiSourceRun, experiment: str, seed: int
) -> list[ExperimentRecord]:
    return [
        ExperimentRecord(
            experiment=experiment,
            algorithm=run.algorithm,
            seed=seed,
            epoch=k + 1,
            cost_raw=float(run.cost_raw[k]),
            cost_norm=float(run.cost_norm[k]),
            regret_static=_clean(run.static_cum[k]),
            regret_dynamic=_clean(run.dynamic_cum[k]),
            comparator=run.comparator,
            schedule_digest=run.schedule_digests[k],
        )
        for k in range(run.cost_raw.size)
    ]


def records_from_mobility_run(
    run: MobilityRun, experiment: str, seed: int
) -> list[ExperimentRecord]:
    return [
        ExperimentRecord(
            experiment=experiment,
            algorithm=run.scheduler,
            seed=seed,
            epoch=k + 1,
            cost_raw=float(run.surrogate_raw[k]),
            cost_norm=float(run.surrogate_norm[k]),
            regret_static=None,
            regret_dynamic=None,
            comparator="none",
            tracking_error=float(run.tracking_error[k]),
        )
        for k in range(run.tracking_error.size)
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _columns(records: Sequence[ExperimentRecord]) -> tuple[str, ...]:
    cols = list(BASE_FIELDS)
    if any(r.tracking_error is not None for r in records):
        cols.append("tracking_error")
    if any(r.schedule_digest is not None for r in records):
        cols.append("schedule_digest")
    return tuple(cols)


def _sorted(records: Sequence[ExperimentRecord]) -> list[ExperimentRecord]:
    return sorted(records, key=lambda r: (r.algorithm, r.seed, r.epoch))


def emit_records(
    records: Sequence[ExperimentRecord],
    out,
    fmt: str = "csv",
) -> None:
    """Write records deterministically as CSV or JSON lines.

    ``out`` is a path or a text file object.  The same record set always
    produces identical bytes: fixed column order, fixed row order, fixed
    float formatting.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}, expected 'csv' or 'json'")
    rows = _sorted(records)
    cols = _columns(rows)
    if hasattr(out, "write"):
        _write(rows, cols, out, fmt)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            _write(rows, cols, fh, fmt)


def _write(rows, cols, fh, fmt: str) -> None:
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in cols])
        return
    for r in rows:
        payload = {}
        for c in cols:
            v = getattr(r, c)
            if isinstance(v, float):
                v = float(f"{v:.12g}")  # match the CSV precision
            payload[c] = v
        fh.write(json.dumps(payload) + "\n")


def parse_records(source, fmt: str = "csv") -> list[ExperimentRecord]:
    """Read back an emitted file (round-trip inverse of :func:`emit_records`)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}, expected 'csv' or 'json'")
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    records = []
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        for row in reader:
            records.append(_record_from(row))
    else:
        for line in text.splitlines():
            if line.strip():
                records.append(_record_from(json.loads(line)))
    return records


def _record_from(row) -> ExperimentRecord:
    def opt_float(key):
        v = row.get(key)
        if v is None or v == "":
            return None
        return float(v)

    digest = row.get("schedule_digest")
    return ExperimentRecord(
        experiment=str(row["experiment"]),
        algorithm=str(row["algorithm"]),
        seed=int(row["seed"]),
        epoch=int(row["epoch"]),
        cost_raw=float(row["cost_raw"]),
        cost_norm=float(row["cost_norm"]),
        regret_static=opt_float("regret_static"),
        regret_dynamic=opt_float("regret_dynamic"),
        comparator=str(row["comparator"]),
        tracking_error=opt_float("tracking_error"),
        schedule_digest=digest if digest else None,
    )
