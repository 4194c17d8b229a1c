"""Plain-text serialization: trace and histogram CSV files, timetag
streams, and run metadata documents.

Delay columns are written in picoseconds.  Readers keep the parsed
picosecond doubles alongside the converted seconds (traces stash them in
meta under "tau_ps"), so re-serializing a file that was just read
reproduces it byte for byte; repr() of a Python float is the shortest
round-tripping decimal, and integer picosecond timetags are exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .correlations import CorrelationTrace, TraceKind
from .counting import CoincidenceRecord

_PS = 1e12

_RESERVED_TRACE_COLUMNS = ("tau_ps", "value", "stderr")


def _fmt(x) -> str:
    return repr(float(x))


def _trace_ps_column(trace: CorrelationTrace) -> np.ndarray:
    stored = trace.meta.get("tau_ps")
    if stored is not None:
        stored = np.asarray(stored, dtype=float)
        if stored.shape == trace.tau_axis.shape and np.array_equal(
            stored / _PS, trace.tau_axis
        ):
            return stored
    return trace.tau_axis * _PS


def write_trace_csv(
    path,
    trace: CorrelationTrace,
    extra_columns: dict[str, np.ndarray] | None = None,
) -> None:
    """Write tau_ps,value[,stderr][,extras...] rows with a kind header.

    Array-valued meta entries (other than the reserved names) are written
    as additional columns, so a read-modify-write cycle preserves them.
    """
    extras: dict[str, np.ndarray] = {}
    for key, val in trace.meta.items():
        if key in _RESERVED_TRACE_COLUMNS:
            continue
        if isinstance(val, np.ndarray) and val.shape == trace.tau_axis.shape:
            extras[key] = val
    if extra_columns:
        for key, val in extra_columns.items():
            if key in _RESERVED_TRACE_COLUMNS:
                raise ValueError(f"extra column name {key!r} is reserved")
            arr = np.asarray(val, dtype=float)
            if arr.shape != trace.tau_axis.shape:
                raise ValueError(f"extra column {key!r} does not match the tau axis")
            extras[key] = arr
    names = sorted(extras)

    columns = [_trace_ps_column(trace), trace.values]
    header = ["tau_ps", "value"]
    if trace.stderr is not None:
        columns.append(trace.stderr)
        header.append("stderr")
    for name in names:
        columns.append(np.asarray(extras[name], dtype=float))
        header.append(name)

    lines = [f"# kind={trace.kind.value}", ",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path, kind: TraceKind | None = None) -> CorrelationTrace:
    """Read a trace CSV; the kind header in the file wins over the argument."""
    raw = Path(path).read_text().splitlines()
    header_kind = None
    rows_start = 0
    for i, line in enumerate(raw):
        if line.startswith("#"):
            stripped = line.lstrip("#").strip()
            if stripped.startswith("kind="):
                header_kind = stripped[len("kind=") :]
        else:
            rows_start = i
            break
    if header_kind is not None:
        kind = TraceKind(header_kind)
    if kind is None:
        raise ValueError(f"{path}: no kind header and no kind argument")

    names = raw[rows_start].split(",")
    if names[:2] != ["tau_ps", "value"]:
        raise ValueError(f"{path}: expected tau_ps,value columns, got {names[:2]}")
    data = np.array(
        [[float(tok) for tok in line.split(",")] for line in raw[rows_start + 1 :] if line],
        dtype=float,
    )
    if data.ndim != 2 or data.shape[1] != len(names):
        raise ValueError(f"{path}: ragged or empty trace table")
    cols = {name: data[:, i] for i, name in enumerate(names)}
    meta: dict = {"tau_ps": cols["tau_ps"]}
    for name in names:
        if name not in _RESERVED_TRACE_COLUMNS:
            meta[name] = cols[name]
    return CorrelationTrace(
        tau_axis=cols["tau_ps"] / _PS,
        values=cols["value"],
        kind=kind,
        stderr=cols.get("stderr"),
        meta=meta,
    )


def write_histogram_csv(path, delay_ps: np.ndarray, counts: np.ndarray) -> None:
    """Write delay_ps,counts rows; counts are integers."""
    delay_ps = np.asarray(delay_ps, dtype=float)
    counts = np.asarray(counts)
    if delay_ps.shape != counts.shape or delay_ps.ndim != 1:
        raise ValueError("delay_ps and counts must be matching 1-d arrays")
    lines = ["delay_ps,counts"]
    for d, c in zip(delay_ps, counts):
        lines.append(f"{_fmt(d)},{int(c)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_record_histogram(path, rec: CoincidenceRecord) -> None:
    write_histogram_csv(path, rec.delay_axis * _PS, rec.histogram)


def read_histogram_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (delay_ps, counts) exactly as stored."""
    raw = Path(path).read_text().splitlines()
    if not raw or raw[0] != "delay_ps,counts":
        raise ValueError(f"{path}: expected a delay_ps,counts header")
    delays = []
    counts = []
    for line in raw[1:]:
        if not line:
            continue
        d, c = line.split(",")
        delays.append(float(d))
        counts.append(int(c))
    return np.asarray(delays, dtype=float), np.asarray(counts, dtype=np.int64)


def write_timetags(path, rec: CoincidenceRecord) -> None:
    """Export per-arm detection times as `arm<TAB>time_ps` integer lines.

    Requires the record to have been generated with keep_timetags; arm 0
    lines precede arm 1 lines, each block time-ordered.
    """
    if rec.times_a is None or rec.times_b is None:
        raise ValueError("record carries no timetags; rerun with keep_timetags")
    lines = [f"#seed={int(rec.seed)}", f"#acq_ps={int(round(rec.acq_time * _PS))}"]
    if rec.rep_period is not None:
        lines.append(f"#rep_ps={int(round(rec.rep_period * _PS))}")
    for arm, times in ((0, rec.times_a), (1, rec.times_b)):
        for t in np.rint(times * _PS).astype(np.int64):
            lines.append(f"{arm}\t{t}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_timetags(path):
    """Return (times_a, times_b, seed, acq_time, rep_period_or_None), times
    in seconds sorted ascending."""
    seed = None
    acq_ps = None
    rep_ps = None
    arms: dict[int, list[int]] = {0: [], 1: []}
    for line in Path(path).read_text().splitlines():
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if key == "seed":
                seed = int(val)
            elif key == "acq_ps":
                acq_ps = int(val)
            elif key == "rep_ps":
                rep_ps = int(val)
            continue
        arm_s, _, t_s = line.partition("\t")
        arms[int(arm_s)].append(int(t_s))
    if seed is None or acq_ps is None:
        raise ValueError(f"{path}: missing #seed= or #acq_ps= header")
    times_a = np.sort(np.asarray(arms[0], dtype=np.int64)) / _PS
    times_b = np.sort(np.asarray(arms[1], dtype=np.int64)) / _PS
    rep = rep_ps / _PS if rep_ps is not None else None
    return times_a, times_b, seed, acq_ps / _PS, rep


def _plain(obj):
    """Recursively convert numpy scalars/arrays so json can serialize."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_metadata(path, payload: dict) -> None:
    """Deterministic JSON document: sorted keys, no timestamps."""
    Path(path).write_text(
        json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n"
    )


def read_metadata(path) -> dict:
    return json.loads(Path(path).read_text())
