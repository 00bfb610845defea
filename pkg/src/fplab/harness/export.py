"""Trace persistence: CSV and JSONL, written atomically."""
import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

COLUMNS = ("run_id", "algorithm", "operator", "iter", "queries", "residual",
           "lambda", "eps_k", "D_estimate", "phase")
_OPTIONAL = ("lambda", "eps_k", "D_estimate")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def trace_rows(result, run_id, operator=""):
    """Yield one dict per trace record, keyed by the exported column names."""
    for rec in result.trace:
        yield {
            "run_id": run_id,
            "algorithm": result.algorithm,
            "operator": operator,
            "iter": rec.global_iter,
            "queries": rec.queries,
            "residual": float(rec.residual),
            "lambda": None if rec.lam is None else float(rec.lam),
            "eps_k": None if rec.eps_k is None else float(rec.eps_k),
            "D_estimate": None if rec.D_estimate is None else float(rec.D_estimate),
            "phase": rec.phase,
        }


def atomic_write_text(path, text):
    """Write `text` to `path` via a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def render_csv(rows, comment=None):
    buf = io.StringIO()
    if comment:
        for line in str(comment).splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def render_jsonl(rows):
    lines = []
    for row in rows:
        rec = {k: v for k, v in row.items() if not (k in _OPTIONAL and v is None)}
        lines.append(json.dumps(rec, allow_nan=True))
    return "".join(line + "\n" for line in lines)


def export_trace(result, path, fmt=None, run_id=None, operator=None, comment=None):
    """Persist ``result.trace`` to `path` as CSV or JSONL.

    The format defaults to the file suffix. `run_id` defaults to the file
    stem and `operator` to ``result.extras["operator"]``. CSV files may
    start with ``#`` comment lines, which readers must skip.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    run_id = path.stem if run_id is None else run_id
    operator = result.extras.get("operator", "") if operator is None else operator
    rows = trace_rows(result, run_id, operator)
    if fmt == "csv":
        text = render_csv(rows, comment)
    elif fmt == "jsonl":
        text = render_jsonl(rows)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return atomic_write_text(path, text)


def read_csv(path):
    """Parse an exported CSV back into typed dicts (absent values become None)."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            rec = dict(row)
            for key in ("iter", "queries", "phase"):
                rec[key] = int(rec[key])
            for key in ("residual",) + _OPTIONAL:
                rec[key] = float(rec[key]) if rec[key] != "" else None
            out.append(rec)
    return out


def write_jsonl(records, path):
    """Write plain dict records (e.g. check reports) one per line."""
    text = "".join(json.dumps(r, default=_jsonable) + "\n" for r in records)
    return atomic_write_text(path, text)


def _jsonable(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if hasattr(value, "value"):
        return value.value
    return str(value)
