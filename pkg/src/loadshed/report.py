"""Trace files, result tables and JSON reports."""

import json

from .palm import IterationRecord

TRACE_COLUMNS = ("IterNo", "ObjVal", "theta_res", "z_res", "gam_res", "prim_res")
_FIELDS = ("iter", "obj", "theta_res", "z_res", "gam_res", "prim_res")


def format_trace(records):
    lines = [" ".join(TRACE_COLUMNS)]
    for r in records:
        lines.append(" ".join([str(r.iter)] + [repr(float(getattr(r, f))) for f in _FIELDS[1:]]))
    return "\n".join(lines) + "\n"


def write_trace(path, records):
    with open(path, "w") as fh:
        fh.write(format_trace(records))


def parse_trace(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or tuple(lines[0].split()) != TRACE_COLUMNS:
        raise ValueError(f"trace header must be {' '.join(TRACE_COLUMNS)!r}")
    out = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cols = ln.split()
        if len(cols) != len(TRACE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(TRACE_COLUMNS)} columns, got {len(cols)}")
        out.append(IterationRecord(int(cols[0]), *(float(c) for c in cols[1:])))
    return out


def read_trace(path):
    with open(path) as fh:
        return parse_trace(fh.read())


def format_table(rows, title=""):
    """Render ``(K, shed_mw, shed_pct, removed_lines)`` rows like a results table."""
    header = f"{'K':>3}  {'Load Shed':>12}  {'Percentage':>10}  Lines Removed"
    out = [title] if title else []
    out += [header, "-" * len(header)]
    for K, mw, pct, removed in rows:
        p = "n/a" if pct is None else f"{pct:.1f}%"
        lines = ", ".join(str(i) for i in removed) or "-"
        out.append(f"{K:>3}  {mw:>9.1f} MW  {p:>10}  {lines}")
    return "\n".join(out) + "\n"


def write_json(path, report, **extra):
    d = report.to_dict()
    d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")
