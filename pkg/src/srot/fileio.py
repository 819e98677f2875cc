"""Text file grammars: measures, plans, transport summaries, reports.

All floats are written with shortest round-trip precision (`repr`), so a
write/read cycle is the identity and reports are byte-stable across runs.
"""

from __future__ import annotations

import numpy as np

from srot.measures import DiscreteMeasure, Plan, TransportMeasure

__all__ = [
    "MeasureFormatError",
    "read_measure",
    "write_measure",
    "read_plan",
    "write_plan",
    "write_transport_summary",
    "write_report",
    "read_report",
]

MEASURE_HEADER = "srot-measure v1"
PLAN_HEADER = "srot-plan v1"
TRANSPORT_HEADER = "srot-transport v1"
REPORT_HEADER = "srot-report v1"


class MeasureFormatError(ValueError):
    """Malformed measure/plan file; carries the offending line number."""

    def __init__(self, path, line_no: int | None, message: str):
        self.path = path
        self.line_no = line_no
        where = f"{path}" if line_no is None else f"{path}:{line_no}"
        super().__init__(f"{where}: {message}")


def _content_lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def read_measure(path) -> DiscreteMeasure:
    """Parse a `srot-measure v1` file: header, then one `w x1 ... xn` per line."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = list(_content_lines(text))
    if not lines:
        raise MeasureFormatError(path, None, "empty file")
    no, header = lines[0]
    parts = header.split()
    if parts[:2] != MEASURE_HEADER.split() or len(parts) != 3 or not parts[2].startswith("dim="):
        raise MeasureFormatError(path, no, f"bad header {header!r}, expected '{MEASURE_HEADER} dim=n'")
    try:
        dim = int(parts[2][4:])
    except ValueError:
        raise MeasureFormatError(path, no, f"bad dimension in header {header!r}") from None
    weights = []
    points = []
    for no, line in lines[1:]:
        fields = line.split()
        if len(fields) != dim + 1:
            raise MeasureFormatError(
                path, no, f"expected {dim + 1} fields (w x1..x{dim}), got {len(fields)}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise MeasureFormatError(path, no, f"non-numeric field in {line!r}") from None
        weights.append(values[0])
        points.append(values[1:])
    if not weights:
        raise MeasureFormatError(path, None, "no atoms (not a probability measure)")
    try:
        return DiscreteMeasure(np.array(points), np.array(weights))
    except ValueError as exc:
        raise MeasureFormatError(path, None, str(exc)) from exc


def write_measure(path, mu: DiscreteMeasure) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MEASURE_HEADER} dim={mu.dim}\n")
        for p, w in zip(mu.points, mu.weights):
            fh.write(" ".join([repr(float(w))] + [repr(float(c)) for c in p]) + "\n")


def read_plan(path) -> Plan:
    """Parse a `srot-plan v1` file: header, then `i j w` with 0-based indices."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = list(_content_lines(text))
    if not lines:
        raise MeasureFormatError(path, None, "empty file")
    no, header = lines[0]
    if header.split() != PLAN_HEADER.split():
        raise MeasureFormatError(path, no, f"bad header {header!r}, expected {PLAN_HEADER!r}")
    rows, cols, ws = [], [], []
    for no, line in lines[1:]:
        fields = line.split()
        if len(fields) != 3:
            raise MeasureFormatError(path, no, f"expected 'i j w', got {line!r}")
        try:
            rows.append(int(fields[0]))
            cols.append(int(fields[1]))
            ws.append(float(fields[2]))
        except ValueError:
            raise MeasureFormatError(path, no, f"non-numeric field in {line!r}") from None
    if not rows:
        raise MeasureFormatError(path, None, "plan has no entries")
    try:
        return Plan(np.array(rows), np.array(cols), np.array(ws))
    except ValueError as exc:
        raise MeasureFormatError(path, None, str(exc)) from exc


def write_plan(path, plan: Plan) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PLAN_HEADER + "\n")
        for i, j, w in plan.entries():
            fh.write(f"{i} {j} {repr(w)}\n")


def write_transport_summary(path, eta: TransportMeasure) -> None:
    """Per-curve weight, relaxed energy, and endpoints, one block per curve."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRANSPORT_HEADER + "\n")
        fh.write(f"curves = {eta.size}\n")
        fh.write(f"grid_points = {eta.time_grid.shape[0]}\n")
        for k, (curve, w) in enumerate(zip(eta.curves, eta.weights)):
            fh.write(f"[curve {k}]\n")
            fh.write(f"weight = {repr(float(w))}\n")
            fh.write(f"energy = {repr(curve.relaxed_energy())}\n")
            fh.write("start = " + " ".join(repr(float(c)) for c in curve.points[0]) + "\n")
            fh.write("end = " + " ".join(repr(float(c)) for c in curve.points[-1]) + "\n")


def write_report(path, values: dict, timestamp: str | None = None) -> None:
    """`srot-report v1` key = value lines; the timestamp line, when present,
    is the only non-deterministic content and comparisons must skip it."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REPORT_HEADER + "\n")
        if timestamp is not None:
            fh.write(f"timestamp = {timestamp}\n")
        for key, value in values.items():
            if isinstance(value, float):
                value = repr(value)
            fh.write(f"{key} = {value}\n")


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = list(_content_lines(text))
    if not lines or lines[0][1].split() != REPORT_HEADER.split():
        raise MeasureFormatError(path, 1, f"expected {REPORT_HEADER!r} header")
    out = {}
    for no, line in lines[1:]:
        if "=" not in line:
            raise MeasureFormatError(path, no, f"expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
