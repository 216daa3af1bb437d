"""CSV and JSON file formats used by the CLI."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .constellation import Constellation, PamLevels
from .errors import GsqamError, ParseError
from .sweep import MeasuredSweep, SweepCurve

CONSTELLATION_HEADER = ["index", "i", "q", "label_hex"]
LEVELS_HEADER = ["index", "level"]
SWEEP_HEADER = ["power_dbm", "snr_db", "gmi_2d", "gmi_4d"]
MEASURED_HEADER = ["power_dbm", "snr_db"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _read_rows(path, header):
    """Yield (line_number, row) for data rows after checking the header."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        got = [h.strip() for h in first]
        if got != header:
            raise ParseError(f"expected header {','.join(header)}, got {','.join(got)}", row=1)
        rows = []
        for row in reader:
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=reader.line_num)
            rows.append((reader.line_num, [v.strip() for v in row]))
    if not rows:
        raise ParseError(f"{path} has no data rows")
    return rows


def _float(value, line):
    try:
        out = float(value)
    except ValueError:
        raise ParseError(f"not a number: {value!r}", row=line) from None
    if not math.isfinite(out):
        raise ParseError(f"non-finite value: {value!r}", row=line)
    return out


def _int(value, line, base=10):
    try:
        return int(value, base)
    except ValueError:
        raise ParseError(f"not an integer: {value!r}", row=line) from None


def _check_index(rows):
    for expected, (line, row) in enumerate(rows):
        if _int(row[0], line) != expected:
            raise ParseError(f"index {row[0]} out of sequence (expected {expected})", row=line)


def write_constellation_csv(path, c: Constellation):
    digits = max(1, (c.bits + 3) // 4)
    rows = [
        [str(k), fmt(p.real), fmt(p.imag), format(int(lab), f"0{digits}x")]
        for k, (p, lab) in enumerate(zip(c.points, c.labels))
    ]
    return _write_rows(path, CONSTELLATION_HEADER, rows)


def read_constellation_csv(path) -> Constellation:
    rows = _read_rows(path, CONSTELLATION_HEADER)
    _check_index(rows)
    points = []
    labels = []
    for line, row in rows:
        points.append(complex(_float(row[1], line), _float(row[2], line)))
        labels.append(_int(row[3], line, 16))
    try:
        c = Constellation(np.array(points), np.array(labels))
    except GsqamError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return Constellation(c.points, c.labels, abs(c.mean_power - 1.0) <= 1e-12)


def write_levels_csv(path, levels: PamLevels):
    return _write_rows(path, LEVELS_HEADER, [[str(k), fmt(v)] for k, v in enumerate(levels.levels)])


def read_levels_csv(path) -> PamLevels:
    rows = _read_rows(path, LEVELS_HEADER)
    _check_index(rows)
    values = [_float(row[1], line) for line, row in rows]
    try:
        return PamLevels(values)
    except GsqamError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_sweep_csv(path, curve: SweepCurve):
    rows = [[fmt(r.power_dbm), fmt(r.snr_db), fmt(r.gmi_2d), fmt(r.gmi_4d)] for r in curve.rows]
    return _write_rows(path, SWEEP_HEADER, rows)


def read_sweep_csv(path) -> np.ndarray:
    rows = _read_rows(path, SWEEP_HEADER)
    return np.array([[_float(v, line) for v in row] for line, row in rows])


def write_measured_csv(path, power_dbm, snr_db):
    return _write_rows(path, MEASURED_HEADER, [[fmt(p), fmt(s)] for p, s in zip(power_dbm, snr_db)])


def read_measured_csv(path) -> MeasuredSweep:
    rows = _read_rows(path, MEASURED_HEADER)
    data = np.array([[_float(v, line) for v in row] for line, row in rows])
    return MeasuredSweep(data[:, 0], data[:, 1], source=str(path))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    return path


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", row=exc.lineno) from None
