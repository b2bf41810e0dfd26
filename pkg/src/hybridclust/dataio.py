"""CSV/JSON input and output helpers.

CSV convention: UTF-8, header row, '.' decimal, numeric feature columns,
optional trailing ``label`` column. All file writes go through a temp file
plus rename so partially written outputs are never observed.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError


def load_csv(path) -> tuple[np.ndarray, Optional[np.ndarray], list[str]]:
    """Read a feature CSV; returns (X, labels-or-None, feature_names)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_label = bool(header) and header[-1].lower() == "label"
        n_feat = len(header) - (1 if has_label else 0)
        if n_feat < 1:
            raise ValidationError(f"{path}: no feature columns")
        rows, labels = [], []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {r} has {len(row)} cells, header has {len(header)}"
                )
            vals = []
            for c, cell in enumerate(row[:n_feat]):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValidationError(
                        f"{path}: non-numeric cell at row {r}, column {header[c]!r}: {cell!r}"
                    ) from None
            rows.append(vals)
            if has_label:
                labels.append(row[-1].strip())
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    y = None
    if has_label:
        uniq = sorted(set(labels))
        lut = {v: i for i, v in enumerate(uniq)}
        y = np.array([lut[v] for v in labels])
    return X, y, header[:n_feat]


def _atomic_write(path, write_fn, mode="w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None, encoding=None if "b" in mode else "utf-8") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict) -> None:
    _atomic_write(path, lambda fh: fh.write(json.dumps(payload, indent=2) + "\n"))


def write_csv(path, header: list[str], rows) -> None:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))  # shortest round-trip representation
        if isinstance(v, np.integer):
            return int(v)
        return v

    def go(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([cell(v) for v in row])

    _atomic_write(path, go)


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def bundled_faithful() -> np.ndarray:
    """The bundled Old Faithful eruption records (272 rows: duration, wait)."""
    path = Path(__file__).parent / "data" / "faithful.csv"
    X, _, _ = load_csv(path)
    return X


def lagged_pairs(series: np.ndarray) -> np.ndarray:
    """(x_{t-1}, x_t) pairs; one fewer row than the input series."""
    series = np.asarray(series, dtype=float).reshape(-1)
    if series.size < 2:
        raise ValidationError("need at least two observations to form lagged pairs")
    return np.column_stack([series[:-1], series[1:]])


_WDBC_BASE = (
    "radius", "texture", "perimeter", "area", "smoothness",
    "compactness", "concavity", "concave_points", "symmetry", "fractal_dimension",
)
WDBC_FEATURES = tuple(
    f"{group}_{name}" for group in ("mean", "se", "worst") for name in _WDBC_BASE
)


def load_wdbc(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read the UCI breast-cancer diagnostic file in its published layout.

    No header; columns are id, diagnosis (M/B), then 30 features ordered as
    ten base measurements in mean / standard-error / worst groups. Returns
    (X, labels with M=1 B=0, feature_names).
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"WDBC file not found: {path}")
    rows, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for r, line in enumerate(csv.reader(fh), start=1):
            if not line:
                continue
            if len(line) != 32:
                raise ValidationError(f"{path}: row {r} has {len(line)} cells, expected 32")
            if line[1] not in ("M", "B"):
                raise ValidationError(f"{path}: row {r} diagnosis {line[1]!r} not in M/B")
            labels.append(1 if line[1] == "M" else 0)
            try:
                rows.append([float(v) for v in line[2:]])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {r}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return np.asarray(rows), np.asarray(labels), list(WDBC_FEATURES)
