"""Figure specifications and input-schema validation.

Each figure id declares the CSV header it requires per input slot; headers
are validated before any plotting so schema drift fails fast with the
offending column named.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "FigureSpec", "FIGURE_IDS", "read_table", "read_summary", "EXPECTED_COLUMNS"]


class SchemaError(ValueError):
    """An input file is missing, empty, or does not match its schema."""


# required columns per input slot; slot 0 is the primary data file, further
# slots are optional overlays
EXPECTED_COLUMNS: dict[str, list[list[str]]] = {
    "fig2": [
        ["theta", "x", "mean_sz_norm", "sem_sz_norm", "var_circ_sz", "sensitivity",
         "gain_db", "n_samples"],
        ["theta", "x", "mean_sz_norm", "delta_sz_norm", "sensitivity", "gain_db"],
    ],
    "fig3": [
        ["step", "mean_qfi", "std_qfi", "n_circuits", "n_axes"],
    ],
    "fig4a": [
        ["x", "c_gamma_T", "gain_db"],
    ],
    "gain_contour": [
        ["x", "c_gamma_T", "gain_db"],
        ["c_gamma_T", "optimal_x"],
    ],
    "heff_spectrum": [
        ["S", "k", "level_index", "energy_over_J", "degeneracy"],
    ],
    "husimi": [
        ["polar", "azimuth", "q"],
    ],
}

FIGURE_IDS = tuple(EXPECTED_COLUMNS)


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    inputs: list
    out_path: str

    def __post_init__(self):
        if self.figure_id not in EXPECTED_COLUMNS:
            raise SchemaError(f"unknown figure id {self.figure_id!r}; know {sorted(FIGURE_IDS)}")
        slots = EXPECTED_COLUMNS[self.figure_id]
        csv_inputs = [p for p in self.inputs if str(p).endswith(".csv")]
        if not csv_inputs:
            raise SchemaError(f"figure {self.figure_id!r} needs at least one CSV input")
        if len(csv_inputs) > len(slots):
            raise SchemaError(
                f"figure {self.figure_id!r} takes at most {len(slots)} CSV inputs, got {len(csv_inputs)}"
            )

    def validate(self) -> None:
        """Check every input file exists and carries the expected header."""
        slots = EXPECTED_COLUMNS[self.figure_id]
        slot = 0
        for path in self.inputs:
            if str(path).endswith(".json"):
                if not Path(path).exists():
                    raise SchemaError(f"input file not found: {path}")
                continue
            _validate_header(path, slots[slot])
            slot += 1


def _validate_header(path, required: list[str]) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input file not found: {path}")
    with p.open(newline="") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise SchemaError(f"{path}: file is empty")
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing required column '{col}'")
    return header


def read_table(path, required: list[str]) -> dict[str, np.ndarray]:
    """Load a CSV as named float columns, validating the header first."""
    header = _validate_header(path, required)
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out = {}
    for name in required:
        idx = header.index(name)
        try:
            out[name] = np.array([float(r[idx]) for r in rows])
        except ValueError:
            # non-numeric columns (e.g. a model tag) are kept as strings
            out[name] = np.array([r[idx] for r in rows])
    return out


def read_summary(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})")
