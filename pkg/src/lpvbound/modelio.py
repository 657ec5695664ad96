"""File formats: JSON model documents and CSV signal tables.

A model document looks like

    {
      "n_x": 2, "n_u": 1, "n_y": 1, "n_p": 1,
      "box": {"p_min": [0.1], "p_max": [0.4], "grid_points_per_axis": 31},
      "A": {"variant": "affine", "coefficients": [[[0.0, 0.0], [0.2, 0.0]],
                                                  [[0.0, 0.2], [0.0, 1.0]]]},
      "B": {"variant": "grid", "axes": [[0.1, 0.4]], "values": [...]},
      "C": {...}
    }

with matrices as row-major nested arrays.  Signal tables are CSV with a
header row ``t,p_1,...,p_np`` or ``t,u_1,...,u_nu`` and one sample per line.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .core import (
    AffineFamily,
    GridFamily,
    InputSignal,
    LpvModel,
    MatrixFamily,
    SchedulingBox,
    SchedulingSignal,
)

__all__ = [
    "load_model",
    "save_model",
    "model_to_dict",
    "model_from_dict",
    "load_scheduling_csv",
    "load_input_csv",
    "write_signal_csv",
]


def _family_to_dict(fam: MatrixFamily) -> dict:
    if isinstance(fam, AffineFamily):
        return {
            "variant": "affine",
            "coefficients": [M.tolist() for M in fam.coefficients],
        }
    if isinstance(fam, GridFamily):
        return {
            "variant": "grid",
            "axes": [a.tolist() for a in fam.axes],
            "values": fam.values.tolist(),
        }
    raise TypeError(f"unsupported family type {type(fam).__name__}")


def _family_from_dict(doc: dict) -> MatrixFamily:
    variant = doc.get("variant")
    if variant == "affine":
        return AffineFamily([np.asarray(M, dtype=float) for M in doc["coefficients"]])
    if variant == "grid":
        return GridFamily(
            [np.asarray(a, dtype=float) for a in doc["axes"]],
            np.asarray(doc["values"], dtype=float),
        )
    raise ValueError(f"unknown family variant {variant!r}")


def model_to_dict(model: LpvModel) -> dict:
    return {
        "n_x": model.n_x,
        "n_u": model.n_u,
        "n_y": model.n_y,
        "n_p": model.n_p,
        "box": {
            "p_min": model.box.p_min.tolist(),
            "p_max": model.box.p_max.tolist(),
            "grid_points_per_axis": model.box.grid_points_per_axis,
        },
        "A": _family_to_dict(model.A_family),
        "B": _family_to_dict(model.B_family),
        "C": _family_to_dict(model.C_family),
    }


def model_from_dict(doc: dict) -> LpvModel:
    box_doc = doc["box"]
    box = SchedulingBox(
        box_doc["p_min"],
        box_doc["p_max"],
        box_doc.get("grid_points_per_axis"),
    )
    model = LpvModel(
        _family_from_dict(doc["A"]),
        _family_from_dict(doc["B"]),
        _family_from_dict(doc["C"]),
        box,
    )
    declared = {k: doc.get(k) for k in ("n_x", "n_u", "n_y", "n_p")}
    actual = {"n_x": model.n_x, "n_u": model.n_u, "n_y": model.n_y, "n_p": model.n_p}
    for key, value in declared.items():
        if value is not None and value != actual[key]:
            raise ValueError(
                f"declared {key}={value} contradicts the families ({key}={actual[key]})"
            )
    return model


def save_model(model: LpvModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> LpvModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def _read_signal_rows(path, prefix: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0].strip() != "t":
            raise ValueError(f"{path}: expected a header starting with 't'")
        expected = [f"{prefix}_{k}" for k in range(1, len(header))]
        if [h.strip() for h in header[1:]] != expected:
            raise ValueError(
                f"{path}: expected columns t,{','.join(expected)}, got {header}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_no}: wrong number of columns")
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise ValueError(f"{path}: no samples")
    return np.asarray(rows, dtype=float)


def load_scheduling_csv(path, box: SchedulingBox) -> SchedulingSignal:
    return SchedulingSignal(_read_signal_rows(path, "p"), box)


def load_input_csv(path) -> InputSignal:
    return InputSignal(_read_signal_rows(path, "u"))


def write_signal_csv(path, samples: np.ndarray, prefix: str) -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"{prefix}_{k}" for k in range(1, samples.shape[1] + 1))
        fh.write(f"t,{cols}\n")
        for t in range(samples.shape[0]):
            vals = ",".join(f"{v:.17g}" for v in samples[t])
            fh.write(f"{t},{vals}\n")
