"""Atomic file writes and the plain-text/JSON output conventions."""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1


def atomic_write_bytes(path, data: bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def format_float(x: float) -> str:
    # 12 significant digits keeps golden files stable across BLAS builds
    return f"{float(x):.12g}"


def csv_text(header: Sequence[str], columns: Sequence[np.ndarray]) -> str:
    """Render columns as CSV with one header row."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(format_float(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    return atomic_write_text(path, csv_text(header, columns))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_json(path, payload: dict) -> Path:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def complex_matrix_to_json(m) -> dict:
    m = np.asarray(m)
    return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}


def complex_matrix_from_json(obj) -> np.ndarray:
    return np.asarray(obj["real"], dtype=float) + 1j * np.asarray(obj["imag"], dtype=float)
