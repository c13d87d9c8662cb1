"""Readers for the qvdp CSV formats.

Every file starts with ``# key: value`` metadata lines, then one header
row of column names, then the data. Readers validate the expected
columns up front so a malformed input fails before any rendering starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InputError(ValueError):
    """Input file is missing expected metadata or columns."""


@dataclass
class CsvTable:
    meta: dict
    columns: dict  # name -> 1D float array

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]


def _parse_meta_value(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path: str, required: tuple[str, ...] = ()) -> CsvTable:
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta[key] = _parse_meta_value(value)
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise InputError(f"{path}: no column header found")
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return CsvTable(meta=meta, columns={name: data[:, i] for i, name in enumerate(header)})


def read_wigner_grid(path: str) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    """Load a Wigner grid CSV; returns (meta, q_centers, p_centers, density).

    The density comes back as a 2D array indexed [q, p] and may be signed.
    """
    table = read_csv(path, required=("q_center", "p_center", "density"))
    meta = table.meta
    if meta.get("format") != "qvdp-wigner-grid-v1":
        raise InputError(f"{path}: not a qvdp wigner grid (format={meta.get('format')!r})")
    q = np.unique(table["q_center"])
    p = np.unique(table["p_center"])
    n_bins = int(meta.get("n_bins", len(q)))
    if len(q) * len(p) != len(table["density"]) or len(q) != n_bins:
        raise InputError(f"{path}: grid is not complete ({len(q)}x{len(p)} vs "
                         f"{len(table['density'])} rows)")
    # rows are written q-major
    dens = table["density"].reshape(len(q), len(p))
    return meta, q, p, dens
