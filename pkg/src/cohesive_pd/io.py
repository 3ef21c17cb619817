"""Deterministic text output: node snapshots, energy and process-zone tables.

Every float is printed with 17 significant digits (``repr``-exact for IEEE
doubles), lines end in LF and headers are fixed, so two identical runs
produce byte-identical files and a snapshot read back reproduces the
displacements exactly.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .dynamics import SimState
from .grid import DomainGrid

AXES = ("x", "y", "z")


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def snapshot_header(d: int) -> list[str]:
    return (["id"] + list(AXES[:d]) + [f"u_{a}" for a in AXES[:d]]
            + [f"v_{a}" for a in AXES[:d]] + ["exceedance", "unstable"])


def write_snapshot(state: SimState, grid: DomainGrid, path: str | Path,
                   exceedance: np.ndarray | None = None,
                   unstable: np.ndarray | None = None) -> None:
    """One row per interior node: id, position, u, v, exceedance, unstable flag.

    ``exceedance`` and ``unstable`` are per interior node (in
    ``grid.interior`` order); missing columns are written as ``nan`` and ``0``.
    """
    nodes = grid.interior
    d = grid.dimension
    if exceedance is None:
        exceedance = np.full(len(nodes), np.nan)
    if unstable is None:
        unstable = np.zeros(len(nodes), dtype=bool)
    if len(exceedance) != len(nodes) or len(unstable) != len(nodes):
        raise ValueError("exceedance and unstable need one entry per interior node")
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(snapshot_header(d)) + "\n")
        for k, i in enumerate(nodes):
            row = ([str(int(i))] + [fmt(c) for c in grid.positions[i]]
                   + [fmt(c) for c in state.u[i]] + [fmt(c) for c in state.v[i]]
                   + [fmt(exceedance[k]), "1" if unstable[k] else "0"])
            fh.write(",".join(row) + "\n")


def read_snapshot(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a snapshot CSV: ``id``, ``x`` (n, d), ``u``, ``v``, ``exceedance``, ``unstable``."""
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    d = sum(1 for h in header if h in AXES)
    if header != snapshot_header(d):
        raise ValueError(f"{path}: unexpected snapshot header {header!r}")
    data = np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(len(rows), len(header))
    return {
        "id": data[:, 0].astype(np.int64),
        "x": data[:, 1:1 + d],
        "u": data[:, 1 + d:1 + 2 * d],
        "v": data[:, 1 + 2 * d:1 + 3 * d],
        "exceedance": data[:, 1 + 3 * d],
        "unstable": data[:, 2 + 3 * d].astype(bool),
    }


def write_vtk(state: SimState, grid: DomainGrid, path: str | Path,
              exceedance: np.ndarray | None = None,
              unstable: np.ndarray | None = None) -> None:
    """Legacy-VTK ASCII polydata of the interior nodes with point data."""
    nodes = grid.interior
    d = grid.dimension

    def vec(a: np.ndarray) -> str:
        padded = np.zeros((len(nodes), 3))
        padded[:, :d] = a[nodes]
        return "\n".join(" ".join(fmt(c) for c in row) for row in padded)

    lines = ["# vtk DataFile Version 3.0", f"nodal fields t={fmt(state.t)}", "ASCII",
             "DATASET POLYDATA", f"POINTS {len(nodes)} double"]
    if len(nodes):
        lines.append(vec(grid.positions))
    lines.append(f"VERTICES {len(nodes)} {2 * len(nodes)}")
    lines.extend(f"1 {k}" for k in range(len(nodes)))
    lines.append(f"POINT_DATA {len(nodes)}")
    for name, arr in (("displacement", state.u), ("velocity", state.v)):
        lines.append(f"VECTORS {name} double")
        if len(nodes):
            lines.append(vec(arr))
    if exceedance is not None:
        lines += ["SCALARS exceedance double 1", "LOOKUP_TABLE default"]
        lines.extend(fmt(p) for p in exceedance)
    if unstable is not None:
        lines += ["SCALARS unstable int 1", "LOOKUP_TABLE default"]
        lines.extend("1" if f else "0" for f in unstable)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


class TableWriter:
    """CSV with a fixed header and 17-digit floats, flushed row by row."""

    def __init__(self, path: str | Path, header: Sequence[str]):
        self.header = list(header)
        self._fh: TextIO = open(path, "w", newline="\n", encoding="ascii")
        self._fh.write(",".join(self.header) + "\n")

    def write(self, values: Iterable) -> None:
        out = []
        for v in values:
            if isinstance(v, (bool, np.bool_)):
                out.append("1" if v else "0")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            elif isinstance(v, str):
                out.append(v)
            else:
                out.append(fmt(v))
        if len(out) != len(self.header):
            raise ValueError("row length does not match header")
        self._fh.write(",".join(out) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TableWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


ENERGY_HEADER = ("step", "t", "kinetic", "potential", "external", "work_integral",
                 "total", "residual", "relative_residual")
ZONE_HEADER = ("step", "t", "zone", "k_threshold", "alpha", "theta", "measure", "bound",
               "node_count")
CONVERGENCE_HEADER = ("field", "eps", "pd", "lefm", "ratio", "holds")
