"""Field serialization: CSV for plotting, packed binary for exact round trips.

Binary layout: 5 little-endian float64 header values (lo.re, lo.im, hi.re,
hi.im, h) followed by the complex samples as interleaved re/im float64 pairs
in C order over the (nx, ny) value array.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .calculus import ScalarField
from .domain import Grid, Rect
from .vecvalued import VectorField

__all__ = [
    "write_field_csv",
    "read_field_csv",
    "write_field_binary",
    "read_field_binary",
    "write_vector_csv",
]

_MAGIC_LEN = 5


def write_field_csv(fld: ScalarField, path) -> None:
    zs = fld.grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_z", "im_z", "re_f", "im_f"])
        for i in range(fld.grid.nx):
            for j in range(fld.grid.ny):
                z = zs[i, j]
                v = fld.values[i, j]
                w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (points, values) as flat complex arrays."""
    pts, vals = [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            pts.append(complex(float(row[0]), float(row[1])))
            vals.append(complex(float(row[2]), float(row[3])))
    return np.asarray(pts), np.asarray(vals)


def write_field_binary(fld: ScalarField, path) -> None:
    header = np.asarray(
        [fld.grid.rect.lo.real, fld.grid.rect.lo.imag,
         fld.grid.rect.hi.real, fld.grid.rect.hi.imag, fld.grid.h],
        dtype="<f8",
    )
    body = np.empty((fld.grid.nx, fld.grid.ny, 2), dtype="<f8")
    body[..., 0] = fld.values.real
    body[..., 1] = fld.values.imag
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(body.tobytes())


def read_field_binary(path) -> ScalarField:
    raw = Path(path).read_bytes()
    header = np.frombuffer(raw[: _MAGIC_LEN * 8], dtype="<f8")
    rect = Rect(complex(header[0], header[1]), complex(header[2], header[3]))
    grid = Grid(rect, float(header[4]))
    body = np.frombuffer(raw[_MAGIC_LEN * 8 :], dtype="<f8").reshape(grid.nx, grid.ny, 2)
    return ScalarField(grid, body[..., 0] + 1j * body[..., 1])


def write_vector_csv(F: VectorField, path) -> None:
    """k-column layout: point coordinates then re/im per component."""
    zs = F.grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["re_z", "im_z"]
        for c in range(F.k):
            head += [f"re_f{c}", f"im_f{c}"]
        w.writerow(head)
        for i in range(F.grid.nx):
            for j in range(F.grid.ny):
                z = zs[i, j]
                row = [repr(float(z.real)), repr(float(z.imag))]
                for comp in F.components:
                    v = comp.values[i, j]
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)
