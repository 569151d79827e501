"""Cutoffs, the Cauchy transform, its lattice discretization, and local solves.

``cauchy_transform`` convolves a compactly supported field with the damped
kernel, producing a particular solution of the inhomogeneous Cauchy-Riemann
equation wherever the source equals the right-hand side.  ``local_solve``
wires that to a level of the exhaustion: multiply the data by a smooth cutoff
that is 1 near the closed level set and vanishes before the next-but-one
level, then convolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.signal import fftconvolve

from .calculus import ScalarField, stencil_dbar, sup_seminorm
from .domain import DomainGeometry, Exhaustion, Grid
from .fundsol import FundamentalSolution
from .quadrature import pairwise_kernel_sum, transform_at_points
from .weights import IndexMaps, WeightFamily

__all__ = [
    "Cutoff",
    "build_cutoff",
    "cutoff_for_levels",
    "cauchy_transform",
    "lattice_riemann_sum",
    "ParticularSolution",
    "local_solve",
]


@dataclass(frozen=True)
class Cutoff:
    """Smooth transition field: 1 on the inner set, 0 off the outer set.

    ``observed_c`` maps a multi-index to the sampled sup of
    |d^alpha phi| * D^|alpha|; the products stay bounded as D varies because
    the profile is a fixed mollified indicator rescaled by D.
    """

    field: ScalarField
    width: float
    observed_c: dict

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def is_identically_one(self) -> bool:
        return bool((self.field.values.real == 1.0).all())


def _bump_kernel(radius_nodes: int, h: float, radius: float) -> np.ndarray:
    t = h * np.arange(-radius_nodes, radius_nodes + 1)
    r2 = (t[:, None] ** 2 + t[None, :] ** 2) / radius**2
    k = np.zeros_like(r2)
    inside = r2 < 1.0
    k[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return k / k.sum()


def build_cutoff(
    inner_mask: Callable[[np.ndarray], np.ndarray],
    outer_mask: Callable[[np.ndarray], np.ndarray],
    width: float,
    grid: Grid,
) -> Cutoff:
    """Mollified indicator of the width/2 neighborhood of the inner set.

    ``width`` is the separation of the inner set from the complement of the
    outer set; the mollifier radius width/4 keeps the result 1 on the inner
    set and 0 off the outer set, with derivative sups scaling like width^-k.
    Grids must resolve the transition: width > 4h.
    """
    from scipy.ndimage import distance_transform_edt

    if not width > 0:
        raise ValueError("inner and outer sets must be separated (width > 0)")
    if not width > 4 * grid.h:
        raise ValueError(f"transition width {width:.4g} unresolvable at h={grid.h} (need width > 4h)")
    zs = grid.nodes()
    inner = np.asarray(inner_mask(zs), dtype=bool)
    outer = np.asarray(outer_mask(zs), dtype=bool)
    if inner.all():
        vals = np.ones(zs.shape)
    else:
        dist = distance_transform_edt(~inner) * grid.h
        chi = (dist <= width / 2.0).astype(float)
        radius = width / 4.0
        rk = int(math.ceil(radius / grid.h))
        kern = _bump_kernel(rk, grid.h, radius)
        vals = fftconvolve(chi, kern, mode="same")
        vals = np.clip(vals, 0.0, 1.0)
        vals[inner] = 1.0
        vals[dist > width / 2.0 + radius + grid.h * math.sqrt(2.0)] = 0.0
    if (~outer & (vals > 1e-12)).any():
        raise ValueError("cutoff support escapes the outer set; width too large for these sets")
    vals[~outer] = 0.0  # clear convolution dust so support confinement is exact
    phi = ScalarField(grid, vals, provenance="cutoff")

    observed = {}
    h = grid.h
    from .calculus import fd_partial

    for beta in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        d = fd_partial(phi, beta)
        observed[beta] = float(np.abs(d.values).max() * width ** (beta[0] + beta[1]))
    return Cutoff(field=phi, width=width, observed_c=observed)


def cutoff_for_levels(
    exh: Exhaustion, geom: DomainGeometry, n: int, outer_level: int, grid: Grid
) -> Cutoff:
    """Cutoff that is 1 near closure(Omega_n) and 0 near the complement of
    Omega_{outer_level}, with the closed-form level separation as width."""
    width = geom.d_nk(n, outer_level)
    if grid.rect.corner_radius() > 0 and not width > 4 * grid.h:
        raise ValueError(
            f"level separation {width:.4g} between Omega_{n} and Omega_{outer_level} "
            f"needs h < {width / 4:.4g} (got h={grid.h})"
        )
    return build_cutoff(
        lambda zs: exh.closure_mask(n, zs),
        lambda zs: exh.mask(outer_level, zs),
        width,
        grid,
    )


def cauchy_transform(
    fs: FundamentalSolution,
    psi: ScalarField,
    out_grid: Optional[Grid] = None,
) -> ScalarField:
    """(E * psi) as a field; output grid defaults to the source grid."""
    out_grid = psi.grid if out_grid is None else out_grid
    vals = transform_at_points(fs.kernel_damping, psi, out_grid.flat_nodes())
    return ScalarField(out_grid, vals.reshape(out_grid.nx, out_grid.ny), provenance="cauchy-transform")


def lattice_riemann_sum(
    fs: FundamentalSolution,
    psi: ScalarField,
    out_grid: Optional[Grid] = None,
    out_points: Optional[np.ndarray] = None,
    h: Optional[float] = None,
    separation: Optional[float] = None,
):
    """Plain lattice sum  sum_m E(y - z_m) psi(z_m) h^2 over the source nodes.

    Terms with y equal to a lattice node are dropped (the kernel is assigned
    the value 0 there).  When ``separation`` (distance of the source support
    to the far-region boundary) is supplied, the admissibility constraint
    h < separation / (2*sqrt(2)) is enforced.
    """
    if h is not None and abs(h - psi.grid.h) > 1e-12:
        raise ValueError("explicit h must match the source grid spacing")
    h = psi.grid.h
    if separation is not None and not h < separation / (2.0 * math.sqrt(2.0)):
        raise ValueError(
            f"lattice spacing h={h} inadmissible: need h < separation/(2*sqrt(2)) = "
            f"{separation / (2 * math.sqrt(2)):.4g}"
        )
    if out_points is not None:
        pts = np.asarray(out_points, dtype=complex).ravel()
        return pairwise_kernel_sum(pts, psi.grid.flat_nodes(), psi.values.ravel(), h * h, fs.kernel_damping)
    out_grid = psi.grid if out_grid is None else out_grid
    vals = pairwise_kernel_sum(
        out_grid.flat_nodes(), psi.grid.flat_nodes(), psi.values.ravel(), h * h, fs.kernel_damping
    )
    return ScalarField(out_grid, vals.reshape(out_grid.nx, out_grid.ny), provenance="lattice-sum")


class ParticularSolution:
    """Lazy particular solution u = E * (phi f), evaluable at arbitrary points."""

    def __init__(self, fs: FundamentalSolution, source: ScalarField):
        self.fs = fs
        self.source = source
        self._cache: dict = {}

    def at(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=complex).ravel()
        missing = [p for p in pts if p not in self._cache]
        if missing:
            vals = transform_at_points(self.fs.kernel_damping, self.source, np.asarray(missing))
            for p, v in zip(missing, vals):
                self._cache[p] = v
        return np.asarray([self._cache[p] for p in pts], dtype=complex)

    def as_field(self, out_grid: Grid) -> ScalarField:
        vals = self.at(out_grid.flat_nodes()).reshape(out_grid.nx, out_grid.ny)
        return ScalarField(out_grid, vals, provenance="cauchy-transform")


def local_solve(
    f: ScalarField,
    n: int,
    W: WeightFamily,
    exh: Exhaustion,
    geom: DomainGeometry,
    fs_family: Callable[[int], FundamentalSolution],
    maps: IndexMaps = IndexMaps(),
    out_grid: Optional[Grid] = None,
) -> tuple[ScalarField, dict]:
    """Solve the inhomogeneous equation near level n by cutoff and transform.

    u = E_{i14(n)} * (phi f) with phi the cutoff between closure(Omega_n) and
    Omega_{i4(n)}; u then solves the equation on every point where phi = 1,
    in particular on Omega_n.  The report carries the weighted residual on
    Omega_n and the observed seminorm transfer ratios |u|_{n,m} / |f|_{i4(n),m}.
    """
    i4n, i14n = maps.i4(n), maps.i14(n)
    if exh.kind == "compact_balls":
        need = exh.level_rect(i4n, pad=0.0)
        have = f.grid.rect
        if (
            have.lo.real > need.lo.real + 1e-9
            or have.lo.imag > need.lo.imag + 1e-9
            or have.hi.real < need.hi.real - 1e-9
            or have.hi.imag < need.hi.imag - 1e-9
        ):
            raise ValueError(
                f"data grid {have.lo}..{have.hi} does not cover Omega_{i4n}; "
                "enlarge the rectangle or lower the level"
            )
    cutoff = cutoff_for_levels(exh, geom, n, i4n, f.grid)
    psi = ScalarField(f.grid, cutoff.field.values * f.values, provenance="cutoff*data")
    sol = ParticularSolution(fs_family(i14n), psi)
    out_grid = f.grid if out_grid is None else out_grid
    u = sol.as_field(out_grid)

    zs = out_grid.flat_nodes()
    mask = exh.mask(n, zs) & out_grid.interior_mask(1).ravel()
    report: dict = {"level": n, "outer_level": i4n, "kernel_level": i14n,
                    "cutoff_width": cutoff.width, "h": out_grid.h}
    if mask.any():
        from .quadrature import field_evaluator

        pts = zs[mask]
        resid = np.abs(stencil_dbar(sol.at, pts, out_grid.h) - field_evaluator(f)(pts)) * W(n, pts)
        report["weighted_residual"] = float(resid.max())
    ratios = {}
    for m in (0, 1, 2):
        un = sup_seminorm(u, W, exh, n, m).value
        fn = sup_seminorm(f, W, exh, i4n, m).value
        ratios[m] = un / fn if fn > 0 else 0.0
    report["seminorm_ratios"] = ratios
    return u, report
