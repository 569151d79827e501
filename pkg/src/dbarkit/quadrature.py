"""Singular quadrature for convolutions with the damped Cauchy kernel.

The integral of E(x - z) * psi(z) over the plane is computed as a midpoint
rule over node-centered grid cells, with two corrections near the kernel
singularity at z = x: cells whose node lies within ``RING_FACTOR`` spacings
are re-integrated with a tensor Gauss rule, and the cell actually containing
x is integrated in local polar coordinates (where the integrand is bounded).
The same correction machinery backs the positive-kernel moment integrals.

Direct summation only; far-field acceleration is out of scope.  The inner
pairwise loops compile with numba when available (parallel over *output*
points, so the accumulation order per output is fixed and results are
reproducible run to run).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .calculus import ScalarField

__all__ = [
    "RING_FACTOR",
    "pairwise_kernel_sum",
    "transform_at_points",
    "field_evaluator",
    "positive_kernel_integral",
]

RING_FACTOR = 2.5  # cells with |x - node| <= RING_FACTOR*h get the refined rule
_GL4 = np.polynomial.legendre.leggauss(4)
_GL16 = np.polynomial.legendre.leggauss(16)
_GL32 = np.polynomial.legendre.leggauss(32)
_N_ANGULAR_SEGMENTS = 32

try:  # pragma: no cover - exercised implicitly everywhere
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _kernel(w: np.ndarray, damping: str) -> np.ndarray:
    """E(w) = g(w) / (pi w)."""
    if damping == "one":
        return 1.0 / (np.pi * w)
    return np.exp(-w * w) / (np.pi * w)


if _HAVE_NUMBA:

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _sum_one(oxr, oxi, sxr, sxi, vr, vi, h2):  # pragma: no cover - jitted
        n_out = oxr.size
        n_src = sxr.size
        rr = np.empty(n_out)
        ri = np.empty(n_out)
        for i in numba.prange(n_out):
            ar = 0.0
            ai = 0.0
            xr = oxr[i]
            xi = oxi[i]
            for j in range(n_src):
                pr = vr[j]
                pi_ = vi[j]
                if pr == 0.0 and pi_ == 0.0:
                    continue
                wr = xr - sxr[j]
                wi = xi - sxi[j]
                d2 = wr * wr + wi * wi
                if d2 < 1e-28:
                    continue
                inv = 1.0 / (math.pi * d2)
                kr = wr * inv
                ki = -wi * inv
                ar += kr * pr - ki * pi_
                ai += kr * pi_ + ki * pr
            rr[i] = ar * h2
            ri[i] = ai * h2
        return rr, ri

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _sum_gauss(oxr, oxi, sxr, sxi, vr, vi, h2):  # pragma: no cover - jitted
        n_out = oxr.size
        n_src = sxr.size
        rr = np.empty(n_out)
        ri = np.empty(n_out)
        for i in numba.prange(n_out):
            ar = 0.0
            ai = 0.0
            xr = oxr[i]
            xi = oxi[i]
            for j in range(n_src):
                pr = vr[j]
                pi_ = vi[j]
                if pr == 0.0 and pi_ == 0.0:
                    continue
                wr = xr - sxr[j]
                wi = xi - sxi[j]
                d2 = wr * wr + wi * wi
                if d2 < 1e-28:
                    continue
                ae = wi * wi - wr * wr
                if ae < -46.0:  # damping magnitude below 1e-20
                    continue
                amp = math.exp(ae)
                ph = -2.0 * wr * wi
                gr = amp * math.cos(ph)
                gi = amp * math.sin(ph)
                inv = 1.0 / (math.pi * d2)
                kr = (gr * wr + gi * wi) * inv
                ki = (gi * wr - gr * wi) * inv
                ar += kr * pr - ki * pi_
                ai += kr * pi_ + ki * pr
            rr[i] = ar * h2
            ri[i] = ai * h2
        return rr, ri


def pairwise_kernel_sum(
    out_pts: np.ndarray,
    src_pts: np.ndarray,
    src_vals: np.ndarray,
    h2: float,
    damping: str,
) -> np.ndarray:
    """Midpoint-rule sum  sum_j E(x_i - z_j) psi_j h^2, coincident pairs skipped."""
    out_pts = np.asarray(out_pts, dtype=complex).ravel()
    src_pts = np.asarray(src_pts, dtype=complex).ravel()
    src_vals = np.asarray(src_vals, dtype=complex).ravel()
    if _HAVE_NUMBA:
        fn = _sum_one if damping == "one" else _sum_gauss
        rr, ri = fn(
            np.ascontiguousarray(out_pts.real),
            np.ascontiguousarray(out_pts.imag),
            np.ascontiguousarray(src_pts.real),
            np.ascontiguousarray(src_pts.imag),
            np.ascontiguousarray(src_vals.real),
            np.ascontiguousarray(src_vals.imag),
            float(h2),
        )
        return rr + 1j * ri
    # numpy fallback, blocked to bound memory
    out = np.zeros(out_pts.shape, dtype=complex)
    nz = src_vals != 0.0
    src_pts, src_vals = src_pts[nz], src_vals[nz]
    block = max(1, int(4e6 / max(len(src_pts), 1)))
    for i in range(0, len(out_pts), block):
        w = out_pts[i : i + block, None] - src_pts[None, :]
        d2 = w.real**2 + w.imag**2
        with np.errstate(divide="ignore", invalid="ignore"):
            k = _kernel(w, damping)
        k[d2 < 1e-28] = 0.0
        out[i : i + block] = (k * src_vals[None, :]).sum(axis=1) * h2
    return out


def field_evaluator(fld: ScalarField) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise evaluator: the analytic oracle when present, else bilinear
    interpolation of the samples (zero outside the grid rectangle)."""
    if fld.analytic is not None:
        return lambda zs: np.asarray(fld.analytic(np.asarray(zs, dtype=complex)), dtype=complex)

    g = fld.grid
    lox, loy, h = g.rect.lo.real, g.rect.lo.imag, g.h
    vals = fld.values

    def ev(zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        fx = (zs.real - lox) / h
        fy = (zs.imag - loy) / h
        i = np.clip(np.floor(fx).astype(int), 0, g.nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, g.ny - 2)
        tx = fx - i
        ty = fy - j
        inside = (fx >= -1e-9) & (fx <= g.nx - 1 + 1e-9) & (fy >= -1e-9) & (fy <= g.ny - 1 + 1e-9)
        tx = np.clip(tx, 0.0, 1.0)
        ty = np.clip(ty, 0.0, 1.0)
        v = (
            vals[i, j] * (1 - tx) * (1 - ty)
            + vals[i + 1, j] * tx * (1 - ty)
            + vals[i, j + 1] * (1 - tx) * ty
            + vals[i + 1, j + 1] * tx * ty
        )
        return np.where(inside, v, 0.0)

    return ev


def _polar_angles() -> tuple[np.ndarray, np.ndarray]:
    """32 angular Gauss points: 8 segments (box corners break smoothness of
    the ray-box radius) with 4-point Gauss each."""
    t_ref, tw_ref = _GL4
    seg = 2.0 * np.pi / 8
    th = ((np.arange(8)[:, None] + 0.5 * (t_ref[None, :] + 1.0)) * seg).ravel()
    tw = np.tile(0.5 * seg * tw_ref, 8)
    return th, tw


def _polar_cells(
    xs: np.ndarray, centers: np.ndarray, h: float, psi_ev, damping: str, chunk: int = 2000
) -> np.ndarray:
    """Integral of E(x - z) psi(z) over the cells centered at ``centers`` that
    contain the singular points ``xs``, in polar coordinates around each x.

    The radial factor of the area element cancels the kernel's 1/|w|, so the
    integrand is bounded; 32 angular x 16 radial Gauss points.
    """
    th, tw = _polar_angles()
    r_ref, rw_ref = _GL16
    ct, st = np.cos(th), np.sin(th)
    e_it = np.exp(1j * th)
    out = np.zeros(len(xs), dtype=complex)
    for lo in range(0, len(xs), chunk):
        x = xs[lo : lo + chunk]
        c = centers[lo : lo + chunk]
        lox = c.real - h / 2 - x.real
        hix = c.real + h / 2 - x.real
        loy = c.imag - h / 2 - x.imag
        hiy = c.imag + h / 2 - x.imag
        with np.errstate(divide="ignore", invalid="ignore"):
            rx = np.where(ct[None, :] > 0, hix[:, None] / ct[None, :],
                          np.where(ct[None, :] < 0, lox[:, None] / ct[None, :], np.inf))
            ry = np.where(st[None, :] > 0, hiy[:, None] / st[None, :],
                          np.where(st[None, :] < 0, loy[:, None] / st[None, :], np.inf))
        R = np.maximum(np.minimum(rx, ry), 0.0)  # (n, 32)
        rs = 0.5 * R[:, :, None] * (r_ref[None, None, :] + 1.0)  # (n, 32, 16)
        rw = 0.5 * R[:, :, None] * rw_ref[None, None, :]
        zz = x[:, None, None] + rs * e_it[None, :, None]
        if damping == "one":
            gfac = 1.0
        else:
            gfac = np.exp(-(rs * e_it[None, :, None]) ** 2)
        # E(x - z) * r = g(-(z - x)) * (-e^{-i t}) / pi, both dampings even
        integ = psi_ev(zz.ravel()).reshape(zz.shape) * gfac * (-np.exp(-1j * th)[None, :, None] / np.pi)
        out[lo : lo + chunk] = ((integ * rw).sum(axis=2) * tw[None, :]).sum(axis=1)
    return out


def _gauss_cells(
    xs: np.ndarray, centers: np.ndarray, h: float, psi_ev, damping: str
) -> np.ndarray:
    """Tensor Gauss 4x4 integral of E(x - z) psi(z) over regular near cells."""
    gx, gw = _GL4
    offs = 0.5 * h * (gx[:, None] + 1j * gx[None, :]).ravel()
    wts = (0.5 * h) ** 2 * np.outer(gw, gw).ravel()
    zz = centers[:, None] + offs[None, :]
    w = xs[:, None] - zz
    with np.errstate(divide="ignore", invalid="ignore"):
        k = _kernel(w, damping)
    vals = psi_ev(zz.ravel()).reshape(zz.shape)
    return (k * vals * wts[None, :]).sum(axis=1)


def transform_at_points(
    fs_damping: str,
    psi: ScalarField,
    out_pts: np.ndarray,
    ring_factor: float = RING_FACTOR,
) -> np.ndarray:
    """(E * psi)(x) = integral of E(x - z) psi(z) dz at scattered points x."""
    g = psi.grid
    h = g.h
    out_pts = np.asarray(out_pts, dtype=complex).ravel()
    src = g.flat_nodes()
    vals = psi.values.ravel()
    total = pairwise_kernel_sum(out_pts, src, vals, h * h, fs_damping)

    # near-field corrections, vectorized over output points per window offset
    psi_ev = field_evaluator(psi)
    lox, loy = g.rect.lo.real, g.rect.lo.imag
    win = int(math.ceil(ring_factor)) + 1
    ci = np.round((out_pts.real - lox) / h).astype(int)
    cj = np.round((out_pts.imag - loy) / h).astype(int)
    all_idx = np.arange(len(out_pts))
    sub_x, sub_c, sub_owner = [], [], []
    sing_x, sing_c, sing_owner = [], [], []
    for di in range(-win, win + 1):
        ii = ci + di
        for dj in range(-win, win + 1):
            jj = cj + dj
            valid = (ii >= 0) & (ii < g.nx) & (jj >= 0) & (jj < g.ny)
            if not valid.any():
                continue
            c = (lox + ii * h) + 1j * (loy + jj * h)
            w = out_pts - c
            d = np.abs(w)
            near = valid & (d <= ring_factor * h)
            if not near.any():
                continue
            contains = near & (np.abs(w.real) <= h / 2 + 1e-12) & (np.abs(w.imag) <= h / 2 + 1e-12)
            regular = near & ~contains
            vals_near = np.zeros(len(out_pts), dtype=complex)
            vals_near[near] = psi.values[ii[near], jj[near]]
            remov = near & (d > 1e-14)
            if remov.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    total[remov] -= _kernel(w[remov], fs_damping) * vals_near[remov] * h * h
            if regular.any():
                sub_x.append(out_pts[regular])
                sub_c.append(c[regular])
                sub_owner.append(all_idx[regular])
            if contains.any():
                sing_x.append(out_pts[contains])
                sing_c.append(c[contains])
                sing_owner.append(all_idx[contains])

    if sub_x:
        add = _gauss_cells(np.concatenate(sub_x), np.concatenate(sub_c), h, psi_ev, fs_damping)
        np.add.at(total, np.concatenate(sub_owner), add)
    if sing_x:
        add = _polar_cells(np.concatenate(sing_x), np.concatenate(sing_c), h, psi_ev, fs_damping)
        np.add.at(total, np.concatenate(sing_owner), add)
    return total


def positive_kernel_integral(
    x: complex,
    region_nodes: np.ndarray,
    h: float,
    integrand: Callable[[np.ndarray], np.ndarray],
    damping: str,
) -> float:
    """Integral of |g(x - y)| / |x - y| * c(y) over node-centered cells.

    ``integrand`` supplies the positive smooth factor c(y).  The cell
    containing x is done in polar coordinates; the 1/|x - y| singularity is
    integrable and the polar integrand |g| * c is bounded.
    """
    region_nodes = np.asarray(region_nodes, dtype=complex).ravel()
    w = x - region_nodes
    d = np.abs(w)
    sing = d <= h / math.sqrt(2.0) + 1e-12
    sing &= (np.abs(w.real) <= h / 2 + 1e-12) & (np.abs(w.imag) <= h / 2 + 1e-12)
    far = ~sing
    if damping == "one":
        gmag = np.ones(far.sum())
    else:
        ww = w[far]
        gmag = np.exp(ww.imag**2 - ww.real**2)
    total = float((gmag / d[far] * integrand(region_nodes[far])).sum() * h * h)

    th, tw = _polar_angles()
    r_ref, rw_ref = _GL16
    ct, st = np.cos(th), np.sin(th)
    for c in region_nodes[sing]:
        lox_, hix_ = c.real - h / 2 - x.real, c.real + h / 2 - x.real
        loy_, hiy_ = c.imag - h / 2 - x.imag, c.imag + h / 2 - x.imag
        with np.errstate(divide="ignore", invalid="ignore"):
            rx = np.where(ct > 0, hix_ / ct, np.where(ct < 0, lox_ / ct, np.inf))
            ry = np.where(st > 0, hiy_ / st, np.where(st < 0, loy_ / st, np.inf))
        R = np.maximum(np.minimum(rx, ry), 0.0)
        rs = 0.5 * R[:, None] * (r_ref[None, :] + 1.0)
        rw = 0.5 * R[:, None] * rw_ref[None, :]
        ys = x + rs * np.exp(1j * th)[:, None]
        if damping == "one":
            gmag_s = np.ones_like(rs)
        else:
            wr = x.real - ys.real
            wi = x.imag - ys.imag
            gmag_s = np.exp(wi**2 - wr**2)
        total += float((gmag_s * integrand(ys.ravel()).reshape(ys.shape).real * rw).sum(axis=1) @ tw)
    return total
