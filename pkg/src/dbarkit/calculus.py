"""Complex-valued fields on grids, derivatives, and weighted seminorms.

Derivatives are order-2 finite differences (central in the interior,
one-sided at the rectangle edge); fields built from analytic oracles carry
exact partial-derivative evaluators and the derivative routines prefer them.
Weighted sup- and L^q-seminorms restrict to grid nodes whose full stencil
stays inside the rectangle, so edge stencils never pollute reported values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .domain import Exhaustion, Grid
from .weights import WeightFamily, IndexMaps, psi_weight

__all__ = [
    "ScalarField",
    "SeminormValue",
    "fd_partial",
    "dbar",
    "laplacian",
    "sup_seminorm",
    "lq_seminorm",
    "equivalence_probe",
    "hypoelliptic_probe",
    "dbar_noise_floor",
    "stencil_dbar",
    "stencil_partial",
]

FD_ORDER_CAP = 4  # composed central stencils lose accuracy beyond this


@dataclass(frozen=True)
class ScalarField:
    """Complex samples on a grid, optionally backed by analytic evaluators.

    ``analytic(zs)`` returns values and ``analytic_partial(beta, zs)`` the
    partial derivative of multi-index ``beta = (b1, b2)``; both are
    vectorized over complex arrays.
    """

    grid: Grid
    values: np.ndarray
    analytic: Optional[Callable[[np.ndarray], np.ndarray]] = None
    analytic_partial: Optional[Callable[[tuple, np.ndarray], np.ndarray]] = None
    provenance: str = "samples"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.grid.nx}, {self.grid.ny})")
        if not np.isfinite(v.view(float)).all():
            raise ValueError("field values must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(
        cls,
        grid: Grid,
        fn: Callable[[np.ndarray], np.ndarray],
        partial: Optional[Callable[[tuple, np.ndarray], np.ndarray]] = None,
    ) -> "ScalarField":
        vals = np.asarray(fn(grid.nodes()), dtype=complex)
        return cls(grid, vals, analytic=fn, analytic_partial=partial, provenance="analytic")

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray) -> "ScalarField":
        return cls(grid, values)

    def with_values(self, values: np.ndarray, provenance: str) -> "ScalarField":
        return ScalarField(self.grid, values, provenance=provenance)


def _d_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Order-2 first derivative along one axis (one-sided at the edges)."""
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def fd_partial(f: ScalarField, beta: tuple) -> ScalarField:
    """Partial derivative of multi-index beta, analytic oracle preferred."""
    b1, b2 = int(beta[0]), int(beta[1])
    if b1 < 0 or b2 < 0:
        raise ValueError("multi-index components must be nonnegative")
    order = b1 + b2
    if f.analytic_partial is not None:
        try:
            vals = np.asarray(f.analytic_partial((b1, b2), f.grid.nodes()), dtype=complex)
            return ScalarField(f.grid, vals, provenance="analytic-partial")
        except NotImplementedError:
            pass
    need = max(order + 2, 3)
    if f.grid.nx < need or f.grid.ny < need:
        raise ValueError(f"grid too small for an order-{order} derivative")
    vals = f.values
    for _ in range(b1):
        vals = _d_axis(vals, f.grid.h, 0)
    for _ in range(b2):
        vals = _d_axis(vals, f.grid.h, 1)
    return ScalarField(f.grid, vals, provenance="fd")


def dbar(f: ScalarField) -> ScalarField:
    """The operator (d/dx + i d/dy)/2; annihilates holomorphic fields."""
    fx = fd_partial(f, (1, 0))
    fy = fd_partial(f, (0, 1))
    vals = 0.5 * (fx.values + 1j * fy.values)
    return ScalarField(f.grid, vals, provenance=f"dbar({fx.provenance})")


def laplacian(f: ScalarField) -> ScalarField:
    """Five-point Laplacian (via composed order-2 stencils at the edges)."""
    if f.analytic_partial is not None:
        try:
            vals = np.asarray(f.analytic_partial((2, 0), f.grid.nodes()), dtype=complex) + np.asarray(
                f.analytic_partial((0, 2), f.grid.nodes()), dtype=complex
            )
            return ScalarField(f.grid, vals, provenance="analytic-partial")
        except NotImplementedError:
            pass
    v = f.values
    h2 = f.grid.h**2
    out = np.empty_like(v)
    out[1:-1, 1:-1] = (
        v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]
    ) / h2
    # edges: fall back to composed one-sided second derivatives
    full = _d_axis(_d_axis(v, f.grid.h, 0), f.grid.h, 0) + _d_axis(_d_axis(v, f.grid.h, 1), f.grid.h, 1)
    out[0, :], out[-1, :], out[:, 0], out[:, -1] = full[0, :], full[-1, :], full[:, 0], full[:, -1]
    return ScalarField(f.grid, out, provenance="fd")


@dataclass(frozen=True)
class SeminormValue:
    n: int
    m: int
    q: object  # int or "sup"
    value: float
    witness: Optional[complex] = None

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("seminorm values are nonnegative")


def _multi_indices(m: int):
    for order in range(m + 1):
        for b1 in range(order + 1):
            yield (b1, order - b1)


def _seminorm_nodes(f: ScalarField, exh: Exhaustion, n: int, m: int):
    """Node selection: Omega_n intersected with the stencil-safe interior."""
    if f.analytic_partial is None and m > FD_ORDER_CAP:
        raise ValueError(
            f"derivative order {m} above the finite-difference cap {FD_ORDER_CAP}; "
            "supply a field with analytic partials for deeper seminorms"
        )
    margin = 0 if f.analytic_partial is not None else max(m, 0)
    mask = exh.mask(n, f.grid.nodes()) & f.grid.interior_mask(margin)
    if not mask.any():
        raise ValueError(
            f"no grid nodes in Omega_{n} with stencil margin {margin}; enlarge the grid"
        )
    return mask


def sup_seminorm(
    f: ScalarField, W: WeightFamily, exh: Exhaustion, n: int, m: int
) -> SeminormValue:
    """max over Omega_n-nodes and |beta| <= m of |d^beta f| * nu_n."""
    mask = _seminorm_nodes(f, exh, n, m)
    zs = f.grid.nodes()
    wts = W(n, zs)
    best, wit = -1.0, None
    for beta in _multi_indices(m):
        g = fd_partial(f, beta).values
        vals = np.abs(g) * wts
        vals = np.where(mask, vals, -np.inf)
        i = int(np.argmax(vals))
        if vals.flat[i] > best:
            best = float(vals.flat[i])
            wit = complex(zs.flat[i])
    return SeminormValue(n=n, m=m, q="sup", value=best, witness=wit)


def lq_seminorm(
    f: ScalarField, W: WeightFamily, exh: Exhaustion, n: int, m: int, q: int
) -> SeminormValue:
    """max over |alpha| <= m of the midpoint-rule L^q norm of d^alpha f * nu_n."""
    if q < 1:
        raise ValueError("q must be >= 1")
    mask = _seminorm_nodes(f, exh, n, m)
    zs = f.grid.nodes()
    wts = W(n, zs)
    cell = f.grid.h**2
    best = -1.0
    for beta in _multi_indices(m):
        g = fd_partial(f, beta).values
        val = float((((np.abs(g) * wts) ** q)[mask]).sum() * cell) ** (1.0 / q)
        best = max(best, val)
    return SeminormValue(n=n, m=m, q=q, value=best)


def equivalence_probe(
    f: ScalarField,
    W: WeightFamily,
    exh: Exhaustion,
    q: int,
    maps: IndexMaps = IndexMaps(),
    ns: Sequence[int] = (1, 2, 3),
    ms: Sequence[int] = (0, 1, 2),
    slack: float = 1e-9,
) -> dict:
    """Forward inequality |f|_{n,m,q} <= C2 * ||psi||_{L^q(Omega_n)} * |f|_{j2(n),m}
    over a suite of (n, m), with the empirical reverse ratios recorded.

    All three factors are computed on the same grid nodes, so the forward
    inequality is exact up to floating rounding whenever C2 is the sampled
    supremum; the reverse ratio table is evidence only (its constant is not
    effective) and is never asserted against.
    """
    rows = []
    all_pass = True
    for n in ns:
        if n < exh.n0:
            continue
        zs = f.grid.nodes()
        mask_n = exh.mask(n, zs)
        if not mask_n.any():
            continue
        ratio = W(n, zs[mask_n]) / (psi_weight(zs[mask_n]) * W(maps.j2(n), zs[mask_n]))
        c2 = float(ratio.max())
        psi_mass = float(((psi_weight(zs[mask_n])) ** q).sum() * f.grid.h**2) ** (1.0 / q)
        for m in ms:
            lhs = lq_seminorm(f, W, exh, n, m, q).value
            sup_j2 = sup_seminorm(f, W, exh, maps.j2(n), m).value
            rhs = c2 * psi_mass * sup_j2
            ok = lhs <= rhs * (1.0 + slack) + 1e-300
            all_pass &= ok
            reverse = {}
            for l in range(m, m + 3):
                denom = lq_seminorm(f, W, exh, 2 * maps.j11(n), l + 2, q).value
                sup_nm = sup_seminorm(f, W, exh, n, m).value
                reverse[l] = sup_nm / denom if denom > 0 else math.inf if sup_nm > 0 else 0.0
            rows.append(
                {
                    "n": n, "m": m, "q": q, "lhs": lhs, "rhs": rhs, "C2": c2,
                    "psi_mass": psi_mass, "sup_j2": sup_j2, "pass": bool(ok),
                    "reverse_ratios": reverse,
                }
            )
    return {"probe": "seminorm-equivalence", "pass": bool(all_pass), "rows": rows}


def hypoelliptic_probe(
    fields: Sequence[ScalarField],
    P: str,
    r0: float,
    r1: float,
    r2: float,
    q: int,
    m: int,
    l_cap: int = 2,
) -> dict:
    """Lower estimate of the interior-regularity constant for P in {dbar, laplacian}.

    For each test field on the square of half-width r2, compares the sup of
    |d^alpha f| over the square of half-width r0 (|alpha| <= m) against
    ||f||_{L^q} + sup_{|beta| <= l} ||d^beta P f||_{L^q} over the square of
    half-width r1, sweeping l up to l_cap.  Zero fields are excluded.
    """
    if not (0 < r0 < r1 < r2):
        raise ValueError("need 0 < r0 < r1 < r2")
    if P not in ("dbar", "laplacian"):
        raise ValueError("P must be 'dbar' or 'laplacian'")
    op = dbar if P == "dbar" else laplacian
    per_l = {l: [] for l in range(l_cap + 1)}
    excluded = 0
    for f in fields:
        zs = f.grid.nodes()
        if f.grid.rect.corner_radius() < r2 * math.sqrt(2) - 1e-9:
            raise ValueError("field grid must cover the outer square")
        in0 = (np.abs(zs.real) <= r0) & (np.abs(zs.imag) <= r0)
        in1 = (np.abs(zs.real) <= r1) & (np.abs(zs.imag) <= r1)
        margin = f.grid.interior_mask(m + 2 + l_cap) if f.analytic_partial is None else f.grid.interior_mask(0)
        in0 &= margin
        in1 &= margin
        lhs = 0.0
        for beta in _multi_indices(m):
            lhs = max(lhs, float(np.abs(fd_partial(f, beta).values[in0]).max()))
        if lhs == 0.0:
            excluded += 1
            continue
        cell = f.grid.h**2
        base = float((np.abs(f.values[in1]) ** q).sum() * cell) ** (1.0 / q)
        pf = op(f)
        for l in range(l_cap + 1):
            s = 0.0
            for beta in _multi_indices(l):
                g = fd_partial(pf, beta).values
                s = max(s, float((np.abs(g[in1]) ** q).sum() * cell) ** (1.0 / q))
            rhs = base + s
            per_l[l].append(lhs / rhs)
    estimates = {l: (max(v) if v else 0.0) for l, v in per_l.items()}
    return {
        "probe": "hypoelliptic-constant",
        "operator": P,
        "radii": [r0, r1, r2],
        "q": q,
        "m": m,
        "estimates_by_l": estimates,
        "estimate": max(estimates.values()) if estimates else 0.0,
        "excluded_zero_fields": excluded,
    }


# ---------------------------------------------------------------------------
# Pointwise stencil evaluation (for solutions known only through an evaluator)


def stencil_partial(
    evaluate: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    beta: tuple,
    h: float,
) -> np.ndarray:
    """d^beta at scattered points via tensorized order-2 central stencils.

    ``evaluate`` maps a flat complex array to values; it is called once on the
    full (2*b1+1) x (2*b2+1) patch around every point.
    """
    b1, b2 = int(beta[0]), int(beta[1])
    points = np.asarray(points, dtype=complex).ravel()
    ox = np.arange(-b1, b1 + 1) if b1 else np.array([0])
    oy = np.arange(-b2, b2 + 1) if b2 else np.array([0])
    patch = points[:, None, None] + h * (ox[None, :, None] + 1j * oy[None, None, :])
    vals = evaluate(patch.ravel()).reshape(patch.shape)
    for _ in range(b1):
        vals = (vals[:, 2:, :] - vals[:, :-2, :]) / (2.0 * h)
    for _ in range(b2):
        vals = (vals[:, :, 2:] - vals[:, :, :-2]) / (2.0 * h)
    return vals[:, 0, 0]


def stencil_dbar(
    evaluate: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float
) -> np.ndarray:
    fx = stencil_partial(evaluate, points, (1, 0), h)
    fy = stencil_partial(evaluate, points, (0, 1), h)
    return 0.5 * (fx + 1j * fy)


def dbar_noise_floor(
    points: np.ndarray, h: float, W: WeightFamily, n: int
) -> float:
    """Discretization floor of the weighted residual measurement.

    Exact solutions of the homogeneous equation (holomorphic fields) pushed
    through the same stencil define the smallest residual the measurement can
    resolve; the suite is {1, z, z^2, exp z}.
    """
    points = np.asarray(points, dtype=complex).ravel()
    wts = W(n, points)
    floor = 0.0
    for fn in (lambda z: np.ones_like(z), lambda z: z, lambda z: z * z, np.exp):
        r = np.abs(stencil_dbar(fn, points, h)) * wts
        floor = max(floor, float(r.max()))
    return floor
