"""Minimal-norm local solves in weighted L2 and the inequality they certify.

The classical weighted-L2 existence result promises, for subharmonic
-2*ln(weight) exponents, a solution whose weighted squared mass is dominated
by that of the data.  The constructive realization here takes the cutoff
Cauchy-transform particular solution and subtracts its orthogonal projection
onto holomorphic polynomials in the solution inner product; the projection is
holomorphic, so the equation survives, and the norm can only shrink.  The
minimal-norm realization is one admissible choice among the solutions the
existence theory allows; every report says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import ScalarField
from .domain import DomainGeometry, Exhaustion, Grid
from .fundsol import FundamentalSolution
from .quadrature import field_evaluator
from .transform import ParticularSolution, cutoff_for_levels
from .weights import IndexMaps, WeightFamily, psi_weight

__all__ = [
    "WeightedL2Problem",
    "PolynomialPart",
    "MinimalNormSolution",
    "minimal_norm_solve",
    "hormander_inequality_check",
    "psi_chain_check",
]

GRAM_CONDITION_GUARD = 1e12
NOTE_REALIZATION = "minimal-norm realization over a polynomial subspace; one admissible solution"


@dataclass(frozen=True)
class WeightedL2Problem:
    """Data of one weighted-L2 solve.

    The solve lives on the domain level j2(2*j11(n)); its exponent is
    -2*ln(nu) at that level, so exp(-exponent) = nu^2.
    """

    n: int
    W: WeightFamily
    exh: Exhaustion
    geom: DomainGeometry
    maps: IndexMaps = IndexMaps()
    degree_cap: int = 12

    @property
    def domain_level(self) -> int:
        return self.maps.j2(2 * self.maps.j11(self.n))

    def exp_neg_phi(self, zs: np.ndarray) -> np.ndarray:
        """exp(-phi) = nu_{domain_level}^2."""
        return self.W(self.domain_level, zs) ** 2

    def solution_density(self, zs: np.ndarray) -> np.ndarray:
        """The density weighting the solution: exp(-phi) * (1+|z|^2)^(-2)."""
        return self.exp_neg_phi(zs) * psi_weight(zs)


@dataclass(frozen=True)
class PolynomialPart:
    """Scaled-monomial polynomial sum_k c_k (z / scale)^k."""

    coeffs: np.ndarray
    scale: float

    def __call__(self, zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        return np.polynomial.polynomial.polyval(zs / self.scale, self.coeffs)


class MinimalNormSolution:
    """u = u0 - P(u0), evaluable at arbitrary points."""

    def __init__(self, particular: ParticularSolution, projection: PolynomialPart, report: dict):
        self.particular = particular
        self.projection = projection
        self.report = report

    def at(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=complex)
        return self.particular.at(pts) - self.projection(pts)

    def as_field(self, out_grid: Grid) -> ScalarField:
        vals = self.at(out_grid.flat_nodes()).reshape(out_grid.nx, out_grid.ny)
        return ScalarField(out_grid, vals, provenance="minimal-norm")


def _project(
    vals: np.ndarray, zs: np.ndarray, density: np.ndarray, cell: float, degree: int, scale: float
):
    """Orthogonal projection onto span{1, z, ..., z^degree} in the weighted
    quadrature inner product; returns (coeffs, gram condition number)."""
    t = zs / scale
    V = np.vander(t, degree + 1, increasing=True)
    wV = V * density[:, None]
    G = (V.conj().T @ wV) * cell
    b = (V.conj().T * density[None, :]) @ vals * cell
    sv = np.linalg.svd(G, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    coeffs = np.linalg.solve(G, b)
    return coeffs, cond


def minimal_norm_solve(
    problem: WeightedL2Problem,
    f: ScalarField,
    fs_family: Callable[[int], FundamentalSolution],
    domain_grid: Grid,
    source_grid: Optional[Grid] = None,
) -> tuple[MinimalNormSolution, dict]:
    """Particular solution minus its weighted polynomial projection.

    ``domain_grid`` carries the quadrature for the inner product (it should
    cover the domain level, truncated in unbounded directions); ``source_grid``
    carries the cutoff data for the particular solution and defaults to the
    domain grid.  For data without an analytic evaluator the source grid must
    equal the data grid.
    """
    D = problem.domain_level
    maps = problem.maps
    source_grid = domain_grid if source_grid is None else source_grid
    if f.analytic is not None:
        fsrc = ScalarField.from_callable(source_grid, f.analytic, partial=f.analytic_partial)
    else:
        if source_grid is not f.grid and source_grid.rect != f.grid.rect:
            raise ValueError("sampled data cannot be moved to a different source grid")
        fsrc = f

    cutoff = cutoff_for_levels(problem.exh, problem.geom, D, maps.i4(D), source_grid)
    psi = ScalarField(source_grid, cutoff.field.values * fsrc.values, provenance="cutoff*data")
    particular = ParticularSolution(fs_family(maps.i14(D)), psi)

    zs = domain_grid.flat_nodes()
    sel = problem.exh.mask(D, zs)
    if not sel.any():
        raise ValueError(f"domain grid has no nodes in Omega_{D}")
    zsel = zs[sel]
    cell = domain_grid.h**2
    dens = problem.solution_density(zsel)

    rhs_mass = float((np.abs(field_evaluator(fsrc)(zsel)) ** 2 * problem.exp_neg_phi(zsel)).sum() * cell)
    if not math.isfinite(rhs_mass):
        raise ValueError("data has infinite weighted mass on the domain level")

    u0_vals = particular.at(zsel)
    degree = problem.degree_cap
    coeffs = np.zeros(1, dtype=complex)
    cond = 1.0
    scale = max(float(np.abs(zsel).max()), 1.0)
    fell_back = False
    while degree >= 0:
        coeffs, cond = _project(u0_vals, zsel, dens, cell, degree, scale)
        if cond <= GRAM_CONDITION_GUARD:
            break
        degree -= 1
        fell_back = True
    projection = PolynomialPart(coeffs=coeffs, scale=scale)

    norm0 = float((np.abs(u0_vals) ** 2 * dens).sum() * cell)
    u_vals = u0_vals - projection(zsel)
    norm1 = float((np.abs(u_vals) ** 2 * dens).sum() * cell)
    report = {
        "domain_level": D,
        "degree": int(degree),
        "gram_condition": cond,
        "degree_reduced": fell_back,
        "weighted_norm_before": norm0,
        "weighted_norm_after": norm1,
        "rhs_mass": rhs_mass,
        "note": NOTE_REALIZATION,
    }
    return MinimalNormSolution(particular, projection, report), report


def hormander_inequality_check(
    u: MinimalNormSolution,
    f: ScalarField,
    problem: WeightedL2Problem,
    domain_grid: Grid,
    slack: float = 0.1,
) -> dict:
    """Quadrature check of
    integral |u|^2 exp(-phi) (1+|z|^2)^(-2)  <=  integral |f|^2 exp(-phi).

    The minimal-norm solution can only have smaller weighted mass than the
    solution the existence theory guarantees, so the inequality must hold up
    to projection truncation and quadrature error (hence the slack).
    """
    zs = domain_grid.flat_nodes()
    sel = problem.exh.mask(problem.domain_level, zs)
    zsel = zs[sel]
    cell = domain_grid.h**2
    lhs = float((np.abs(u.at(zsel)) ** 2 * problem.solution_density(zsel)).sum() * cell)
    rhs = float((np.abs(field_evaluator(f)(zsel)) ** 2 * problem.exp_neg_phi(zsel)).sum() * cell)
    return {
        "check": "weighted-l2-inequality",
        "lhs": lhs,
        "rhs": rhs,
        "slack": slack,
        "degree": u.report["degree"],
        "gram_condition": u.report["gram_condition"],
        "pass": bool(lhs <= rhs * (1.0 + slack)),
        "note": NOTE_REALIZATION,
    }


def psi_chain_check(
    u: MinimalNormSolution,
    problem: WeightedL2Problem,
    domain_grid: Grid,
    slack: float = 1e-9,
) -> dict:
    """Step-by-step quadrature verification of the norm-transfer chain
    ||u||_{2*j11(n),0,2}^2 <= C2^2 * integral |u|^2 exp(-phi) (1+|z|^2)^(-4)
                          <= C2^2 * integral |u|^2 exp(-phi) (1+|z|^2)^(-2).
    C2 is the sampled domination constant at level 2*j11(n) on the same nodes.
    """
    maps, W, exh = problem.maps, problem.W, problem.exh
    lvl = 2 * maps.j11(problem.n)
    D = problem.domain_level
    zs = domain_grid.flat_nodes()
    sel_l = exh.mask(lvl, zs)
    sel_D = exh.mask(D, zs)
    cell = domain_grid.h**2
    if not sel_l.any():
        raise ValueError(f"domain grid has no nodes in Omega_{lvl}")
    u_l = u.at(zs[sel_l])
    u_D = u.at(zs[sel_D])

    ratio = W(lvl, zs[sel_D]) / (psi_weight(zs[sel_D]) * W(maps.j2(lvl), zs[sel_D]))
    c2 = float(ratio.max())
    s1 = float((np.abs(u_l) ** 2 * W(lvl, zs[sel_l]) ** 2).sum() * cell)
    psi4 = psi_weight(zs[sel_D]) ** 2
    psi2 = psi_weight(zs[sel_D])
    expphi = problem.exp_neg_phi(zs[sel_D])
    s2 = c2**2 * float((np.abs(u_D) ** 2 * expphi * psi4).sum() * cell)
    s3 = c2**2 * float((np.abs(u_D) ** 2 * expphi * psi2).sum() * cell)
    pointwise_ok = bool((psi4 <= psi2 * (1 + 1e-15)).all())
    ok = s1 <= s2 * (1 + slack) + 1e-300 and s2 <= s3 * (1 + slack) + 1e-300 and pointwise_ok
    return {
        "check": "norm-transfer-chain",
        "level": lvl,
        "domain_level": D,
        "C2": c2,
        "steps": {"sup_norm_sq": s1, "psi4_bound": s2, "psi2_bound": s3},
        "pointwise_psi_step": pointwise_ok,
        "pass": bool(ok),
    }
