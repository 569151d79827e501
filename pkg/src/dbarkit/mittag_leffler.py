"""Global solves: glue local solutions across the exhaustion.

Stage j produces a solution valid on the level-i14 set of the stage's level;
the next stage takes a deeper local solution and subtracts a holomorphic
correction so that consecutive stages differ by at most 2^-(j+1) in the
stage seminorm.  The geometric schedule telescopes: any two recorded stages
p >= k differ by less than 2^-k in every earlier-stage seminorm, which is
what makes the staged fields a Cauchy family level by level.

Stages are evaluator objects (transform plus polynomial corrections), so
seminorms and residuals are sampled where needed instead of materializing
dense fields per level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import ScalarField, stencil_dbar, stencil_partial, sup_seminorm
from .domain import DomainGeometry, Exhaustion, Grid
from .fundsol import FundamentalSolution
from .hormander import PolynomialPart, WeightedL2Problem, minimal_norm_solve
from .quadrature import field_evaluator
from .transform import ParticularSolution, cutoff_for_levels
from .weights import (
    ConditionReport,
    IndexMaps,
    WeightFamily,
    check_ball_ratio,
    check_psi_domination,
    check_subharmonic,
)

__all__ = [
    "CorrectionFailure",
    "HoloCorrection",
    "MLState",
    "MLConfig",
    "holo_correct",
    "global_solve",
]

GAP_DERIVATIVE_CAP = 4  # finite differences above this order are noise


class CorrectionFailure(RuntimeError):
    """Raised when no admissible correction reaches the scheduled gap."""

    def __init__(self, level: int, target: float, achieved: float, degree: int):
        super().__init__(
            f"holomorphic correction at level {level} reached {achieved:.3e} "
            f"but the schedule needs {target:.3e} (degree cap {degree})"
        )
        self.level = level
        self.target = target
        self.achieved = achieved
        self.degree = degree


@dataclass(frozen=True)
class HoloCorrection:
    """Holomorphic correction h (polynomial, optionally with far poles)."""

    poly: PolynomialPart
    pole_coeffs: np.ndarray
    poles: np.ndarray
    degree: int
    achieved: float
    order: int

    def __call__(self, zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        out = self.poly(zs)
        for c, p in zip(self.pole_coeffs, self.poles):
            out = out + c / (zs - p)
        return out


def _sample_level_nodes(exh: Exhaustion, n: int, grid: Grid, cap: int) -> np.ndarray:
    zs = grid.flat_nodes()
    sel = exh.mask(n, zs) & grid.interior_mask(1).ravel()
    pts = zs[sel]
    if len(pts) == 0:
        raise ValueError(f"no sample nodes in Omega_{n} on the working grid")
    if len(pts) > cap:
        pts = pts[:: len(pts) // cap + 1]
    return pts


def _weighted_sup_at_points(
    diff_eval: Callable[[np.ndarray], np.ndarray],
    pts: np.ndarray,
    W: WeightFamily,
    n: int,
    order: int,
    h: float,
) -> float:
    """Sup over pts and multi-indices |beta| <= order of |d^beta diff| nu_n."""
    wts = W(n, pts)
    best = 0.0
    for total in range(order + 1):
        for b1 in range(total + 1):
            vals = stencil_partial(diff_eval, pts, (b1, total - b1), h)
            best = max(best, float((np.abs(vals) * wts).max()))
    return best


def _far_poles(exh: Exhaustion, n: int, maps: IndexMaps, count: int = 8) -> np.ndarray:
    """Pole sites inside the far region beyond level i214(n)."""
    r = 2.0 * maps.i214(n) + 1.0
    if exh.kind in ("strip", "whole_plane"):
        xs = np.linspace(-r, r, count // 2)
        return np.concatenate([xs + 1j * r, xs - 1j * r])
    th = 2.0 * np.pi * np.arange(count) / count
    return r * np.exp(1j * th)


def holo_correct(
    v,
    n: int,
    W: WeightFamily,
    exh: Exhaustion,
    grid: Grid,
    degree_cap: int,
    target: float,
    maps: IndexMaps = IndexMaps(),
    rational: bool = False,
    closedness_tol: Optional[float] = None,
    fit_cap: int = 2500,
) -> HoloCorrection:
    """Best holomorphic approximation of v in the level-n seminorm.

    ``v`` is a ScalarField or a point evaluator; it must be annihilated by
    the dbar stencil on the level-i14(n) set up to ``closedness_tol`` (checked
    when a tolerance is given).  A weighted least-squares polynomial fit on
    level-n nodes is escalated in degree until the measured seminorm
    |v - h|_{n, m*} with m* = min(n, 4) meets the target; on failure a
    :class:`CorrectionFailure` carries the best achieved gap.

    The default polynomial basis assumes the level sets are connected; for
    the two-component half-plane family a warning suggests the opt-in
    rational basis whose poles sit in the far region beyond level i214(n).
    """
    if isinstance(v, ScalarField):
        v_eval = field_evaluator(v)
    else:
        v_eval = v
    if exh.kind == "strip" and exh.has_boundary and not rational:
        warnings.warn(
            "level sets of the two-half-plane family are disconnected; a polynomial "
            "basis may not converge, consider rational=True",
            stacklevel=2,
        )
    h = grid.h
    if closedness_tol is not None:
        probe = _sample_level_nodes(exh, maps.i14(n), grid, 400)
        closed = float(np.abs(stencil_dbar(v_eval, probe, h)).max())
        if closed > closedness_tol:
            raise ValueError(
                f"input is not closed under dbar on Omega_{maps.i14(n)}: "
                f"residual {closed:.3e} > tol {closedness_tol:.3e}"
            )

    pts = _sample_level_nodes(exh, n, grid, fit_cap)
    wts = W(n, pts)
    scale = max(float(np.abs(pts).max()), 1.0)
    vvals = v_eval(pts)
    order = min(n, GAP_DERIVATIVE_CAP)
    poles = _far_poles(exh, n, maps) if rational else np.zeros(0, dtype=complex)

    best: Optional[HoloCorrection] = None
    degree = min(4, degree_cap)
    while True:
        V = np.vander(pts / scale, degree + 1, increasing=True)
        cols = [V]
        if len(poles):
            cols.append(1.0 / (pts[:, None] - poles[None, :]))
        A = np.concatenate(cols, axis=1)
        sol, *_ = np.linalg.lstsq(A * wts[:, None], vvals * wts, rcond=None)
        corr = HoloCorrection(
            poly=PolynomialPart(coeffs=sol[: degree + 1], scale=scale),
            pole_coeffs=sol[degree + 1 :],
            poles=poles,
            degree=degree,
            achieved=math.inf,
            order=order,
        )
        achieved = _weighted_sup_at_points(
            lambda zs: v_eval(zs) - corr(zs), pts, W, n, order, h
        )
        corr = HoloCorrection(corr.poly, corr.pole_coeffs, corr.poles, degree, achieved, order)
        if best is None or achieved < best.achieved:
            best = corr
        if achieved <= target:
            return corr
        if degree >= degree_cap:
            raise CorrectionFailure(n, target, best.achieved, degree_cap)
        degree = min(degree + 2, degree_cap)


@dataclass
class MLConfig:
    """Knobs of the staged global solve."""

    levels: int = 3
    degree_cap: int = 12
    h_solve: float = 0.1
    re_halfwidth: float = 8.0
    per_level_residual_tol: float = 5e-2
    closedness_tol: float = 5e-2
    rational: bool = False
    sample_cap: int = 1200
    source_pad: float = 0.6


@dataclass
class MLState:
    """History of the staged construction.

    Gap j (j >= 2) is the seminorm of stage j minus stage j-1, measured at
    the stage-(j-1) level with derivative order min(j-1, cap); the schedule
    requires gap(j) <= 2^-j.  Stage levels are shifted by the exhaustion's
    first nonempty index, so stage j works at level n0 - 1 + j.
    """

    levels: int
    n0_shift: int
    derivative_cap: int
    gap_history: dict = field(default_factory=dict)
    gap_targets: dict = field(default_factory=dict)
    gap_levels: dict = field(default_factory=dict)
    gap_orders: dict = field(default_factory=dict)
    residual_history: dict = field(default_factory=dict)
    closedness_history: dict = field(default_factory=dict)
    correction_degrees: dict = field(default_factory=dict)
    precondition_reports: list = field(default_factory=list)
    finiteness_evidence: dict = field(default_factory=dict)
    telescope_rows: list = field(default_factory=list)
    final_residual: float = math.nan
    solver_kind: str = ""

    def schedule_ok(self) -> bool:
        return all(self.gap_history[j] <= self.gap_targets[j] for j in self.gap_history)

    def telescope_ok(self) -> bool:
        return all(row["pass"] for row in self.telescope_rows)

    def to_json_dict(self) -> dict:
        return {
            "levels": self.levels,
            "n0_shift": self.n0_shift,
            "derivative_cap": self.derivative_cap,
            "solver_kind": self.solver_kind,
            "gaps": {str(j): self.gap_history[j] for j in sorted(self.gap_history)},
            "gap_targets": {str(j): self.gap_targets[j] for j in sorted(self.gap_targets)},
            "gap_levels": {str(j): self.gap_levels[j] for j in sorted(self.gap_levels)},
            "gap_orders": {str(j): self.gap_orders[j] for j in sorted(self.gap_orders)},
            "residuals": {str(j): self.residual_history[j] for j in sorted(self.residual_history)},
            "closedness": {str(j): self.closedness_history[j] for j in sorted(self.closedness_history)},
            "correction_degrees": {str(j): self.correction_degrees[j] for j in sorted(self.correction_degrees)},
            "preconditions": [r.to_json_dict() if isinstance(r, ConditionReport) else r
                              for r in self.precondition_reports],
            "finiteness_evidence": {str(k): v for k, v in sorted(self.finiteness_evidence.items())},
            "telescope": self.telescope_rows,
            "final_residual": self.final_residual,
            "schedule_ok": self.schedule_ok(),
            "telescope_ok": self.telescope_ok(),
        }


class _StageEvaluator:
    """Stage field g_j = u - h as a point evaluator."""

    def __init__(self, u_eval: Callable[[np.ndarray], np.ndarray], corrections: tuple):
        self.u_eval = u_eval
        self.corrections = corrections

    def __call__(self, zs: np.ndarray) -> np.ndarray:
        out = np.asarray(self.u_eval(zs), dtype=complex).copy()
        for c in self.corrections:
            out -= c(zs)
        return out


def _level_solver(
    f: ScalarField,
    W: WeightFamily,
    exh: Exhaustion,
    geom: DomainGeometry,
    fs_family: Callable[[int], FundamentalSolution],
    maps: IndexMaps,
    cfg: MLConfig,
):
    """Per-level particular solutions: plain cutoff transform for unit
    weights, minimal-norm weighted solve otherwise (to inherit the weighted
    bound).  Returns level -> evaluator."""
    if f.analytic is None:
        raise ValueError("the staged solver needs data with an analytic evaluator")
    cache: dict = {}

    def source_grid_for(outer_level: int) -> Grid:
        rect = exh.level_rect(outer_level, pad=cfg.source_pad, re_halfwidth=cfg.re_halfwidth)
        return Grid(rect, cfg.h_solve)

    def solve(level: int):
        if level in cache:
            return cache[level]
        if W.is_constant:
            sg = source_grid_for(maps.i4(level))
            cutoff = cutoff_for_levels(exh, geom, level, maps.i4(level), sg)
            fsrc = ScalarField.from_callable(sg, f.analytic, partial=f.analytic_partial)
            psi = ScalarField(sg, cutoff.field.values * fsrc.values, provenance="cutoff*data")
            sol = ParticularSolution(fs_family(maps.i14(level)), psi)
            cache[level] = (sol.at, {"kind": "transform", "level": level})
        else:
            problem = WeightedL2Problem(
                n=level, W=W, exh=exh, geom=geom, maps=maps, degree_cap=cfg.degree_cap
            )
            dg = source_grid_for(min(problem.domain_level, maps.i4(level)))
            sol, rep = minimal_norm_solve(problem, f, fs_family, dg)
            cache[level] = (sol.at, {"kind": "minimal-norm", "level": level, **rep})
        return cache[level]

    return solve


def global_solve(
    f: ScalarField,
    W: WeightFamily,
    exh: Exhaustion,
    geom: DomainGeometry,
    fs_family: Callable[[int], FundamentalSolution],
    N: int,
    out_grid: Grid,
    maps: IndexMaps = IndexMaps(),
    cfg: Optional[MLConfig] = None,
    check_grid: Optional[Grid] = None,
) -> tuple[ScalarField, MLState]:
    """Run N stages of the staged construction and return the final field.

    Preconditions (ball-ratio, psi-domination with q=2, subharmonicity of
    -ln nu) run first; a subharmonicity failure aborts.  Stage bookkeeping,
    the 2^-j gap schedule, per-level residuals, and the telescoped pairwise
    bounds are recorded in the returned :class:`MLState`.
    """
    cfg = cfg or MLConfig(levels=N)
    if N < 1:
        raise ValueError("need at least one stage")
    check_grid = check_grid or out_grid
    state = MLState(levels=N, n0_shift=exh.n0 - 1, derivative_cap=GAP_DERIVATIVE_CAP)

    # preconditions
    rep1 = check_ball_ratio(W, exh, geom, exh.n0, check_grid, maps=maps)
    rep2 = check_psi_domination(W, exh, exh.n0, check_grid, q=2, maps=maps)
    rep3 = check_subharmonic(W, exh.n0, check_grid)
    state.precondition_reports += [rep1, rep2, rep3]
    if not rep3.passed:
        raise ValueError("-ln(weight) is not subharmonic on the working grid; aborting")
    if not maps.gluing_hypothesis_holds():
        raise ValueError("index maps violate the stage-chaining hypothesis i214(n) >= i14(n+1)")
    for n in range(exh.n0, exh.n0 + 2):
        for m in (0, 1):
            val = sup_seminorm(f, W, exh, n, m).value
            state.finiteness_evidence[f"|f|_{n},{m}"] = val
            if not math.isfinite(val):
                raise ValueError(f"data has infinite weighted seminorm at level {n}")
    # residual guards scale with the data so the pipeline stays homogeneous;
    # the 2^-j gap schedule itself is absolute by construction
    f_scale = max(1.0, float(np.abs(f.values).max()))

    L = lambda j: exh.n0 - 1 + j  # stage -> level shift
    solve = _level_solver(f, W, exh, geom, fs_family, maps, cfg)
    state.solver_kind = "transform" if W.is_constant else "minimal-norm"
    f_ev = field_evaluator(f)

    def residual_on(level: int, g_eval) -> float:
        pts = _sample_level_nodes(exh, level, check_grid, cfg.sample_cap)
        r = np.abs(stencil_dbar(g_eval, pts, check_grid.h) - f_ev(pts)) * W(level, pts)
        return float(r.max())

    u1_eval, _ = solve(maps.i14(L(1)))
    stages = [_StageEvaluator(u1_eval, ())]
    state.residual_history[1] = residual_on(maps.i14(L(1)), stages[0])

    for j in range(1, N):
        deep = maps.i214(L(j))
        u_eval, _ = solve(deep)
        g_prev = stages[-1]
        v = lambda zs, _u=u_eval, _g=g_prev: np.asarray(_u(zs), dtype=complex) - _g(zs)
        probe = _sample_level_nodes(exh, maps.i14(L(j)), check_grid, 400)
        closed = float(np.abs(stencil_dbar(v, probe, check_grid.h)).max())
        state.closedness_history[j] = closed
        if closed > cfg.closedness_tol * f_scale:
            raise CorrectionFailure(L(j), cfg.closedness_tol * f_scale, closed, -1)
        target = 2.0 ** -(j + 1)
        corr = holo_correct(
            v, L(j), W, exh, check_grid, cfg.degree_cap, target,
            maps=maps, rational=cfg.rational,
        )
        g_next = _StageEvaluator(u_eval, (corr,))
        order = min(j, GAP_DERIVATIVE_CAP)
        gap = _weighted_sup_at_points(
            lambda zs: g_next(zs) - g_prev(zs),
            _sample_level_nodes(exh, L(j), check_grid, cfg.sample_cap),
            W, L(j), order, check_grid.h,
        )
        state.gap_history[j + 1] = gap
        state.gap_targets[j + 1] = target
        state.gap_levels[j + 1] = L(j)
        state.gap_orders[j + 1] = order
        state.correction_degrees[j + 1] = corr.degree
        if gap > target:
            raise CorrectionFailure(L(j), target, gap, corr.degree)
        stages.append(g_next)
        state.residual_history[j + 1] = residual_on(maps.i14(L(j + 1)), g_next)
        if state.residual_history[j + 1] > cfg.per_level_residual_tol * f_scale:
            raise CorrectionFailure(L(j + 1), cfg.per_level_residual_tol * f_scale,
                                    state.residual_history[j + 1], corr.degree)

    # telescoped pairwise bounds on the recorded stages
    for k in range(1, N + 1):
        for p in range(k + 1, N + 1):
            for l in range(1, k + 1):
                m = min(k, GAP_DERIVATIVE_CAP)  # depth limited by FD stability only
                pts = _sample_level_nodes(exh, L(l), check_grid, 300)
                val = _weighted_sup_at_points(
                    lambda zs: stages[p - 1](zs) - stages[k - 1](zs),
                    pts, W, L(l), m, check_grid.h,
                )
                gap_sum = sum(state.gap_history[j] for j in range(k + 1, p + 1))
                state.telescope_rows.append(
                    {
                        "p": p, "k": k, "l": l, "m": m, "value": val,
                        "bound": 2.0**-k, "gap_sum": gap_sum,
                        "pass": bool(val <= 2.0**-k and gap_sum < 2.0**-k),
                    }
                )

    g_final = stages[-1]
    vals = g_final(out_grid.flat_nodes()).reshape(out_grid.nx, out_grid.ny)
    g_field = ScalarField(out_grid, vals, provenance="staged-global")
    state.final_residual = residual_on(L(N), g_final)
    return g_field, state
