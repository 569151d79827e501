"""Weight families, level-index maps, and executable admissibility checkers.

A weight family assigns to every level n a positive continuous function
nu_n with nu_n <= nu_{n+1}.  The checkers estimate the comparability
constants the solver relies on by grid sampling; a mathematical failure is a
``passed=False`` report with witnesses, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domain import DomainGeometry, Exhaustion, Grid, Rect

__all__ = [
    "WeightFamily",
    "IndexMaps",
    "ConditionReport",
    "psi_weight",
    "eval_weight",
    "check_ball_ratio",
    "check_psi_domination",
    "check_ratio_decay",
    "check_subharmonic",
]


def psi_weight(zs: np.ndarray) -> np.ndarray:
    """The fixed auxiliary weight psi(z) = (1 + |z|^2)^(-2)."""
    zs = np.asarray(zs, dtype=complex)
    return (1.0 + zs.real**2 + zs.imag**2) ** -2.0


@dataclass(frozen=True)
class WeightFamily:
    """Level-indexed weights nu_n.

    kind ``exp_power``: nu_n(z) = exp(a_n |z|^gamma) with (a_n) strictly
    increasing, all of one sign, and 0 < gamma <= 1.
    kind ``constant_one``: nu_n = 1.
    kind ``custom``: ``evaluator(n, z_array)``.

    q is the integrability exponent the psi-domination check integrates with.
    """

    kind: str
    a: Optional[Callable[[int], float]] = None
    gamma: float = 1.0
    q: int = 2
    evaluator: Optional[Callable[[int, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("exp_power", "constant_one", "custom"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "exp_power":
            if self.a is None:
                raise ValueError("exp_power weights need the coefficient sequence a")
            if not (0.0 < self.gamma <= 1.0):
                raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
            a_vals = [self.a(n) for n in range(1, 9)]
            if not all(x < y for x, y in zip(a_vals, a_vals[1:])):
                raise ValueError("coefficient sequence a must be strictly increasing")
            if not (all(x <= 0 for x in a_vals) or all(x >= 0 for x in a_vals)):
                raise ValueError("coefficient sequence a must not change sign")
        if self.kind == "custom" and self.evaluator is None:
            raise ValueError("custom weights need an evaluator")
        if self.q < 1:
            raise ValueError("q must be a positive integer")

    def __call__(self, n: int, zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        if self.kind == "constant_one":
            return np.ones(zs.shape)
        if self.kind == "exp_power":
            return np.exp(self.a(n) * np.abs(zs) ** self.gamma)
        return np.asarray(self.evaluator(n, zs), dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant_one"


def neg_reciprocal(n: int) -> float:
    """The canonical coefficient sequence a_n = -1/n."""
    return -1.0 / n


def eval_weight(W: WeightFamily, n: int, z: complex) -> float:
    """nu_n(z) at a single point."""
    if n < 1:
        raise IndexError("weight level must be >= 1")
    return float(W(n, np.asarray([complex(z)]))[0])


@dataclass(frozen=True)
class IndexMaps:
    """Level bookkeeping: the maps that say how far up the exhaustion each
    estimate has to reach.

    Defaults double the level, for which the composed maps are
    i14(n) = 4n and i214(n) = 8n and the gluing hypothesis
    i214(n) >= i14(n+1) holds for every n >= 1.
    """

    j1: Callable[[int], int] = field(default=lambda n: 2 * n)
    j2: Callable[[int], int] = field(default=lambda n: 2 * n)
    i1: Callable[[int], int] = field(default=lambda n: 2 * n)
    i2: Callable[[int], int] = field(default=lambda n: 2 * n)
    i4: Callable[[int], int] = field(default=lambda n: 2 * n)

    def __post_init__(self):
        for name, f, strict in (
            ("j1", self.j1, False),
            ("j2", self.j2, False),
            ("i1", self.i1, True),
            ("i2", self.i2, True),
            ("i4", self.i4, True),
        ):
            for n in range(1, 6):
                v = f(n)
                if strict and not v > n:
                    raise ValueError(f"index map {name} must satisfy {name}(n) > n; {name}({n}) = {v}")
                if not strict and not v >= n:
                    raise ValueError(f"index map {name} must satisfy {name}(n) >= n; {name}({n}) = {v}")

    def j11(self, n: int) -> int:
        return self.j1(self.j1(n))

    def i14(self, n: int) -> int:
        return self.i1(self.i4(n))

    def i214(self, n: int) -> int:
        return self.i2(self.i14(n))

    def gluing_hypothesis_holds(self, n_max: int = 16) -> bool:
        """i214(n) >= i14(n+1) for n = 1..n_max (needed to chain stages)."""
        return all(self.i214(n) >= self.i14(n + 1) for n in range(1, n_max + 1))


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one sampled admissibility check."""

    condition: str
    level: int
    passed: bool
    constants: dict
    witnesses: tuple
    resolution: float
    note: str = ""

    def __post_init__(self):
        if not self.passed and len(self.witnesses) == 0:
            raise ValueError("a failing report must carry at least one witness")

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "level": self.level,
            "pass": bool(self.passed),
            "constants": {k: _jsonable(v) for k, v in self.constants.items()},
            "witnesses": [[w.real, w.imag] for w in self.witnesses],
            "resolution": self.resolution,
            "note": self.note,
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _level_nodes(exh: Exhaustion, n: int, grid: Grid) -> np.ndarray:
    zs = grid.flat_nodes()
    sel = exh.mask(n, zs)
    if not sel.any():
        raise ValueError(f"no grid nodes fall in Omega_{n}; refine or enlarge the grid")
    return zs[sel]


def check_ball_ratio(
    W: WeightFamily,
    exh: Exhaustion,
    geom: DomainGeometry,
    n: int,
    grid: Grid,
    maps: IndexMaps = IndexMaps(),
    k: Optional[int] = None,
    max_centers: int = 4000,
) -> ConditionReport:
    """Sup/inf comparability of nu_n against nu_{j1(n)} over sup-norm balls.

    For sampled centers x in Omega_k, estimates
    sup_{|zeta|_inf <= rho_k} nu_n(x+zeta) / inf_{|zeta|_inf <= rho_k} nu_{j1(n)}(x+zeta)
    by sub-grid maximization (refinement factor 4 inside each ball) and
    reports the max ratio as the constant C1(n).
    """
    k = n if k is None else k
    rho = geom.rho(k)
    centers = _level_nodes(exh, k, grid)
    if len(centers) > max_centers:
        stride = len(centers) // max_centers + 1
        centers = centers[::stride]
    t = np.linspace(-rho, rho, 9)  # spacing rho/4
    offs = (t[:, None] + 1j * t[None, :]).ravel()
    pts = centers[:, None] + offs[None, :]
    nun = W(n, pts)
    nuj = W(maps.j1(n), pts)
    sup_n = nun.max(axis=1)
    inf_j = nuj.min(axis=1)
    ratios = sup_n / inf_j
    i = int(np.argmax(ratios))
    c1 = float(ratios[i])
    passed = math.isfinite(c1)
    return ConditionReport(
        condition="weights.ball_ratio",
        level=n,
        passed=passed,
        constants={"C1": c1, "rho_k": rho, "k": k, "j1": maps.j1(n)},
        witnesses=(complex(centers[i]),) if len(centers) else (),
        resolution=grid.h,
        note="ball sampled at refinement rho_k/4",
    )


def check_psi_domination(
    W: WeightFamily,
    exh: Exhaustion,
    n: int,
    grid: Grid,
    q: Optional[int] = None,
    maps: IndexMaps = IndexMaps(),
    k: Optional[int] = None,
) -> ConditionReport:
    """Pointwise domination nu_n <= C2 psi nu_{j2(n)} plus L^q mass of psi.

    C2(n) is estimated as the sampled sup of nu_n / (psi nu_{j2(n)}) over
    Omega_k; the psi mass over Omega_k is a midpoint-rule quadrature.
    """
    q = W.q if q is None else q
    if q < 1:
        raise ValueError("q must be >= 1")
    k = max(n, maps.j2(n)) if k is None else k
    ratio_nodes = _level_nodes(exh, k, grid)  # the sup ranges over the deeper level
    ratio = W(n, ratio_nodes) / (psi_weight(ratio_nodes) * W(maps.j2(n), ratio_nodes))
    i = int(np.argmax(ratio))
    c2 = float(ratio[i])
    mass_nodes = _level_nodes(exh, n, grid)
    psi_mass = float((psi_weight(mass_nodes) ** q).sum() * grid.h**2) ** (1.0 / q)
    passed = math.isfinite(c2) and math.isfinite(psi_mass)
    return ConditionReport(
        condition="weights.psi_domination",
        level=n,
        passed=passed,
        constants={"C2": c2, "psi_lq_mass": psi_mass, "q": q, "j2": maps.j2(n), "sample_level": k},
        witnesses=(complex(ratio_nodes[i]),),
        resolution=grid.h,
    )


def check_ratio_decay(
    W: WeightFamily,
    exh: Exhaustion,
    n: int,
    eps: float,
    grid: Grid,
    maps: IndexMaps = IndexMaps(),
) -> ConditionReport:
    """Off a compact set K, nu_n must fall below eps * nu_{i1(n)} on Omega_n.

    For exp_power weights K is explicit: the part of closure(Omega_n) with
    |Re z| <= max(0, ln(eps)/(a_n - a_{i1(n)}))^(1/gamma) + n.  For constant
    weights K = closure(Omega_n) works iff Omega_n is bounded; otherwise the
    condition genuinely fails and the report says so.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if n < exh.n0:
        raise IndexError(f"level n={n} below first nonempty level n0={exh.n0}")
    i1n = maps.i1(n)
    bounded = exh.kind == "compact_balls" or (exh.kind == "custom")
    zs = _level_nodes(exh, n, grid)

    if W.kind == "exp_power":
        an, ai = W.a(n), W.a(i1n)
        halfwidth = max(0.0, math.log(eps) / (an - ai)) ** (1.0 / W.gamma) + n
        ymax = float(np.abs(zs.imag).max()) + grid.h
        K = Rect(complex(-halfwidth, -ymax), complex(halfwidth, ymax))
        outside = np.abs(zs.real) > halfwidth
        zs_out = zs[outside]
        ok = W(n, zs_out) <= eps * W(i1n, zs_out) * (1.0 + 1e-12)
        passed = bool(ok.all())
        bad = tuple(map(complex, zs_out[~ok][:3]))
        return ConditionReport(
            condition="weights.ratio_decay",
            level=n,
            passed=passed,
            constants={"eps": eps, "K_halfwidth": halfwidth, "i1": i1n,
                       "points_outside_K": int(outside.sum())},
            witnesses=bad if not passed else (),
            resolution=grid.h,
            note="K = closure(Omega_n) cut to |Re z| <= K_halfwidth",
        )

    if W.is_constant:
        if bounded:
            b = float(np.abs(zs).max()) + grid.h
            K = Rect(complex(-b, -b), complex(b, b))
            return ConditionReport(
                condition="weights.ratio_decay",
                level=n,
                passed=True,
                constants={"eps": eps, "K_halfwidth": b, "i1": i1n, "points_outside_K": 0},
                witnesses=(),
                resolution=grid.h,
                note="K is all of closure(Omega_n); nothing left to check",
            )
        i = int(np.argmax(np.abs(zs.real)))
        return ConditionReport(
            condition="weights.ratio_decay",
            level=n,
            passed=eps >= 1.0,
            constants={"eps": eps, "i1": i1n},
            witnesses=(complex(zs[i]),),
            resolution=grid.h,
            note="constant weights on an unbounded level cannot decay below eps < 1",
        )

    # custom weights: sampled search for a working halfwidth
    for halfwidth in np.linspace(0.0, np.abs(zs.real).max(), 33):
        outside = np.abs(zs.real) > halfwidth
        if not outside.any():
            break
        if (W(n, zs[outside]) <= eps * W(i1n, zs[outside])).all():
            return ConditionReport(
                condition="weights.ratio_decay", level=n, passed=True,
                constants={"eps": eps, "K_halfwidth": float(halfwidth), "i1": i1n},
                witnesses=(), resolution=grid.h, note="sampled halfwidth search")
    i = int(np.argmax(W(n, zs) / W(i1n, zs)))
    return ConditionReport(
        condition="weights.ratio_decay", level=n, passed=False,
        constants={"eps": eps, "i1": i1n}, witnesses=(complex(zs[i]),),
        resolution=grid.h, note="no sampled halfwidth satisfied the decay")


def check_subharmonic(
    W: WeightFamily,
    n: int,
    grid: Grid,
    tol_coeff: float = 1.0,
) -> ConditionReport:
    """-ln(nu_n) must be subharmonic: its five-point discrete Laplacian at
    interior nodes may not fall below -tolerance, tolerance = tol_coeff * h^2.
    """
    zs = grid.nodes()
    if grid.nx < 3 or grid.ny < 3:
        raise ValueError("grid too small for the five-point stencil")
    v = -np.log(W(n, zs))
    h2 = grid.h**2
    lap = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / h2
    tol = max(1e-9, tol_coeff * h2)
    bad = lap < -tol
    passed = not bool(bad.any())
    witnesses = ()
    if not passed:
        ii, jj = np.where(bad)
        witnesses = tuple(complex(zs[1:-1, 1:-1][i, j]) for i, j in list(zip(ii, jj))[:3])
    return ConditionReport(
        condition="weights.subharmonic",
        level=n,
        passed=passed,
        constants={"min_discrete_laplacian": float(lap.min()), "tolerance": tol},
        witnesses=witnesses,
        resolution=grid.h,
    )
