"""Componentwise solves for targets in C^k.

For finite-dimensional targets the vector solve is literally the scalar
pipeline per coordinate; seminorm aggregation takes the max over components
(coordinate absolute values form the simplest directed seminorm system).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .calculus import ScalarField
from .domain import DomainGeometry, Exhaustion, Grid
from .fundsol import FundamentalSolution
from .mittag_leffler import MLConfig, MLState, global_solve
from .weights import IndexMaps, WeightFamily

__all__ = ["VectorField", "ComponentFailure", "solve_componentwise"]


class ComponentFailure(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"component {index} failed: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class VectorField:
    """k scalar components sharing one grid."""

    components: tuple

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("need at least one component")
        g0 = self.components[0].grid
        for c in self.components[1:]:
            if c.grid.rect != g0.rect or c.grid.h != g0.h:
                raise ValueError("components must share one grid")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def max_seminorm(self, per_component: Sequence[float]) -> float:
        return max(per_component)


def solve_componentwise(
    F: VectorField,
    W: WeightFamily,
    exh: Exhaustion,
    geom: DomainGeometry,
    fs_family: Callable[[int], FundamentalSolution],
    N: int,
    out_grid: Grid,
    maps: IndexMaps = IndexMaps(),
    cfg: Optional[MLConfig] = None,
    check_grid: Optional[Grid] = None,
) -> tuple[VectorField, list[MLState]]:
    """Scalar staged solve per component; any failure aborts with its index."""
    outs = []
    states = []
    for i, comp in enumerate(F.components):
        try:
            g, st = global_solve(
                comp, W, exh, geom, fs_family, N, out_grid,
                maps=maps, cfg=cfg, check_grid=check_grid,
            )
        except Exception as e:  # noqa: BLE001 - component index is the contract
            raise ComponentFailure(i, e) from e
        outs.append(g)
        states.append(st)
    return VectorField(components=tuple(outs)), states
