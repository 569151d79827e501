"""The fixed suite of analytic test fields used by probes and oracles.

Each fixture carries exact partial derivatives of any order, generated
symbolically once per multi-index and cached.  Compactly supported fixtures
evaluate their expression only strictly inside the support and return zero
elsewhere, so lambdified branches never see the singular boundary.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import sympy as sp

from .calculus import ScalarField
from .domain import Grid

__all__ = ["AnalyticField", "FIELD_SUITE", "make_field", "sample", "shifted", "scaled", "bump", "osc_gauss"]

_x, _y = sp.symbols("x y", real=True)
_z = _x + sp.I * _y


@dataclass(frozen=True)
class AnalyticField:
    """A named closed-form field with exact partials.

    ``support_r2_expr`` (optional) is a sympy expression that must stay
    positive strictly inside the support; outside, the field and all its
    derivatives vanish identically.
    """

    name: str
    expr: sp.Expr
    support_r2_expr: Optional[sp.Expr] = None

    @functools.lru_cache(maxsize=256)
    def _lambdified(self, b1: int, b2: int):
        d = sp.diff(self.expr, _x, b1, _y, b2)
        return sp.lambdify((_x, _y), d, modules="numpy")

    def _masked_eval(self, fn, zs: np.ndarray) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex)
        xr, yi = zs.real, zs.imag
        if self.support_r2_expr is None:
            out = fn(xr, yi)
            return np.broadcast_to(np.asarray(out, dtype=complex), zs.shape).copy()
        s = sp.lambdify((_x, _y), self.support_r2_expr, modules="numpy")(xr, yi)
        inside = np.asarray(s) > 1e-12
        out = np.zeros(zs.shape, dtype=complex)
        if inside.any():
            with np.errstate(all="ignore"):
                vals = fn(xr[inside], yi[inside])
            out[inside] = np.asarray(vals, dtype=complex)
        return out

    def __call__(self, zs: np.ndarray) -> np.ndarray:
        return self._masked_eval(self._lambdified(0, 0), zs)

    def partial(self, beta: tuple, zs: np.ndarray) -> np.ndarray:
        b1, b2 = int(beta[0]), int(beta[1])
        return self._masked_eval(self._lambdified(b1, b2), zs)


_r2 = _x**2 + _y**2

bump = AnalyticField("bump", sp.exp(-1 / (1 - _r2)), support_r2_expr=1 - _r2)
osc_gauss = AnalyticField("osc_gauss", sp.exp(sp.I * _x) * sp.exp(-_r2))

FIELD_SUITE = {
    f.name: f
    for f in (
        AnalyticField("one", sp.Integer(1) + 0 * _x),
        AnalyticField("z", _z),
        AnalyticField("z_sq", _z**2),
        AnalyticField("conj_z", _x - sp.I * _y),
        AnalyticField("z_conj_z", _r2),
        AnalyticField("re_z_sq", _x**2 - _y**2),
        AnalyticField("exp_z", sp.exp(_z)),
        AnalyticField("gauss", sp.exp(-_r2)),
        osc_gauss,
        bump,
    )
}


def make_field(name: str) -> AnalyticField:
    try:
        return FIELD_SUITE[name]
    except KeyError:
        raise KeyError(f"unknown test field {name!r}; known: {sorted(FIELD_SUITE)}") from None


def sample(field: AnalyticField, grid: Grid) -> ScalarField:
    """Materialize a fixture on a grid, keeping its analytic evaluators."""
    return ScalarField.from_callable(grid, field, partial=field.partial)


def shifted(field: AnalyticField, c: complex) -> AnalyticField:
    """The translate z -> field(z - c), as a new fixture."""
    cx, cy = complex(c).real, complex(c).imag
    expr = field.expr.subs({_x: _x - cx, _y: _y - cy}, simultaneous=True)
    supp = None
    if field.support_r2_expr is not None:
        supp = field.support_r2_expr.subs({_x: _x - cx, _y: _y - cy}, simultaneous=True)
    return AnalyticField(f"{field.name}@{c}", expr, support_r2_expr=supp)


def scaled(field: AnalyticField, c: complex) -> AnalyticField:
    """The multiple c * field, as a new fixture."""
    if c == 1.0:
        return field
    return AnalyticField(f"{c}*{field.name}", sp.nsimplify(c) * field.expr,
                         support_r2_expr=field.support_r2_expr)
