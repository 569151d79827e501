"""Run configuration: JSON schema, validation, presets, canonical hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .domain import DomainGeometry, Exhaustion, Grid, Rect, geometry_for
from .fundsol import FundamentalSolution
from .mittag_leffler import MLConfig
from .testfields import FIELD_SUITE, AnalyticField
from .weights import IndexMaps, WeightFamily, neg_reciprocal

__all__ = ["ConfigError", "RunConfig", "PRESETS", "load_config", "preset_config", "config_hash"]

TASKS = ("check-weights", "delta-test", "convergence", "solve", "ml-solve", "vec-solve")

# Built-in run presets: a strip exhaustion of the plane with decaying
# exponential weights and gaussian kernel damping, and a ball exhaustion of
# the plane with unit weights and the undamped kernel.
PRESETS: dict = {
    "ex48a": {
        "exhaustion": {"kind": "strip", "omega": {"type": "plane"}},
        "weights": {"kind": "exp_power", "a": "neg_reciprocal", "gamma": 1.0, "q": 2},
        "index_maps": {"default_doubling": True},
        "grid": {"rect": [[-6.0, -6.0], [6.0, 6.0]], "h": 0.1,
                 "refinements": [0.2, 0.1, 0.05, 0.025]},
        # The solver convolves with the undamped kernel: the data decays and is
        # rectangle-truncated, so integrability needs no damping, whereas the
        # gaussian-damped kernel grows like exp(Im(w)^2) transversally and its
        # particular solutions overflow on tall evaluation regions.  Bound
        # checkers still use the gaussian kernel canonical for these weights.
        "solver": {
            "damping": "one", "degree_cap": 12, "levels": 3, "rhs": "osc_gauss",
            "h_solve": 0.1, "re_halfwidth": 6.0,
            "tolerances": {"weighted_residual": 5e-2, "slope_window": [0.8, 1.2],
                           "hormander_slack": 0.1},
        },
    },
    "ex48b": {
        "exhaustion": {"kind": "compact_balls", "omega": {"type": "plane"}},
        "weights": {"kind": "constant_one", "q": 2},
        "index_maps": {"default_doubling": True},
        "grid": {"rect": [[-3.5, -3.5], [3.5, 3.5]], "h": 0.1,
                 "refinements": [0.2, 0.1, 0.05, 0.025]},
        "solver": {
            "damping": "one", "degree_cap": 12, "levels": 3, "rhs": "one",
            "h_solve": 0.1, "re_halfwidth": 6.0,
            "tolerances": {"weighted_residual": 5e-2, "slope_window": [0.8, 1.2],
                           "hormander_slack": 0.1},
        },
    },
}


class ConfigError(ValueError):
    """Carries the list of precise per-field problems."""

    def __init__(self, errors: list):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description."""

    raw: dict
    exhaustion: Exhaustion
    weights: WeightFamily
    maps: IndexMaps
    grid: Grid
    refinements: tuple
    damping: str
    degree_cap: int
    levels: int
    rhs_name: str
    rhs_scale: float
    h_solve: float
    re_halfwidth: float
    tolerances: dict
    rhs_vector: tuple = ()

    def geometry(self) -> DomainGeometry:
        return geometry_for(self.exhaustion)

    def fs_family(self, damping: Optional[str] = None):
        geom = self.geometry()
        damping = self.damping if damping is None else damping

        def fam(level: int) -> FundamentalSolution:
            return FundamentalSolution.at_level(damping, level, geom)

        return fam

    def canonical_damping(self) -> str:
        """The damping paired with the weight family in the bound checkers:
        gaussian for the decaying exponential weights, undamped otherwise."""
        return "gaussian" if self.weights.kind == "exp_power" else "one"

    def rhs_field(self) -> AnalyticField:
        return FIELD_SUITE[self.rhs_name]

    def ml_config(self) -> MLConfig:
        return MLConfig(
            levels=self.levels,
            degree_cap=self.degree_cap,
            h_solve=self.h_solve,
            re_halfwidth=self.re_halfwidth,
            per_level_residual_tol=self.tolerances["weighted_residual"],
            closedness_tol=self.tolerances["weighted_residual"],
        )


def _table_map(table: dict, default):
    tbl = {int(k): int(v) for k, v in table.items()}
    return lambda n: tbl.get(n, default(n))


def load_config(data: dict) -> RunConfig:
    """Validate a raw config dict; raises :class:`ConfigError` listing every problem."""
    errors: list = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be a JSON object"])

    exh = None
    e = data.get("exhaustion")
    if not isinstance(e, dict):
        errors.append("exhaustion: missing or not an object")
    else:
        kind = e.get("kind")
        if kind not in ("strip", "whole_plane", "compact_balls", "custom"):
            errors.append(f"exhaustion.kind: {kind!r} is not one of strip|whole_plane|compact_balls|custom")
        elif kind == "custom":
            errors.append("exhaustion.kind: custom exhaustions are library-only, not configurable from JSON")
        else:
            om = e.get("omega", {"type": "plane"})
            ot = om.get("type") if isinstance(om, dict) else None
            if ot not in ("plane", "half_planes", "disk"):
                errors.append(f"exhaustion.omega.type: {ot!r} is not one of plane|half_planes|disk")
            else:
                omega = ot if ot != "disk" else ("disk", float(om.get("radius", 1.0)))
                try:
                    exh = Exhaustion(kind=kind, omega=omega, n0=e.get("n0"))
                except (ValueError, TypeError) as err:
                    errors.append(f"exhaustion: {err}")

    W = None
    w = data.get("weights")
    if not isinstance(w, dict):
        errors.append("weights: missing or not an object")
    else:
        kind = w.get("kind")
        q = w.get("q", 2)
        if not isinstance(q, int) or q < 1:
            errors.append(f"weights.q: need a positive integer, got {q!r}")
            q = 2
        if kind == "constant_one":
            W = WeightFamily(kind="constant_one", q=q)
        elif kind == "exp_power":
            a = w.get("a", "neg_reciprocal")
            gamma = w.get("gamma", 1.0)
            if a == "neg_reciprocal":
                a_fn = neg_reciprocal
            elif isinstance(a, list) and all(isinstance(x, (int, float)) for x in a):
                seq = [float(x) for x in a]
                a_fn = lambda n, _s=tuple(seq): _s[min(n, len(_s)) - 1]
            else:
                errors.append(f"weights.a: expected 'neg_reciprocal' or a number list, got {a!r}")
                a_fn = None
            if a_fn is not None:
                try:
                    W = WeightFamily(kind="exp_power", a=a_fn, gamma=float(gamma), q=q)
                except (ValueError, TypeError) as err:
                    errors.append(f"weights: {err}")
        else:
            errors.append(f"weights.kind: {kind!r} is not one of exp_power|constant_one")

    maps = IndexMaps()
    im = data.get("index_maps", {"default_doubling": True})
    if isinstance(im, dict) and not im.get("default_doubling", False):
        tables = im.get("tables")
        if not isinstance(tables, dict):
            errors.append("index_maps: need default_doubling=true or explicit tables")
        else:
            try:
                dbl = lambda n: 2 * n
                maps = IndexMaps(
                    j1=_table_map(tables.get("j1", {}), dbl),
                    j2=_table_map(tables.get("j2", {}), dbl),
                    i1=_table_map(tables.get("i1", {}), dbl),
                    i2=_table_map(tables.get("i2", {}), dbl),
                    i4=_table_map(tables.get("i4", {}), dbl),
                )
            except (ValueError, TypeError) as err:
                errors.append(f"index_maps: {err}")

    grid = None
    refinements: tuple = ()
    g = data.get("grid")
    if not isinstance(g, dict):
        errors.append("grid: missing or not an object")
    else:
        try:
            (xlo, ylo), (xhi, yhi) = g["rect"]
            rect = Rect(complex(float(xlo), float(ylo)), complex(float(xhi), float(yhi)))
            grid = Grid(rect, float(g["h"]))
        except (KeyError, TypeError, ValueError) as err:
            errors.append(f"grid: {err!r}")
        refs = g.get("refinements", [])
        if not (isinstance(refs, list) and all(isinstance(x, (int, float)) and x > 0 for x in refs)):
            errors.append("grid.refinements: must be a list of positive spacings")
        else:
            refinements = tuple(float(x) for x in refs)

    s = data.get("solver", {})
    damping = s.get("damping", "one")
    if damping not in ("gaussian", "one"):
        errors.append(f"solver.damping: {damping!r} is not one of gaussian|one")
    degree_cap = s.get("degree_cap", 12)
    if not isinstance(degree_cap, int) or degree_cap < 0:
        errors.append(f"solver.degree_cap: need a nonnegative integer, got {degree_cap!r}")
    levels = s.get("levels", 3)
    if not isinstance(levels, int) or levels < 1:
        errors.append(f"solver.levels: need a positive integer, got {levels!r}")
    rhs = s.get("rhs", "one")
    rhs_scale = 1.0
    if isinstance(rhs, list) and len(rhs) == 2:
        rhs, rhs_scale = rhs[0], float(rhs[1])
    if rhs not in FIELD_SUITE:
        errors.append(f"solver.rhs: {rhs!r} not in the field suite {sorted(FIELD_SUITE)}")
    rhs_vec: list = []
    for idx, entry in enumerate(s.get("rhs_vector", [])):
        name, scale = (entry, 1.0) if isinstance(entry, str) else (entry[0], float(entry[1]))
        if name not in FIELD_SUITE:
            errors.append(f"solver.rhs_vector[{idx}]: {name!r} not in the field suite")
        else:
            rhs_vec.append((name, scale))
    h_solve = float(s.get("h_solve", 0.1))
    if not (h_solve > 0):
        errors.append(f"solver.h_solve: must be positive, got {h_solve}")
    re_halfwidth = float(s.get("re_halfwidth", 6.0))
    tol_in = s.get("tolerances", {})
    tolerances = {
        "weighted_residual": float(tol_in.get("weighted_residual", 5e-2)),
        "slope_window": [float(x) for x in tol_in.get("slope_window", [0.8, 1.2])],
        "hormander_slack": float(tol_in.get("hormander_slack", 0.1)),
        "delta_slope_min": float(tol_in.get("delta_slope_min", 0.9)),
    }

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        raw=data,
        exhaustion=exh,
        weights=W,
        maps=maps,
        grid=grid,
        refinements=refinements,
        damping=damping,
        degree_cap=degree_cap,
        levels=levels,
        rhs_name=rhs,
        rhs_scale=rhs_scale,
        h_solve=h_solve,
        re_halfwidth=re_halfwidth,
        tolerances=tolerances,
        rhs_vector=tuple(rhs_vec),
    )


def preset_config(name: str, overrides: Optional[dict] = None) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; available: {sorted(PRESETS)}"])
    data = json.loads(json.dumps(PRESETS[name]))
    for path, val in (overrides or {}).items():
        node = data
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = val
    return load_config(data)


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]
