"""Error and edge paths not exercised by the main module tests."""

import numpy as np
import pytest

from dbarkit import (
    Exhaustion,
    IndexMaps,
    MLConfig,
    Rect,
    WeightFamily,
    build_grid,
    check_subharmonic,
    distance_table,
    eval_weight,
    global_solve,
    lattice_riemann_sum,
    sup_seminorm,
)
from dbarkit.domain import Grid
from dbarkit.testfields import FIELD_SUITE, sample


def test_unknown_exhaustion_kind():
    with pytest.raises(ValueError, match="kind"):
        Exhaustion(kind="spiral")


def test_custom_exhaustion_needs_predicate():
    with pytest.raises(ValueError, match="predicate"):
        Exhaustion(kind="custom")


def test_unknown_omega_type():
    with pytest.raises(ValueError, match="omega"):
        Exhaustion(kind="strip", omega="torus")


def test_whole_plane_alias_matches_strip_on_plane():
    a = Exhaustion(kind="whole_plane")
    b = Exhaustion(kind="strip", omega="plane")
    zs = np.asarray([0.3 + 0.7j, 5 - 2.1j, -1 + 3.2j])
    for n in (1, 2, 4):
        assert (a.mask(n, zs) == b.mask(n, zs)).all()
    assert distance_table(a, 2, 5) == 3.0


def test_weight_level_must_be_positive(unit_weights):
    with pytest.raises(IndexError):
        eval_weight(unit_weights, 0, 1.0)


def test_custom_weight_evaluator_roundtrip():
    W = WeightFamily(kind="custom", evaluator=lambda n, zs: np.full(zs.shape, float(n)))
    assert eval_weight(W, 3, 1 + 2j) == 3.0


def test_subharmonic_grid_too_small(unit_weights):
    g = build_grid(Rect(complex(0, 0), complex(1, 1)), 1.0)  # 2x2 nodes, no interior
    with pytest.raises(ValueError, match="stencil"):
        check_subharmonic(unit_weights, 1, g)


def test_seminorm_order_above_fd_cap(ball_exh, unit_weights):
    from dbarkit import ScalarField

    g = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.1)
    raw = ScalarField(g, np.ones((g.nx, g.ny), complex))
    with pytest.raises(ValueError, match="cap"):
        sup_seminorm(raw, unit_weights, ball_exh, 1, 5)
    # analytic fields are exempt
    f = sample(FIELD_SUITE["gauss"], g)
    assert sup_seminorm(f, unit_weights, ball_exh, 1, 5).value > 0


def test_lattice_sum_rejects_mismatched_h(ball_exh, ball_fs_family):
    g = build_grid(Rect(complex(-1.5, -1.5), complex(1.5, 1.5)), 0.1)
    p = sample(FIELD_SUITE["bump"], g)
    with pytest.raises(ValueError, match="spacing"):
        lattice_riemann_sum(ball_fs_family(1), p, h=0.2)


def test_global_solve_rejects_bad_index_maps(ball_exh, ball_geom, unit_weights, ball_fs_family):
    # i214(n) = 4n + 1 < 4n + 4 = i14(n + 1): stages cannot chain
    maps = IndexMaps(i2=lambda n: n + 1)
    grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.2)
    f = sample(FIELD_SUITE["one"], grid)
    out = Grid(ball_exh.level_rect(2, pad=0.25), 0.2)
    with pytest.raises(ValueError, match="chain"):
        global_solve(f, unit_weights, ball_exh, ball_geom, ball_fs_family, 2, out,
                     maps=maps, cfg=MLConfig(levels=2, h_solve=0.25), check_grid=grid)


def test_global_solve_needs_a_stage(ball_exh, ball_geom, unit_weights, ball_fs_family):
    grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.2)
    f = sample(FIELD_SUITE["one"], grid)
    out = Grid(ball_exh.level_rect(2, pad=0.25), 0.2)
    with pytest.raises(ValueError, match="stage"):
        global_solve(f, unit_weights, ball_exh, ball_geom, ball_fs_family, 0, out,
                     check_grid=grid)
