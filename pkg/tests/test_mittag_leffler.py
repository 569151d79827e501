import math

import numpy as np
import pytest

from dbarkit import (
    CorrectionFailure,
    Grid,
    MLConfig,
    Rect,
    ScalarField,
    WeightFamily,
    build_grid,
    dbar,
    global_solve,
    holo_correct,
)
from dbarkit.testfields import FIELD_SUITE, sample


class TestHoloCorrect:
    def test_polynomial_reproduced(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-1.4, -1.4), complex(1.4, 1.4)), 0.05)
        v = lambda zs: 0.3 * np.asarray(zs) ** 3 - 1j * np.asarray(zs) + 0.5
        corr = holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=6, target=1e-9)
        assert corr.achieved < 1e-9

    def test_zero_input(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-1.4, -1.4), complex(1.4, 1.4)), 0.05)
        v = lambda zs: np.zeros(np.asarray(zs).shape, complex)
        corr = holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=4, target=1e-14)
        assert corr.achieved == 0.0
        assert np.abs(corr.poly.coeffs).max() == 0.0

    def test_geometric_decay_against_taylor_tail(self, ball_exh, unit_weights):
        # fitting 1/(z - c) on the unit disk: the gap shrinks geometrically,
        # tracking the truncated-series tail (1/|c|)^(deg+2) / (1 - 1/|c|)
        g = build_grid(Rect(complex(-1.4, -1.4), complex(1.4, 1.4)), 0.05)
        c = 3.0 + 2.0j
        v = lambda zs: 1.0 / (np.asarray(zs, complex) - c)
        achieved = {}
        for cap in (4, 6, 8):
            try:
                corr = holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=cap, target=0.0)
                achieved[cap] = corr.achieved
            except CorrectionFailure as e:
                achieved[cap] = e.achieved
        assert achieved[6] < achieved[4] and achieved[8] < achieved[6]
        for cap in (4, 6, 8):
            tail = (1 / abs(c)) ** (cap + 2) / (1 - 1 / abs(c))
            assert achieved[cap] < 40 * tail

    def test_failure_carries_achieved_gap(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-1.4, -1.4), complex(1.4, 1.4)), 0.05)
        v = lambda zs: 1.0 / (np.asarray(zs, complex) - (1.6 + 0.2j))
        with pytest.raises(CorrectionFailure) as exc:
            holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=2, target=1e-12)
        assert 0 < exc.value.achieved < math.inf
        assert exc.value.degree == 2

    def test_closedness_precheck(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-4.4, -4.4), complex(4.4, 4.4)), 0.1)
        v = lambda zs: np.conj(np.asarray(zs, complex))  # dbar = 1, not closed
        with pytest.raises(ValueError):
            holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=4, target=1e-2,
                         closedness_tol=1e-3)

    def test_disconnected_levels_warn(self, halfplane_exh, unit_weights):
        g = build_grid(Rect(complex(-3, -3), complex(3, 3)), 0.1)
        v = lambda zs: np.zeros(np.asarray(zs).shape, complex)
        with pytest.warns(UserWarning, match="rational"):
            holo_correct(v, 2, unit_weights, halfplane_exh, g, degree_cap=2, target=1.0)

    def test_rational_basis_handles_nearby_pole(self, ball_exh, unit_weights):
        # a pole just outside the far-region threshold defeats low-degree
        # polynomials but is representable once far poles join the basis
        g = build_grid(Rect(complex(-1.4, -1.4), complex(1.4, 1.4)), 0.05)
        from dbarkit.mittag_leffler import _far_poles
        from dbarkit.weights import IndexMaps

        pole = _far_poles(ball_exh, 1, IndexMaps())[0]
        v = lambda zs: 1.0 / (np.asarray(zs, complex) - pole)
        corr = holo_correct(v, 1, unit_weights, ball_exh, g, degree_cap=2, target=1e-10, rational=True)
        assert corr.achieved < 1e-10


class TestGlobalSolve:
    def test_zero_data(self, ball_exh, ball_geom, unit_weights, ball_fs_family):
        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.15)
        zero = ScalarField.from_callable(grid, lambda zs: np.zeros(np.asarray(zs).shape, complex))
        out = Grid(ball_exh.level_rect(2, pad=0.25), 0.15)
        g, st = global_solve(zero, unit_weights, ball_exh, ball_geom, ball_fs_family, 2, out,
                             cfg=MLConfig(levels=2, h_solve=0.2), check_grid=grid)
        assert np.abs(g.values).max() == 0.0
        assert all(v == 0.0 for v in st.gap_history.values())

    def test_ball_preset_constant_rhs(self, ball_exh, ball_geom, unit_weights, ball_fs_family):
        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.1)
        f = sample(FIELD_SUITE["one"], grid)
        out = Grid(ball_exh.level_rect(3, pad=0.25), 0.1)
        g, st = global_solve(f, unit_weights, ball_exh, ball_geom, ball_fs_family, 3, out,
                             cfg=MLConfig(levels=3, h_solve=0.1), check_grid=grid)
        assert st.schedule_ok() and st.telescope_ok()
        assert st.final_residual < 5e-2
        # g - conj(z) stays in the kernel of dbar on the final level
        diff = ScalarField(g.grid, g.values - np.conj(g.grid.nodes()))
        mask = ball_exh.mask(3, g.grid.nodes()) & g.grid.interior_mask(1)
        assert np.abs(dbar(diff).values[mask]).max() < 5e-2

    def test_strip_preset_exp_weights(self, strip_exh, strip_geom, exp_weights, strip_fs_family):
        grid = build_grid(Rect(complex(-6, -6), complex(6, 6)), 0.12)
        f = sample(FIELD_SUITE["osc_gauss"], grid)
        out = Grid(strip_exh.level_rect(2, pad=0.25, re_halfwidth=6.0), 0.12)
        g, st = global_solve(f, exp_weights, strip_exh, strip_geom, strip_fs_family, 2, out,
                             cfg=MLConfig(levels=2, h_solve=0.12, re_halfwidth=6.0), check_grid=grid)
        assert st.schedule_ok() and st.telescope_ok()
        assert st.final_residual < 5e-2
        assert st.solver_kind == "minimal-norm"

    def test_schedule_and_history_shape(self, ball_exh, ball_geom, unit_weights, ball_fs_family):
        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.15)
        f = sample(FIELD_SUITE["one"], grid)
        out = Grid(ball_exh.level_rect(3, pad=0.25), 0.15)
        g, st = global_solve(f, unit_weights, ball_exh, ball_geom, ball_fs_family, 3, out,
                             cfg=MLConfig(levels=3, h_solve=0.2), check_grid=grid)
        assert set(st.gap_history) == {2, 3}
        for j, gap in st.gap_history.items():
            assert gap <= 2.0 ** -j
            assert st.gap_targets[j] == 2.0 ** -j
        assert set(st.residual_history) == {1, 2, 3}
        rows = st.telescope_rows
        assert rows and all(r["pass"] for r in rows)
        assert {(r["p"], r["k"]) for r in rows} == {(2, 1), (3, 1), (3, 2)}

    def test_subharmonicity_failure_aborts(self, ball_exh, ball_geom, ball_fs_family):
        bad = WeightFamily(kind="custom", evaluator=lambda n, zs: np.exp(np.abs(zs) ** 2) * n)
        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.15)
        f = sample(FIELD_SUITE["one"], grid)
        out = Grid(ball_exh.level_rect(2, pad=0.25), 0.15)
        with pytest.raises(ValueError, match="subharmonic"):
            global_solve(f, bad, ball_exh, ball_geom, ball_fs_family, 2, out,
                         cfg=MLConfig(levels=2, h_solve=0.2), check_grid=grid)

    def test_analytic_data_required(self, ball_exh, ball_geom, unit_weights, ball_fs_family):
        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.15)
        raw = ScalarField(grid, np.ones((grid.nx, grid.ny), complex))
        out = Grid(ball_exh.level_rect(2, pad=0.25), 0.15)
        with pytest.raises(ValueError, match="analytic"):
            global_solve(raw, unit_weights, ball_exh, ball_geom, ball_fs_family, 2, out,
                         cfg=MLConfig(levels=2, h_solve=0.2), check_grid=grid)

    def test_determinism_of_state(self, ball_exh, ball_geom, unit_weights, ball_fs_family):
        import json

        grid = build_grid(Rect(complex(-3.5, -3.5), complex(3.5, 3.5)), 0.15)
        f = sample(FIELD_SUITE["one"], grid)
        out = Grid(ball_exh.level_rect(2, pad=0.25), 0.15)
        cfg = MLConfig(levels=2, h_solve=0.2)
        runs = []
        for _ in range(2):
            g, st = global_solve(f, unit_weights, ball_exh, ball_geom, ball_fs_family, 2, out,
                                 cfg=cfg, check_grid=grid)
            runs.append((json.dumps(st.to_json_dict(), sort_keys=True), g.values.tobytes()))
        assert runs[0][0] == runs[1][0]
        assert runs[0][1] == runs[1][1]
