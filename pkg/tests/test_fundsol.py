import math

import numpy as np
import pytest

from dbarkit import (
    FundamentalSolution,
    Grid,
    Rect,
    build_grid,
    check_derivative_bound,
    eval_E,
    geometry_for,
    kernel_moment_bound,
    weak_delta_residual,
    weighted_kernel_bound,
)
from dbarkit.fundsol import default_radii
from dbarkit.testfields import FIELD_SUITE, sample, shifted


class TestKernel:
    def test_values(self, ball_geom, strip_geom):
        fs1 = FundamentalSolution.at_level("one", 1, ball_geom)
        assert eval_E(fs1, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-14)
        assert eval_E(fs1, 1j) == pytest.approx(-1j / math.pi, rel=1e-14)
        fsg = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        assert eval_E(fsg, 1.0) == pytest.approx(math.exp(-1) / math.pi, rel=1e-14)

    def test_damping_is_one_at_origin(self, ball_geom):
        for damping in ("one", "gaussian"):
            fs = FundamentalSolution.at_level(damping, 2, ball_geom)
            assert fs.g(np.asarray([0j]))[0] == 1.0

    def test_singularity_rejected(self, ball_geom):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        with pytest.raises(ZeroDivisionError):
            eval_E(fs, 0.0)

    def test_default_radii(self):
        assert default_radii(2) == (1 / 8, 1 / 12)

    def test_radii_admissibility_enforced(self, halfplane_exh):
        geom = geometry_for(halfplane_exh)
        # level 2 has separation threshold 1/4; stock radii 1/8, 1/12 fit
        FundamentalSolution.at_level("gaussian", 2, geom)
        with pytest.raises(ValueError):
            FundamentalSolution(damping="gaussian", n=2, r=0.2, R=0.13, d_x=geom.d_x(2))
        with pytest.raises(ValueError):
            FundamentalSolution(damping="gaussian", n=2, r=0.05, R=0.12, d_x=geom.d_x(2))


class TestWeakDelta:
    def test_refinement_study(self, ball_geom):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        rect = Rect(complex(-2, -2), complex(2, 2))
        residuals = []
        for h in (0.1, 0.05, 0.025):
            phi = sample(FIELD_SUITE["bump"], Grid(rect, h))
            residuals.append(weak_delta_residual(fs, phi))
        assert residuals[0] > residuals[1] > residuals[2]
        slopes = [math.log2(a / b) for a, b in zip(residuals, residuals[1:])]
        assert all(s >= 0.9 for s in slopes)
        assert residuals[-1] < 5e-2

    def test_support_away_from_origin(self, ball_geom):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        phi = sample(shifted(FIELD_SUITE["bump"], 3.0), Grid(Rect(complex(0.5, -2), complex(5.5, 2)), 0.05))
        assert weak_delta_residual(fs, phi) < 1e-6

    def test_dampings_share_the_limit(self, ball_geom, strip_geom):
        rect = Rect(complex(-2, -2), complex(2, 2))
        phi = sample(FIELD_SUITE["bump"], Grid(rect, 0.05))
        r1 = weak_delta_residual(FundamentalSolution.at_level("one", 1, ball_geom), phi)
        r2 = weak_delta_residual(FundamentalSolution.at_level("gaussian", 1, strip_geom), phi)
        assert r1 < 1e-3 and r2 < 1e-3

    def test_translation_covariance(self, ball_geom):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        phi = sample(FIELD_SUITE["bump"], Grid(Rect(complex(-2, -2), complex(2, 2)), 0.05))
        r0 = weak_delta_residual(fs, phi)
        rc = weak_delta_residual(fs, phi, probe=0.3 + 0.2j)
        assert rc < 50 * max(r0, 1e-8)

    def test_support_touching_edge_rejected(self, ball_geom):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        # shifted so the support sticks out of the right rect edge
        phi = sample(shifted(FIELD_SUITE["bump"], 0.5), Grid(Rect(complex(-1, -1), complex(1, 1)), 0.05))
        with pytest.raises(ValueError):
            weak_delta_residual(fs, phi)

    def test_oracle_required(self, ball_geom):
        from dbarkit import ScalarField

        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        g = Grid(Rect(complex(-2, -2), complex(2, 2)), 0.1)
        raw = ScalarField(g, np.zeros((g.nx, g.ny), complex))
        with pytest.raises(ValueError):
            weak_delta_residual(fs, raw)


class TestDerivativeBound:
    def test_closed_form_value(self, strip_geom):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        # circle-max constant at level 1 for a real offset point: exp((1/4 + 2)^2)
        from dbarkit.fundsol import _closed_form_a2

        assert _closed_form_a2(fs, 5.0 + 0j, 1) == pytest.approx(math.exp(5.0625), rel=1e-12)
        assert _closed_form_a2(fs, 5.0 + 0j, 1) == pytest.approx(158.0, rel=1e-3)

    def test_orders_zero_through_cap(self, strip_geom):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        x, z = 5.0 + 0j, 5.0 + 1.5j
        for alpha, beta in (((0, 0), (0, 0)), ((1, 0), (0, 0)), ((1, 0), (1, 1))):
            rep = check_derivative_bound(fs, x, alpha, beta, z)
            assert rep.passed, (alpha, beta, rep)

    def test_factorial_power_recurrence(self, strip_geom):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        x, z = 5.0 + 0j, 5.0 + 1.5j
        b2 = check_derivative_bound(fs, x, (1, 0), (0, 1), z).analytic
        b3 = check_derivative_bound(fs, x, (1, 0), (1, 1), z).analytic
        assert b3 / b2 == pytest.approx(3.0 / fs.r, rel=1e-12)

    def test_separation_enforced(self, strip_geom):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        with pytest.raises(ValueError):
            check_derivative_bound(fs, 5.0 + 0j, (0, 0), (0, 0), 5.0 + 0.5j)

    def test_order_cap(self, strip_geom):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        with pytest.raises(ValueError):
            check_derivative_bound(fs, 5.0 + 0j, (2, 2), (0, 0), 5.0 + 1.5j)


class TestMomentBounds:
    def test_undamped_closed_form(self, ball_exh, ball_geom, unit_weights):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        grid = build_grid(Rect(complex(-4.2, -4.2), complex(4.2, 4.2)), 0.15)
        K = Rect(complex(-1, -1), complex(1, 1))
        rep = kernel_moment_bound(fs, K, 1, unit_weights, ball_exh, grid)
        assert rep.passed
        assert rep.analytic == pytest.approx(2 * math.pi + 4.0, rel=1e-12)
        assert rep.numeric <= rep.analytic

    def test_gaussian_closed_form(self, strip_exh, strip_geom, exp_weights):
        fs = FundamentalSolution.at_level("gaussian", 1, strip_geom)
        grid = build_grid(Rect(complex(-4.2, -4.2), complex(4.2, 4.2)), 0.15)
        K = Rect(complex(-1, -1), complex(1, 1))
        rep = kernel_moment_bound(fs, K, 1, exp_weights, strip_exh, grid)
        b = math.sqrt(2.0)
        expected = 2 * math.pi * math.e + 2 * math.sqrt(math.pi) * b * math.exp((1 + b) ** 2)
        assert rep.analytic == pytest.approx(expected, rel=1e-12)
        assert rep.passed and rep.numeric <= rep.analytic

    def test_shrinking_K_shrinks_numeric(self, ball_exh, ball_geom, unit_weights):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        grid = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.2)
        vals = []
        for s in (1.0, 0.5):
            K = Rect(complex(-s, -s), complex(s, s))
            vals.append(kernel_moment_bound(fs, K, 1, unit_weights, ball_exh, grid).numeric)
        assert vals[1] < vals[0]


class TestWeightedKernelBound:
    def test_exp_weights_both_pairings(self, strip_exh, strip_geom, exp_weights):
        fam = lambda lvl: FundamentalSolution.at_level("gaussian", lvl, strip_geom)
        grid = build_grid(Rect(complex(-4.2, -4.2), complex(4.2, 4.2)), 0.2)
        for pairing in ("low", "high"):
            rep = weighted_kernel_bound(
                fam, exp_weights, strip_exh, 1, pairing, grid, re_halfwidth=6.0, h_quad=0.1
            )
            assert rep.passed and rep.numeric <= rep.analytic
            assert "spot-check ok" in rep.note

    def test_constant_reduces_to_moment_bound(self, ball_exh, ball_geom, unit_weights):
        fam = lambda lvl: FundamentalSolution.at_level("one", lvl, ball_geom)
        grid = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.2)
        rep = weighted_kernel_bound(fam, unit_weights, ball_exh, 1, "low", grid, h_quad=0.1)
        assert rep.passed
        cover = ball_exh.level_rect(2, pad=0.25)
        assert rep.analytic == pytest.approx(2 * math.pi + cover.area(), rel=1e-12)

    def test_unknown_pairing(self, ball_exh, ball_geom, unit_weights):
        fam = lambda lvl: FundamentalSolution.at_level("one", lvl, ball_geom)
        grid = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.2)
        with pytest.raises(ValueError):
            weighted_kernel_bound(fam, unit_weights, ball_exh, 1, "mid", grid)

    def test_report_serialization(self, ball_exh, ball_geom, unit_weights):
        fs = FundamentalSolution.at_level("one", 1, ball_geom)
        grid = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.2)
        K = Rect(complex(-1, -1), complex(1, 1))
        d = kernel_moment_bound(fs, K, 1, unit_weights, ball_exh, grid).to_json_dict()
        assert set(d) == {"id", "n", "analytic", "numeric", "pass", "slack", "resolution", "note"}
        assert d["id"] == "A3"
