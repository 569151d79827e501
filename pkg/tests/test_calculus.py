import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarkit import (
    Rect,
    ScalarField,
    build_grid,
    dbar,
    dbar_noise_floor,
    equivalence_probe,
    fd_partial,
    hypoelliptic_probe,
    laplacian,
    lq_seminorm,
    sup_seminorm,
)
from dbarkit.calculus import stencil_dbar
from dbarkit.testfields import FIELD_SUITE, make_field, sample


def _sampled(grid, fn):
    """Field with samples only (forces the finite-difference path)."""
    return ScalarField(grid, np.asarray(fn(grid.nodes()), dtype=complex))


class TestFiniteDifferences:
    def test_linear_exactness(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.25)
        f = _sampled(g, lambda z: z)
        assert np.allclose(fd_partial(f, (1, 0)).values, 1.0, atol=1e-13)
        assert np.allclose(fd_partial(f, (0, 1)).values, 1j, atol=1e-13)

    def test_quadratic_exactness(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.25)
        f = _sampled(g, lambda z: z.real**2 + 0j)
        assert np.allclose(fd_partial(f, (2, 0)).values, 2.0, atol=1e-12)

    def test_analytic_path_taken_when_available(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.25)
        f = sample(make_field("exp_z"), g)
        d = fd_partial(f, (1, 0))
        assert d.provenance == "analytic-partial"
        assert np.allclose(d.values, np.exp(g.nodes()), atol=1e-12)

    def test_grid_too_small(self):
        g = build_grid(Rect(complex(0, 0), complex(1, 1)), 0.5)
        f = _sampled(g, lambda z: z)
        with pytest.raises(ValueError):
            fd_partial(f, (2, 0))

    def test_fd_consistency_order_two(self):
        # against the exact oracle, halving h shrinks the error at slope >= 1.8
        errs = []
        hs = [0.1, 0.05, 0.025]
        for h in hs:
            g = build_grid(Rect(complex(-1, -1), complex(1, 1)), h)
            f = _sampled(g, lambda z: np.exp(z))
            exact = make_field("exp_z").partial((1, 1), g.nodes())
            errs.append(np.abs(fd_partial(f, (1, 1)).values - exact).max())
        slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert all(s >= 1.8 for s in slopes)


class TestOperators:
    def test_dbar_oracles(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.1)
        assert np.allclose(dbar(_sampled(g, np.conj)).values, 1.0, atol=1e-12)
        assert np.abs(dbar(_sampled(g, lambda z: z * z)).values).max() < 1e-12
        zz = dbar(_sampled(g, lambda z: (z * np.conj(z))))
        assert np.abs(zz.values - g.nodes()).max() < 1e-12

    def test_dbar_annihilates_holomorphic_at_order_two(self):
        errs = []
        hs = [0.1, 0.05, 0.025]
        for h in hs:
            g = build_grid(Rect(complex(-1, -1), complex(1, 1)), h)
            worst = 0.0
            for name in ("one", "z", "z_sq", "exp_z"):
                f = _sampled(g, FIELD_SUITE[name])
                worst = max(worst, np.abs(dbar(f).values).max())
            errs.append(worst)
        slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert all(s >= 1.8 for s in slopes)

    def test_laplacian_oracles(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.1)
        assert np.allclose(laplacian(_sampled(g, lambda z: np.abs(z) ** 2)).values, 4.0, atol=1e-10)
        assert np.abs(laplacian(_sampled(g, lambda z: z.real + 0j)).values).max() < 1e-10
        assert np.abs(laplacian(_sampled(g, lambda z: z.real**2 - z.imag**2 + 0j)).values).max() < 1e-9


class TestSeminorms:
    def test_constant_field(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-3.2, -3.2), complex(3.2, 3.2)), 0.1)
        f = _sampled(g, lambda z: np.ones_like(z))
        for n, m in ((1, 0), (2, 1), (3, 2)):
            assert sup_seminorm(f, unit_weights, ball_exh, n, m).value == pytest.approx(1.0, abs=1e-10)

    def test_identity_field_sup(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-3.2, -3.2), complex(3.2, 3.2)), 0.05)
        f = _sampled(g, lambda z: z)
        v0 = sup_seminorm(f, unit_weights, ball_exh, 2, 0)
        assert v0.value == pytest.approx(2.0, abs=0.1)
        v1 = sup_seminorm(f, unit_weights, ball_exh, 2, 1)
        assert v1.value == pytest.approx(max(v0.value, 1.0), abs=1e-9)
        assert abs(v0.witness) == pytest.approx(v0.value, abs=1e-12)

    def test_lq_area_oracles(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-1.6, -1.6), complex(1.6, 1.6)), 0.02)
        f = _sampled(g, lambda z: np.ones_like(z))
        # unit-disk area pi, so the 2-norm is sqrt(pi)
        assert lq_seminorm(f, unit_weights, ball_exh, 1, 0, 2).value == pytest.approx(
            math.sqrt(math.pi), rel=5e-3
        )
        assert lq_seminorm(f, unit_weights, ball_exh, 1, 0, 1).value == pytest.approx(
            math.pi, rel=5e-3
        )

    @settings(max_examples=20, deadline=None)
    @given(c=st.complex_numbers(min_magnitude=1e-6, max_magnitude=10.0, allow_nan=False, allow_infinity=False))
    def test_homogeneity(self, c, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-2.2, -2.2), complex(2.2, 2.2)), 0.2)
        f = _sampled(g, lambda z: np.exp(1j * z.real) * np.exp(-np.abs(z) ** 2))
        cf = ScalarField(g, c * f.values)
        for m in (0, 1):
            a = sup_seminorm(f, unit_weights, ball_exh, 1, m).value
            b = sup_seminorm(cf, unit_weights, ball_exh, 1, m).value
            assert b == pytest.approx(abs(c) * a, rel=1e-9)
            aq = lq_seminorm(f, unit_weights, ball_exh, 1, m, 2).value
            bq = lq_seminorm(cf, unit_weights, ball_exh, 1, m, 2).value
            assert bq == pytest.approx(abs(c) * aq, rel=1e-9)

    def test_monotone_in_order_and_level(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-3.2, -3.2), complex(3.2, 3.2)), 0.1)
        f = _sampled(g, lambda z: np.exp(1j * z.real) * np.exp(-np.abs(z) ** 2))
        vals_m = [sup_seminorm(f, unit_weights, ball_exh, 2, m).value for m in (0, 1, 2)]
        assert vals_m[0] <= vals_m[1] <= vals_m[2]
        vals_n = [sup_seminorm(f, unit_weights, ball_exh, n, 1).value for n in (1, 2, 3)]
        assert vals_n[0] <= vals_n[1] + 1e-15 and vals_n[1] <= vals_n[2] + 1e-15

    def test_empty_level_raises(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(5, 5), complex(7, 7)), 0.2)
        f = _sampled(g, lambda z: z)
        with pytest.raises(ValueError):
            sup_seminorm(f, unit_weights, ball_exh, 1, 0)


class TestEquivalenceProbe:
    def test_forward_inequality_suite(self, ball_exh, unit_weights, exp_weights, strip_exh):
        g = build_grid(Rect(complex(-6.2, -6.2), complex(6.2, 6.2)), 0.12)
        for name in ("one", "gauss", "osc_gauss"):
            f = sample(make_field(name), g)
            for q in (1, 2):
                rep = equivalence_probe(f, unit_weights, ball_exh, q)
                assert rep["pass"], rep
        f = sample(make_field("osc_gauss"), g)
        rep = equivalence_probe(f, exp_weights, strip_exh, 2)
        assert rep["pass"]

    def test_zero_field(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-3.2, -3.2), complex(3.2, 3.2)), 0.2)
        f = _sampled(g, lambda z: np.zeros_like(z))
        rep = equivalence_probe(f, unit_weights, ball_exh, 2, ns=(1,), ms=(0,))
        assert rep["pass"]
        assert rep["rows"][0]["lhs"] == 0.0

    def test_scaling_invariance_of_gap(self, ball_exh, unit_weights):
        g = build_grid(Rect(complex(-3.2, -3.2), complex(3.2, 3.2)), 0.2)
        f = _sampled(g, lambda z: np.exp(-np.abs(z) ** 2))
        f2 = ScalarField(g, 2.0 * f.values)
        r1 = equivalence_probe(f, unit_weights, ball_exh, 2, ns=(1,), ms=(0,))["rows"][0]
        r2 = equivalence_probe(f2, unit_weights, ball_exh, 2, ns=(1,), ms=(0,))["rows"][0]
        assert r2["lhs"] == pytest.approx(2 * r1["lhs"], rel=1e-12)
        assert r2["rhs"] == pytest.approx(2 * r1["rhs"], rel=1e-12)


class TestHypoellipticProbe:
    def test_harmonic_and_holomorphic(self):
        g = build_grid(Rect(complex(-1.6, -1.6), complex(1.6, 1.6)), 0.05)
        fields = [sample(make_field(n), g) for n in ("re_z_sq", "z_sq", "exp_z", "gauss")]
        for P in ("laplacian", "dbar"):
            rep = hypoelliptic_probe(fields, P, 0.5, 1.0, 1.5, q=2, m=1)
            assert 0 < rep["estimate"] < math.inf
            # rhs grows with l, so the per-l estimates cannot increase
            ests = [rep["estimates_by_l"][l] for l in sorted(rep["estimates_by_l"])]
            assert all(a >= b - 1e-12 for a, b in zip(ests, ests[1:]))

    def test_zero_field_excluded(self):
        g = build_grid(Rect(complex(-1.6, -1.6), complex(1.6, 1.6)), 0.1)
        z = ScalarField(g, np.zeros((g.nx, g.ny), dtype=complex))
        rep = hypoelliptic_probe([z], "dbar", 0.5, 1.0, 1.5, q=2, m=0)
        assert rep["excluded_zero_fields"] == 1 and rep["estimate"] == 0.0

    def test_radius_ordering_enforced(self):
        g = build_grid(Rect(complex(-1.6, -1.6), complex(1.6, 1.6)), 0.1)
        f = sample(make_field("gauss"), g)
        with pytest.raises(ValueError):
            hypoelliptic_probe([f], "dbar", 1.0, 0.5, 1.5, q=2, m=0)


class TestStencils:
    def test_stencil_matches_grid_fd(self):
        g = build_grid(Rect(complex(-1, -1), complex(1, 1)), 0.05)
        fn = lambda z: np.exp(1j * z.real) * np.exp(-np.abs(z) ** 2)
        pts = np.asarray([0.1 + 0.2j, -0.3 + 0.05j])
        v = stencil_dbar(fn, pts, 0.05)
        f = _sampled(g, fn)
        d = dbar(f)
        # same points exist on the grid: (0.1,0.2) = lo + (22, 24)*h
        i, j = 22, 24
        assert abs(d.values[i, j] - v[0]) < 1e-12

    def test_noise_floor_dominated_by_exp(self, unit_weights):
        pts = np.linspace(-1, 1, 9) + 0.3j
        floor = dbar_noise_floor(pts, 0.05, unit_weights, 1)
        # pure finite-difference error scale of exp on this region
        assert 1e-5 < floor < 1e-2
