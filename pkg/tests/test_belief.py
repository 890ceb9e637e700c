import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from epiwrap.belief import (
    bel_matrix,
    belief,
    build_lattice,
    contour,
    dump_lattice_csv,
    interval_to_simplex,
    lattice_to_cloud,
    moebius_masses,
    plausibility,
    simplex_to_interval,
    truncate,
    truncated_density,
)
from epiwrap.errors import ConsonanceError
from epiwrap.numcore import RngStream


class TestTruncate:
    def test_moderate_sigma(self):
        d = truncate(0.0, 0.5)
        assert d.multiplier == pytest.approx(2.0)
        assert (d.lower, d.upper) == (pytest.approx(-1.0), pytest.approx(1.0))

    def test_small_sigma_hits_cap_rule(self):
        d = truncate(0.01, 0.23)
        assert d.multiplier == pytest.approx(min(5.0, 1.0 / 0.23))
        assert d.lower == pytest.approx(0.01 - 1.0)
        assert d.upper == pytest.approx(0.01 + 1.0)

    def test_unit_sigma(self):
        d = truncate(1.0, 1.0)
        assert d.multiplier == pytest.approx(1.0)
        assert (d.lower, d.upper) == (pytest.approx(0.0), pytest.approx(2.0))

    def test_very_small_sigma_capped_at_five(self):
        d = truncate(0.0, 0.01)
        assert d.multiplier == pytest.approx(5.0)
        assert d.upper == pytest.approx(0.05)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            truncate(0.0, 0.0)


class TestContour:
    def test_peak_value_one(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert grid.values[4] == 1.0  # 0 lies on the 9-point grid over [-1, 1]
        assert grid.points[4] == pytest.approx(0.0)

    def test_closed_form_value(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert grid.values[6] == pytest.approx(math.exp(-0.125))  # g = 0.5

    def test_boundary_symmetry(self):
        grid = contour(truncate(0.3, 0.7), n_points=30)
        assert grid.values[0] == pytest.approx(grid.values[-1])

    def test_unimodal_and_grid_max_one(self):
        for n in (29, 30):
            grid = contour(truncate(0.1, 0.4), n_points=n)
            k = grid.peak_index
            assert grid.values.max() == 1.0
            assert np.all(np.diff(grid.values[:k + 1]) >= 0)
            assert np.all(np.diff(grid.values[k:]) <= 0)
            assert np.all(grid.values > 0)

    def test_empirical_mode_close_to_analytic(self):
        d = truncate(0.2, 0.5)
        analytic = contour(d, n_points=30)
        empirical = contour(d, n_points=30, mode="empirical",
                            n_samples=5000, rng=RngStream(7))
        np.testing.assert_allclose(empirical.values, analytic.values, atol=0.05)

    def test_empirical_requires_rng(self):
        with pytest.raises(ValueError):
            contour(truncate(0.0, 1.0), mode="empirical")

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            contour(truncate(0.0, 1.0), n_points=2)


class TestPlausibility:
    def test_interval_containing_peak(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert plausibility(grid, 2, 6) == 1.0

    def test_singleton(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        for i in range(grid.n):
            assert plausibility(grid, i, i) == grid.values[i]

    def test_monotone_tail_interval(self):
        # [0.5, 1.0] lies right of the peak: sup at the left endpoint
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert plausibility(grid, 6, 8) == pytest.approx(math.exp(-0.125))

    def test_bad_index_pair(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        with pytest.raises(ValueError):
            plausibility(grid, 3, 2)


class TestBelief:
    def test_full_domain(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert belief(grid, 0, 8) == pytest.approx(1.0 - math.exp(-0.5))

    def test_peak_inside(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        assert belief(grid, 2, 6) == pytest.approx(1.0 - math.exp(-0.125))

    def test_zero_when_peak_outside(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        for (i, j) in [(0, 3), (5, 8), (0, 0), (6, 7)]:
            assert belief(grid, i, j) == 0.0

    def test_duality_with_flank_plausibility(self):
        grid = contour(truncate(0.4, 0.8), n_points=30)
        for (i, j) in [(0, 29), (3, 20), (10, 10), (0, 5)]:
            pl_complement = max(plausibility(grid, 0, i), plausibility(grid, j, 29))
            assert belief(grid, i, j) == pytest.approx(1.0 - pl_complement)

    def test_bel_at_most_pl(self):
        grid = contour(truncate(-0.2, 1.3), n_points=30)
        for i in range(0, 30, 3):
            for j in range(i, 30, 3):
                assert belief(grid, i, j) <= plausibility(grid, i, j) + 1e-15


class TestMoebiusMasses:
    def test_three_point_hand_example(self):
        # p = (0.6, 1.0, 0.6): only the full interval carries belief
        bel = np.array([[0.0, 0.0, 0.4],
                        [0.0, 0.0, 0.0],
                        [0.0, 0.0, 0.0]])
        mass = moebius_masses(bel)
        expected = np.zeros((3, 3))
        expected[0, 2] = 0.4
        np.testing.assert_allclose(mass, expected, atol=1e-15)
        assert mass.sum() == pytest.approx(bel[0, 2])

    def test_matches_bel_matrix_construction(self):
        values = np.array([0.6, 1.0, 0.6])
        grid = contour(truncate(0.0, 1.0), n_points=3)
        object.__setattr__(grid, "values", values)  # force the hand contour
        bel = bel_matrix(grid)
        assert bel[0, 2] == pytest.approx(0.4)
        assert np.count_nonzero(bel) == 1

    def test_constant_contour_all_zero(self):
        grid = contour(truncate(0.0, 1.0), n_points=5)
        object.__setattr__(grid, "values", np.ones(5))
        bel = bel_matrix(grid)
        assert np.all(bel == 0.0)
        assert np.all(moebius_masses(bel) == 0.0)

    def test_roundtrip_reconstruction(self):
        # sum of masses of all subintervals of [i, j] recovers bel[i, j]
        rng = RngStream(11)
        for _ in range(25):
            mu = float(rng.normal())
            sigma = float(np.exp(rng.normal() * 0.8 - 0.5))
            grid = contour(truncate(mu, sigma), n_points=12)
            lattice = build_lattice(grid)
            for i in range(12):
                for j in range(i, 12):
                    recon = lattice.mass[i:j + 1, i:j + 1].sum()
                    assert abs(recon - lattice.bel[i, j]) < 1e-9

    def test_masses_nonnegative_for_random_contours(self):
        rng = RngStream(13)
        for _ in range(50):
            mu = float(rng.normal() * 2)
            sigma = float(np.exp(rng.normal()))
            lattice = build_lattice(contour(truncate(mu, sigma), n_points=30))
            assert lattice.mass.min() >= 0.0

    def test_mass_total_equals_full_domain_belief(self):
        grid = contour(truncate(0.15, 0.6), n_points=30)
        lattice = build_lattice(grid)
        expected = 1.0 - max(grid.values[0], grid.values[-1])
        assert lattice.mass.sum() == pytest.approx(expected, abs=1e-9)
        assert lattice.mass.sum() < 1.0

    def test_non_consonant_bel_rejected(self):
        bel = np.array([[0.6, 0.5], [0.0, 0.0]])  # not monotone under inclusion
        with pytest.raises(ConsonanceError):
            moebius_masses(bel)

    def test_465_intervals_at_default_grid(self):
        lattice = build_lattice(contour(truncate(0.0, 1.0), n_points=30))
        assert lattice.n_intervals == 465


class TestSandwich:
    def test_bel_p_pl_ordering_with_quadrature(self):
        # Bel(A) <= P(A) <= Pl(A) against a trapezoid quadrature oracle
        rng = RngStream(17)
        n_points = 30
        for _ in range(40):
            mu = float(rng.normal() * 2)
            sigma = float(np.exp(rng.normal() * 1.2))
            domain = truncate(mu, sigma)
            grid = contour(domain, n_points=n_points)
            lattice = build_lattice(grid)

            per_cell = 345  # fine quadrature grid aligned with lattice endpoints
            fine = np.linspace(domain.lower, domain.upper,
                               (n_points - 1) * per_cell + 1)
            dens = truncated_density(domain, fine)
            cdf = np.concatenate([[0.0], cumulative_trapezoid(dens, fine)])
            anchors = np.arange(n_points) * per_cell

            iu, ju = np.triu_indices(n_points)
            probs = cdf[anchors[ju]] - cdf[anchors[iu]]
            pl = np.array([grid.values[i:j + 1].max() for i, j in zip(iu, ju)])
            bel = lattice.bel[iu, ju]
            assert np.all(bel <= probs + 1e-6)
            assert np.all(probs <= pl + 1e-6)

    def test_monotonicity_under_inclusion(self):
        grid = contour(truncate(0.3, 0.9), n_points=20)
        for (i, j) in [(5, 10), (3, 14), (8, 9)]:
            for (i2, j2) in [(max(i - 2, 0), min(j + 1, 19)), (0, 19)]:
                assert belief(grid, i, j) <= belief(grid, i2, j2) + 1e-15
                assert plausibility(grid, i, j) <= plausibility(grid, i2, j2) + 1e-15


class TestSimplexEmbedding:
    def test_full_domain_maps_to_middle_vertex(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        np.testing.assert_allclose(interval_to_simplex(grid, 0, 8), [0.0, 1.0, 0.0])

    def test_degenerate_midpoint_interval(self):
        grid = contour(truncate(0.0, 1.0), n_points=9)
        np.testing.assert_allclose(interval_to_simplex(grid, 4, 4), [0.5, 0.0, 0.5])

    def test_inverse_denormalization(self):
        domain = truncate(0.0, 0.5)  # [-1, 1]
        a, b = simplex_to_interval([0.2, 0.3, 0.5], domain)
        assert (a, b) == (pytest.approx(-0.6), pytest.approx(0.0))

    def test_roundtrip(self):
        grid = contour(truncate(0.7, 0.3), n_points=15)
        for (i, j) in [(0, 14), (3, 9), (7, 7)]:
            x = interval_to_simplex(grid, i, j)
            a, b = simplex_to_interval(x, grid.domain)
            assert a == pytest.approx(grid.points[i])
            assert b == pytest.approx(grid.points[j])

    def test_off_simplex_rejected(self):
        with pytest.raises(ValueError):
            simplex_to_interval([0.5, 0.6, 0.2], truncate(0.0, 1.0))


class TestCloudAndDump:
    def test_cloud_shape_and_weights(self):
        lattice = build_lattice(contour(truncate(0.0, 1.0), n_points=30))
        points, weights = lattice_to_cloud(lattice)
        assert points.shape == (465, 3)
        assert weights.shape == (465,)
        np.testing.assert_allclose(points.sum(axis=1), 1.0, atol=1e-9)
        assert weights.sum() == pytest.approx(lattice.mass.sum())

    def test_csv_dump(self, tmp_path):
        lattice = build_lattice(contour(truncate(0.0, 1.0), n_points=5))
        out = tmp_path / "lattice.csv"
        dump_lattice_csv(lattice, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "i,j,g_i,g_j,bel,mass"
        assert len(lines) == 1 + 15  # 5 * 6 / 2 intervals
