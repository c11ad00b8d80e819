import math

import numpy as np
import pytest

from hfield.core import GridSpec, HurstIndex, OffGridError
from hfield.hermite import axis_increment_cov, covariance, generate_hermite_variation
from hfield.integral import (
    AccuracyError,
    IntegrandFunction,
    StepFunction,
    check_membership_absH,
    inner_product_H,
    mc_isometry_check,
    norm_H,
    project_to_steps,
    projection_error_H,
    random_step_functions,
    variation_integral_variance,
    wiener_integral,
)
from hfield.randgen import RngStream

# singular interval-pair integrals, 30-digit quadrature oracle (precomputed)
AXIS_GOLDENS = [
    ((0.0, 1.0, 0.5, 1.5), 0.65, 0.64394710250318754),
    ((0.0, 1.0, 2.0, 3.0), 0.80, 0.36833993437684796),
    ((0.25, 0.75, 0.25, 0.75), 0.75, 0.35355339059327376),
]


def unit_box(d):
    return StepFunction(((1.0, (0.0,) * d, (1.0,) * d),))


class TestAxisClosedForm:
    @pytest.mark.parametrize("intervals,h,golden", AXIS_GOLDENS)
    def test_against_quadrature_oracle(self, intervals, h, golden):
        a, b, c, e = intervals
        assert axis_increment_cov(h, a, b, c, e) == pytest.approx(golden, rel=1e-12)


class TestStepFunction:
    def test_rejects_degenerate_rectangle(self):
        with pytest.raises(ValueError):
            StepFunction(((1.0, (0.0, 0.0), (1.0, 0.0)),))

    def test_evaluation_half_open(self):
        f = StepFunction(((2.0, (0.0,), (1.0,)),))
        pts = np.array([[0.0], [0.5], [1.0], [1.5]])
        assert f(pts).tolist() == [0.0, 2.0, 2.0, 0.0]

    def test_csv_round_trip(self):
        f = StepFunction(((1.5, (0.0, 0.25), (0.5, 1.0)), (-2.0, (0.5, 0.0), (1.0, 0.5))))
        g = StepFunction.from_csv_rows(f.to_csv_rows())
        assert g == f


class TestInnerProduct:
    def test_unit_box_any_hurst(self):
        for d, hs in ((1, (0.51,)), (2, (0.6, 0.9)), (3, (0.75, 0.75, 0.75))):
            h = HurstIndex(hs, 1)
            assert inner_product_H(unit_box(d), unit_box(d), h) == pytest.approx(1.0, rel=1e-12)

    def test_box_to_t_matches_covariance_diagonal(self):
        h = HurstIndex((0.6, 0.8), 2)
        t = (0.5, 1.5)
        f = StepFunction(((1.0, (0.0, 0.0), t),))
        assert inner_product_H(f, f, h) == pytest.approx(covariance(h, t, t), rel=1e-12)

    def test_disjoint_intervals_golden(self):
        h = HurstIndex((0.75,), 1)
        f = StepFunction(((1.0, (0.0,), (1.0,)),))
        g = StepFunction(((1.0, (1.0,), (2.0,)),))
        assert inner_product_H(f, g, h) == pytest.approx(math.sqrt(2) - 1, rel=1e-12)

    def test_bilinear_and_symmetric(self):
        h = HurstIndex((0.7, 0.6), 1)
        fs = random_step_functions(3, 2, seed=5)
        a, b, c = fs
        ab = inner_product_H(a, b, h)
        assert ab == pytest.approx(inner_product_H(b, a, h), rel=1e-13)
        combo = StepFunction(tuple((2.0 * t[0], t[1], t[2]) for t in a.terms) + c.terms)
        lhs = inner_product_H(combo, b, h)
        assert lhs == pytest.approx(2 * ab + inner_product_H(c, b, h), rel=1e-11)

    def test_gram_psd(self):
        h = HurstIndex((0.65,), 2)
        fs = random_step_functions(8, 1, seed=6)
        gram = np.array([[inner_product_H(a, b, h) for b in fs] for a in fs])
        eig = np.linalg.eigvalsh(0.5 * (gram + gram.T))
        assert eig.min() > -1e-9 * np.trace(gram)

    def test_function_route_constant_matches_exact(self):
        h = HurstIndex((0.75,), 1)
        f = IntegrandFunction(lambda p: np.ones(p.shape[:-1]), (0.0,), (1.0,))
        assert inner_product_H(f, f, h, mesh=16) == pytest.approx(1.0, rel=1e-9)

    def test_function_route_accuracy_error(self):
        h = HurstIndex((0.75,), 1)
        f = IntegrandFunction(lambda p: np.sin(40 * p[..., 0]), (0.0,), (1.0,))
        with pytest.raises(AccuracyError) as exc:
            inner_product_H(f, f, h, mesh=3, rtol=1e-9)
        assert np.isfinite(exc.value.estimate)


class TestNorm:
    def test_zero_function(self):
        h = HurstIndex((0.8,), 1)
        z = StepFunction(((0.0, (0.0,), (1.0,)),))
        assert norm_H(z, h) == 0.0

    def test_absolute_homogeneity(self):
        h = HurstIndex((0.7,), 1)
        f = random_step_functions(1, 1, seed=7)[0]
        scaled = f.scaled(-2.5)
        assert norm_H(scaled, h) == pytest.approx(2.5 * norm_H(f, h), rel=1e-12)

    def test_unit_box_norm_one_2d(self):
        for hs in ((0.55, 0.95), (0.75, 0.75)):
            assert norm_H(unit_box(2), HurstIndex(hs, 1)) == pytest.approx(1.0, rel=1e-12)


class TestMembership:
    def test_indicator_matches_norm(self):
        h = HurstIndex((0.75,), 1)
        rep = check_membership_absH(unit_box(1), h)
        assert rep.converged
        assert rep.value == pytest.approx(1.0, rel=1e-9)

    def test_sign_cancellation_detected(self):
        h = HurstIndex((0.75,), 1)
        f = StepFunction(((1.0, (0.0,), (1.0,)), (-1.0, (1.0,), (2.0,))))
        rep = check_membership_absH(f, h, mesh=32)
        assert rep.value > inner_product_H(f, f, h)

    def test_oscillating_integrand_stable(self):
        h = HurstIndex((0.75,), 1)
        f = IntegrandFunction(lambda p: np.cos(6 * np.pi * p[..., 0]), (0.0,), (1.0,))
        rep = check_membership_absH(f, h, mesh=96, rtol=0.01)
        assert rep.converged
        assert np.isfinite(rep.value)


class TestWienerIntegral:
    def _field(self, q=1, cells=16):
        grid = GridSpec((0.0,), (1.0,), (cells,))
        h = HurstIndex((0.75,), q)
        return generate_hermite_variation(grid, h, cells, RngStream(80, 0)), h

    def test_indicator_recovers_field_value(self):
        field, _ = self._field()
        f = StepFunction(((1.0, (0.0,), (0.75,)),))
        assert wiener_integral(f, field) == pytest.approx(field.value_at((0.75,)), abs=1e-14)

    def test_indicator_recovers_field_value_2d(self):
        grid = GridSpec((0.0, 0.0), (1.0, 1.0), (8, 8))
        h = HurstIndex((0.6, 0.8), 1)
        field = generate_hermite_variation(grid, h, 8, RngStream(81, 0))
        f = StepFunction(((1.0, (0.0, 0.0), (0.5, 1.0)),))
        assert wiener_integral(f, field) == pytest.approx(field.value_at((0.5, 1.0)), abs=1e-14)

    def test_zero_function(self):
        field, _ = self._field()
        assert wiener_integral(StepFunction(((0.0, (0.0,), (1.0,)),)), field) == 0.0

    def test_linear_in_integrand(self):
        field, _ = self._field()
        f = StepFunction(((1.0, (0.0,), (0.5,)),))
        g = StepFunction(((1.0, (0.25,), (1.0,)),))
        combo = StepFunction(f.scaled(2.0).terms + g.scaled(-1.0).terms)
        assert wiener_integral(combo, field) == pytest.approx(
            2 * wiener_integral(f, field) - wiener_integral(g, field), abs=1e-13
        )

    def test_off_grid_corner_refused(self):
        field, _ = self._field(cells=16)
        f = StepFunction(((1.0, (0.0,), (0.33,)),))
        with pytest.raises(OffGridError):
            wiener_integral(f, field)

    @pytest.mark.parametrize("q", [1, 2])
    def test_isometry_mc(self, q):
        h = HurstIndex((0.75,), q)
        f = StepFunction(((1.0, (0.0,), (0.5,)), (-1.5, (0.25,), (1.0,))))
        rep = mc_isometry_check(f, h, resolution=64, replicates=1200, seed=82 + q)
        assert abs(rep.mc_variance - rep.lattice_variance) < 3 * rep.mc_se
        assert abs(rep.bias) < 0.05 * rep.inner_product

    def test_q1_lattice_variance_equals_inner_product(self):
        # aligned rectangles: the q=1 lattice law is exact
        h = HurstIndex((0.7,), 1)
        f = StepFunction(((1.0, (0.0,), (0.5,)), (2.0, (0.25,), (0.75,))))
        lat = variation_integral_variance(f, h, 16)
        assert lat == pytest.approx(inner_product_H(f, f, h), rel=1e-10)


class TestProjection:
    def test_aligned_step_is_fixed_point(self):
        grid = GridSpec((0.0,), (1.0,), (4,))
        f = StepFunction(((2.0, (0.25,), (0.75,)),))
        proj = project_to_steps(f, grid)
        h = HurstIndex((0.7,), 1)
        diff_terms = proj.terms + f.scaled(-1.0).terms
        assert norm_H(StepFunction(diff_terms), h) == pytest.approx(0.0, abs=1e-12)

    def test_constant_exact(self):
        grid = GridSpec((0.0, 0.0), (1.0, 1.0), (3, 3))
        f = IntegrandFunction(lambda p: np.full(p.shape[:-1], 2.0), (0.0, 0.0), (1.0, 1.0))
        proj = project_to_steps(f, grid)
        pts = np.array([[0.1, 0.9], [0.5, 0.5]])
        assert proj(pts).tolist() == [2.0, 2.0]

    def test_support_outside_grid_rejected(self):
        grid = GridSpec((0.0,), (1.0,), (4,))
        f = IntegrandFunction(lambda p: p[..., 0], (0.0,), (2.0,))
        with pytest.raises(ValueError):
            project_to_steps(f, grid)

    def test_refinement_rate_linear_integrand(self):
        h = HurstIndex((0.75,), 1)
        f = IntegrandFunction(lambda p: p[..., 0], (0.0,), (1.0,))
        errs = []
        for cells in (4, 8, 16):
            grid = GridSpec((0.0,), (1.0,), (cells,))
            errs.append(projection_error_H(f, grid, h, mesh=128))
        assert errs[0] > errs[1] > errs[2]
        for a, b in zip(errs, errs[1:]):
            assert 1.6 < a / b < 3.6  # about halves per doubling, up to 2^H slack


def test_random_step_functions_deterministic():
    a = random_step_functions(3, 2, seed=9)
    b = random_step_functions(3, 2, seed=9)
    assert a == b
