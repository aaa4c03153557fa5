"""Free energy: root quality, closed forms, derived scaling constants."""

import math

import pytest

import multipin.free_energy as fe
from multipin import kernels
from conftest import four_spacing_rate, single_interface_rate

DELTA_GRID = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)
SPACING_GRID = (2, 4, 8, 16, 32, 64)


class TestRoots:
    def test_residual_on_grid(self):
        for delta in DELTA_GRID:
            for spacing in SPACING_GRID:
                phi = fe.free_energy(delta, spacing)
                residual = abs(
                    kernels.passage_transform(spacing, phi) - math.exp(-delta)
                )
                assert residual <= 1e-12, (delta, spacing, residual)

    def test_spacing_two_is_half_delta(self):
        # passage time is deterministically 2, so the root is delta/2 exactly
        for delta in (-3.0, -1.0, 0.5, 1.0, 4.0):
            assert fe.free_energy(delta, 2) == pytest.approx(delta / 2, abs=1e-12)

    def test_spacing_four_algebraic_oracle(self):
        for delta in (-1.0, 0.3, 1.0, 2.5):
            assert fe.free_energy(delta, 4) == pytest.approx(
                four_spacing_rate(delta), abs=1e-12
            )

    def test_single_interface_closed_form(self):
        # bisection oracle on the inverse problem, independent of the formula
        assert fe.free_energy(1.0, kernels.INFINITE) == pytest.approx(
            single_interface_rate(1.0), abs=1e-10
        )
        assert fe.free_energy_single(1.0) == pytest.approx(0.2550599372, abs=1e-9)
        assert fe.free_energy_single(0.0) == 0.0
        assert fe.free_energy_single(-2.0) == 0.0

    def test_zero_delta_short_circuit(self):
        for spacing in SPACING_GRID:
            assert fe.free_energy(0.0, spacing) == 0.0

    def test_negative_delta_sits_between_pole_and_zero(self):
        phi = fe.free_energy(-1.0, 8)
        assert kernels.transform_pole(8) < phi < 0.0
        assert abs(kernels.passage_transform(8, phi) - math.e) <= 1e-12


class TestConvergenceInSpacing:
    def test_monotone_decreasing_to_single_interface(self):
        values = [fe.free_energy(1.0, T) for T in SPACING_GRID]
        limit = fe.free_energy_single(1.0)
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(v > limit for v in values)
        assert values[-1] == pytest.approx(limit, abs=1e-9)

    def test_log_gap_affine_with_hop_cost_slope(self):
        limit = fe.free_energy_single(1.0)
        cost = fe.hop_cost(1.0)
        log_gaps = [
            math.log(fe.free_energy(1.0, T) - limit) for T in (8, 12, 16, 20, 24, 28, 32)
        ]
        slopes = [(b - a) / 4.0 for a, b in zip(log_gaps, log_gaps[1:])]
        assert all(s < 0 for s in slopes)
        for s in slopes[1:]:
            assert s == pytest.approx(-cost, rel=0.02)


class TestDerivedConstants:
    def test_hop_cost_values(self):
        assert fe.hop_cost(1.0) == pytest.approx(0.7449400628, abs=1e-9)
        assert fe.hop_cost(1.0) + fe.free_energy_single(1.0) == pytest.approx(
            1.0, abs=1e-14
        )
        assert fe.hop_cost(1e-9) == pytest.approx(0.0, abs=1e-8)
        with pytest.raises(ValueError):
            fe.hop_cost(-0.5)

    def test_hop_cost_two_closed_forms(self):
        for delta in (0.3, 1.0, 2.0):
            phi = fe.free_energy_single(delta)
            via_phi = phi + math.log(1.0 + math.sqrt(-math.expm1(-2.0 * phi)))
            assert fe.hop_cost(delta) == pytest.approx(via_phi, abs=1e-10)

    def test_root_term_identity(self):
        for delta in (0.2, 1.0, 3.0):
            phi = fe.free_energy_single(delta)
            assert math.sqrt(-math.expm1(-2.0 * phi)) == pytest.approx(
                1.0 - math.exp(-delta), abs=1e-10
            )

    def test_scaling_constants_frozen_values(self):
        consts = fe.scaling_constants(1.0, 0.0)
        assert consts.gaussian_scale == pytest.approx(1.153681786, abs=1e-6)
        assert consts.poisson_rate == pytest.approx(1.330981665, abs=1e-6)
        assert consts.first_hop_rate == pytest.approx(2.0 * (math.e - 1.0), abs=1e-9)
        assert consts.poisson_rate == pytest.approx(
            consts.first_hop_rate * consts.contact_density, abs=1e-10
        )

    def test_scaling_constants_alternate_forms(self):
        for delta, zeta in ((0.5, 0.0), (1.0, -0.7), (2.0, 1.3)):
            consts = fe.scaling_constants(delta, zeta)
            e = math.exp(-delta)
            scale_b = (1.0 - e) * math.sqrt(2.0 * math.exp(delta) / (2.0 - e))
            rate_b = (
                2.0
                * math.exp(delta)
                * (1.0 - e) ** 2
                / (2.0 - e)
                * math.exp(-fe.hop_cost(delta) * zeta)
            )
            assert consts.gaussian_scale == pytest.approx(scale_b, abs=1e-10)
            assert consts.poisson_rate == pytest.approx(rate_b, abs=1e-10)

    def test_rate_vanishes_at_large_offset(self):
        assert fe.scaling_constants(1.0, 60.0).poisson_rate < 1e-15


class TestStepMean:
    def test_closed_values(self):
        e = math.exp(-1.0)
        assert fe.step_mean(1.0, kernels.INFINITE) == pytest.approx(
            (2.0 - e) / (1.0 - e), abs=1e-12
        )
        assert fe.step_mean(1.0, 2) == 2.0
        with pytest.raises(ValueError):
            fe.step_mean(-0.1, kernels.INFINITE)

    def test_wide_spacing_approaches_single_interface(self):
        wide = fe.step_mean(1.0, 64)
        assert wide == pytest.approx(fe.step_mean(1.0, kernels.INFINITE), rel=1e-4)

    def test_matches_free_energy_slope(self):
        # centered differences of the root against the series reciprocal
        for spacing in (8, 16):
            m = fe.step_mean(1.0, spacing)
            for h, tol in ((1e-5, 1e-4),):
                slope = (
                    fe.free_energy(1.0 + h, spacing) - fe.free_energy(1.0 - h, spacing)
                ) / (2.0 * h)
                assert 1.0 / m == pytest.approx(slope, rel=tol)

    def test_quadratic_error_reduction(self):
        m = fe.step_mean(1.0, 8)

        def fd_error(h):
            slope = (fe.free_energy(1.0 + h, 8) - fe.free_energy(1.0 - h, 8)) / (
                2.0 * h
            )
            return abs(slope - 1.0 / m)

        coarse, fine = fd_error(1e-2), fd_error(1e-3)
        assert fine <= 1e-10 or coarse / fine >= 20.0

    def test_convexity_in_delta(self):
        for spacing in (4, 16, kernels.INFINITE):
            grid = [fe.free_energy(-1.0 + 0.25 * k, spacing) for k in range(17)]
            second = [a - 2 * b + c for a, b, c in zip(grid, grid[1:], grid[2:])]
            assert all(d >= -1e-9 for d in second)


class TestAnalyticityDichotomy:
    """One-sided curvature at delta = 0: finite spacings are smooth across
    the origin while the single-interface model has a second-order kink."""

    @staticmethod
    def _one_sided_curvature(spacing, sign, h=1e-3):
        f = lambda d: fe.free_energy(d, spacing)
        return (f(2 * sign * h) - 2.0 * f(sign * h) + f(0.0)) / h**2

    def test_single_interface_curvature_jump(self):
        right = self._one_sided_curvature(kernels.INFINITE, +1)
        left = self._one_sided_curvature(kernels.INFINITE, -1)
        assert right == pytest.approx(1.0, abs=0.01)
        assert left == 0.0

    def test_finite_spacing_smooth(self):
        right = self._one_sided_curvature(8, +1)
        left = self._one_sided_curvature(8, -1)
        assert right == pytest.approx(left, abs=0.02)
        assert 0.0 < right < 1.0


class TestRegimeOffset:
    def test_zero_offset_is_critical(self):
        delta = 1.0
        length = round(math.exp(fe.hop_cost(delta) * 10.0))
        offset, regime = fe.regime_offset(length, 10, delta)
        assert offset == pytest.approx(0.0, abs=1e-3)
        assert regime == "critical"

    def test_frozen_offsets(self):
        offset, regime = fe.regime_offset(10**6, 10, 1.0)
        assert offset == pytest.approx(10.0 - math.log(1e6) / fe.hop_cost(1.0), abs=1e-12)
        assert offset == pytest.approx(-8.5458, abs=1e-3)
        assert regime == "gaussian"
        offset, regime = fe.regime_offset(10**6, 40, 1.0)
        assert offset == pytest.approx(21.4542, abs=1e-3)
        assert regime == "single_interface"


class TestHopTransformRatio:
    def test_tends_to_one(self):
        assert abs(fe.hop_transform_ratio(1.0, 40) - 1.0) <= 0.01
        assert abs(fe.hop_transform_ratio(1.0, 80) - 1.0) <= 1e-3
        r20 = fe.hop_transform_ratio(1.0, 20)
        r40 = fe.hop_transform_ratio(1.0, 40)
        assert abs(r40 - 1.0) < abs(r20 - 1.0)
