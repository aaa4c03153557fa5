"""First-passage kernels: series against enumeration, transforms, tables."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multipin import kernels
from conftest import enumerate_first_passage


class TestSeriesAgainstEnumeration:
    @pytest.mark.parametrize("spacing", [2, 4, 6, 8])
    def test_matches_exhaustive_paths(self, spacing):
        stay_ref, hop_ref = enumerate_first_passage(spacing, 16)
        for n in range(1, 17):
            assert kernels.stay_pmf(spacing, n) == pytest.approx(
                stay_ref[n], abs=1e-12
            )
            assert kernels.hop_pmf(spacing, n) == pytest.approx(
                hop_ref[n], abs=1e-12
            )

    def test_known_fractions(self):
        assert kernels.stay_pmf(4, 2) == pytest.approx(0.5, abs=1e-15)
        assert kernels.stay_pmf(4, 4) == pytest.approx(0.125, abs=1e-15)
        assert kernels.stay_pmf(4, 3) == 0.0
        assert kernels.hop_pmf(4, 4) == pytest.approx(0.0625, abs=1e-15)
        assert kernels.hop_pmf(4, 2) == 0.0
        assert kernels.stay_pmf(2, 2) == pytest.approx(0.5, abs=1e-15)
        assert kernels.hop_pmf(2, 2) == pytest.approx(0.25, abs=1e-15)
        assert kernels.passage_pmf(2, 2) == pytest.approx(1.0, abs=1e-15)
        assert kernels.passage_pmf(4, 2) == pytest.approx(0.5, abs=1e-15)
        assert kernels.passage_pmf(4, 5) == 0.0

    def test_spacing_two_is_deterministic(self):
        # the walk is absorbed at step 2 with certainty
        assert kernels.passage_pmf(2, 2) == pytest.approx(1.0, abs=1e-15)
        for n in range(3, 30):
            assert kernels.passage_pmf(2, n) == pytest.approx(0.0, abs=1e-30)

    @settings(max_examples=120, deadline=None)
    @given(
        spacing=st.integers(min_value=1, max_value=20).map(lambda k: 2 * k),
        n=st.integers(min_value=1, max_value=60),
    )
    def test_pmf_properties(self, spacing, n):
        stay = kernels.stay_pmf(spacing, n)
        hop = kernels.hop_pmf(spacing, n)
        assert 0.0 <= stay <= 1.0
        assert 0.0 <= hop <= 0.5
        assert stay + 2.0 * hop <= 1.0 + 1e-12
        if n % 2:
            assert stay == 0.0 and hop == 0.0
        if n < spacing:
            assert hop == 0.0


class TestTransforms:
    def test_zero_rate_limits(self):
        assert kernels.stay_transform(8, 0.0) == pytest.approx(7.0 / 8.0, abs=1e-15)
        assert kernels.hop_transform(8, 0.0) == pytest.approx(1.0 / 16.0, abs=1e-15)
        assert kernels.passage_transform(4, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert kernels.passage_transform(kernels.INFINITE, 0.0) == 1.0

    def test_decay_at_large_rate(self):
        assert kernels.stay_transform(4, 60.0) < 1e-40
        assert kernels.hop_transform(4, 60.0) < 1e-40

    def test_split_adds_up(self):
        for spacing in (2, 4, 6, 16, 64):
            for lam in (-0.01, 0.0, 1e-8, 0.3, 2.0):
                if lam <= kernels.transform_pole(spacing):
                    continue
                total = kernels.passage_transform(spacing, lam)
                split = kernels.stay_transform(spacing, lam) + 2.0 * kernels.hop_transform(
                    spacing, lam
                )
                assert total == pytest.approx(split, rel=1e-12)

    def test_series_consistency_with_certified_tail(self):
        for spacing in (2, 4, 6, 8, 16, 32, 64):
            table = kernels.build_kernel_table(spacing)
            n = np.arange(table.horizon + 1)
            for lam in (0.0, 0.05, 0.25, 1.0):
                w = np.exp(-lam * n)
                budget = table.tail_bound * math.exp(-lam * table.horizon) + 1e-10
                assert abs(
                    float(table.stay @ w) - kernels.stay_transform(spacing, lam)
                ) <= budget
                assert abs(
                    float(table.hop @ w) - kernels.hop_transform(spacing, lam)
                ) <= budget

    def test_monotone_decreasing(self):
        grid = np.linspace(-0.05, 3.0, 40)
        for spacing in (4, 8, 32):
            vals = [
                kernels.passage_transform(spacing, lam)
                for lam in grid
                if lam > kernels.transform_pole(spacing)
            ]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_dominates_single_interface(self):
        # the grid passage time is never longer than the single-interface one
        for lam in (0.0, 0.1, 0.5, 2.0):
            q_inf = kernels.passage_transform(kernels.INFINITE, lam)
            for spacing in (2, 4, 16, 64):
                assert kernels.passage_transform(spacing, lam) >= q_inf - 1e-14

    def test_small_rate_continuity(self):
        # the expm1/atan parameterisation stays on the limit values near 0
        for spacing in (4, 8, 64):
            limit = 1.0 - 1.0 / spacing
            for lam in (1e-12, -1e-12, 1e-9, -1e-9):
                assert kernels.stay_transform(spacing, lam) == pytest.approx(
                    limit, abs=1e-8
                )
            below = kernels.passage_transform(spacing, -1e-9)
            above = kernels.passage_transform(spacing, 1e-9)
            assert below > 1.0 > above
            assert below - above == pytest.approx(0.0, abs=1e-6)


class TestPoleAndDomain:
    def test_pole_values(self):
        assert kernels.transform_pole(4) == pytest.approx(-0.5 * math.log(2.0), abs=1e-14)
        assert kernels.transform_pole(2) == -math.inf
        poles = [kernels.transform_pole(T) for T in (4, 8, 16, 64, 256)]
        assert all(a < b < 0 for a, b in zip(poles, poles[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            kernels.stay_pmf(5, 4)
        with pytest.raises(ValueError):
            kernels.stay_pmf(0, 4)
        with pytest.raises(ValueError):
            kernels.passage_transform(8, kernels.transform_pole(8) - 1e-3)
        with pytest.raises(ValueError):
            kernels.passage_transform(kernels.INFINITE, -0.1)
        with pytest.raises(ValueError):
            kernels.stay_pmf(4, 0)

    def test_divergence_toward_pole(self):
        pole = kernels.transform_pole(16)
        assert kernels.passage_transform(16, pole + 1e-10) > 1e6


class TestKernelTable:
    def test_mass_budget(self):
        for spacing in (2, 4, 8, 32, 64):
            table = kernels.build_kernel_table(spacing)
            covered = float(table.total.sum())
            assert covered <= 1.0 + 1e-12
            assert covered + table.tail_bound >= 1.0 - 1e-12
            assert np.all(table.total[1::2] == 0.0)
            assert np.all(table.stay >= 0.0) and np.all(table.hop >= 0.0)

    def test_mass_identities(self):
        for spacing in (2, 4, 8, 16, 64):
            table = kernels.build_kernel_table(spacing)
            assert float(table.stay.sum()) == pytest.approx(
                1.0 - 1.0 / spacing, abs=1e-8 + table.tail_bound
            )
            assert float(table.hop.sum()) == pytest.approx(
                0.5 / spacing, abs=1e-8 + table.tail_bound
            )

    def test_horizon_cap_reports_achieved_bound(self):
        table = kernels.build_kernel_table(64, tail_bound=1e-12, horizon=20000)
        assert table.horizon == 20000
        assert table.tail_bound > 1e-12  # bound not reached, honest value reported
        assert float(table.total.sum()) + table.tail_bound >= 1.0 - 1e-12
