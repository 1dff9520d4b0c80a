"""
Unit tests for equilibria, Jacobians, spectra and the fractional stability test.
"""

import logging
import math

import numpy as np
import pytest

from fracpr.exceptions import InvalidScanError, NoConvergence
from fracpr.pinsky_rinzel import CA, VS, NeuronParams, canonical_initial_state, rhs
from fracpr.stability import (
    StabilityCell,
    StableIntervalReport,
    Verdict,
    _merge_intervals,
    _newton,
    analyze_equilibrium,
    compare_seed_modes,
    eigenvalues,
    finite_difference_jacobian,
    find_equilibrium,
    matignon_test,
    numerical_jacobian,
    scan_stable_intervals,
)
from tests.fixtures.systems import LINEAR_MATRIX, guarded_log, linear_field


def _cell(value: float, stable: bool) -> StabilityCell:
    verdict = Verdict.ASYMPTOTICALLY_STABLE if stable else Verdict.UNSTABLE
    return StabilityCell(value, verdict, 0.0, 0.0, 0.0, True)


@pytest.mark.unit
class TestMatignon:
    """Test the eigenvalue-argument criterion."""

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.95, 1.0])
    def test_negative_real_stable(self, alpha):
        assert matignon_test(np.array([-1.0]), alpha) is Verdict.ASYMPTOTICALLY_STABLE

    def test_small_positive_pair_unstable(self):
        spectrum = np.array([0.0007 + 0.0005j, 0.0007 - 0.0005j, -1.0])
        assert matignon_test(spectrum, 0.95) is Verdict.UNSTABLE

    def test_imaginary_pair_stable_below_one(self):
        assert matignon_test(np.array([1j, -1j]), 0.9) is Verdict.ASYMPTOTICALLY_STABLE

    def test_imaginary_pair_boundary_at_one(self):
        assert matignon_test(np.array([1j, -1j]), 1.0) is Verdict.UNSTABLE

    def test_zero_eigenvalue_unstable(self):
        assert matignon_test(np.array([-2.0, 0.0]), 0.5) is Verdict.UNSTABLE

    def test_empty_spectrum_rejected(self):
        with pytest.raises(ValueError):
            matignon_test(np.array([]), 0.9)

    def test_monotone_in_order(self):
        rng = np.random.default_rng(11)
        orders = np.linspace(0.05, 1.0, 20)
        for _ in range(100):
            spectrum = rng.normal(size=4) + 1j * rng.normal(size=4)
            verdicts = [matignon_test(spectrum, a) for a in orders]
            # Once unstable at some order, unstable at every larger order
            first_unstable = next(
                (k for k, v in enumerate(verdicts) if v is Verdict.UNSTABLE), len(orders)
            )
            assert all(v is Verdict.UNSTABLE for v in verdicts[first_unstable:])

    def test_positive_scaling_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            spectrum = rng.normal(size=6) + 1j * rng.normal(size=6)
            scale = rng.uniform(0.01, 100.0)
            assert matignon_test(spectrum, 0.8) is matignon_test(scale * spectrum, 0.8)


@pytest.mark.unit
class TestEigenvalues:
    """Test the dense spectrum wrapper."""

    def test_identity(self):
        assert np.allclose(eigenvalues(np.eye(8)), np.ones(8))

    def test_diagonal_sorted(self):
        values = eigenvalues(np.diag(np.arange(1.0, 9.0)))
        assert np.allclose(values, np.arange(8.0, 0.0, -1.0))

    def test_rotation_block(self):
        matrix = np.diag([-1.0, -2.0, -3.0, -4.0, -5.0, -6.0, 0.0, 0.0])
        matrix[6:, 6:] = [[0.0, -1.0], [1.0, 0.0]]
        values = eigenvalues(matrix)
        assert np.any(np.isclose(values, 1j))
        assert np.any(np.isclose(values, -1j))

    def test_non_finite_rejected(self):
        matrix = np.eye(3)
        matrix[0, 1] = np.nan
        with pytest.raises(ValueError):
            eigenvalues(matrix)


@pytest.mark.unit
class TestJacobian:
    """Test central-difference Jacobians."""

    def test_linear_system_recovered(self):
        jac = finite_difference_jacobian(linear_field, np.array([0.3, -1.2, 4.0]))
        assert np.max(np.abs(jac - LINEAR_MATRIX)) < 1e-8

    def test_calcium_row_ignores_soma(self, params):
        jac = numerical_jacobian(params, canonical_initial_state(), 0.95)
        assert jac.shape == (8, 8)
        assert jac[CA, VS] == 0.0

    def test_step_robust(self, params):
        state = canonical_initial_state()
        base = numerical_jacobian(params, state, 0.95, rel_step=1e-6)
        doubled = numerical_jacobian(params, state, 0.95, rel_step=2e-6)
        scale = np.maximum(np.abs(base), 1.0)
        assert np.max(np.abs(doubled - base) / scale) < 1e-4


@pytest.mark.unit
class TestFindEquilibrium:
    """Test the damped Newton solve."""

    @pytest.fixture
    def resting(self):
        # hyperpolarizing dendritic current; a stable rest exists here
        return NeuronParams(i_sapp=0.75, i_dapp=-4.0)

    def test_converges_with_tiny_residual(self, resting):
        report = find_equilibrium(resting, 0.95, canonical_initial_state())
        assert report.converged
        assert report.residual_norm < 1e-10
        assert np.max(np.abs(rhs(0.0, report.point, resting, 0.95))) < 1e-10

    def test_location_independent_of_order(self, resting):
        a = find_equilibrium(resting, 0.8, canonical_initial_state())
        b = find_equilibrium(resting, 0.95, canonical_initial_state())
        assert np.max(np.abs(a.point.as_array() - b.point.as_array())) < 1e-8

    def test_seed_at_equilibrium_stays(self, resting):
        first = find_equilibrium(resting, 0.95, canonical_initial_state())
        again = find_equilibrium(resting, 0.95, first.point)
        assert np.max(np.abs(again.point.as_array() - first.point.as_array())) < 1e-8
        assert again.converged

    def test_non_convergence_flagged(self, resting, caplog):
        report = find_equilibrium(resting, 0.95, canonical_initial_state(), max_iter=1)
        assert not report.converged
        assert "did not converge" in caplog.text

    def test_strict_raises_with_best_iterate(self, resting):
        with pytest.raises(NoConvergence) as excinfo:
            find_equilibrium(resting, 0.95, canonical_initial_state(), max_iter=1, strict=True)
        assert excinfo.value.best is not None
        assert excinfo.value.residual > 1e-10

    def test_non_finite_seed_rejected(self, resting):
        with pytest.raises(ValueError):
            find_equilibrium(resting, 0.95, np.full(8, math.nan))

    def test_analyze_fills_report(self, resting):
        report = analyze_equilibrium(resting, 0.95)
        assert report.jacobian.shape == (8, 8)
        assert report.spectrum.shape == (8,)
        assert report.verdict is matignon_test(report.spectrum, 0.95)
        assert report.threshold == pytest.approx(0.95 * math.pi / 2.0)
        assert report.min_arg == pytest.approx(np.min(np.abs(np.angle(report.spectrum))))

    def test_line_search_rejects_raising_trial_point(self):
        # the full Newton step from 3 lands at -0.296, where the residual raises
        x, iterations = _newton(guarded_log, np.array([3.0]), 50)
        assert abs(x[0] - 1.0) < 1e-10
        assert iterations > 1

    def test_search_without_nearby_root_does_not_raise(self):
        report = find_equilibrium(NeuronParams(i_sapp=0.75), 0.95, canonical_initial_state())
        assert np.isfinite(report.residual_norm)
        assert np.all(np.isfinite(report.point.as_array()))

    def test_analyze_without_nearby_root_gives_verdict(self):
        report = analyze_equilibrium(NeuronParams(i_sapp=2.5), 0.95)
        assert isinstance(report.verdict, Verdict)
        if not report.converged:
            assert report.verdict is Verdict.UNSTABLE


@pytest.mark.unit
class TestStableIntervals:
    """Test interval merging and scan argument handling."""

    def test_merge_runs(self):
        cells = [_cell(v, s) for v, s in [(0, False), (1, True), (2, True), (3, False), (4, True)]]
        assert _merge_intervals(cells) == [(1, 2), (4, 4)]

    def test_merge_all_stable(self):
        cells = [_cell(float(v), True) for v in range(3)]
        assert _merge_intervals(cells) == [(0.0, 2.0)]

    @pytest.mark.parametrize(
        "name,lo,hi,inc,mode",
        [
            ("alpha", 0.5, 1.0, 0.1, "warm"),
            ("i_sapp", 1.0, 0.0, 0.1, "warm"),
            ("i_sapp", 0.0, 1.0, 0.0, "warm"),
            ("i_sapp", 0.0, 1.0, 0.1, "sideways"),
        ],
    )
    def test_invalid_arguments(self, params, name, lo, hi, inc, mode):
        with pytest.raises(InvalidScanError):
            scan_stable_intervals(name, lo, hi, inc, params, 0.95, seed_mode=mode)

    def test_small_scan_cells_and_intervals(self, params):
        report = scan_stable_intervals("i_sapp", -1.0, 0.0, 0.25, params, 0.95)
        assert [c.value for c in report.cells] == [-1.0, -0.75, -0.5, -0.25, 0.0]
        assert report.scanned_range == (-1.0, 0.0)
        for lo, hi in report.stable_intervals:
            assert -1.0 <= lo <= hi <= 0.0
        stable = {c.value for c in report.cells if c.verdict is Verdict.ASYMPTOTICALLY_STABLE}
        covered = {
            c.value for c in report.cells
            for lo, hi in report.stable_intervals if lo <= c.value <= hi
        }
        assert stable == covered

    def test_canonical_mode_matches_warm_on_easy_grid(self, params):
        warm = scan_stable_intervals("i_dapp", -4.0, -3.9, 0.05, params, 0.95, seed_mode="warm")
        canonical = scan_stable_intervals(
            "i_dapp", -4.0, -3.9, 0.05, params, 0.95, seed_mode="canonical"
        )
        assert [c.verdict for c in warm.cells] == [c.verdict for c in canonical.cells]
        assert compare_seed_modes(warm, canonical) == []


@pytest.mark.unit
class TestCompareSeedModes:
    """Test reporting of cells where warm and canonical seeding disagree."""

    @staticmethod
    def _report(verdicts, name="i_sapp"):
        cells = [
            StabilityCell(float(v), verdict, 0.0, 0.0, 0.0, True)
            for v, verdict in enumerate(verdicts)
        ]
        return StableIntervalReport(name, (0.0, float(len(cells) - 1)), 1.0, [], cells)

    def test_differences_logged(self, caplog):
        caplog.set_level(logging.INFO)
        stable, unstable = Verdict.ASYMPTOTICALLY_STABLE, Verdict.UNSTABLE
        warm = self._report([stable, stable, unstable])
        canonical = self._report([stable, unstable, unstable])
        assert compare_seed_modes(warm, canonical) == [1.0]
        assert "i_sapp=1: verdict asymptotically_stable" in caplog.text
        assert "disagree at 1 of 3 cells" in caplog.text

    def test_identical_scans_agree(self, caplog):
        caplog.set_level(logging.INFO)
        report = self._report([Verdict.UNSTABLE, Verdict.UNSTABLE])
        assert compare_seed_modes(report, report) == []
        assert "disagree" not in caplog.text

    def test_different_grids_rejected(self):
        with pytest.raises(InvalidScanError):
            compare_seed_modes(
                self._report([Verdict.UNSTABLE]), self._report([Verdict.UNSTABLE] * 2)
            )
        with pytest.raises(InvalidScanError):
            compare_seed_modes(
                self._report([Verdict.UNSTABLE]), self._report([Verdict.UNSTABLE], name="i_dapp")
            )
