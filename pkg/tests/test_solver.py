import numpy as np
import pytest

from services.bounds.certificate import convergence_certificate
from services.bounds.scaling import ScalingFamily, ScalingRule
from services.chain.chain_model import ChainModel
from services.rates.rate_function import PiecewiseConstant
from services.solver.integrator import (
    IntegrationError,
    check_distribution,
    default_grid,
    integrate,
    point_mass,
)
from services.solver.reports import (
    compute_u,
    default_pair,
    fit_decay_rate,
    pair_report,
    sign_interval_contraction,
)
from services.solver.truncation import truncation_doubling
from tests.factories import birth_death, pair_service

GEOMETRIC = ScalingFamily(ScalingRule.GEOMETRIC, 2.0)


def test_zero_rates_leave_distribution_unchanged():
    p0 = np.random.default_rng(1).dirichlet(np.ones(6))
    traj = integrate(birth_death(0.0, 0.0), 5, p0, 3.0, grid=np.linspace(0.0, 3.0, 7))
    np.testing.assert_array_equal(traj.probs, np.tile(p0, (7, 1)))


def test_two_state_closed_form():
    grid = np.linspace(0.0, 2.0, 41)
    traj = integrate(birth_death(1.0, 4.0), 1, point_mass(1, 0), 2.0, grid=grid)
    np.testing.assert_allclose(traj.probs[:, 1], 0.2 * (1.0 - np.exp(-5.0 * grid)), atol=1e-8)
    assert traj.normalization_drift() <= 1e-9


def test_birth_death_reaches_geometric_law():
    N = 150
    traj = integrate(birth_death(1.0, 4.0), N, point_mass(N, 0), 40.0, grid=np.array([0.0, 40.0]))
    stationary = 0.75 * 0.25 ** np.arange(N + 1)
    assert np.abs(traj.final - stationary).sum() <= 1e-6


def test_piecewise_rates_are_integrated_across_jumps():
    model = ChainModel.birth_death(PiecewiseConstant((1.0,), (0.0, 1.0)), 0.0)
    traj = integrate(model, 1, point_mass(1, 0), 2.0, grid=np.array([0.0, 1.0, 2.0]))
    # nothing moves before the jump, then p_0 decays at rate 1
    np.testing.assert_allclose(traj.probs[:, 0], [1.0, 1.0, np.exp(-1.0)], atol=1e-9)


def test_stiffness_limit():
    with pytest.raises(IntegrationError, match="explicit-stepper limit"):
        integrate(birth_death(1e4, 1e4), 5, point_mass(5, 0), 10.0)


@pytest.mark.parametrize("tol", [1e-3, 1e-14])
def test_tolerance_range(tol):
    with pytest.raises(ValueError, match="tol must lie"):
        integrate(birth_death(), 5, point_mass(5, 0), 1.0, tol=tol)


def test_initial_distribution_checked():
    with pytest.raises(ValueError, match="sum to 1"):
        check_distribution(np.array([0.5, 0.6]), 1)
    with pytest.raises(ValueError, match="length N\\+1=3"):
        check_distribution(np.array([0.5, 0.5]), 2)
    with pytest.raises(ValueError, match="outside"):
        point_mass(3, 4)


def test_compute_u():
    np.testing.assert_array_equal(compute_u([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), [-1.0, -1.0])
    np.testing.assert_array_equal(compute_u([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]), [0.0, 0.0])


def test_difference_norm_is_controlled_by_u():
    rng = np.random.default_rng(12)
    for _ in range(100):
        pa, pb = rng.dirichlet(np.ones(20), size=2)
        assert np.abs(pa - pb).sum() <= 2.0 * np.abs(compute_u(pa, pb)).sum() + 1e-15


def test_fit_decay_rate():
    t = np.linspace(0.0, 10.0, 101)
    assert fit_decay_rate(t, 3.0 * np.exp(-0.7 * t)) == pytest.approx(0.7, rel=1e-10)
    assert np.isnan(fit_decay_rate(t, np.zeros_like(t)))


def test_default_pair():
    assert default_pair(150) == (0, 50)
    assert default_pair(60) == (0, 20)
    assert default_pair(2) == (0, 1)


def test_pair_report_for_birth_death():
    model, N = birth_death(1.0, 4.0), 60
    bound = convergence_certificate(model, GEOMETRIC, 10, 10.0)
    grid = default_grid(10.0, 100)
    report, (traj_a, traj_b) = pair_report(model, N, point_mass(N, 0), point_mass(N, 1), grid, bound, pair=(0, 1))
    assert report.holds is True
    assert report.bound[0] == pytest.approx(2.0)
    assert report.tv_monotonicity_excess <= 1e-9
    assert report.normalization_drift <= 1e-9
    assert all(row[-1] == 1 for row in report.rows())
    assert report.summary()["pair"] == [0, 1]

    u = compute_u(traj_a.probs, traj_b.probs)
    contraction = sign_interval_contraction(model, N, grid, u, GEOMETRIC)
    assert contraction.intervals >= 1
    assert contraction.holds


@pytest.mark.slow
def test_sign_interval_contraction_for_pair_service():
    # B* has negative off-diagonal entries here, so the sign pattern of u matters
    model, N = pair_service(1.0, 4.0), 150
    family = ScalingFamily(ScalingRule.PAIR_SERVICE, 2.0)
    grid = default_grid(25.0, 512)
    traj_a = integrate(model, N, point_mass(N, 0), 25.0, tol=1e-10, grid=grid)
    traj_b = integrate(model, N, point_mass(N, 50), 25.0, tol=1e-10, grid=grid)
    contraction = sign_interval_contraction(model, N, grid, compute_u(traj_a.probs, traj_b.probs), family)
    assert contraction.intervals >= 2
    assert contraction.checks > 0
    assert contraction.holds


def test_pair_report_with_identical_starts():
    model, N = pair_service(1.0, 4.0), 30
    bound = convergence_certificate(model, ScalingFamily(ScalingRule.PAIR_SERVICE, 2.0), 12, 5.0)
    p0 = point_mass(N, 3)
    report, _ = pair_report(model, N, p0, p0, default_grid(5.0, 50), bound)
    assert report.holds is True
    assert not report.gap1.any()
    assert report.min_margin == float("inf")
    assert np.isnan(report.fitted_rate)


def test_pair_report_without_certificate():
    model, N = pair_service(1.0, 1.0), 20
    bound = convergence_certificate(model, ScalingFamily(ScalingRule.PAIR_SERVICE, 2.0), 12, 5.0)
    report, _ = pair_report(model, N, point_mass(N, 0), point_mass(N, 5), default_grid(2.0, 20), bound)
    assert report.holds is None
    assert {row[-1] for row in report.rows()} == {"na"}
    assert report.summary()["holds"] == "na"


def test_doubling_with_zero_rates():
    report = truncation_doubling(birth_death(0.0, 0.0), 10, point_mass(10, 4), 5.0)
    assert report.max_gap == 0.0 and not report.flagged


def test_doubling_accepts_ample_truncation():
    report = truncation_doubling(birth_death(1.0, 4.0), 150, point_mass(150, 0), 10.0)
    assert report.max_gap <= 1e-8 and not report.flagged


def test_doubling_flags_explosive_chain():
    report = truncation_doubling(birth_death(4.0, 1.0), 20, point_mass(20, 0), 10.0)
    assert report.flagged
    assert report.max_gap > 1e-2
