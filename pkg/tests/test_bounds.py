import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from services.bounds.alpha import (
    HEURISTIC,
    PatternLimitError,
    alpha_for_D,
    alpha_of_matrix,
    alpha_star,
    alpha_star_detail,
    alpha_star_trace,
)
from services.bounds.certificate import convergence_certificate
from services.bounds.envelope import (
    APERIODIC,
    CONSTANT,
    PERIODIC,
    analysis_grid,
    envelope_excess,
    fit_envelope,
)
from services.bounds.example import example_alpha, example_alpha_average, example_terms, optimal_delta
from services.bounds.scaling import ScalingFamily, ScalingRule, block_patterns, enumerate_patterns
from services.bounds.sweep import sweep_delta
from services.chain.chain_model import ChainModel
from services.rates.rate_function import PiecewiseConstant, Sinusoidal
from services.transform.conjugation import bstar_block
from tests.factories import PERIODIC_PAIR_SERVICE_BETA, birth_death, pair_service, periodic_pair_service

PAIR = ScalingFamily(ScalingRule.PAIR_SERVICE, 2.0)
GEOMETRIC = ScalingFamily(ScalingRule.GEOMETRIC, 2.0)


# scaling families


def test_pair_service_profiles_and_weights():
    np.testing.assert_array_equal(PAIR.profiles(4), [[1, 2, 4, 8], [1, 0.5, 2, 4]])
    np.testing.assert_array_equal(PAIR.d_star(4), [1, 2, 4, 8])
    assert PAIR.d_inf(12) == 0.5
    assert PAIR.d_hat(12) == 4.0
    assert GEOMETRIC.d_inf(12) == 1.0
    assert GEOMETRIC.d_hat(12) == 2.0


def test_pair_service_magnitudes_follow_leading_signs():
    np.testing.assert_array_equal(PAIR.magnitudes(np.array([1, 1, -1, 1])), [1, 0.5, 2, 4])
    np.testing.assert_array_equal(PAIR.magnitudes(np.array([1, -1, -1, 1])), [1, 2, 4, 8])
    np.testing.assert_array_equal(PAIR.signed_diagonal(np.array([-1, -1, 1])), [-1, -0.5, 2])
    literal = ScalingFamily(ScalingRule.PAIR_SERVICE_LITERAL, 2.0)
    np.testing.assert_array_equal(literal.magnitudes(np.array([1, 1, -1])), [1, 2, 4])
    np.testing.assert_array_equal(literal.magnitudes(np.array([1, 1, 1])), [1, 0.5, 2])


@pytest.mark.parametrize("delta", [1.0, 0.5, float("inf"), float("nan")])
def test_delta_must_exceed_one(delta):
    with pytest.raises(ValueError, match="delta"):
        ScalingFamily(ScalingRule.GEOMETRIC, delta)


def test_pattern_enumeration_order():
    patterns = enumerate_patterns(3, 0, 4)
    np.testing.assert_array_equal(patterns, [[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]])
    S = 7
    assert len(block_patterns(S)) == 1 + (S - 1) + (S - 1) * (S - 2) // 2
    assert np.all(block_patterns(S)[:, 0] == 1)


# alpha_D and alpha*


def test_alpha_for_D_examples():
    model = birth_death(1.0, 4.0)
    assert alpha_for_D(model, 10, 2.0 ** np.arange(10), 0.0) == pytest.approx(1.0, abs=1e-14)
    assert alpha_for_D(model, 10, np.ones(10), 0.0) == pytest.approx(0.0, abs=1e-14)
    pair_service_D = PAIR.signed_diagonal(np.ones(12))
    assert alpha_for_D(pair_service(1.0, 4.0), 12, pair_service_D, 0.0) >= 0.5 - 1e-12


def test_block_size_below_band_rejected():
    with pytest.raises(ValueError, match="R\\+2"):
        alpha_star(pair_service(), PAIR, 3, 0.0)


@seed(5)
@settings(max_examples=200, deadline=None)
@given(
    B=arrays(np.float64, (5, 5), elements=st.floats(-5.0, 5.0)),
    D=arrays(np.float64, 5, elements=st.floats(0.1, 10.0)),
    signs=arrays(np.int8, 5, elements=st.sampled_from([-1, 1])),
    c=st.floats(0.1, 10.0),
)
def test_alpha_invariant_under_flip_and_scale(B, D, signs, c):
    signed = signs * D
    reference = alpha_of_matrix(B, signed)
    assert alpha_of_matrix(B, -signed) == pytest.approx(reference, abs=1e-12)
    assert alpha_of_matrix(B, c * signed) == pytest.approx(reference, rel=1e-12, abs=1e-11)


def all_pattern_alphas(bstar: np.ndarray, family=None) -> np.ndarray:
    S = bstar.shape[0]
    patterns = enumerate_patterns(S, 0, 1 << (S - 1))
    diagonals = patterns if family is None else family.signed_diagonal(patterns)
    return np.array([alpha_of_matrix(bstar, D) for D in diagonals])


def test_geometric_shortcut_for_birth_death():
    result = alpha_star_detail(birth_death(1.0, 4.0), GEOMETRIC, 10, 0.0)
    assert result.shortcut
    assert result.alpha == pytest.approx(1.0, abs=1e-14)
    assert result.pattern == (1,) * 10


def test_geometric_shortcut_agrees_with_full_enumeration():
    model, S = birth_death(1.0, 4.0), 10
    alphas = all_pattern_alphas(bstar_block(model, S, 0.0).values, GEOMETRIC)
    assert alphas.size == 512
    # index 0 is the all-positive pattern
    assert alphas[0] == pytest.approx(alphas.min(), abs=1e-12)
    assert alpha_star(model, GEOMETRIC, S, 0.0) == pytest.approx(alphas.min(), abs=1e-12)


@pytest.mark.parametrize("rule", [ScalingRule.GEOMETRIC, ScalingRule.PAIR_SERVICE])
def test_alpha_star_is_continuous_as_delta_tends_to_one(rule):
    model, S = pair_service(1.0, 4.0), 8
    bstar = bstar_block(model, S, 0.0).values
    limit = all_pattern_alphas(bstar).min()
    column_mass = np.abs(bstar).sum(axis=0).max()
    for eps in (1e-2, 1e-4, 1e-6):
        delta = 1.0 + eps
        value = alpha_star(model, ScalingFamily(rule, delta), S, 0.0)
        # every ratio |d_i| / |d_j| lies within [delta^-S, delta^S]
        assert abs(value - limit) <= (delta**S - 1.0) * column_mass + 1e-12


def test_pair_service_alpha_star():
    result = alpha_star_detail(pair_service(1.0, 4.0), PAIR, 12, 0.0)
    assert result.exhaustive and not result.shortcut
    assert result.alpha == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("delta", [1.5, 2.0, 2.5, 3.0])
@pytest.mark.parametrize("S", [6, 10, 14])
def test_pair_service_alpha_star_dominates_closed_form(delta, S):
    family = ScalingFamily(ScalingRule.PAIR_SERVICE, delta)
    assert alpha_star(pair_service(1.0, 4.0), family, S, 0.0) >= example_alpha(1.0, 4.0, delta) - 1e-9


def test_literal_rule_does_not_certify():
    literal = ScalingFamily(ScalingRule.PAIR_SERVICE_LITERAL, 2.0)
    assert alpha_star(pair_service(1.0, 4.0), literal, 12, 0.0) < 0.0


def test_exhaustive_limit():
    with pytest.raises(PatternLimitError, match="mode='heuristic'"):
        alpha_star(pair_service(), PAIR, 23, 0.0)


def test_heuristic_mode_is_flagged_and_never_below_exhaustive():
    model = pair_service(1.0, 4.0)
    heuristic = alpha_star_detail(model, PAIR, 12, 0.0, mode=HEURISTIC)
    assert not heuristic.exhaustive
    assert heuristic.alpha >= alpha_star(model, PAIR, 12, 0.0) - 1e-12
    trace = alpha_star_trace(model, PAIR, 30, [0.0], mode=HEURISTIC)
    assert not trace.exhaustive


def test_alpha_star_is_continuous_in_time():
    model = periodic_pair_service()
    trace = alpha_star_trace(model, PAIR, 10, np.linspace(0.0, 1.0, 201))
    # entries are affine in lambda(t), whose slope is at most pi
    assert np.abs(np.diff(trace.values)).max() <= 50.0 / 200


# envelopes


def test_constant_envelope():
    env = fit_envelope(np.array([0.0]), np.array([0.5]), CONSTANT)
    assert (env.M, env.beta) == (1.0, 0.5)
    assert env.certified
    assert not fit_envelope(np.array([0.0]), np.array([-0.1]), CONSTANT).certified


def test_periodic_envelope_of_sinusoid():
    t = np.linspace(0.0, 1.0, 2049)
    env = fit_envelope(t, 0.5 + 0.3 * np.sin(2 * np.pi * t), PERIODIC)
    assert env.beta == pytest.approx(0.5, abs=1e-12)
    assert env.M == pytest.approx(np.exp(0.3 / np.pi), rel=1e-5)


def test_envelope_holds_on_random_pairs():
    rng = np.random.default_rng(8)
    t = np.linspace(0.0, 20.0, 801)
    alpha = 0.4 + 0.3 * np.sin(t) + 0.2 * np.cos(3.1 * t)
    pairs = np.sort(rng.integers(0, t.size, (1000, 2)), axis=1)
    env = fit_envelope(t, alpha, APERIODIC)
    assert envelope_excess(t, alpha, env, pairs) <= 1.0 + 1e-12

    periodic_t = np.linspace(0.0, 1.0, 513)
    periodic_alpha = 0.5 + 0.3 * np.sin(2 * np.pi * periodic_t)
    env = fit_envelope(periodic_t, periodic_alpha, PERIODIC)
    pairs = np.sort(rng.integers(0, periodic_t.size, (1000, 2)), axis=1)
    assert envelope_excess(periodic_t, periodic_alpha, env, pairs) <= 1.0 + 1e-12


def test_analysis_grid_modes():
    assert analysis_grid(pair_service(), 10.0).mode == CONSTANT
    periodic = analysis_grid(periodic_pair_service(), 10.0, grid_points=64)
    assert periodic.mode == PERIODIC and periodic.period == 1.0 and periodic.times.size == 65
    model = ChainModel.pair_service(PiecewiseConstant((2.5,), (1.0, 2.0)), 4.0)
    aperiodic = analysis_grid(model, 10.0, grid_points=8)
    assert aperiodic.mode == APERIODIC and 2.5 in aperiodic.times


# certificates


def test_pair_service_certificate():
    bound = convergence_certificate(pair_service(1.0, 4.0), PAIR, 12, 25.0)
    assert bound.certified
    assert bound.d == 0.5
    assert bound.M == 1.0
    assert bound.beta == pytest.approx(0.5, abs=1e-12)
    assert bound.prefactor == pytest.approx(4.0, abs=1e-11)
    assert bound.to_json()["family"] == "pair-service"


def test_certificate_bound_values():
    bound = convergence_certificate(pair_service(1.0, 4.0), PAIR, 12, 25.0)
    p0a, p0b = np.zeros(6), np.zeros(6)
    p0a[0], p0b[5] = 1.0, 1.0
    diff_norm, u_norm = bound.initial_norms(p0a, p0b)
    assert diff_norm == 16.0  # d*(5) = 2^4
    assert u_norm == 1 + 2 + 4 + 8 + 16
    np.testing.assert_allclose(bound.bound(np.array([0.0, 2.0]), p0a, p0b), 4.0 * 31 * np.exp([0.0, -1.0]))
    assert not bound.bound(1.0, p0a, p0a).any()


@pytest.mark.parametrize("lam, mu", [(1.0, 1.0), (0.0, 0.0)])
def test_uncertified_cases(lam, mu):
    bound = convergence_certificate(pair_service(lam, mu), PAIR, 12, 10.0)
    assert not bound.certified
    assert np.isinf(bound.bound(1.0, np.array([1.0, 0.0]), np.array([0.0, 1.0])))


def test_periodic_certificate_matches_average():
    bound = convergence_certificate(periodic_pair_service(), PAIR, 12, 20.0, grid_points=512)
    assert bound.envelope_mode == PERIODIC
    assert bound.beta == pytest.approx(PERIODIC_PAIR_SERVICE_BETA, abs=1e-4)
    assert bound.M > 1.0


def test_exact_period_average():
    average = example_alpha_average(Sinusoidal(base=1.0, amp=0.5, freq=1.0), 4.0, 2.0, 1.0)
    assert average == pytest.approx(PERIODIC_PAIR_SERVICE_BETA, abs=1e-12)
    assert average == pytest.approx(0.4559196, abs=1e-8)


def test_beta_override_is_recorded():
    bound = convergence_certificate(pair_service(1.0, 4.0), PAIR, 12, 25.0).with_beta(5.0)
    assert bound.beta_overridden and bound.beta == 5.0


# closed-form example and sweep


def test_example_terms_and_optimum():
    np.testing.assert_allclose(example_terms(1.0, 4.0, 2.0), [0.5, 9.0, 1.0])
    assert example_alpha(1.0, 4.0, 3.0) == pytest.approx(2.0 / 3.0)
    assert optimal_delta(1.0, 4.0) == (2.0, 0.5)
    with pytest.raises(ValueError, match="0 < lambda < mu"):
        optimal_delta(1.0, 1.0)


def test_sweep_over_delta():
    table = sweep_delta(pair_service(1.0, 4.0), ScalingRule.PAIR_SERVICE, 12, [1.5, 2.0, 2.5])
    np.testing.assert_allclose([row.beta for row in table.rows], [1 / 3, 0.5, 0.6], atol=1e-12)
    assert table.best.delta == 2.5
    assert np.all(np.diff([row.beta for row in table.rows]) > 0)
    single = sweep_delta(pair_service(1.0, 4.0), ScalingRule.PAIR_SERVICE, 12, [2.0])
    assert single.best_index == 0 and single.best.certified


def test_enlarging_delta_grid_never_lowers_best_beta():
    grids = ([2.0], [1.5, 2.0], [1.5, 2.0, 2.5], [3.0, 1.2, 1.5, 2.0, 2.5])
    best = [sweep_delta(pair_service(1.0, 4.0), ScalingRule.PAIR_SERVICE, 12, grid).best.beta for grid in grids]
    assert np.all(np.diff(best) >= 0.0)
    assert best[-1] >= 0.6 - 1e-12


def test_sweep_without_certificate():
    table = sweep_delta(pair_service(1.0, 1.0), ScalingRule.PAIR_SERVICE, 12, [1.5, 2.0, 2.5])
    assert not table.any_certified


def test_sweep_rejects_empty_grid():
    with pytest.raises(ValueError, match="must not be empty"):
        sweep_delta(pair_service(), ScalingRule.PAIR_SERVICE, 12, [])
