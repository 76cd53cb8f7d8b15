import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from blindssr import distributions as D
from blindssr.errors import ConsistencyError, DomainError, InsufficientDataError
from blindssr.estimators import (
    EstimatorKind,
    PilotSummary,
    adjusted_variance,
    conservative_upper_limit,
    infeasible_upper_limit,
    noncentrality,
    one_sample_variance,
    os_variance_expectation,
    split_counts,
)


def outcomes_with_variance(n, variance, mean, seed=0):
    """``n`` outcomes whose sample variance is ``variance`` up to rounding."""
    z = np.random.default_rng(seed).standard_normal(n)
    z = (z - z.mean()) / z.std(ddof=1)
    return list(mean + math.sqrt(variance) * z)


# --- one-sample variance ----------------------------------------------------

def test_constant_outcomes_have_zero_variance():
    assert one_sample_variance([3.25] * 9).value == 0.0


def test_two_point_hand_value():
    est = one_sample_variance([0.0, 2.0])
    assert est.value == 2.0
    assert est.kind is EstimatorKind.ONE_SAMPLE


def test_tiny_variance_around_large_mean():
    # apparent diffusion coefficients: mean ~1.5e-3, variance ~3.67e-7
    data = outcomes_with_variance(12, 3.67e-7, mean=1.5e-3, seed=3)
    assert one_sample_variance(data).value == pytest.approx(3.67e-7, rel=1e-12)
    # no cancellation even with an offset far above the spread
    shifted = [y + 1e4 for y in outcomes_with_variance(12, 3.67e-7, mean=0.0, seed=4)]
    assert one_sample_variance(shifted).value == pytest.approx(3.67e-7, rel=1e-6)


def test_one_sample_variance_matches_numpy():
    data = list(np.random.default_rng(5).normal(3.0, 2.0, 57))
    assert one_sample_variance(data).value == pytest.approx(np.var(data, ddof=1), rel=1e-13)


def test_one_sample_variance_needs_two_finite_values():
    with pytest.raises(InsufficientDataError):
        one_sample_variance([1.0])
    with pytest.raises(DomainError):
        one_sample_variance([1.0, float("nan")])


# --- pilot summary ----------------------------------------------------------

def test_pilot_summary_validation():
    with pytest.raises(InsufficientDataError):
        PilotSummary(1, 1, 0, 0.5)
    with pytest.raises(ConsistencyError):
        PilotSummary(10, 4, 5, 0.5)
    with pytest.raises(DomainError):
        PilotSummary(10, 10, 0, 0.5)
    with pytest.raises(DomainError):
        PilotSummary(10, 5, 5, -1.0)
    with pytest.raises(DomainError):
        PilotSummary(10.5, 5, 5, 1.0)


def test_split_counts_rules():
    assert split_counts(12, 0.5) == (6, 6)
    assert split_counts(11, 0.5) == (6, 5)      # tie goes to arm 1
    assert split_counts(10, 2 / 3) == (7, 3)
    assert split_counts(10, 1 / 3) == (3, 7)
    assert split_counts(2, 0.99) == (1, 1)      # both arms keep a subject
    with pytest.raises(InsufficientDataError):
        split_counts(1)


def test_from_outcomes_uses_split():
    pilot = PilotSummary.from_outcomes([1.0, 2.0, 4.0, 8.0, 3.0])
    assert (pilot.n_int, pilot.n1_int, pilot.n0_int) == (5, 3, 2)
    pilot = PilotSummary.from_outcomes([1.0, 2.0, 4.0, 8.0, 3.0], n0_int=4)
    assert pilot.n1_int == 1


# --- adjusted variance ------------------------------------------------------

def test_adjusted_zero_delta_is_identity():
    pilot = PilotSummary(10, 5, 5, 1.3)
    assert adjusted_variance(pilot, 0.0).value == 1.3


def test_adjusted_arithmetic():
    est = adjusted_variance(PilotSummary(10, 5, 5, 1.0), 1.0)
    assert est.value == pytest.approx(1 - 25 / 90, abs=1e-15)
    assert not est.clamped


def test_adjusted_clamps_negative():
    assert 0.1 - 4 * 100 / 380 < 0
    est = adjusted_variance(PilotSummary(20, 10, 10, 0.1), 2.0)
    assert est.value == 0.0 and est.clamped


# --- upper confidence limits ------------------------------------------------

@pytest.mark.parametrize("os_var, n_int, conf, printed", [
    (3.67e-7, 12, 0.62, "4.48e-07"),
    (0.192, 22, 0.57, "2.10e-01"),
])
def test_conservative_limit_case_values(os_var, n_int, conf, printed):
    pilot = PilotSummary(n_int, n_int // 2, n_int // 2, os_var)
    est = conservative_upper_limit(pilot, conf)
    assert f"{est.value:.2e}" == printed
    assert est.kind is EstimatorKind.CONSERVATIVE_UCL and est.confidence == conf


def test_conservative_limit_median_ratio_slightly_above_one():
    pilot = PilotSummary(2001, 1001, 1000, 1.0)
    ratio = conservative_upper_limit(pilot, 0.5).value
    median = stats.chi2.median(2000)
    assert ratio == pytest.approx(2000 / median, rel=1e-9)
    assert 1.0 < ratio < 1.001


def test_conservative_limit_domain():
    with pytest.raises(DomainError):
        conservative_upper_limit(PilotSummary(10, 5, 5, 1.0), 1.0)


def test_infeasible_limit_reduces_at_zero_effect():
    pilot = PilotSummary(10, 5, 5, 1.7)
    assert infeasible_upper_limit(pilot, 0.6, 0.0).value == pytest.approx(
        conservative_upper_limit(pilot, 0.6).value, rel=1e-12)


def test_infeasible_limit_oracle_value():
    pilot = PilotSummary(10, 5, 5, 1.0)
    est = infeasible_upper_limit(pilot, 0.60, 0.5)
    assert noncentrality(0.5, 5, 5) == pytest.approx(0.625)
    assert est.value == pytest.approx(9 / stats.ncx2.isf(0.60, 9, 0.625), rel=1e-8)
    assert not est.blind_estimable


@settings(max_examples=50, deadline=None)
@given(n_half=st.integers(2, 60), effect=st.floats(0.01, 3.0), conf=st.floats(0.5, 0.95),
       os_var=st.floats(1e-6, 1e3))
def test_limit_ordering(n_half, effect, conf, os_var):
    pilot = PilotSummary(2 * n_half, n_half, n_half, os_var)
    cons = conservative_upper_limit(pilot, conf).value
    inf = infeasible_upper_limit(pilot, conf, effect).value
    assert cons > os_var
    assert inf <= cons * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 2**32 - 1), conf=st.floats(0.3, 0.9),
       delta=st.floats(0.0, 2.0))
def test_scaling_equivariance(scale, seed, conf, delta):
    data = list(np.random.default_rng(seed).normal(0.0, 1.0, 14))
    scaled = [scale * y for y in data]
    p, q = PilotSummary.from_outcomes(data), PilotSummary.from_outcomes(scaled)
    c2 = scale * scale
    assert q.os_variance == pytest.approx(c2 * p.os_variance, rel=1e-11)
    assert conservative_upper_limit(q, conf).value == pytest.approx(
        c2 * conservative_upper_limit(p, conf).value, rel=1e-11)
    assert infeasible_upper_limit(q, conf, 0.4).value == pytest.approx(
        c2 * infeasible_upper_limit(p, conf, 0.4).value, rel=1e-11)
    a, b = adjusted_variance(p, delta), adjusted_variance(q, scale * delta)
    assert b.value == pytest.approx(c2 * a.value, rel=1e-9, abs=1e-12 * c2)


# --- expectation and sampling law ------------------------------------------

def test_expectation_formula():
    assert os_variance_expectation(2.5, 0.0, 4, 6) == 2.5
    assert os_variance_expectation(1.0, 1.0, 5, 5) == pytest.approx(1 + 25 / 90)


def _pilot_variances(sigma2, delta, n1, n0, reps, seed):
    rng = np.random.default_rng(seed)
    sd = math.sqrt(sigma2)
    y = np.concatenate([rng.normal(delta, sd, (reps, n1)), rng.normal(0.0, sd, (reps, n0))], axis=1)
    return y.var(axis=1, ddof=1)


def test_expectation_monte_carlo():
    values = np.concatenate([_pilot_variances(2.038, 1.0, 10, 10, 200_000, seed=s) for s in range(5)])
    assert values.mean() == pytest.approx(os_variance_expectation(2.038, 1.0, 10, 10), abs=0.01)


@pytest.mark.parametrize("conf", [0.55, 0.62, 0.80])
def test_conservative_coverage(conf):
    sigma2, delta, n1, n0, reps = 2.038, 1.0, 5, 5, 100_000
    os_var = _pilot_variances(sigma2, delta, n1, n0, reps, seed=17)
    limits = os_var * (n1 + n0 - 1) / D.chi2_quantile_upper(n1 + n0 - 1, conf)
    cover = np.mean(limits >= sigma2)
    assert cover >= conf - 3 * math.sqrt(conf * (1 - conf) / reps)


@pytest.mark.parametrize("conf", [0.55, 0.62, 0.80])
def test_infeasible_exact_coverage(conf):
    sigma2, delta, n1, n0, reps = 2.038, 1.0, 5, 5, 100_000
    os_var = _pilot_variances(sigma2, delta, n1, n0, reps, seed=23)
    pilot = PilotSummary(n1 + n0, n1, n0, 1.0)
    multiplier = infeasible_upper_limit(pilot, conf, delta / math.sqrt(sigma2)).value
    cover = np.mean(os_var * multiplier >= sigma2)
    assert abs(cover - conf) <= 3 * math.sqrt(conf * (1 - conf) / reps)


def test_scaled_os_variance_follows_noncentral_law():
    sigma2, delta, n1, n0 = 2.038, 1.0, 6, 4
    n = n1 + n0
    scaled = _pilot_variances(sigma2, delta, n1, n0, 100_000, seed=29) * (n - 1) / sigma2
    law = D.NoncentralChiSq(n - 1, noncentrality(delta / math.sqrt(sigma2), n1, n0))
    result = stats.kstest(scaled, np.vectorize(law.cdf))
    assert result.pvalue > 1e-3
