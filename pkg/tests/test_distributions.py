import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate, stats

from blindssr import distributions as D
from blindssr.errors import DomainError


# --- standard normal -------------------------------------------------------

def test_normal_cdf_anchors():
    assert D.std_normal_cdf(0.0) == 0.5
    erf_oracle = 0.5 * (1.0 + math.erf(1.959964 / math.sqrt(2.0)))
    assert D.std_normal_cdf(1.959964) == pytest.approx(erf_oracle, abs=1e-12)
    assert D.std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)


def test_normal_far_tail_within_mills_bounds():
    x = -8.0
    phi = math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    value = D.std_normal_cdf(x)
    assert value < 1e-15
    assert phi / abs(x) * (1 - 1 / x ** 2) <= value <= phi / abs(x)


@pytest.mark.parametrize("p, expected", [(0.5, 0.0), (0.025, 1.95996), (0.80, -0.84162)])
def test_normal_quantile_anchors(p, expected):
    assert D.std_normal_quantile_upper(p) == pytest.approx(expected, abs=5e-6)


@pytest.mark.parametrize("p", [1e-12, 1e-6, 0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999999])
def test_normal_quantile_round_trip(p):
    z = D.std_normal_quantile_upper(p)
    assert D.std_normal_cdf(z) == pytest.approx(1.0 - p, abs=1e-10)
    assert z == pytest.approx(stats.norm.isf(p), abs=1e-9)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_normal_quantile_domain(bad):
    with pytest.raises(DomainError):
        D.std_normal_quantile_upper(bad)


def test_normal_cdf_rejects_non_finite():
    with pytest.raises(DomainError):
        D.std_normal_cdf(float("inf"))


# --- central chi-squared ---------------------------------------------------

def test_chi2_cdf_anchors():
    assert D.chi2_cdf(D.CentralChiSq(5), 0.0) == 0.0
    assert D.chi2_cdf(D.CentralChiSq(5), -3.0) == 0.0
    assert D.chi2_cdf(D.CentralChiSq(2), 2 * math.log(2)) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("df, q, os_variance, limit, half_unit", [
    (11, 0.62, 3.67e-7, 4.48e-7, 0.005e-7),
    (21, 0.57, 0.192, 0.210, 0.0005),
])
def test_chi2_quantile_back_calculated(df, q, os_variance, limit, half_unit):
    # d = os_variance * df / limit, where the limit is printed to 3 digits;
    # the printed rounding interval bounds d
    d = D.chi2_quantile_upper(df, q)
    assert os_variance * df / (limit + half_unit) <= d <= os_variance * df / (limit - half_unit)
    assert D.chi2_cdf(D.CentralChiSq(df), d) == pytest.approx(1 - q, abs=1e-10)


def test_chi2_cdf_at_back_calculated_point():
    assert D.chi2_cdf(D.CentralChiSq(11), 9.011) == pytest.approx(0.38, abs=0.002)


def test_chi2_median_df5_by_independent_bisection():
    lo, hi = 0.0, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if stats.chi2.cdf(mid, 5) < 0.5:
            lo = mid
        else:
            hi = mid
    assert D.chi2_quantile_upper(5, 0.5) == pytest.approx(lo, abs=1e-9)
    assert lo == pytest.approx(4.3515, abs=1e-4)


@pytest.mark.parametrize("df", [1, 2, 3, 7, 11, 21, 59, 150, 349])
def test_chi2_cdf_sf_pdf_against_scipy(df):
    for w in np.concatenate([np.linspace(0.01, 4 * df + 40, 41), [1e-6, df]]):
        dist = D.CentralChiSq(df)
        assert dist.cdf(w) == pytest.approx(stats.chi2.cdf(w, df), abs=1e-12)
        assert dist.sf(w) == pytest.approx(stats.chi2.sf(w, df), abs=1e-12, rel=1e-9)
        assert dist.pdf(w) == pytest.approx(stats.chi2.pdf(w, df), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("df", [1, 3, 9, 21, 99, 299])
def test_chi2_quantile_round_trip_and_scipy(df):
    dist = D.CentralChiSq(df)
    for q in np.round(np.arange(0.01, 1.0, 0.01), 2):
        d = dist.quantile_upper(q)
        assert dist.cdf(d) == pytest.approx(1 - q, abs=1e-9)
        assert d == pytest.approx(stats.chi2.isf(q, df), rel=1e-8)


def test_chi2_quantile_strictly_decreasing():
    values = [D.chi2_quantile_upper(9, q) for q in np.linspace(0.01, 0.99, 99)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("bad", [0.0, 1.0, -1e-9, 2.0])
def test_chi2_quantile_domain(bad):
    with pytest.raises(DomainError):
        D.chi2_quantile_upper(5, bad)


def test_chi2_df_must_be_positive_integer():
    with pytest.raises(DomainError):
        D.CentralChiSq(0)
    with pytest.raises(DomainError):
        D.CentralChiSq(2.5)


# --- noncentral chi-squared ------------------------------------------------

def test_noncentral_zero_lambda_reduces_to_central():
    nc = D.NoncentralChiSq(9, 0.0)
    c = D.CentralChiSq(9)
    for w in np.linspace(0.0, 40.0, 81):
        assert nc.cdf(w) == pytest.approx(c.cdf(w), abs=1e-15)
        if w > 0:
            assert nc.pdf(w) == pytest.approx(c.pdf(w), rel=1e-13)
    assert D.NoncentralChiSq(3, 0.0).pdf(2.5) == pytest.approx(stats.chi2.pdf(2.5, 3), rel=1e-12)
    for q in (0.05, 0.4, 0.62, 0.95):
        assert nc.quantile_upper(q) == pytest.approx(c.quantile_upper(q), rel=1e-10)


def test_noncentral_cdf_below_central_example():
    assert D.noncentral_chi2_cdf(D.NoncentralChiSq(9, 2.5), 9.0) <= D.chi2_cdf(D.CentralChiSq(9), 9.0)


def _mc_noncentral_draws(df, lam, n, seed, chunk=1_000_000):
    # sum of df squared standard normals, the first shifted by sqrt(lam)
    rng = np.random.default_rng(seed)
    out = []
    for start in range(0, n, chunk):
        size = min(chunk, n - start)
        z = rng.standard_normal((size, df))
        z[:, 0] += math.sqrt(lam)
        out.append(np.einsum("ij,ij->i", z, z))
    return np.concatenate(out)


@pytest.fixture(scope="module")
def mc_draws_9_25():
    return _mc_noncentral_draws(9, 2.5, 10_000_000, seed=11)


def test_noncentral_cdf_monte_carlo_oracle(mc_draws_9_25):
    empirical = np.mean(mc_draws_9_25 <= 11.5)
    assert D.noncentral_chi2_cdf(D.NoncentralChiSq(9, 2.5), 11.5) == pytest.approx(empirical, abs=3e-4)


def test_noncentral_quantile_monte_carlo_oracle(mc_draws_9_25):
    empirical = np.quantile(mc_draws_9_25, 0.40)
    d = D.noncentral_chi2_quantile_upper(D.NoncentralChiSq(9, 2.5), 0.60)
    assert d == pytest.approx(empirical, rel=1e-3)


@pytest.mark.parametrize("df, lam", [(1, 0.3), (4, 1.0), (9, 2.5), (21, 7.0), (59, 40.0), (11, 300.0)])
def test_noncentral_against_scipy(df, lam):
    dist = D.NoncentralChiSq(df, lam)
    for w in np.linspace(0.05, df + lam + 8 * math.sqrt(2 * (df + 2 * lam)), 37):
        assert dist.cdf(w) == pytest.approx(stats.ncx2.cdf(w, df, lam), abs=1e-10)
        assert dist.pdf(w) == pytest.approx(stats.ncx2.pdf(w, df, lam), rel=1e-8, abs=1e-15)
    for q in (0.01, 0.3, 0.6, 0.99):
        d = dist.quantile_upper(q)
        assert dist.cdf(d) == pytest.approx(1 - q, abs=1e-9)
        assert d == pytest.approx(stats.ncx2.isf(q, df, lam), rel=1e-7)


@pytest.mark.parametrize("df, lam", [(1, 0.5), (3, 0.0), (7, 1.0), (25, 12.0)])
def test_noncentral_pdf_normalised(df, lam):
    dist = D.NoncentralChiSq(df, lam)
    upper = dist.quantile_upper(1e-14)
    # scipy quad as an independent integrator; split at 1 for the df=1 spike
    head, _ = sp_integrate.quad(dist.pdf, 0.0, 1.0, epsabs=1e-13, limit=200)
    tail, _ = sp_integrate.quad(dist.pdf, 1.0, upper, epsabs=1e-13, limit=200)
    assert head + tail == pytest.approx(1.0, abs=1e-8)


def test_noncentral_pdf_matches_cdf_derivative():
    dist = D.NoncentralChiSq(7, 1.0)
    h = 1e-5
    fd = (dist.cdf(5 + h) - dist.cdf(5 - h)) / (2 * h)
    assert dist.pdf(5.0) == pytest.approx(fd, abs=1e-6)


def test_noncentral_pdf_rejects_negative_argument():
    with pytest.raises(DomainError):
        D.noncentral_chi2_pdf(D.NoncentralChiSq(3, 1.0), -0.5)


def test_noncentral_lambda_must_be_nonnegative():
    with pytest.raises(DomainError):
        D.NoncentralChiSq(3, -1.0)


def test_noncentral_cdf_below_central_grid():
    for df in range(3, 61):
        central = D.CentralChiSq(df)
        grid = np.linspace(0.0, df + 60.0, 200)
        for lam in (0.1, 1.0, 5.0, 20.0):
            nc = D.NoncentralChiSq(df, lam)
            for w in grid:
                assert nc.cdf(w) <= central.cdf(w) + 1e-15


@pytest.mark.parametrize("df, lam", [(3, 0.1), (11, 1.2), (40, 20.0)])
def test_noncentral_quantile_dominates_central(df, lam):
    for q in (0.05, 0.38, 0.62, 0.95):
        assert D.NoncentralChiSq(df, lam).quantile_upper(q) >= D.chi2_quantile_upper(df, q)


@pytest.mark.parametrize("df, lam", [(2, 0.5), (9, 2.5), (60, 20.0), (5, 150.0)])
def test_truncation_threshold_stability(df, lam):
    a = D.NoncentralChiSq(df, lam)
    b = D.NoncentralChiSq(df, lam, tail_mass=2 * D.DEFAULT_TAIL_MASS)
    for w in np.linspace(0.1, df + lam + 50, 60):
        assert abs(a.cdf(w) - b.cdf(w)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(df=st.integers(1, 200), lam=st.floats(0, 80), w1=st.floats(0, 500), w2=st.floats(0, 500))
def test_noncentral_cdf_monotone(df, lam, w1, w2):
    lo, hi = sorted((w1, w2))
    dist = D.NoncentralChiSq(df, lam)
    assert 0.0 <= dist.cdf(lo) <= dist.cdf(hi) <= 1.0


@settings(max_examples=40, deadline=None)
@given(df=st.integers(1, 300), lam=st.floats(0, 60), q=st.floats(0.01, 0.99))
def test_noncentral_quantile_round_trip_property(df, lam, q):
    dist = D.NoncentralChiSq(df, lam)
    assert dist.cdf(dist.quantile_upper(q)) == pytest.approx(1 - q, abs=1e-9)


# --- Student t --------------------------------------------------------------

@pytest.mark.parametrize("df", [1, 2, 5, 30, 300])
def test_t_median_is_zero(df):
    assert D.t_quantile_upper(df, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_t_cauchy_quartile_and_df30():
    assert D.t_quantile_upper(1, 0.25) == pytest.approx(1.0, abs=1e-9)
    assert D.t_quantile_upper(30, 0.025) == pytest.approx(2.0423, abs=5e-5)


@pytest.mark.parametrize("df", [1, 2, 3, 8, 20, 62, 346])
def test_t_quantile_against_scipy(df):
    for p in (0.001, 0.025, 0.1, 0.2, 0.5, 0.8, 0.9, 0.975):
        assert D.t_quantile_upper(df, p) == pytest.approx(stats.t.isf(p, df), abs=1e-9)
        assert D.t_sf(df, 1.3) == pytest.approx(stats.t.sf(1.3, df), abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, 1.0])
def test_t_quantile_domain(bad):
    with pytest.raises(DomainError):
        D.t_quantile_upper(5, bad)


@pytest.mark.parametrize("lam", [800.0, 5000.0])
def test_noncentral_large_lambda_no_underflow(lam):
    law = D.NoncentralChiSq(9, lam)
    sd = math.sqrt(law.variance())
    for w in (law.mean() - 2 * sd, law.mean(), law.mean() + 3 * sd):
        assert law.pdf(w) == pytest.approx(stats.ncx2.pdf(w, 9, lam), rel=1e-8)
        assert law.cdf(w) == pytest.approx(stats.ncx2.cdf(w, 9, lam), abs=1e-10)
    assert law.quantile_upper(0.6) == pytest.approx(stats.ncx2.isf(0.6, 9, lam), rel=1e-10)


def test_noncentral_cdf_at_smallest_subnormal():
    law = D.NoncentralChiSq(1, 1.0)
    assert law.cdf_sf(5e-324) == (0.0, 1.0)
    assert law.pdf(5e-324) > 0
