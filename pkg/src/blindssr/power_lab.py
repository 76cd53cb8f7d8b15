"""Operating characteristics of the re-estimation rules.

Three kinds of evaluation live here:

* closed-form asymptotic power (conditional on the final size, and
  marginal over the interim variance, for the conservative and the
  infeasible rule);
* full two-stage trial simulation, giving power and type I error of the
  final t-test;
* the sampling distribution of the re-estimated size, drawn straight from
  the noncentral chi-squared law of the one-sample variance.

Simulations split the replicates into fixed-size chunks, each with its own
child stream of a :class:`numpy.random.SeedSequence`, so results depend only
on ``(seed, replicates, chunk_size)`` and never on the number of worker
threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import math
import os

import numpy as np

from .calibration import calibrate_gamma, expected_power
from .design import Method, Rounding, allocate_many, reestimate, reestimate_many
from .distributions import (
    NoncentralChiSq,
    chi2_quantile_upper,
    std_normal_cdf,
    t_quantile_upper,
)
from .errors import DomainError
from .estimators import PilotSummary, noncentrality, split_counts

CHUNK_SIZE = 50_000
THREADS_ENV = "BLINDSSR_THREADS"


@dataclass(frozen=True)
class TruthScenario:
    """True state of nature: arm means and common variance."""

    mu1: float
    mu0: float
    sigma2: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DomainError(f"sigma2 must be positive, got {self.sigma2!r}")
        if not (math.isfinite(self.mu1) and math.isfinite(self.mu0)):
            raise DomainError("arm means must be finite")

    @classmethod
    def from_effect(cls, delta_true, sigma2, mu0=0.0):
        return cls(mu0 + delta_true, mu0, sigma2)

    @property
    def delta_true(self):
        return self.mu1 - self.mu0

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def effect_size(self):
        return self.delta_true / self.sigma


@dataclass(frozen=True)
class SimulationReport:
    """Monte Carlo summary.

    ``n_fin_*`` describe the final size of arm 1 (which is the per-arm size
    under balanced allocation); ``n_total_mean`` is the mean total.
    ``rejection_rate`` is ``None`` for sample-size-only runs.
    """

    kind: str
    method: str
    scenario: TruthScenario
    n_int: int
    n1_int: int
    n0_int: int
    replicates: int
    seed: int
    confidence: float | None
    rounding: str | None
    n_fin_mean: float
    n_fin_sd: float
    n_fin_quartiles: tuple
    n_total_mean: float
    rejection_rate: float | None = None
    rejection_se: float | None = None
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["scenario"] = {**asdict(self.scenario), "delta_true": self.scenario.delta_true}
        out["n_fin_quartiles"] = list(self.n_fin_quartiles)
        return out


# ---------------------------------------------------------------------------
# asymptotic formulas
# ---------------------------------------------------------------------------

def asymptotic_conditional_power(n_fin, scenario, spec):
    """Normal-approximation power of the final test given a total size."""
    if not n_fin > 0:
        raise DomainError(f"n_fin must be positive, got {n_fin!r}")
    se = math.sqrt(scenario.sigma2 * spec.allocation_factor / n_fin)
    return 1.0 - std_normal_cdf(spec.z_alpha - scenario.delta_true / se)


def _interim_counts(n_int, n1_int, n0_int, pi):
    if n1_int is None and n0_int is None:
        n1_int, n0_int = split_counts(n_int, pi)
    elif n1_int is None:
        n1_int = n_int - n0_int
    elif n0_int is None:
        n0_int = n_int - n1_int
    PilotSummary(n_int, n1_int, n0_int, 0.0)
    return int(n1_int), int(n0_int)


def asymptotic_power_proposed(confidence, n_int, scenario, spec, n1_int=None, n0_int=None):
    """Marginal asymptotic power of the conservative rule; the expectation is
    over the noncentral law of the scaled one-sample variance."""
    n1_int, n0_int = _interim_counts(n_int, n1_int, n0_int, spec.pi)
    lam = noncentrality(scenario.effect_size, n1_int, n0_int)
    d = chi2_quantile_upper(n_int - 1, confidence)
    return expected_power(d, NoncentralChiSq(n_int - 1, lam), spec,
                          scenario.delta_true / spec.delta)


def asymptotic_power_theoretical(confidence, n_int, scenario, spec, n1_int=None, n0_int=None):
    """Marginal asymptotic power of the infeasible (known-effect) rule."""
    n1_int, n0_int = _interim_counts(n_int, n1_int, n0_int, spec.pi)
    lam = noncentrality(scenario.effect_size, n1_int, n0_int)
    law = NoncentralChiSq(n_int - 1, lam)
    d = law.quantile_upper(confidence)
    return expected_power(d, law, spec, scenario.delta_true / spec.delta)


# ---------------------------------------------------------------------------
# simulation plumbing
# ---------------------------------------------------------------------------

def worker_count(threads=None):
    if threads is None:
        threads = os.environ.get(THREADS_ENV)
    try:
        threads = int(threads) if threads is not None else 1
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be an integer, got {threads!r}") from None
    return max(threads, 1)


def _chunks(replicates, chunk_size):
    full, rest = divmod(replicates, chunk_size)
    sizes = [chunk_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def _run_chunks(fn, replicates, seed, chunk_size, threads):
    sizes = _chunks(replicates, chunk_size)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), n) for s, n in zip(streams, sizes)]
    workers = worker_count(threads)
    if workers == 1 or len(jobs) == 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _validate_run(replicates, seed):
    if isinstance(replicates, bool) or int(replicates) != replicates or replicates < 1:
        raise DomainError(f"replicates must be a positive integer, got {replicates!r}")
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(replicates), int(seed)


def _resolve_confidence(method, confidence, n_int, spec):
    if method in (Method.PROPOSED, Method.THEORETICAL) and confidence is None:
        return calibrate_gamma(n_int, spec).protocol_confidence
    return confidence


def _size_summary(n1_fin):
    values = np.asarray(n1_fin, dtype=float)
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return float(values.mean()), sd, (float(q1), float(med), float(q3))


def _chisq_or_zero(rng, df, size):
    """Chi-squared draws allowing df == 0 (a point mass at zero)."""
    df = np.asarray(df)
    if df.ndim == 0:
        return rng.chisquare(df, size) if df > 0 else np.zeros(size)
    out = np.zeros(size)
    pos = df > 0
    if pos.any():
        out[pos] = rng.chisquare(df[pos])
    return out


def _critical_values(n_fin):
    dfs, inverse = np.unique(n_fin - 2, return_inverse=True)
    return dfs, inverse


# ---------------------------------------------------------------------------
# trial simulation
# ---------------------------------------------------------------------------

def _trial_chunk_summary(rng, size, *, method, scenario, spec, n1_int, n0_int, confidence,
                         effect_size, rounding, allocation):
    """One chunk of two-stage trials, simulated through sufficient statistics.

    Group means are normal, within-group sums of squares are scaled
    chi-squared, and the two stages are combined exactly; the result has the
    same law as simulating every outcome.
    """
    sigma = scenario.sigma
    s2 = scenario.sigma2
    n_int = n1_int + n0_int

    m1 = rng.normal(scenario.mu1, sigma / math.sqrt(n1_int), size)
    m0 = rng.normal(scenario.mu0, sigma / math.sqrt(n0_int), size)
    ss_int = s2 * _chisq_or_zero(rng, n_int - 2, size)
    os_var = (ss_int + (n1_int * n0_int / n_int) * (m1 - m0) ** 2) / (n_int - 1)

    _, n1_fin, n0_fin = reestimate_many(spec, os_var, n1_int, n0_int, method, confidence,
                                       effect_size, rounding, floor=True)
    if allocation == "binomial":
        extra = n1_fin + n0_fin - n_int
        add1 = rng.binomial(extra, spec.pi)
        add0 = extra - add1
        n1_fin = n1_int + add1
        n0_fin = n0_int + add0
    else:
        add1 = n1_fin - n1_int
        add0 = n0_fin - n0_int

    safe1 = np.maximum(add1, 1)
    safe0 = np.maximum(add0, 1)
    a1 = np.where(add1 > 0, rng.normal(scenario.mu1, sigma / np.sqrt(safe1)), 0.0)
    a0 = np.where(add0 > 0, rng.normal(scenario.mu0, sigma / np.sqrt(safe0)), 0.0)
    ss_add = s2 * _chisq_or_zero(rng, np.maximum(add1 - 1, 0) + np.maximum(add0 - 1, 0), size)

    f1 = (n1_int * m1 + add1 * a1) / n1_fin
    f0 = (n0_int * m0 + add0 * a0) / n0_fin
    ss = (ss_int + ss_add
          + (n1_int * add1 / n1_fin) * (m1 - a1) ** 2
          + (n0_int * add0 / n0_fin) * (m0 - a0) ** 2)
    n_fin = n1_fin + n0_fin
    pooled = ss / (n_fin - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = (f1 - f0) / np.sqrt(pooled * (1.0 / n1_fin + 1.0 / n0_fin))
    dfs, inverse = _critical_values(n_fin)
    crit = np.array([t_quantile_upper(int(df), spec.alpha) for df in dfs])[inverse]
    reject = t_stat >= crit
    return int(reject.sum()), n1_fin, n_fin


def _trial_chunk_outcomes(rng, size, *, method, scenario, spec, n1_int, n0_int, confidence,
                          effect_size, rounding, allocation):
    """Literal outcome-by-outcome simulation, one replicate at a time.

    Slow; kept as an independent check on the sufficient-statistic engine and
    for small runs.
    """
    sigma = scenario.sigma
    n_int = n1_int + n0_int
    rejections = 0
    n1_out = np.empty(size, dtype=np.int64)
    n_out = np.empty(size, dtype=np.int64)
    for r in range(size):
        y1 = rng.normal(scenario.mu1, sigma, n1_int)
        y0 = rng.normal(scenario.mu0, sigma, n0_int)
        pooled = np.concatenate([y1, y0])
        pilot = PilotSummary(n_int, n1_int, n0_int, float(np.var(pooled, ddof=1)))
        plan = reestimate(spec, pilot, method, confidence=confidence, effect_size=effect_size,
                          rounding=rounding, floor=True)
        if allocation == "binomial":
            extra = plan.n_total - n_int
            add1 = int(rng.binomial(extra, spec.pi))
            add0 = extra - add1
        else:
            add1 = plan.n_group1 - n1_int
            add0 = plan.n_group0 - n0_int
        y1 = np.concatenate([y1, rng.normal(scenario.mu1, sigma, add1)])
        y0 = np.concatenate([y0, rng.normal(scenario.mu0, sigma, add0)])
        k1, k0 = y1.size, y0.size
        ss = ((y1 - y1.mean()) ** 2).sum() + ((y0 - y0.mean()) ** 2).sum()
        t_stat = (y1.mean() - y0.mean()) / math.sqrt(ss / (k1 + k0 - 2) * (1.0 / k1 + 1.0 / k0))
        if t_stat >= t_quantile_upper(k1 + k0 - 2, spec.alpha):
            rejections += 1
        n1_out[r] = k1
        n_out[r] = k1 + k0
    return rejections, n1_out, n_out


_ENGINES = {"summary": _trial_chunk_summary, "outcomes": _trial_chunk_outcomes}


def simulate_trials(method, scenario, spec, n_int, n1_int=None, n0_int=None, replicates=100_000,
                    seed=0, confidence=None, rounding=Rounding.NEAREST, allocation="fixed",
                    engine="summary", chunk_size=CHUNK_SIZE, threads=None):
    """Monte Carlo power / type I error of a two-stage blinded design.

    Each replicate draws the interim outcomes, computes the one-sample
    variance, re-estimates the size (never below the enrolled interim
    counts), tops up each arm and rejects when the pooled two-sample t
    statistic reaches the upper ``alpha`` t quantile with ``n_fin - 2`` df.

    Parameters
    ----------
    confidence : float, optional
        Confidence level for the ``proposed`` and ``theoretical`` rules;
        defaults to the calibrated protocol value for ``n_int``.
    rounding : {'nearest', 'ceiling'}
        Integer rounding of the re-estimated size. ``nearest`` matches
        evaluating the rule with a continuous size.
    allocation : {'fixed', 'binomial'}
        Second-stage arm sizes: deterministic split, or binomial with
        probability ``spec.pi``.
    engine : {'summary', 'outcomes'}
        Sufficient-statistic simulation (fast, default) or literal
        outcome-level simulation.
    """
    replicates, seed = _validate_run(replicates, seed)
    method = Method.parse(method)
    rounding = Rounding(rounding)
    if allocation not in ("fixed", "binomial"):
        raise DomainError(f"allocation must be 'fixed' or 'binomial', got {allocation!r}")
    if engine not in _ENGINES:
        raise DomainError(f"engine must be one of {sorted(_ENGINES)}, got {engine!r}")
    n1_int, n0_int = _interim_counts(n_int, n1_int, n0_int, spec.pi)
    if n_int < 3:
        raise DomainError("trial simulation needs n_int >= 3 so the final test has df >= 1")
    confidence = _resolve_confidence(method, confidence, n_int, spec)
    effect_size = scenario.effect_size if method is Method.THEORETICAL else None

    kernel = _ENGINES[engine]

    def run(rng, size):
        return kernel(rng, size, method=method, scenario=scenario, spec=spec, n1_int=n1_int,
                      n0_int=n0_int, confidence=confidence, effect_size=effect_size,
                      rounding=rounding, allocation=allocation)

    parts = _run_chunks(run, replicates, seed, chunk_size, threads)
    rejections = sum(p[0] for p in parts)
    n1_fin = np.concatenate([p[1] for p in parts])
    n_fin = np.concatenate([p[2] for p in parts])
    rate = rejections / replicates
    mean, sd, quartiles = _size_summary(n1_fin)
    return SimulationReport(
        kind="trials", method=method.value, scenario=scenario, n_int=n_int, n1_int=n1_int,
        n0_int=n0_int, replicates=replicates, seed=seed, confidence=confidence,
        rounding=rounding.value, n_fin_mean=mean, n_fin_sd=sd, n_fin_quartiles=quartiles,
        n_total_mean=float(n_fin.mean()), rejection_rate=rate,
        rejection_se=math.sqrt(rate * (1.0 - rate) / replicates),
        settings={"alpha": spec.alpha, "power_target": spec.power_target, "delta": spec.delta,
                  "pi": spec.pi, "allocation": allocation, "engine": engine,
                  "chunk_size": chunk_size},
    )


# ---------------------------------------------------------------------------
# distribution of the re-estimated size
# ---------------------------------------------------------------------------

def sample_size_distribution(method, scenario, spec, n_int, n1_int=None, n0_int=None,
                             replicates=100_000, seed=0, confidence=None, rounding=None,
                             floor=True, chunk_size=CHUNK_SIZE * 4, threads=None):
    """Sampling distribution of the re-estimated arm size.

    The one-sample variance is drawn as ``sigma2 * W / (n_int - 1)`` with
    ``W`` noncentral chi-squared, then pushed through the rule. With
    ``rounding=None`` the continuous size ``pi * raw_total`` is reported
    (floored at the interim arm count when ``floor``); otherwise integer arm
    sizes from the chosen rounding.
    """
    replicates, seed = _validate_run(replicates, seed)
    method = Method.parse(method)
    n1_int, n0_int = _interim_counts(n_int, n1_int, n0_int, spec.pi)
    if rounding is not None:
        rounding = Rounding(rounding)
    confidence = _resolve_confidence(method, confidence, n_int, spec)
    effect_size = scenario.effect_size if method is Method.THEORETICAL else None
    lam = noncentrality(scenario.effect_size, n1_int, n0_int)
    df = n_int - 1

    def run(rng, size):
        w = rng.noncentral_chisquare(df, lam, size) if lam > 0 else rng.chisquare(df, size)
        os_var = scenario.sigma2 * w / df
        raw, n1, n0 = reestimate_many(spec, os_var, n1_int, n0_int, method, confidence,
                                      effect_size, rounding or Rounding.CEILING, floor)
        if rounding is None:
            arm1 = spec.pi * raw
            arm0 = (1.0 - spec.pi) * raw
            if floor:
                arm1 = np.maximum(arm1, n1_int)
                arm0 = np.maximum(arm0, n0_int)
            return arm1, arm1 + arm0
        return n1.astype(float), (n1 + n0).astype(float)

    parts = _run_chunks(run, replicates, seed, chunk_size, threads)
    arm1 = np.concatenate([p[0] for p in parts])
    total = np.concatenate([p[1] for p in parts])
    mean, sd, quartiles = _size_summary(arm1)
    return SimulationReport(
        kind="distribution", method=method.value, scenario=scenario, n_int=n_int, n1_int=n1_int,
        n0_int=n0_int, replicates=replicates, seed=seed, confidence=confidence,
        rounding=None if rounding is None else rounding.value, n_fin_mean=mean, n_fin_sd=sd,
        n_fin_quartiles=quartiles, n_total_mean=float(total.mean()),
        settings={"alpha": spec.alpha, "power_target": spec.power_target, "delta": spec.delta,
                  "pi": spec.pi, "floor": floor, "chunk_size": chunk_size},
    )
