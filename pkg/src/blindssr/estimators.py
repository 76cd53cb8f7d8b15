"""Blinded interim variance estimators.

All estimators work from the pooled interim outcomes (or from a one-sample
variance already computed from them) plus the per-group counts, which are
known from randomization bookkeeping even when labels are concealed.
"""

from dataclasses import dataclass
from enum import Enum
import math

from .distributions import NoncentralChiSq, chi2_quantile_upper, noncentral_chi2_quantile_upper
from .errors import ConsistencyError, DomainError, InsufficientDataError


class EstimatorKind(str, Enum):
    ONE_SAMPLE = "one-sample"
    ADJUSTED = "adjusted"
    CONSERVATIVE_UCL = "conservative-ucl"
    INFEASIBLE_UCL = "infeasible-ucl"


@dataclass(frozen=True)
class PilotSummary:
    """What a blinded interim review knows.

    Attributes
    ----------
    n_int : int
        Total number of interim subjects.
    n1_int, n0_int : int
        Interim subjects per arm (experimental, control).
    os_variance : float
        One-sample (pooled, label-free) variance of the interim outcomes.
    """

    n_int: int
    n1_int: int
    n0_int: int
    os_variance: float

    def __post_init__(self):
        problems = []
        for name in ("n_int", "n1_int", "n0_int"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                problems.append(f"{name} must be an integer, got {value!r}")
        if problems:
            raise DomainError("; ".join(problems))
        if self.n_int < 2:
            raise InsufficientDataError(f"an internal pilot needs at least 2 subjects, got {self.n_int}")
        if self.n1_int < 1 or self.n0_int < 1:
            raise DomainError("each arm needs at least one interim subject")
        if self.n1_int + self.n0_int != self.n_int:
            raise ConsistencyError(
                f"group counts {self.n1_int} + {self.n0_int} do not add up to n_int={self.n_int}")
        v = float(self.os_variance)
        if not math.isfinite(v) or v < 0:
            raise DomainError(f"os_variance must be finite and nonnegative, got {self.os_variance!r}")
        object.__setattr__(self, "os_variance", v)

    @property
    def df(self):
        return self.n_int - 1

    @property
    def balance(self):
        """n1 * n0 / n_int, the factor that turns (effect/sigma)^2 into the
        noncentrality of the scaled one-sample variance."""
        return self.n1_int * self.n0_int / self.n_int

    @classmethod
    def from_outcomes(cls, outcomes, n1_int=None, n0_int=None, pi=0.5):
        """Build a summary from pooled outcomes.

        Without explicit group counts the total is split by
        :func:`split_counts` using the allocation probability ``pi``.
        """
        est = one_sample_variance(outcomes)
        n = len(outcomes)
        if n1_int is None and n0_int is None:
            n1_int, n0_int = split_counts(n, pi)
        elif n1_int is None:
            n1_int = n - n0_int
        elif n0_int is None:
            n0_int = n - n1_int
        return cls(n, n1_int, n0_int, est.value)


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    kind: EstimatorKind
    confidence: float | None = None
    effect_size: float | None = None
    clamped: bool = False

    @property
    def blind_estimable(self):
        return self.kind is not EstimatorKind.INFEASIBLE_UCL


def split_counts(n_int, pi=0.5):
    """Deterministic arm split of ``n_int`` subjects for allocation ``pi``.

    The larger share goes to the arm with the larger allocation probability;
    ties go to arm 1. Both arms keep at least one subject.
    """
    if n_int < 2:
        raise InsufficientDataError("need at least 2 subjects to split into two arms")
    if not 0 < pi < 1:
        raise DomainError(f"allocation probability must lie in (0, 1), got {pi!r}")
    share1 = pi * n_int
    lo = math.floor(share1)
    frac = share1 - lo
    if frac > 0.5 or (frac == 0.5 and pi >= 0.5):
        n1 = lo + 1
    else:
        n1 = lo
    n1 = min(max(n1, 1), n_int - 1)
    return n1, n_int - n1


def one_sample_variance(outcomes):
    """Pooled sample variance of interim outcomes, labels ignored.

    Two-pass (mean first, then centred squares) so very small variances
    around a large mean do not cancel away.
    """
    values = [float(y) for y in outcomes]
    if len(values) < 2:
        raise InsufficientDataError(f"one-sample variance needs at least 2 outcomes, got {len(values)}")
    if not all(math.isfinite(y) for y in values):
        raise DomainError("outcomes must all be finite")
    mean = math.fsum(values) / len(values)
    ss = math.fsum((y - mean) ** 2 for y in values)
    return VarianceEstimate(ss / (len(values) - 1), EstimatorKind.ONE_SAMPLE)


def bias_term(n1_int, n0_int, effect):
    """delta^2 n1 n0 / (n (n - 1)): the excess of the one-sample variance's
    expectation over the within-group variance."""
    n = n1_int + n0_int
    return effect * effect * n1_int * n0_int / (n * (n - 1))


def adjusted_variance(pilot, delta):
    """One-sample variance minus the bias term at effect ``delta``.

    A negative result is clamped to zero and flagged rather than raised.
    """
    delta = float(delta)
    if not math.isfinite(delta):
        raise DomainError("delta must be finite")
    value = pilot.os_variance - bias_term(pilot.n1_int, pilot.n0_int, delta)
    if value < 0:
        return VarianceEstimate(0.0, EstimatorKind.ADJUSTED, clamped=True)
    return VarianceEstimate(value, EstimatorKind.ADJUSTED)


def _check_confidence(confidence):
    confidence = float(confidence)
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie strictly between 0 and 1, got {confidence!r}")
    return confidence


def conservative_upper_limit(pilot, confidence):
    """Blind-computable upper confidence limit for the common variance.

    ``os_variance * (n_int - 1) / d``, where ``d`` is the upper
    ``confidence`` quantile of the *central* chi-squared law with
    ``n_int - 1`` df. Its coverage is at least ``confidence`` whatever the
    true effect, because the actual law of the scaled one-sample variance is
    noncentral and stochastically larger.
    """
    confidence = _check_confidence(confidence)
    d = chi2_quantile_upper(pilot.df, confidence)
    return VarianceEstimate(pilot.os_variance * (pilot.df / d), EstimatorKind.CONSERVATIVE_UCL,
                            confidence=confidence)


def noncentrality(effect_size, n1_int, n0_int):
    """(Delta / sigma)^2 * n1 n0 / n for the scaled one-sample variance."""
    return effect_size * effect_size * n1_int * n0_int / (n1_int + n0_int)


def infeasible_upper_limit(pilot, confidence, effect_size):
    """Exact-coverage upper limit that needs the true standardized effect.

    Only usable in simulation, where ``effect_size = Delta / sigma`` is known;
    the returned estimate reports ``blind_estimable == False``.
    """
    confidence = _check_confidence(confidence)
    effect_size = float(effect_size)
    lam = noncentrality(effect_size, pilot.n1_int, pilot.n0_int)
    d = noncentral_chi2_quantile_upper(NoncentralChiSq(pilot.df, lam), confidence)
    return VarianceEstimate(pilot.os_variance * (pilot.df / d), EstimatorKind.INFEASIBLE_UCL,
                            confidence=confidence, effect_size=effect_size)


def os_variance_expectation(sigma2, delta_true, n1_int, n0_int):
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    return sigma2 + bias_term(n1_int, n0_int, delta_true)
