"""Sample-size arithmetic for the design stage and every re-estimation rule."""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .distributions import std_normal_quantile_upper, t_quantile_upper
from .errors import DomainError, InsufficientDataError
from .estimators import (
    EstimatorKind,
    PilotSummary,
    VarianceEstimate,
    adjusted_variance,
    bias_term,
    conservative_upper_limit,
    infeasible_upper_limit,
)


class Method(str, Enum):
    ONE_SAMPLE = "one-sample"
    ADJUSTED = "adjusted"
    INFLATION_FACTOR = "if"
    PROPOSED = "proposed"
    THEORETICAL = "theoretical"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"os": "one-sample", "onesample": "one-sample", "adj": "adjusted",
                   "inflation-factor": "if"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise DomainError(f"unknown method {value!r}; expected one of {choices}") from None


class Rounding(str, Enum):
    # ceiling never undersizes through rounding; nearest is the unbiased
    # integer stand-in for a continuous sample size
    CEILING = "ceiling"
    NEAREST = "nearest"


@dataclass(frozen=True)
class DesignSpec:
    """Design parameters. ``alpha`` is one-sided."""

    alpha: float = 0.025
    power_target: float = 0.80
    delta: float = 1.0
    pi: float = 0.5

    def __post_init__(self):
        problems = []
        if not 0 < self.alpha < 0.5:
            problems.append(f"alpha must lie in (0, 0.5), got {self.alpha!r}")
        if not 0.5 <= self.power_target < 1:
            problems.append(f"power_target must lie in [0.5, 1), got {self.power_target!r}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            problems.append(f"delta must be positive, got {self.delta!r}")
        if not 0 < self.pi < 1:
            problems.append(f"pi must lie in (0, 1), got {self.pi!r}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def z_alpha(self):
        return std_normal_quantile_upper(self.alpha)

    @property
    def z_power(self):
        """z_{1-beta}: the upper (1 - beta) normal quantile, negative for
        power above one half."""
        return std_normal_quantile_upper(self.power_target)

    @property
    def allocation_factor(self):
        return 1.0 / self.pi + 1.0 / (1.0 - self.pi)

    @property
    def sizing_constant(self):
        """Total sample size per unit variance."""
        return self.allocation_factor * ((self.z_alpha - self.z_power) / self.delta) ** 2

    def with_delta(self, delta):
        return DesignSpec(self.alpha, self.power_target, delta, self.pi)


@dataclass(frozen=True)
class SampleSizeResult:
    n_total: int
    n_group1: int
    n_group0: int
    raw_total: float
    method: Method | None
    floor_applied: bool = False
    variance: VarianceEstimate | None = None
    rounding: Rounding = Rounding.CEILING
    pi: float = 0.5
    # plan asks for fewer subjects in some arm than are already enrolled
    below_pilot: bool = False

    @property
    def raw_group1(self):
        return self.pi * self.raw_total

    @property
    def raw_group0(self):
        return (1.0 - self.pi) * self.raw_total


def allocate(raw_total, pi, rounding=Rounding.CEILING):
    """Turn a real-valued total into integer arm sizes.

    ``ceiling``: total rounded up (then up to even when ``pi == 0.5``), arm 1
    gets ``ceil(pi * total)``. ``nearest``: each arm rounded half-up on its
    own share. Each arm keeps at least one subject.
    """
    rounding = Rounding(rounding)
    if not math.isfinite(raw_total) or raw_total < 0:
        raise DomainError(f"raw sample size must be finite and nonnegative, got {raw_total!r}")
    if rounding is Rounding.CEILING:
        total = max(math.ceil(raw_total), 2)
        if pi == 0.5:
            total += total % 2
            n1 = total // 2
        else:
            n1 = min(max(math.ceil(pi * total), 1), total - 1)
        return n1, total - n1
    n1 = max(math.floor(pi * raw_total + 0.5), 1)
    n0 = max(math.floor((1.0 - pi) * raw_total + 0.5), 1)
    return n1, n0


def _result(raw_total, spec, method, rounding, variance=None, pilot=None, floor=False):
    n1, n0 = allocate(raw_total, spec.pi, rounding)
    below = pilot is not None and (n1 < pilot.n1_int or n0 < pilot.n0_int)
    floored = bool(floor and below)
    if floored:
        n1 = max(n1, pilot.n1_int)
        n0 = max(n0, pilot.n0_int)
    return SampleSizeResult(n1 + n0, n1, n0, raw_total, method, floored, variance,
                            Rounding(rounding), spec.pi, below)


def initial_sample_size(spec, sigma2, rounding=Rounding.CEILING):
    """Design-stage sizing for a planning variance ``sigma2``."""
    sigma2 = float(sigma2)
    if not (math.isfinite(sigma2) and sigma2 > 0):
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    return _result(spec.sizing_constant * sigma2, spec, None, rounding)


def inflation_factor(n_int, spec):
    """Ratio of squared t-quantile to squared z-quantile spreads at
    ``n_int - 2`` degrees of freedom."""
    if n_int < 3:
        raise InsufficientDataError(f"the inflation factor needs n_int >= 3, got {n_int}")
    df = n_int - 2
    t_spread = t_quantile_upper(df, spec.alpha) - t_quantile_upper(df, spec.power_target)
    return t_spread ** 2 / (spec.z_alpha - spec.z_power) ** 2


def method_variance(spec, pilot, method, confidence=None, effect_size=None):
    """The variance estimate each rule plugs into the sizing formula."""
    method = Method.parse(method)
    if method in (Method.ONE_SAMPLE, Method.INFLATION_FACTOR):
        return VarianceEstimate(pilot.os_variance, EstimatorKind.ONE_SAMPLE)
    if method is Method.ADJUSTED:
        return adjusted_variance(pilot, spec.delta)
    if confidence is None:
        raise DomainError(f"method {method.value!r} needs a confidence level")
    if method is Method.PROPOSED:
        return conservative_upper_limit(pilot, confidence)
    if effect_size is None:
        raise DomainError("the theoretical rule needs the true effect size Delta/sigma")
    return infeasible_upper_limit(pilot, confidence, effect_size)


def reestimate(spec, pilot, method, confidence=None, effect_size=None,
               rounding=Rounding.CEILING, floor=False):
    """Re-estimated final sample size from a blinded interim summary.

    Parameters
    ----------
    method : Method or str
        ``one-sample``, ``adjusted``, ``if`` (inflation factor),
        ``proposed`` (conservative upper limit, needs ``confidence``) or
        ``theoretical`` (infeasible limit, needs ``confidence`` and the true
        ``effect_size``).
    floor : bool
        Never return fewer subjects per arm than are already enrolled.
    """
    method = Method.parse(method)
    if method is Method.INFLATION_FACTOR and pilot.n_int < 3:
        raise InsufficientDataError("the inflation-factor rule needs n_int >= 3")
    variance = method_variance(spec, pilot, method, confidence, effect_size)
    raw = spec.sizing_constant * variance.value
    if method is Method.INFLATION_FACTOR:
        raw *= inflation_factor(pilot.n_int, spec)
    return _result(raw, spec, method, rounding, variance, pilot, floor)


def allocate_many(raw_total, pi, rounding=Rounding.CEILING):
    """Vectorized :func:`allocate`; returns integer arrays ``(n1, n0)``."""
    rounding = Rounding(rounding)
    raw_total = np.asarray(raw_total, dtype=float)
    if rounding is Rounding.CEILING:
        total = np.maximum(np.ceil(raw_total), 2.0)
        if pi == 0.5:
            total = total + total % 2
            n1 = total // 2
        else:
            n1 = np.clip(np.ceil(pi * total), 1.0, total - 1.0)
        return n1.astype(np.int64), (total - n1).astype(np.int64)
    n1 = np.maximum(np.floor(pi * raw_total + 0.5), 1.0)
    n0 = np.maximum(np.floor((1.0 - pi) * raw_total + 0.5), 1.0)
    return n1.astype(np.int64), n0.astype(np.int64)


def variance_multiplier(spec, method, n1_int, n0_int, confidence=None, effect_size=None):
    """``(scale, shift)`` such that the rule's variance is
    ``max(scale * os_variance - shift, 0)`` for every one-sample variance.

    Every rule is affine in the one-sample variance once the interim counts
    and the confidence level are fixed; simulation exploits that to size a
    whole batch of pilots at once.
    """
    method = Method.parse(method)
    if method is Method.ADJUSTED:
        return 1.0, bias_term(n1_int, n0_int, spec.delta)
    probe = PilotSummary(n1_int + n0_int, n1_int, n0_int, 1.0)
    return method_variance(spec, probe, method, confidence, effect_size).value, 0.0


def reestimate_many(spec, os_variance, n1_int, n0_int, method, confidence=None, effect_size=None,
                    rounding=Rounding.CEILING, floor=False):
    """Vectorized :func:`reestimate` over an array of one-sample variances
    sharing the same interim counts.

    Returns ``(raw_total, n1, n0)`` arrays.
    """
    method = Method.parse(method)
    n_int = n1_int + n0_int
    if method is Method.INFLATION_FACTOR and n_int < 3:
        raise InsufficientDataError("the inflation-factor rule needs n_int >= 3")
    scale, shift = variance_multiplier(spec, method, n1_int, n0_int, confidence, effect_size)
    variance = np.maximum(scale * np.asarray(os_variance, dtype=float) - shift, 0.0)
    raw = spec.sizing_constant * variance
    if method is Method.INFLATION_FACTOR:
        raw = raw * inflation_factor(n_int, spec)
    n1, n0 = allocate_many(raw, spec.pi, rounding)
    if floor:
        n1 = np.maximum(n1, n1_int)
        n0 = np.maximum(n0, n0_int)
    return raw, n1, n0
