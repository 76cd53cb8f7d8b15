"""Choosing the confidence level of the conservative upper limit.

The asymptotic power of the conservative rule is bounded below by an
expectation over the *central* chi-squared law that involves only
``n_int``, ``alpha`` and the target power, so the confidence level that makes
the bound equal the target can be fixed in the protocol before any data are
seen.
"""

from dataclasses import dataclass
import math

from ._numerics import bisect, integrate
from .design import DesignSpec
from .distributions import (
    CentralChiSq,
    NoncentralChiSq,
    chi2_quantile_upper,
    std_normal_cdf,
)
from .errors import CalibrationInfeasibleError, DomainError, InsufficientDataError, NumericError

# integration stops where the law has less than this much mass left
TAIL_CUTOFF = 1e-12
QUAD_ABS_TOL = 1e-10

CONFIDENCE_BRACKET = (0.001, 0.999)
CONFIDENCE_XTOL = 1e-9
POWER_TOL = 1e-6


def expected_power(d, law, spec, effect_ratio=1.0):
    """``E[1 - Phi(z_a - r |z_a - z_b| sqrt(W / d))]`` for ``W ~ law``.

    ``law`` is a central or noncentral chi-squared distribution object and
    ``r`` the ratio of true to target effect. The mass beyond the upper
    ``TAIL_CUTOFF`` quantile is added as if the integrand were one there
    (it is within 1e-12 of one for any power target of interest); the mass
    below the lower one is dropped, an error of at most ``TAIL_CUTOFF``.
    """
    if d <= 0:
        raise DomainError("quantile d must be positive")
    za = spec.z_alpha
    slope = effect_ratio * abs(za - spec.z_power) / math.sqrt(d)
    w_max = law.quantile_upper(TAIL_CUTOFF)
    # a narrow noncentral peak far from zero is invisible to the first panels
    w_min = law.quantile_upper(1.0 - TAIL_CUTOFF) if getattr(law, "lam", 0.0) > 0 else 0.0
    pdf = law.pdf

    # w = u^2 removes the sqrt(w) kink and the df = 1 density spike at zero
    def integrand(u):
        return std_normal_cdf(slope * u - za) * pdf(u * u) * 2.0 * u

    try:
        value, _ = integrate(integrand, math.sqrt(w_min), math.sqrt(w_max), abs_tol=QUAD_ABS_TOL)
    except NumericError as exc:
        exc.diagnostics.update({"d": d, "law": repr(law)})
        raise
    return min(value + law.sf(w_max), 1.0)


def _check_n_int(n_int):
    if isinstance(n_int, bool) or int(n_int) != n_int:
        raise DomainError(f"n_int must be an integer, got {n_int!r}")
    if n_int < 2:
        raise InsufficientDataError(f"n_int must be at least 2, got {n_int}")
    return int(n_int)


def lower_bound_power(confidence, n_int, spec):
    """Effect-free lower bound on the asymptotic power of the conservative
    rule at confidence level ``confidence`` with ``n_int`` interim subjects."""
    n_int = _check_n_int(n_int)
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence!r}")
    law = CentralChiSq(n_int - 1)
    return expected_power(chi2_quantile_upper(law, confidence), law, spec)


def noncentral_power_bound(confidence, n_int, spec, lam, effect_ratio=1.0):
    """The same expectation taken over the noncentral law actually followed
    by the scaled one-sample variance. Reduces to
    :func:`lower_bound_power` at ``lam == 0`` and ``effect_ratio == 1``."""
    n_int = _check_n_int(n_int)
    d = chi2_quantile_upper(n_int - 1, confidence)
    return expected_power(d, NoncentralChiSq(n_int - 1, lam), spec, effect_ratio)


def round_up_confidence(confidence, decimals=2):
    """Smallest value on the ``10**-decimals`` grid that is >= ``confidence``.

    Rounding up keeps the power bound at or above target, and it is how the
    tabulated protocol values are printed.
    """
    scale = 10 ** decimals
    return math.ceil(confidence * scale - 1e-6) / scale


@dataclass(frozen=True)
class CalibrationResult:
    confidence: float
    achieved_lower_bound: float
    n_int: int
    alpha: float
    power_target: float
    solver_iterations: int
    protocol_confidence: float
    protocol_lower_bound: float


def calibrate_gamma(n_int, spec):
    """Solve ``lower_bound_power(c) = spec.power_target`` for ``c``.

    Bisection over ``CONFIDENCE_BRACKET``; the bound is strictly increasing
    in ``c``. ``protocol_confidence`` is the root rounded up to two decimals.

    Raises
    ------
    CalibrationInfeasibleError
        If the target lies outside the bound's range over the bracket.
    """
    n_int = _check_n_int(n_int)
    target = spec.power_target
    lo, hi = CONFIDENCE_BRACKET

    def gap(c):
        return lower_bound_power(c, n_int, spec) - target

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo > 0 or g_hi < 0:
        raise CalibrationInfeasibleError(
            f"target power {target} is outside the attainable range "
            f"[{g_lo + target:.6f}, {g_hi + target:.6f}] for n_int={n_int}")
    root, iterations = bisect(gap, lo, hi, xtol=CONFIDENCE_XTOL)
    achieved = lower_bound_power(root, n_int, spec)
    if abs(achieved - target) > POWER_TOL:
        raise NumericError("calibration missed the power tolerance",
                           {"n_int": n_int, "root": root, "achieved": achieved})
    protocol = min(round_up_confidence(root), CONFIDENCE_BRACKET[1])
    return CalibrationResult(
        confidence=root,
        achieved_lower_bound=achieved,
        n_int=n_int,
        alpha=spec.alpha,
        power_target=target,
        solver_iterations=iterations,
        protocol_confidence=protocol,
        protocol_lower_bound=lower_bound_power(protocol, n_int, spec),
    )


@dataclass(frozen=True)
class TableCell:
    n_int: int
    power_target: float
    result: CalibrationResult | None = None
    error: str | None = None


def gamma_table(n_int_list, power_targets=(0.80, 0.90), alpha=0.025):
    """Calibrated confidence levels for every ``(n_int, power_target)`` pair.

    Cells that fail keep their error message instead of aborting the table.
    """
    cells = []
    for power in power_targets:
        spec = DesignSpec(alpha=alpha, power_target=power)
        for n_int in n_int_list:
            try:
                cells.append(TableCell(n_int, power, calibrate_gamma(n_int, spec)))
            except (CalibrationInfeasibleError, NumericError, DomainError, InsufficientDataError) as exc:
                cells.append(TableCell(n_int, power, error=str(exc)))
    return cells
