"""Normal, chi-squared (central and noncentral) and Student t distributions.

Everything here is scalar, pure and written against :mod:`math` only.
Quantiles are *upper-tail*: ``quantile_upper(q)`` returns ``d`` with
``P(X >= d) = q``.  For the chi-squared laws that is the convention under
which ``d_{1-gamma} = chi2_quantile_upper(df, 1 - gamma)``.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

from ._numerics import bisect
from .errors import DomainError, NumericError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000
_SQRT2 = math.sqrt(2.0)
_LOG2 = math.log(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# quantile brackets are bisected to this width (absolute, or relative to the
# bracket scale once the root is larger than one)
QUANTILE_XTOL = 1e-13

DEFAULT_TAIL_MASS = 1e-14


def _finite(x, name="x"):
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def _probability(p, name="p"):
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name} must lie strictly between 0 and 1, got {p!r}")
    return p


# ---------------------------------------------------------------------------
# standard normal
# ---------------------------------------------------------------------------

def std_normal_pdf(x):
    x = _finite(x)
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x):
    """Phi(x), computed from ``erfc`` so both tails keep relative accuracy."""
    x = _finite(x)
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_sf(x):
    x = _finite(x)
    return 0.5 * math.erfc(x / _SQRT2)


@lru_cache(maxsize=4096)
def _normal_upper(p):
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -_normal_upper(1.0 - p)
    # sf(40) underflows to ~1e-350, so [0, 40] brackets every double p <= 0.5
    root, _ = bisect(lambda x: 0.5 * math.erfc(x / _SQRT2) - p, 0.0, 40.0, xtol=1e-15)
    return root


def std_normal_quantile_upper(p):
    """z_p with ``P(Z >= z_p) = p``; negative for p > 0.5."""
    return _normal_upper(_probability(p))


# ---------------------------------------------------------------------------
# regularized incomplete gamma and beta
# ---------------------------------------------------------------------------

def _gamma_prefactor(a, x):
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def _gamma_series(a, x):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * _gamma_prefactor(a, x)
    raise NumericError("incomplete gamma series did not converge", {"a": a, "x": x})


def _gamma_contfrac(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * _gamma_prefactor(a, x)
    raise NumericError("incomplete gamma continued fraction did not converge", {"a": a, "x": x})


def regularized_gamma(a, x):
    """Return ``(P(a, x), Q(a, x))``, the lower and upper regularized
    incomplete gamma functions.

    The series is used below ``x = a + 1`` and the continued fraction above,
    and the complement is formed from whichever side was computed directly.
    """
    if a <= 0:
        raise DomainError(f"shape must be positive, got {a!r}")
    if x <= 0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        p = min(_gamma_series(a, x), 1.0)
        return p, 1.0 - p
    q = min(_gamma_contfrac(a, x), 1.0)
    return 1.0 - q, q


def _beta_contfrac(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise NumericError("incomplete beta continued fraction did not converge", {"a": a, "b": b, "x": x})


def regularized_beta(a, b, x):
    """I_x(a, b), the regularized incomplete beta function."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
              + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(log_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _beta_contfrac(a, b, x) / a
    return 1.0 - bt * _beta_contfrac(b, a, 1.0 - x) / b


# ---------------------------------------------------------------------------
# chi-squared
# ---------------------------------------------------------------------------

def _check_df(df):
    if isinstance(df, bool) or int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df!r}")
    return int(df)


def _chi2_pdf(k, w):
    if w < 0:
        return 0.0
    if w == 0:
        if k == 1:
            return math.inf
        return 0.5 if k == 2 else 0.0
    return math.exp(_chi2_logpdf(k, w))


def _chi2_logpdf(k, w):
    half = 0.5 * k
    return (half - 1.0) * math.log(w) - 0.5 * w - half * _LOG2 - math.lgamma(half)


def _solve_upper(sf_cdf, q, start):
    """Invert a continuous chi-squared-type law on ``[0, inf)``.

    ``sf_cdf(w)`` returns ``(cdf, sf)``. The tail that is smaller at the
    target is matched, which keeps relative accuracy for extreme ``q``.
    """
    hi = max(start, 1.0)
    while sf_cdf(hi)[1] > q:
        hi *= 2.0
        if hi > 1e12:
            raise NumericError("quantile bracket expansion failed", {"q": q})
    if q < 0.5:
        g = lambda w: sf_cdf(w)[1] - q  # noqa: E731
    else:
        g = lambda w: (1.0 - q) - sf_cdf(w)[0]  # noqa: E731
    root, _ = bisect(g, 0.0, hi, xtol=QUANTILE_XTOL * max(1.0, hi))
    return root


@dataclass(frozen=True)
class CentralChiSq:
    """Central chi-squared law with ``df`` degrees of freedom."""

    df: int

    def __post_init__(self):
        object.__setattr__(self, "df", _check_df(self.df))

    def cdf_sf(self, w):
        w = _finite(w, "w")
        if w <= 0:
            return 0.0, 1.0
        return regularized_gamma(0.5 * self.df, 0.5 * w)

    def cdf(self, w):
        return self.cdf_sf(w)[0]

    def sf(self, w):
        return self.cdf_sf(w)[1]

    def pdf(self, w):
        w = _finite(w, "w")
        return _chi2_pdf(self.df, w)

    def quantile_upper(self, q):
        return _chi2_upper(self.df, _probability(q, "q"))


@lru_cache(maxsize=8192)
def _chi2_upper(df, q):
    dist = CentralChiSq(df)
    return _solve_upper(dist.cdf_sf, q, df + 10.0 * math.sqrt(2.0 * df))


class _PoissonWindow:
    """Poisson(h) weights over a window ``[lo, hi]`` holding all but
    ``tail_mass`` of the probability, grown outward from the mode."""

    __slots__ = ("lo", "weights")

    def __init__(self, h, tail_mass):
        j0 = int(math.floor(h))
        w0 = math.exp(-h + j0 * math.log(h) - math.lgamma(j0 + 1.0)) if h > 0 else 1.0
        lower = []          # weights for j0-1, j0-2, ...
        upper = [w0]        # weights for j0, j0+1, ...
        mass = w0
        w_down = w0 * j0 / h if j0 > 0 else 0.0
        w_up = w0 * h / (j0 + 1.0)
        j_down = j0 - 1
        j_up = j0 + 1
        while 1.0 - mass > tail_mass:
            if j_down >= 0 and w_down >= w_up:
                lower.append(w_down)
                mass += w_down
                w_down = w_down * j_down / h if j_down > 0 else 0.0
                j_down -= 1
            else:
                if w_up < _TINY and j_down < 0:
                    break
                upper.append(w_up)
                mass += w_up
                w_up = w_up * h / (j_up + 1.0)
                j_up += 1
        self.lo = j_down + 1
        self.weights = lower[::-1] + upper


def _log_gamma_term(a, x):
    # log of x^a e^-x / Gamma(a + 1)
    return a * math.log(x) - x - math.lgamma(a + 1.0)


@dataclass(frozen=True)
class NoncentralChiSq:
    """Noncentral chi-squared law, ``df`` degrees of freedom and
    noncentrality ``lam``; ``lam == 0`` is the central law."""

    df: int
    lam: float
    tail_mass: float = DEFAULT_TAIL_MASS

    def __post_init__(self):
        object.__setattr__(self, "df", _check_df(self.df))
        lam = _finite(self.lam, "lam")
        if lam < 0:
            raise DomainError(f"noncentrality must be nonnegative, got {lam!r}")
        object.__setattr__(self, "lam", lam)

    @property
    def central(self):
        return CentralChiSq(self.df)

    def _window(self):
        return _PoissonWindow(0.5 * self.lam, self.tail_mass)

    def cdf_sf(self, w):
        """Poisson mixture of central chi-squared CDFs (and survival
        functions) with degrees of freedom ``df + 2j``."""
        w = _finite(w, "w")
        if self.lam == 0.0:
            return self.central.cdf_sf(w)
        x = 0.5 * w
        if x <= 0:      # also catches w/2 underflowing from a subnormal w
            return 0.0, 1.0
        win = self._window()
        n = len(win.weights)
        a_lo = 0.5 * self.df + win.lo
        p, q = regularized_gamma(a_lo, x)
        # P(a+1, x) = P(a, x) - x^a e^-x / Gamma(a+1): walk up from the lowest
        # term; the step is carried as a log so a distant start cannot underflow
        log_t = _log_gamma_term(a_lo, x)
        log_x = math.log(x)
        cdf_terms = []
        sf_terms = []
        a = a_lo
        for i in range(n):
            wt = win.weights[i]
            cdf_terms.append(wt * max(p, 0.0))
            sf_terms.append(wt * max(q, 0.0))
            t = math.exp(log_t)
            p -= t
            q += t
            a += 1.0
            log_t += log_x - math.log(a)
        cdf = min(math.fsum(cdf_terms), 1.0)
        sf = min(math.fsum(sf_terms), 1.0)
        return cdf, sf

    def cdf(self, w):
        return self.cdf_sf(w)[0]

    def sf(self, w):
        return self.cdf_sf(w)[1]

    def pdf(self, w):
        w = _finite(w, "w")
        if w < 0:
            raise DomainError(f"density is defined for w >= 0, got {w!r}")
        if self.lam == 0.0:
            return _chi2_pdf(self.df, w)
        if w == 0:
            return math.exp(-0.5 * self.lam) * _chi2_pdf(self.df, 0.0)
        win = self._window()
        k = self.df + 2 * win.lo
        log_f = _chi2_logpdf(k, w)
        log_w = math.log(w)
        terms = []
        for wt in win.weights:
            terms.append(wt * math.exp(log_f))
            log_f += log_w - math.log(k)
            k += 2
        return math.fsum(terms)

    def quantile_upper(self, q):
        q = _probability(q, "q")
        if self.lam == 0.0:
            return _chi2_upper(self.df, q)
        return _ncx2_upper(self.df, self.lam, self.tail_mass, q)

    def mean(self):
        return self.df + self.lam

    def variance(self):
        return 2.0 * (self.df + 2.0 * self.lam)


@lru_cache(maxsize=8192)
def _ncx2_upper(df, lam, tail_mass, q):
    dist = NoncentralChiSq(df, lam, tail_mass)
    start = dist.mean() + 10.0 * math.sqrt(dist.variance())
    return _solve_upper(dist.cdf_sf, q, start)


def chi2_cdf(dist, w):
    return dist.cdf(w) if isinstance(dist, CentralChiSq) else CentralChiSq(dist).cdf(w)


def chi2_sf(dist, w):
    return dist.sf(w) if isinstance(dist, CentralChiSq) else CentralChiSq(dist).sf(w)


def chi2_pdf(dist, w):
    return dist.pdf(w) if isinstance(dist, CentralChiSq) else CentralChiSq(dist).pdf(w)


def chi2_quantile_upper(dist, q):
    """d with ``P(W >= d) = q`` for ``W ~ chi2(df)``; ``dist`` may be a
    :class:`CentralChiSq` or a bare integer df."""
    if not isinstance(dist, CentralChiSq):
        dist = CentralChiSq(dist)
    return dist.quantile_upper(q)


def noncentral_chi2_cdf(dist, w):
    return dist.cdf(w)


def noncentral_chi2_sf(dist, w):
    return dist.sf(w)


def noncentral_chi2_pdf(dist, w):
    return dist.pdf(w)


def noncentral_chi2_quantile_upper(dist, q):
    return dist.quantile_upper(q)


# ---------------------------------------------------------------------------
# Student t
# ---------------------------------------------------------------------------

def t_sf(df, t):
    """P(T >= t) for Student t with ``df`` degrees of freedom."""
    df = _check_df(df)
    t = _finite(t, "t")
    tail = 0.5 * regularized_beta(0.5 * df, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def t_cdf(df, t):
    return 1.0 - t_sf(df, t)


@lru_cache(maxsize=16384)
def _t_upper(df, p):
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -_t_upper(df, 1.0 - p)
    hi = 2.0
    while 0.5 * regularized_beta(0.5 * df, 0.5, df / (df + hi * hi)) > p:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("t quantile bracket expansion failed", {"df": df, "p": p})
    g = lambda x: 0.5 * regularized_beta(0.5 * df, 0.5, df / (df + x * x)) - p  # noqa: E731
    root, _ = bisect(g, 0.0, hi, xtol=QUANTILE_XTOL * max(1.0, hi))
    return root


def t_quantile_upper(df, p):
    """Upper-tail Student t quantile: t with ``P(T >= t) = p``."""
    return _t_upper(_check_df(df), _probability(p))
