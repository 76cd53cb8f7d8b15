"""Small deterministic numerical kernels: bracketed bisection and adaptive
Gauss-Kronrod (7/15) quadrature.

Both are scalar and pure so they stay safe to call from worker threads.
"""

import heapq
import math

from .errors import NumericError

# QUADPACK 15-point Kronrod abscissae on [0, 1] (symmetric), with the weights
# of the embedded 7-point Gauss rule at the odd-indexed nodes.
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def _gk15(f, a, b):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fc = f(center)
    resk = fc * _WGK[7]
    resg = fc * _WG[3]
    for j in range(7):
        dx = half * _XGK[j]
        fsum = f(center - dx) + f(center + dx)
        resk += _WGK[j] * fsum
        if j % 2 == 1:
            resg += _WG[j // 2] * fsum
    return resk * half, abs((resk - resg) * half)


def integrate(f, a, b, abs_tol=1e-10, rel_tol=0.0, max_intervals=2000, initial_intervals=4):
    """Integrate ``f`` over the finite interval ``[a, b]``.

    Global adaptive subdivision: the interval with the largest Kronrod-Gauss
    discrepancy is bisected until the summed error estimate falls below
    ``max(abs_tol, rel_tol * |I|)``.

    Returns
    -------
    (value, error_estimate)

    Raises
    ------
    NumericError
        If the tolerance is not met within ``max_intervals`` subintervals.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NumericError("integration limits must be finite", {"a": a, "b": b})
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    heap = []
    width = (b - a) / initial_intervals
    for i in range(initial_intervals):
        lo = a + i * width
        hi = b if i == initial_intervals - 1 else lo + width
        val, err = _gk15(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val))

    while True:
        total = math.fsum(item[3] for item in heap)
        err_total = math.fsum(-item[0] for item in heap)
        if err_total <= max(abs_tol, rel_tol * abs(total)):
            return sign * total, err_total
        if len(heap) >= max_intervals:
            raise NumericError(
                "adaptive quadrature did not converge",
                {"intervals": len(heap), "error_estimate": err_total, "value": total,
                 "a": a, "b": b},
            )
        _, lo, hi, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            val, err = _gk15(f, sub_lo, sub_hi)
            heapq.heappush(heap, (-err, sub_lo, sub_hi, val))


def bisect(f, lo, hi, xtol=1e-12, max_iter=400):
    """Root of a function that changes sign on ``[lo, hi]``.

    Returns ``(root, iterations)``. The returned point is the midpoint of the
    final bracket, whose width is at most ``xtol``.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo, 0
    if fhi == 0.0:
        return hi, 0
    if (flo > 0) == (fhi > 0):
        raise NumericError("root is not bracketed", {"lo": lo, "hi": hi, "f_lo": flo, "f_hi": fhi})
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid == lo or mid == hi:
            return mid, it
        fm = f(mid)
        if fm == 0.0:
            return mid, it
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise NumericError("bisection exceeded iteration limit", {"lo": lo, "hi": hi})
