"""Independent numerical oracles for the test suite.

These deliberately avoid the production code paths they check: forces come
from differentiating the field, roots from bisection, divergences from
central differences.
"""
import numpy as np


def force_by_field_gradient(field_fn, moment, position, step=1e-7):
    """(m . grad) B via central differences of an arbitrary field function."""
    f = np.zeros(3)
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = step
        db = (field_fn(position + dp) - field_fn(position - dp)) / (2.0 * step)
        f += moment[j] * db
    return f


def divergence(field_fn, position, step):
    """Central-difference divergence plus the cancellation scale.

    The scale sums the magnitudes of the quantities actually differenced, so
    |div| / scale measures the relative cancellation achieved.
    """
    div = 0.0
    scale = 0.0
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = step
        hi = field_fn(position + dp)[j]
        lo = field_fn(position - dp)[j]
        div += (hi - lo) / (2.0 * step)
        scale += (abs(hi) + abs(lo)) / (2.0 * step)
    return div, scale


def bisect_root(fn, lo, hi, tol=1e-13, max_iter=300):
    """Plain bisection; the bracket must change sign."""
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    assert flo * fhi < 0.0, "bisection bracket does not change sign"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)
