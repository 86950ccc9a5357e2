"""Thin wrapper around scipy quad that reports convergence instead of warning."""
from scipy import integrate

QUAD_LIMIT = 400


def quad(f, a, b, epsabs, epsrel, **kw):
    """Return (value, error, converged).

    scipy appends a message to the full output on failure; roundoff-limited
    results whose error estimate still meets the target count as converged.
    """
    kw.setdefault('limit', QUAD_LIMIT)
    out = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, full_output=1, **kw)
    ok = len(out) == 3 or out[1] <= 10 * max(epsabs, epsrel * abs(out[0]))
    return out[0], out[1], ok


class Accumulator:
    """Running sum of quad results with the labels of unconverged pieces."""

    def __init__(self):
        self.value = 0.0
        self.error = 0.0
        self.failed = []

    def add(self, res, label, sign=1.0):
        v, e, ok = res
        self.value += sign * v
        self.error += e
        if not ok:
            self.failed.append(label)
