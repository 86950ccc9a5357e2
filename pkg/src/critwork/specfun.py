"""Special-function kernels: complex digamma, incomplete beta on the negative
real axis, and a few regularized elementary functions.

Everything here works in double precision and accepts either scalars or
numpy arrays (scalars in, scalars out).
"""
import cmath
import math

import numpy as np
from scipy import special

from .errors import DomainError, PoleError

__all__ = ['digamma', 'incomplete_beta', 'sinc', 'sinc2', 'coth_reg', 'x_coth',
           'csch', 'arccoth_cosh', 'fermi']

_SERIES_RTOL = 1e-17
_SERIES_MAXTERMS = 100_000


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")


def digamma(z):
    """Complex digamma psi(z) = Gamma'(z)/Gamma(z), scipy's implementation with
    finiteness and pole checks.

    Parameters
    ----------
    z : complex or array_like
        Argument, must not be a non-positive integer.

    Returns
    -------
    complex or np.ndarray
    """
    z = np.asarray(z, dtype=complex)
    _check_finite(z, 'z')
    re = z.real
    if np.any((z.imag == 0) & (re <= 0) & (re == np.round(re))):
        raise PoleError("digamma has poles at the non-positive integers")
    return special.digamma(z)[()]


def _pow_diff(p, y, log_ratio):
    """(0.5**p - y**p)/p without cancellation; ``log_ratio = ln(0.5/y)``."""
    if p == 0:
        return log_ratio
    if abs(p * log_ratio) > 0.5:
        return (0.5**p - y**p) / p
    return y**p * math.expm1(p * log_ratio) / p


def _beta_integral(x, one_minus_x, a, c):
    """int_0^x s^(a-1) (1-s)^(c-1) ds for 0 <= x < 1, a > 0, any real c.

    Series around s = 0 for x <= 1/2; for x > 1/2 the remainder is expanded
    around s = 1, which keeps the series ratio below 1/2 everywhere.
    """
    def head(xx):
        total = 0.0
        coef = 1.0  # (1-c)_n / n!
        for n in range(_SERIES_MAXTERMS):
            term = coef * xx**(n + a) / (n + a)
            total += term
            if abs(term) <= _SERIES_RTOL * abs(total) and n > 2:
                return total
            coef *= (n + 1 - c) / (n + 1)
        raise ArithmeticError("incomplete beta series did not converge")

    if x <= 0.5:
        return head(x)

    y = one_minus_x
    log_ratio = math.log(0.5 / y)
    tail = 0.0
    coef = 1.0  # (1-a)_n / n!
    for n in range(_SERIES_MAXTERMS):
        term = coef * _pow_diff(n + c, y, log_ratio)
        tail += term
        if abs(term) <= _SERIES_RTOL * abs(tail) and n > 2:
            return head(0.5) + tail
        coef *= (n + 1 - a) / (n + 1)
    raise ArithmeticError("incomplete beta series did not converge")


def _incomplete_beta_scalar(z, a, b):
    if z == 0:
        return 0j
    r = -z
    x = r / (1 + r)
    one_minus_x = 1 / (1 + r)
    # B(z; a, b) = e^{i pi a} int_0^x s^(a-1) (1-s)^(-a-b) ds with x = -z/(1-z)
    return cmath.exp(1j * math.pi * a) * _beta_integral(x, one_minus_x, a, 1 - a - b)


_incomplete_beta_vec = np.vectorize(_incomplete_beta_scalar, otypes=[complex])


def incomplete_beta(z, a, b):
    """Incomplete beta function B(z; a, b) for real ``z <= 0``.

    Uses the principal branch ``z**a = |z|**a * exp(i pi a)``, i.e.
    ``B(z; a, b) = z**a / a * 2F1(a, 1-b; a+1; z)``.

    Raises
    ------
    DomainError
        For ``z > 0``, ``a <= 0`` or ``b <= 0``.
    """
    if not (a > 0 and b > 0):
        raise DomainError("incomplete_beta requires a > 0 and b > 0")
    z = np.asarray(z, dtype=float)
    _check_finite(z, 'z')
    if np.any(z > 0):
        raise DomainError("incomplete_beta is implemented for z <= 0 only")
    if z.ndim == 0:
        return _incomplete_beta_scalar(float(z), a, b)
    return _incomplete_beta_vec(z, a, b)


def sinc(x):
    """sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)[()]


def sinc2(x):
    return sinc(x)**2


_COTH_SERIES_CUT = 1e-4


def coth_reg(x):
    """coth(x), switching to 1/x + x/3 - x^3/45 for |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        direct = 1 / np.tanh(x)
        xs = np.clip(x, -1.0, 1.0)
        series = 1 / xs + xs / 3 - xs**3 / 45
    return np.where(np.abs(x) < _COTH_SERIES_CUT, series, direct)[()]


def x_coth(x):
    """x coth(x), smooth through x = 0 where it equals 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        direct = x / np.tanh(x)
    xs = np.minimum(np.abs(x), 1.0)
    series = 1 + xs**2 / 3 - xs**4 / 45
    return np.where(np.abs(x) < _COTH_SERIES_CUT, series, direct)[()]


def csch(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over='ignore', divide='ignore'):
        return (1 / np.sinh(x))[()]


def arccoth_cosh(y):
    """arccoth(cosh y) for y > 0, written as 2 artanh(e^-y) (large y) or
    -ln tanh(y/2) (small y) so neither regime overflows."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("arccoth_cosh requires y > 0")
    with np.errstate(over='ignore', divide='ignore'):
        small = -np.log(np.tanh(np.minimum(y, 1.0) / 2))
        large = 2 * np.arctanh(np.exp(-np.maximum(y, 1.0)))
    return np.where(y < 1, small, large)[()]


def fermi(eps, T):
    """Fermi function 1/(1 + e^{eps/T})."""
    if not T > 0:
        raise DomainError("temperature must be positive")
    return (0.5 * (1 - np.tanh(np.asarray(eps, dtype=float) / (2 * T))))[()]
