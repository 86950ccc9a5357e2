"""Universal relaxation function of a boundary quantum critical point and the
closed-form asymptotics of the work statistics derived from it.

A critical point is parametrized by the scaling dimension ``delta`` of the
driven operator, the UV cutoff ``cutoff`` (the Kondo temperature for charge
Kondo devices) and the temperature.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import loggamma

from .chi_models import SusceptibilityModel
from .errors import DivergenceError, DomainError
from .specfun import arccoth_cosh, incomplete_beta

__all__ = ['CftParams', 'CftChi', 'scaling_dimension', 'psi0', 'psi0_short_time',
           'c_tilde_1', 'c_tilde_2', 'kz_constants', 'kz_wdiss', 'kz_kappa3',
           'dkappa3_dT_c2ck', 'adiabatic_scaling_exponents', 'ScalingExponents',
           'LOG_CASE_THRESHOLD']

# |delta - 1/2| below this uses the Delta = 1/2 closed forms
LOG_CASE_THRESHOLD = 1e-6
_CSCH_UNDERFLOW = 1e-150
_REALITY_RTOL = 1e-9


@dataclass(frozen=True)
class CftParams:
    delta: float
    cutoff: float
    temperature: float
    tau0: float = None

    def __post_init__(self):
        if not 0 < self.delta <= 0.5:
            raise DomainError("scaling dimension must lie in (0, 1/2]")
        if not (self.cutoff > 0 and self.temperature > 0):
            raise DomainError("cutoff and temperature must be positive")
        if self.tau0 is None:
            object.__setattr__(self, 'tau0', 1 / self.cutoff)
        if not self.tau0 > 0:
            raise DomainError("tau0 must be positive")

    @property
    def is_log_case(self):
        return abs(self.delta - 0.5) < LOG_CASE_THRESHOLD


def scaling_dimension(M):
    """Scaling dimension 2/(2+M) of the impurity charge in the M-channel
    charge-Kondo critical point."""
    if int(M) != M:
        raise DomainError("channel count must be an integer")
    if M <= 1:
        raise DomainError(f"M = {M} channels is not critical (Fermi-liquid ground state)")
    return 2 / (2 + M)


def c_tilde_1(delta):
    return (math.sin(math.pi * delta) * math.pi**(2 * delta - 1.5)
            * gamma_fn(0.5 - delta) * gamma_fn(delta))


def c_tilde_2(delta):
    return 2 * math.sin(math.pi * delta) * math.pi**(2 * delta - 1) / (1 - 2 * delta)


class KzConstants(NamedTuple):
    c1: float
    c2: float
    c2_star: float


def kz_constants(delta):
    """Constants (c1, c2, c2*) of the Kibble-Zurek asymptotics for delta < 1/2."""
    a = 1 - 2 * delta
    ct2 = c_tilde_2(delta)
    return KzConstants(c_tilde_1(delta) / 2, ct2 / (2 + 3 * a + a * a), ct2 * math.pi**2)


def _prefactor(p):
    # pi^(2D-1) T^(2D-2) / Lambda^(2D)
    return math.pi**(2 * p.delta - 1) * p.temperature**(2 * p.delta - 2) / p.cutoff**(2 * p.delta)


def _psi0_beta_form(y, p):
    """Complex value of the incomplete-beta expression at y = pi t T > 0."""
    z = -1 / math.sinh(y)**2
    phase = complex(math.cos(math.pi * p.delta), -math.sin(math.pi * p.delta))
    return (_prefactor(p) * phase * math.sin(math.pi * p.delta)
            * incomplete_beta(z, p.delta, 0.5))


def _psi0_scalar(t, p):
    t = abs(t)
    y = math.pi * t * p.temperature
    if p.is_log_case:
        if t == 0:
            raise DivergenceError("Psi_0(0) diverges logarithmically for Delta = 1/2")
        return 2 / (p.cutoff * p.temperature) * float(arccoth_cosh(y))
    if y < _CSCH_UNDERFLOW:
        return float(psi0_short_time(t, p))
    val = _psi0_beta_form(y, p)
    if abs(val.imag) > _REALITY_RTOL * abs(val):
        raise ArithmeticError(f"Psi_0 not real at pi t T = {y}: {val}")
    return val.real


def psi0(t, p):
    """Relaxation function Psi_0(t) of a boundary CFT (units 1/energy^2).

    Delta = 1/2 uses 2 (Lambda T)^-1 arccoth(cosh pi t T); otherwise the
    incomplete-beta form. Even in t.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return _psi0_scalar(float(t), p)
    return np.array([_psi0_scalar(float(x), p) for x in t.ravel()]).reshape(t.shape)


def psi0_short_time(t, p):
    """Small pi t T form of Psi_0: leading log for Delta = 1/2, otherwise
    c~1 - c~2 (pi t T)^(1-2 Delta) in units of Lambda^-2 (T/Lambda)^(2 Delta - 2)."""
    t = np.abs(np.asarray(t, dtype=float))
    y = np.pi * t * p.temperature
    scale = (p.temperature / p.cutoff)**(2 * p.delta - 2) / p.cutoff**2
    if p.is_log_case:
        with np.errstate(divide='ignore'):
            return (scale * -2 * np.log(y))[()]
    return (scale * (c_tilde_1(p.delta) - c_tilde_2(p.delta) * y**(1 - 2 * p.delta)))[()]


def _kz_scale(p, A):
    # Lambda^-1 A^2 (T/Lambda)^(2 Delta - 1)
    return A**2 / p.cutoff * (p.temperature / p.cutoff)**(2 * p.delta - 1)


def kz_wdiss(tau, p, A):
    """Kibble-Zurek asymptote of <W_diss>, valid for 1/Lambda << tau << 1/T."""
    y = np.pi * np.asarray(tau, dtype=float) * p.temperature
    if p.is_log_case:
        return (_kz_scale(p, A) * -np.log(y))[()]
    c = kz_constants(p.delta)
    return (_kz_scale(p, A) * (c.c1 - c.c2 * y**(1 - 2 * p.delta)))[()]


def kz_kappa3(tau, p, A):
    """Kibble-Zurek asymptote of the third work cumulant."""
    tau = np.asarray(tau, dtype=float)
    T, L = p.temperature, p.cutoff
    scale = L * A**2 * (T / L)**(2 * p.delta + 1)
    if p.is_log_case:
        return (scale * 2 * (tau * T)**-2 * np.log(tau / p.tau0))[()]
    return (scale * kz_constants(p.delta).c2_star * (np.pi * tau * T)**(-1 - 2 * p.delta))[()]


def dkappa3_dT_c2ck(tau, T, Lambda, A):
    """d kappa^3/dT for the two-channel (Delta = 1/2) critical point:
    A^2 (T/Lambda) * 2/(tau T)^2 * (pi tau T / sinh(pi tau T) - 1)."""
    x = np.asarray(tau * T, dtype=float)
    y = np.pi * x
    with np.errstate(over='ignore', divide='ignore', invalid='ignore'):
        ratio = np.where(y > 1e-3,
                         2 * y * np.exp(-y) / -np.expm1(-2 * y),
                         1.0)
        direct = 2 / x**2 * (ratio - 1)
    # y/sinh(y) - 1 = -y^2/6 + 7y^4/360 - 31y^6/15120
    series = 2 * np.pi**2 * (-1 / 6 + 7 * y**2 / 360 - 31 * y**4 / 15120)
    bracket = np.where(y > 1e-3, direct, series)
    return (A**2 * T / Lambda * bracket)[()]


class ScalingExponents(NamedTuple):
    """Power laws kappa^n ~ T^t_n tau^s_n in the adiabatic limit."""
    wdiss_T: float
    kappa2_T: float
    kappa3_T: float
    wdiss_tau: float
    kappa2_tau: float
    kappa3_tau: float


def adiabatic_scaling_exponents(p):
    d = p.delta
    return ScalingExponents(2 * d - 2, 2 * d - 1, 2 * d - 1, -1.0, -1.0, -2.0)


_STIRLING_CUT = 30.0


def _log_gamma_sq_times_exp(D, y):
    """ln(|Gamma(D + i y)|^2 e^{pi y}) for y >= 0 without the cancellation
    between the two exponentials at large y."""
    y = np.asarray(y, dtype=float)
    yl = np.maximum(y, _STIRLING_CUT)
    z = D + 1j * yl
    # Stirling, with the pi y of arg(z) removed analytically
    w = 1 / z
    w2 = w * w
    series = (w * (1 / 12 - w2 * (1 / 360 - w2 / 1260))).real
    large = ((2 * D - 1) * np.log(np.abs(z)) + 2 * yl * np.arctan(D / yl)
             - 2 * D + math.log(2 * math.pi) + 2 * series)
    ys = np.minimum(y, _STIRLING_CUT)
    small = 2 * loggamma(D + 1j * ys).real + np.pi * ys
    return np.where(y > _STIRLING_CUT, large, small)


@dataclass(frozen=True)
class CftChi(SusceptibilityModel):
    """Im chi(omega) of a boundary CFT operator of dimension ``delta``:

        Lambda^(-2D) (2 pi T)^(2D-1) sinh(omega/2T) |Gamma(D + i omega/2 pi T)|^2 / Gamma(2D)

    whose relaxation function is exactly :func:`psi0`.
    """
    delta: float
    cutoff: float
    temperature: float
    tau0: float = None
    kind = 'cft'

    def __post_init__(self):
        params = CftParams(self.delta, self.cutoff, self.temperature, self.tau0)
        object.__setattr__(self, 'tau0', params.tau0)

    @property
    def params(self):
        return CftParams(self.delta, self.cutoff, self.temperature, self.tau0)

    def im_chi(self, omega):
        omega = np.asarray(omega, dtype=float)
        T, D = self.temperature, self.delta
        mag = np.abs(omega)
        x = mag / (2 * T)
        with np.errstate(divide='ignore'):
            # sinh(x) |Gamma|^2 = (1 - e^{-2x})/2 * |Gamma|^2 e^{x}
            log_val = (np.log(-np.expm1(-2 * x)) - math.log(2)
                       + _log_gamma_sq_times_exp(D, x / np.pi))
        pref = self.cutoff**(-2 * D) * (2 * np.pi * T)**(2 * D - 1) / gamma_fn(2 * D)
        return (np.sign(omega) * pref * np.exp(log_val))[()]

    def low_frequency_slope(self):
        T, D = self.temperature, self.delta
        pref = self.cutoff**(-2 * D) * (2 * np.pi * T)**(2 * D - 1) / gamma_fn(2 * D)
        return pref * gamma_fn(D)**2 / (2 * T)

    def im_chi_over_omega(self, omega):
        omega = np.abs(np.asarray(omega, dtype=float))
        small = omega < 1e-8 * self.temperature
        with np.errstate(invalid='ignore', divide='ignore'):
            direct = self.im_chi(omega) / omega
        return np.where(small, self.low_frequency_slope(), direct)[()]

    def psi(self, t):
        return psi0(t, self.params)

    def static_susceptibility(self):
        if self.params.is_log_case:
            raise DivergenceError("static susceptibility diverges for Delta = 1/2")
        return self.temperature * psi0(0.0, self.params)
