"""Linear-response work statistics for a linear ramp lambda(t) = A t / tau.

The n-th cumulant of the dissipated work is

    kappa^n / A^2 = (1/pi) int_0^inf sinc^2(omega tau/2) k_n(omega) d omega

with k_1 = Im chi/omega, k_2 = coth(omega/2T) Im chi and k_3 = omega Im chi.
For n <= 3 the cumulants coincide with the central moments.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from ._quadrature import Accumulator, quad as _quad
from .chi_models import log_breakpoints, static_susceptibility_kk
from .errors import (DivergenceError, DomainError, ObservableUnavailable,
                     QuadratureError)
from .specfun import x_coth

__all__ = ['RampProtocol', 'CumulantResult', 'cumulant', 'wdiss_time_domain',
           'kappa3_time_domain', 'wdiss_adiabatic', 'sudden_kappa1', 'sudden_kappa3',
           'sudden_limits', 'SuddenLimits', 'check_cT', 'psi_from_chi', 'PsiFromChi',
           'dkappa3_dT', 'dkappa3_dT_peak', 'crossover_sweep', 'SweepRow', 'thread_count',
           'DEFAULT_TOL']

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
# number of sinc^2 lobes integrated explicitly before the split-tail treatment
_N_LOBES = 32


@dataclass(frozen=True)
class RampProtocol:
    """Linear ramp of amplitude ``amplitude`` (energy) over ``duration``."""
    amplitude: float
    duration: float

    def __post_init__(self):
        if not math.isfinite(self.amplitude):
            raise DomainError("amplitude must be finite")
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise DomainError("duration must be finite and >= 0")

    def lr_validity(self, chi_static):
        """|A| chi_static; linear response needs this to be small."""
        return abs(self.amplitude) * chi_static


@dataclass(frozen=True)
class CumulantResult:
    order: int
    value: float
    quadrature_error: float
    route: str

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise DomainError("order must be 1, 2 or 3")
        if self.route not in ('frequency', 'time-domain', 'limit-formula'):
            raise DomainError(f"unknown route {self.route!r}")
        if self.order == 2 and self.value < -self.quadrature_error:
            raise DomainError(f"negative kappa^2 = {self.value:g}; not a valid spectrum")


# --- quadrature primitives ---------------------------------------------------

def _panels(a, scales, hi):
    lo = min(scales) * 1e-3
    pts = [a]
    if a < lo:
        pts.append(lo)
    pts.extend(log_breakpoints(scales, max(a, lo), hi, per_decade=2))
    pts.append(hi)
    return np.unique(np.asarray(pts, dtype=float))


def _plain_integral(g, a, scales, epsabs, epsrel, acc, sign=1.0):
    """Add int_a^inf g to ``acc``; g must be non-oscillatory beyond the scales."""
    hi = max(1e3 * max(scales), 10 * a) if a > 0 else 1e3 * max(scales)
    edges = _panels(a, scales, hi)
    n = len(edges)
    for lo_, hi_ in zip(edges[:-1], edges[1:]):
        acc.add(_quad(g, lo_, hi_, epsabs / n, epsrel), (lo_, hi_), sign)
    acc.add(_quad(_log_substituted(g, hi), 0.0, np.inf, epsabs / n, epsrel), (hi, np.inf), sign)


def _log_substituted(g, hi):
    # int_hi^inf g(w) dw = int_0^inf g(hi e^s) hi e^s ds: algebraic tails
    # become exponential ones
    def h(s):
        if s > 150:
            return 0.0
        w = hi * math.exp(s)
        return g(w) * w
    return h


def _cos_integral(g, freq, a, scales, epsabs, acc, sign=1.0):
    """Add int_a^inf g(omega) cos(freq omega) d omega: Chebyshev-moment panels
    up to well past the model scales, then a Fourier-integral tail."""
    hi = max(1e3 * max(scales), 10 * a) if a > 0 else 1e3 * max(scales)
    edges = _panels(a, scales, hi)
    n = len(edges)
    for lo_, hi_ in zip(edges[:-1], edges[1:]):
        acc.add(_quad(g, lo_, hi_, epsabs / n, 0.0, weight='cos', wvar=freq),
                ('cos', lo_, hi_), sign)
    acc.add(_quad(g, hi, np.inf, epsabs / n, 0.0, weight='cos', wvar=freq),
            ('cos', hi, np.inf), sign)


def _sinc2_integral(k, tau, scales, epsabs, epsrel):
    """(1/pi) int_0^inf sinc^2(omega tau/2) k(omega) d omega as an accumulator
    (value and error already divided by pi)."""
    acc = Accumulator()
    if tau == 0:
        _plain_integral(k, 0.0, scales, epsabs * np.pi, epsrel, acc)
    else:
        W = 2 * np.pi * _N_LOBES / tau
        zeros = 2 * np.pi * np.arange(1, _N_LOBES + 1) / tau
        lo = min(scales) * 1e-3
        edges = np.unique(np.concatenate([[0.0], zeros,
                                          log_breakpoints(scales, lo, W, per_decade=2),
                                          [lo] if lo < W else []]))
        half = tau / 2

        def f(w):
            x = w * half
            s = math.sin(x) / x if x != 0 else 1.0
            return s * s * k(w)

        n = len(edges) + 4
        for a, b in zip(edges[:-1], edges[1:]):
            acc.add(_quad(f, a, b, epsabs * np.pi / n, epsrel), (a, b))

        # sinc^2 = 2(1 - cos(omega tau))/(omega tau)^2 beyond the explicit lobes
        def g(w):
            return 2 * k(w) / (w * tau)**2

        _plain_integral(g, W, scales, epsabs * np.pi / 2, epsrel, acc)
        # weighted quadrature needs an absolute target; a coarse pass borrows
        # it from the non-oscillatory part
        cos_abs = epsabs * np.pi / 2 if epsabs > 0 else epsrel * abs(acc.value)
        _cos_integral(g, tau, W, scales, max(cos_abs, 1e-300), acc, sign=-1.0)
    acc.value /= np.pi
    acc.error /= np.pi
    return acc


def _kernel(n, model):
    T = model.temperature
    if n == 1:
        return lambda w: float(model.im_chi_over_omega(w))
    if n == 2:
        return lambda w: float(2 * T * x_coth(w / (2 * T)) * model.im_chi_over_omega(w))
    if n == 3:
        return lambda w: float(w * model.im_chi(w))
    raise DomainError(f"cumulant order must be 1, 2 or 3, got {n}")


def _two_pass(k, tau, scales, tol):
    """Coarse pass to fix the absolute scale, then the requested relative tol."""
    coarse = _sinc2_integral(k, tau, scales, 0.0, 1e-4)
    scale = abs(coarse.value)
    if not math.isfinite(scale) or scale == 0:
        scale = max(coarse.error, 1e-300)
    fine = _sinc2_integral(k, tau, scales, tol * scale, tol)
    if fine.failed or not math.isfinite(fine.value) or fine.error > tol * max(abs(fine.value), scale):
        raise QuadratureError(
            f"tolerance {tol:g} not met (estimate {fine.error:.2e} on {fine.value:.6e}; "
            f"{len(fine.failed)} unconverged panels)")
    return fine


def cumulant(n, model, ramp, tol=DEFAULT_TOL, c_T=0.0):
    """n-th dissipated-work cumulant (n = 1, 2, 3) by frequency quadrature.

    Parameters
    ----------
    n : int
    model : SusceptibilityModel
    ramp : RampProtocol
    tol : float
        Relative tolerance; the returned ``quadrature_error`` is absolute.
    c_T : float
        Weight of a static delta(omega) term (finite, isolated systems only);
        it adds A^2 c/2 to kappa^1 and A^2 T c to kappa^2.
    """
    if n not in (1, 2, 3):
        raise DomainError(f"cumulant order must be 1, 2 or 3, got {n}")
    if n == 3 and ramp.duration == 0:
        raise DivergenceError("sudden kappa^3 is not a convergent frequency integral; "
                              "use sudden_kappa3")
    if n == 3 and getattr(model, 'kind', '') == 'cft' and model.params.is_log_case:
        raise DivergenceError("omega Im chi tends to a constant for Delta = 1/2; "
                              "use kappa3_time_domain with a short-time cutoff")
    A2 = ramp.amplitude**2
    acc = _two_pass(_kernel(n, model), ramp.duration, model.scales(), tol)
    value = A2 * acc.value
    if c_T:
        value += A2 * c_T * (0.5 if n == 1 else model.temperature if n == 2 else 0.0)
    return CumulantResult(n, value, A2 * acc.error, 'frequency')


# --- relaxation-function routes ----------------------------------------------

def _u_edges(tau, T):
    """Breakpoints in u = t/tau resolving the thermal time 1/T."""
    u_th = 1 / (np.pi * tau * T) if tau * T > 0 else np.inf
    pts = list(np.geomspace(1e-12, 1.0, 25)[:-1])
    if u_th < 1:
        pts += [u_th / 10, u_th, 10 * u_th]
    return np.unique([0.0] + [p for p in pts if 0 < p < 1] + [1.0])


def wdiss_time_domain(psi, T, ramp, tol=1e-8):
    """<W_diss> = T A^2 int_0^1 (1-u) Psi_0(tau u) du."""
    A2, tau = ramp.amplitude**2, ramp.duration
    if tau == 0:
        return CumulantResult(1, 0.5 * T * A2 * float(psi(0.0)), 0.0, 'time-domain')

    def f(u):
        return (1 - u) * float(psi(tau * u))

    edges = _u_edges(tau, T)
    acc = Accumulator()
    for a, b in zip(edges[:-1], edges[1:]):
        acc.add(_quad(f, a, b, 0.0, tol), (a, b))
    if acc.failed or acc.error > tol * abs(acc.value) * 10:
        raise QuadratureError(f"time-domain <W_diss> error {acc.error:.2e} on {acc.value:.6e}")
    return CumulantResult(1, T * A2 * acc.value, T * A2 * acc.error, 'time-domain')


def kappa3_time_domain(psi, T, ramp, tau0=None):
    """kappa^3 = T A^2 tau^-2 (Psi_0(0) - Psi_0(tau)); Psi_0(tau0) replaces a
    divergent Psi_0(0)."""
    tau = ramp.duration
    if tau == 0:
        raise DivergenceError("kappa^3 time-domain form needs tau > 0")
    if tau0 is not None:
        p0 = float(psi(tau0))
    else:
        try:
            p0 = float(psi(0.0))
        except DivergenceError as exc:
            raise DivergenceError("Psi_0(0) diverges; supply tau0") from exc
        if not math.isfinite(p0):
            raise DivergenceError("Psi_0(0) diverges; supply tau0")
    value = T * ramp.amplitude**2 / tau**2 * (p0 - float(psi(tau)))
    return CumulantResult(3, value, 0.0, 'time-domain')


def _psi_area(psi, T, tol):
    """int_0^inf Psi_0(t) dt, split at thermal-time decades."""
    t_th = 1 / T
    edges = np.concatenate([[0.0], t_th * np.geomspace(1e-12, 50, 28)])
    acc = Accumulator()
    for a, b in zip(edges[:-1], edges[1:]):
        acc.add(_quad(lambda t: float(psi(t)), a, b, 0.0, tol), (a, b))
    acc.add(_quad(lambda t: float(psi(t)), edges[-1], np.inf, 0.0, tol), 'tail')
    if acc.failed or acc.error > 10 * tol * abs(acc.value):
        raise QuadratureError(f"Psi_0 tail not converged (error {acc.error:.2e})")
    return acc.value


def wdiss_adiabatic(source, T, ramp, tol=1e-10):
    """Slow-ramp asymptote (1/2) T A^2 tau^-1 Psi~(0).

    ``source`` is a SusceptibilityModel (Psi~(0) = (2/T) lim Im chi/omega) or
    a Psi_0 callable (Psi~(0) = 2 int_0^inf Psi_0 dt).
    """
    if ramp.duration == 0:
        raise DivergenceError("adiabatic formula diverges at tau = 0")
    if hasattr(source, 'low_frequency_slope'):
        psi_tilde0 = 2 / T * source.low_frequency_slope()
    else:
        psi_tilde0 = 2 * _psi_area(source, T, tol)
    return 0.5 * T * ramp.amplitude**2 / ramp.duration * psi_tilde0


# --- sudden limit --------------------------------------------------------------

class SuddenLimits(NamedTuple):
    kappa1: float
    kappa3: float


def sudden_kappa1(model, A):
    """(A^2/2) chi_static, with chi_static = -d<N_S>/d lambda (Kramers-Kronig
    if the model has no occupation formula)."""
    try:
        chi = model.static_susceptibility()
    except ObservableUnavailable:
        chi = static_susceptibility_kk(model)
    return 0.5 * A**2 * chi


def sudden_kappa3(model, A):
    """-(A^2/2) <H_SE>; raises ObservableUnavailable when the model has no
    finite system-environment energy."""
    return -0.5 * A**2 * model.hse()


def sudden_limits(model, A):
    return SuddenLimits(sudden_kappa1(model, A), sudden_kappa3(model, A))


def check_cT(model, rtol=1e-4):
    """c(T) = chi_isothermal - chi_Kubo, the weight of the static delta(omega)
    term of the relaxation spectrum. Logs a warning when a continuum model
    gives |c| > rtol chi."""
    chi_iso = model.static_susceptibility()
    if hasattr(model, 'kubo_susceptibility'):
        chi_kubo = model.kubo_susceptibility()
    else:
        chi_kubo = static_susceptibility_kk(model)
    c = chi_iso - chi_kubo
    if getattr(model, 'is_continuum', True) and abs(c) > rtol * abs(chi_iso):
        log.warning("c(T) = %.3e is not negligible against chi = %.3e", c, chi_iso)
    return c


class PsiFromChi:
    """Psi_0(t) = (2/(pi T)) int_0^inf Im chi(omega)/omega cos(omega t) d omega."""

    def __init__(self, model, tol=1e-10):
        self.model = model
        self.tol = tol
        self._psi0 = static_susceptibility_kk(model, tol) / model.temperature

    def _scalar(self, t):
        t = abs(t)
        if t == 0:
            return self._psi0
        acc = Accumulator()
        _cos_integral(lambda w: float(self.model.im_chi_over_omega(w)), t, 0.0,
                      self.model.scales(), self.tol * self._psi0 * np.pi * self.model.temperature / 2,
                      acc)
        return 2 / (np.pi * self.model.temperature) * acc.value

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self._scalar(float(t))
        return np.array([self._scalar(float(x)) for x in t.ravel()]).reshape(t.shape)


def psi_from_chi(model, tol=1e-10):
    return PsiFromChi(model, tol)


# --- temperature derivative of kappa^3 ----------------------------------------

def dkappa3_dT(model, ramp, tol=1e-7, rel_step=1e-3):
    """d kappa^3/dT at fixed ramp, differentiating Im chi inside the integral
    (finite even at tau = 0, where kappa^3 itself diverges)."""
    T = model.temperature
    h = rel_step * T
    shifted = {s: model.with_temperature(T + s * h) for s in (-1, -0.5, 0.5, 1)}

    def k(w):
        d1 = (shifted[1].im_chi(w) - shifted[-1].im_chi(w)) / (2 * h)
        d2 = (shifted[0.5].im_chi(w) - shifted[-0.5].im_chi(w)) / h
        return float(w * (4 * d2 - d1) / 3)

    acc = _two_pass(k, ramp.duration, model.scales(), tol)
    return ramp.amplitude**2 * acc.value


def dkappa3_dT_peak(model, ramp, T_bounds, tol=1e-7, xatol=1e-4):
    """Temperature of the extremum of d kappa^3/dT (largest magnitude) within
    ``T_bounds``, by bounded search in log T."""
    lo, hi = np.log(T_bounds[0]), np.log(T_bounds[1])

    def objective(logT):
        return -abs(dkappa3_dT(model.with_temperature(math.exp(logT)), ramp, tol))

    grid = np.linspace(lo, hi, 13)
    vals = [objective(g) for g in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(objective, bounds=(a, b), method='bounded',
                                   options={'xatol': xatol})
    return math.exp(res.x)


# --- parameter sweeps ------------------------------------------------------------

class SweepRow(NamedTuple):
    model: str
    delta: float
    T: float
    tau: float
    A: float
    n: int
    value: float
    error: float
    route: str
    status: str


def _sweep_cell(args):
    model, T, tau, n, A, tol = args
    m = model.with_temperature(T)
    delta = getattr(m, 'delta', float('nan'))
    ramp = RampProtocol(A, tau)
    try:
        if n == 3 and getattr(m, 'kind', '') == 'cft' and m.params.is_log_case:
            if tau == 0:
                raise DivergenceError("Delta = 1/2 sudden kappa^3 diverges")
            r = kappa3_time_domain(m.psi, T, ramp, tau0=m.tau0)
        elif n == 3 and tau == 0:
            r = CumulantResult(3, sudden_kappa3(m, A), 0.0, 'limit-formula')
        else:
            r = cumulant(n, m, ramp, tol)
        return SweepRow(m.kind, delta, T, tau, A, n, r.value, r.quadrature_error, r.route, 'ok')
    except ObservableUnavailable:
        status = 'observable-unavailable'
    except DivergenceError:
        status = 'divergent'
    except QuadratureError:
        status = 'tolerance-not-met'
    except DomainError:
        status = 'invalid'
    return SweepRow(m.kind, delta, T, tau, A, n, float('nan'), float('nan'), 'none', status)


def thread_count(threads=None):
    """Explicit value, else $CRITWORK_THREADS, else the number of cores."""
    if threads is None:
        env = os.environ.get('CRITWORK_THREADS')
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise DomainError("thread count must be >= 1")
    return threads


def crossover_sweep(model, T_list, tau_list, amplitude, n_list=(1, 2, 3),
                    tol=DEFAULT_TOL, threads=None):
    """Cumulants over the grid T_list x tau_list x n_list.

    Cells are independent; failures are reported in the ``status`` column and
    never abort the sweep. Rows come back sorted by (model, T, tau, A, n).
    ``amplitude`` may be a number or a list of amplitudes.
    """
    if not (len(T_list) and len(tau_list) and len(n_list)):
        raise DomainError("sweep grids must be non-empty")
    amps = np.atleast_1d(amplitude)
    tasks = [(model, float(T), float(tau), int(n), float(A), tol)
             for T in T_list for tau in tau_list for A in amps for n in n_list]
    threads = thread_count(threads)
    if threads == 1:
        rows = [_sweep_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_cell, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return sorted(rows, key=lambda r: (r.model, r.T, r.tau, r.A, r.n))
