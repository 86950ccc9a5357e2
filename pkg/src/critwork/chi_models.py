"""Dynamical susceptibilities and equilibrium observables of the resonant level
model (RLM) and of the Majorana resonant level model (MRLM, the Emery-Kivelson
solution of the two-channel charge-Kondo critical point).

Conventions: hbar = k_B = 1, Im chi(omega) >= 0 for omega > 0, and the static
susceptibility is chi_static = -d<N_S>/d(lambda) > 0.
"""
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ._quadrature import quad
from .errors import DomainError, ObservableUnavailable, QuadratureError
from .specfun import digamma, fermi

__all__ = ['SusceptibilityModel', 'RLM', 'MajoranaRLM', 'TabulatedChi',
           'mrlm_im_chi', 'mrlm_occupation', 'rlm_im_chi', 'rlm_chi_integral',
           'rlm_occupation', 'rlm_hse', 'static_susceptibility_kk',
           'load_chi_table', 'log_breakpoints', 'ClassicalTrajectoryConfig',
           'classical_sudden_wdf', 'classical_trajectory_work']

log = logging.getLogger(__name__)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")


def log_breakpoints(scales, lo, hi, per_decade=2):
    """Geometric breakpoints covering [lo, hi] that also hit every scale."""
    lo, hi = float(lo), float(hi)
    if not hi > lo > 0:
        return np.array([])
    n = max(int(per_decade * math.log10(hi / lo)), 1)
    pts = np.concatenate([np.geomspace(lo, hi, n + 1),
                          [s for s in scales if lo < s < hi]])
    pts = np.unique(pts)
    return pts[(pts > lo) & (pts < hi)]


def _richardson_derivative(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


# --- Majorana resonant level model -----------------------------------------

def mrlm_im_chi(omega, T, gamma):
    """Im chi(omega) = 1/2 tanh(omega/2T) Gamma/(omega^2 + Gamma^2)."""
    _check_positive(T=T, gamma=gamma)
    omega = np.asarray(omega, dtype=float)
    return (0.5 * np.tanh(omega / (2 * T)) * gamma / (omega**2 + gamma**2))[()]


def mrlm_occupation(lam, gamma, T):
    """Charge <N_S> of the Majorana RLM at field ``lam``.

    The square root sqrt(4 lam^2 - Gamma^2) is taken on the branch that equals
    i*Gamma at lam = 0; the formula is even in that root anyway.
    """
    _check_positive(T=T, gamma=gamma)
    if lam == 0:
        return 0.5
    root = np.sqrt(complex(4 * lam**2 - gamma**2))
    bracket = (digamma(0.5 + (gamma + 1j * root) / (4 * np.pi * T))
               - digamma(0.5 + (gamma - 1j * root) / (4 * np.pi * T)))
    return float(0.5 - (lam / (np.pi * root) * bracket).imag)


# --- resonant level model ---------------------------------------------------

_POLY_CUT = 1e-3


def _polygamma_real(k, x):
    from scipy.special import polygamma
    return float(polygamma(k, x))


def rlm_im_chi(omega, T, gamma):
    """Closed-form Im chi(omega) of the RLM at the particle-hole symmetric
    point eps_d = 0.

    Below |omega|/2 pi T < 1e-3 the digamma difference is replaced by its
    fourth-order Taylor series so the removable 0/0 at omega = 0 never forms.
    """
    _check_positive(T=T, gamma=gamma)
    omega = np.asarray(omega, dtype=float)
    a = 0.5 + gamma / (2 * np.pi * T)
    g = gamma / (2 * np.pi * T)
    r = omega / gamma
    eps = omega / (2 * np.pi * T)
    small = np.abs(eps) < _POLY_CUT

    with np.errstate(divide='ignore', invalid='ignore'):
        direct = (digamma(a) - digamma(a - 1j * eps)) / (r * (r + 2j))
    p1, p2, p3, p4 = (_polygamma_real(k, a) for k in (1, 2, 3, 4))
    # (psi(a) - psi(a - i eps)) / r, expanded in eps = r g
    d_over_r = g * (1j * p1 + eps * p2 / 2 - 1j * eps**2 * p3 / 6 - eps**3 * p4 / 24)
    series = d_over_r / (r + 2j)
    ratio = np.where(small, series, direct)
    return (2 / (np.pi * gamma) * ratio).imag[()]


def rlm_chi_integral(omega, eps_d, T, gamma, tol=1e-10):
    """Complex chi(omega) of the RLM at arbitrary level energy, from

        chi = -1/(pi Gamma) int dx f(Gamma x + eps_d) 2x / ((x^2+1)(x^2 - (omega/Gamma + i)^2))
    """
    _check_positive(T=T, gamma=gamma)
    w = omega / gamma + 1j

    def integrand(x):
        return fermi(gamma * x + eps_d, T) * 2 * x / ((x * x + 1) * (x * x - w * w))

    center = -eps_d / gamma
    width = T / gamma
    pts = sorted({center - 40 * width, center, center + 40 * width,
                  -abs(w.real) - 2, abs(w.real) + 2, -1.0, 1.0})
    lo, hi = pts[0] - 1, pts[-1] + 1
    edges = [lo] + pts + [hi]
    parts = []
    err = 0.0
    for part in (lambda x: integrand(x).real, lambda x: integrand(x).imag):
        val = 0.0
        pieces = [(-np.inf, lo), (hi, np.inf)] + list(zip(edges[:-1], edges[1:]))
        for a, b in pieces:
            if b > a:
                v, e, _ = quad(part, a, b, tol, tol)
                val += v
                err += e
        parts.append(val)
    total = complex(*parts)
    if err > 1e3 * tol:
        raise QuadratureError(f"rlm_chi_integral error estimate {err:.2e}")
    return -total / (np.pi * gamma)


def rlm_occupation(eps_d, gamma, T):
    """<d^dag d> of the RLM (wide-band limit)."""
    _check_positive(T=T, gamma=gamma)
    diff = (digamma(0.5 + (gamma - 1j * eps_d) / (2 * np.pi * T))
            - digamma(0.5 + (gamma + 1j * eps_d) / (2 * np.pi * T)))
    return float(0.5 + diff.imag / (2 * np.pi))


def rlm_hse(eps_d, gamma, T, band_cutoff, tol=1e-10):
    """<H_SE> of the RLM with a flat band cut off at +-band_cutoff.

    Depends logarithmically on the cutoff (about -(2 Gamma/pi) ln 2 per
    doubling), which is why the cutoff is explicit.
    """
    _check_positive(T=T, gamma=gamma)
    if band_cutoff < 10 * gamma:
        raise DomainError("band_cutoff must be at least 10*gamma")

    def integrand(w):
        x = w - eps_d
        return fermi(w, T) * x / (x * x + gamma * gamma)

    pts = [p for p in (eps_d - gamma, eps_d, eps_d + gamma, -40 * T, 0.0, 40 * T)
           if -band_cutoff < p < band_cutoff]
    val, err, _ = quad(integrand, -band_cutoff, band_cutoff, tol, tol, points=sorted(set(pts)))
    if err > 1e3 * tol * max(1.0, abs(val)):
        raise QuadratureError(f"rlm_hse error estimate {err:.2e}")
    return 2 * gamma / np.pi * val


# --- model objects ------------------------------------------------------------

class SusceptibilityModel:
    """Common interface of everything the cumulant engine can consume.

    Subclasses provide ``im_chi(omega)``, ``temperature``, ``scales()`` and
    ``with_temperature(T)``; equilibrium observables are optional.
    """
    kind = 'abstract'

    def im_chi(self, omega):
        raise NotImplementedError

    def scales(self):
        """Characteristic energies (used to place quadrature breakpoints)."""
        return (self.temperature,)

    def with_temperature(self, T):
        return replace(self, temperature=T)

    def im_chi_over_omega(self, omega):
        """Im chi(omega)/omega, continued to its finite limit at omega = 0."""
        omega = np.abs(np.asarray(omega, dtype=float))
        h = 1e-6 * min(self.scales())
        safe = np.maximum(omega, h)
        with np.errstate(invalid='ignore'):
            direct = self.im_chi(safe) / safe
        # even function of omega: fourth-order Richardson limit
        limit = (4 * self.im_chi(h / 2) / (h / 2) - self.im_chi(h) / h) / 3
        return np.where(omega < h, limit, direct)[()]

    def low_frequency_slope(self):
        """lim_{omega -> 0} Im chi(omega)/omega."""
        return float(self.im_chi_over_omega(0.0))

    def occupation(self, lam):
        raise ObservableUnavailable(f"{self.kind} has no occupation formula")

    def static_susceptibility(self):
        """-d<N_S>/d(lambda) at lambda = 0, independent of Im chi."""
        return -_richardson_derivative(self.occupation, 0.0, 1e-2 * min(self.scales()))

    def hse(self):
        raise ObservableUnavailable(f"{self.kind} has no <H_SE> formula")


@dataclass(frozen=True)
class MajoranaRLM(SusceptibilityModel):
    """Emery-Kivelson Majorana resonant level model at eps_d = 0."""
    gamma: float
    temperature: float
    kind = 'mrlm'
    delta = 0.5  # scaling dimension of the driven charge at the fixed point

    def __post_init__(self):
        _check_positive(gamma=self.gamma, temperature=self.temperature)

    def im_chi(self, omega):
        return mrlm_im_chi(omega, self.temperature, self.gamma)

    def scales(self):
        return (self.temperature, self.gamma)

    def low_frequency_slope(self):
        return 1 / (4 * self.temperature * self.gamma)

    def im_chi_over_omega(self, omega):
        omega = np.asarray(omega, dtype=float)
        T, g = self.temperature, self.gamma
        x = omega / (2 * T)
        with np.errstate(invalid='ignore', divide='ignore'):
            xs = np.minimum(np.abs(x), 1.0)
            tanh_ratio = np.where(xs < 1e-4, 1 - xs**2 / 3, np.tanh(x) / np.where(x == 0, 1, x))
        return (tanh_ratio / (4 * T) * g / (g * g + omega**2))[()]

    def occupation(self, lam):
        return mrlm_occupation(lam, self.gamma, self.temperature)


@dataclass(frozen=True)
class RLM(SusceptibilityModel):
    """Spinless resonant level model; ``lambda`` shifts the level energy."""
    gamma: float
    temperature: float
    eps_d: float = 0.0
    band_cutoff: float = None

    kind = 'rlm'

    def __post_init__(self):
        _check_positive(gamma=self.gamma, temperature=self.temperature)
        if self.band_cutoff is None:
            object.__setattr__(self, 'band_cutoff', 100 * self.gamma)
        if self.band_cutoff < 10 * self.gamma:
            raise DomainError("band_cutoff must be at least 10*gamma")

    def im_chi(self, omega):
        if self.eps_d == 0:
            return rlm_im_chi(omega, self.temperature, self.gamma)
        omega = np.asarray(omega, dtype=float)
        vals = [rlm_chi_integral(w, self.eps_d, self.temperature, self.gamma).imag
                for w in omega.ravel()]
        return np.reshape(vals, omega.shape)[()]

    def scales(self):
        return tuple(s for s in (self.temperature, self.gamma, abs(self.eps_d)) if s > 0)

    def occupation(self, lam):
        return rlm_occupation(self.eps_d + lam, self.gamma, self.temperature)

    def hse(self):
        return rlm_hse(self.eps_d, self.gamma, self.temperature, self.band_cutoff)


def load_chi_table(path):
    """Read a two-column (omega, im_chi) table; ``#`` starts a comment."""
    data = np.loadtxt(path, comments='#', ndmin=2)
    if data.shape[1] != 2:
        raise DomainError(f"{path}: expected two columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1]


@dataclass(frozen=True, eq=False)
class TabulatedChi(SusceptibilityModel):
    """Externally sampled Im chi(omega >= 0), odd-extended to omega < 0 and
    linearly interpolated; zero beyond the last sample."""
    omega: np.ndarray
    values: np.ndarray
    temperature: float
    kind = 'table'

    def __post_init__(self):
        _check_positive(temperature=self.temperature)
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or omega.size < 2:
            raise DomainError("table needs matching 1d omega and im_chi columns")
        if omega[0] < 0 or np.any(np.diff(omega) <= 0):
            raise DomainError("table omega must be >= 0 and strictly increasing")
        if omega[0] == 0 and values[0] != 0:
            raise DomainError("odd extension requires Im chi(0) = 0")
        if omega[0] > 0:
            omega = np.concatenate([[0.0], omega])
            values = np.concatenate([[0.0], values])
        object.__setattr__(self, 'omega', omega)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_file(cls, path, temperature):
        omega, values = load_chi_table(path)
        return cls(omega, values, temperature)

    def im_chi(self, omega):
        omega = np.asarray(omega, dtype=float)
        mag = np.abs(omega)
        if np.any(mag > self.omega[-1]) and not self.__dict__.get('_warned'):
            object.__setattr__(self, '_warned', True)
            log.warning("Im chi requested beyond the table (|omega| > %g); using 0",
                        self.omega[-1])
        vals = np.interp(mag, self.omega, self.values, right=0.0)
        return (np.sign(omega) * vals)[()]

    def scales(self):
        positive = self.omega[self.omega > 0]
        return (self.temperature, positive[0], positive[-1])

    def low_frequency_slope(self):
        return self.values[1] / self.omega[1]

    def im_chi_over_omega(self, omega):
        omega = np.abs(np.asarray(omega, dtype=float))
        with np.errstate(invalid='ignore', divide='ignore'):
            direct = self.im_chi(omega) / omega
        return np.where(omega < self.omega[1], self.low_frequency_slope(), direct)[()]

    def kramers_kronig(self):
        """(2/pi) int Im chi/omega, exact for the piecewise-linear interpolant."""
        w0, w1 = self.omega[:-1], self.omega[1:]
        v0, v1 = self.values[:-1], self.values[1:]
        slope = (v1 - v0) / (w1 - w0)
        icpt = v0 - slope * w0
        with np.errstate(divide='ignore', invalid='ignore'):
            logs = np.where(w0 > 0, np.log(w1 / np.where(w0 > 0, w0, 1)), 0.0)
        # first segment starts at Im chi(0) = 0, so its intercept vanishes
        pieces = icpt * logs + slope * (w1 - w0)
        return float(2 / np.pi * pieces.sum())


def static_susceptibility_kk(model, tol=1e-10):
    """Re chi(0) = (1/pi) int Im chi(omega)/omega d omega (Kramers-Kronig)."""
    if hasattr(model, 'kramers_kronig'):
        return model.kramers_kronig()
    scales = model.scales()
    lo, hi = min(scales) * 1e-3, max(scales) * 1e3
    edges = np.concatenate([[0.0], log_breakpoints(scales, lo, hi, per_decade=2), [lo, hi]])
    edges = np.unique(edges)
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e, _ = quad(model.im_chi_over_omega, a, b, 0.0, tol)
        total += v
        err += e
    v, e, _ = quad(model.im_chi_over_omega, hi, np.inf, 0.0, tol)
    total += v
    err += e
    if err > 1e3 * tol * abs(total):
        raise QuadratureError(f"KK integral error estimate {err:.2e}")
    return 2 * total / np.pi


# --- classical master-equation work statistics ---------------------------------

@dataclass(frozen=True)
class ClassicalTrajectoryConfig:
    """Monte Carlo settings. Jumps are sampled exactly, so there is no time step."""
    n_samples: int
    seed: int = 0
    chunk_events: int = 2_000_000

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise DomainError("n_samples must be an integer >= 2")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError("seed must be a non-negative integer")


def _free_energy_change(eps0, eps1, T):
    # F = -T ln(1 + e^{-eps/T}) for a single classical level
    return -T * (np.logaddexp(0, -eps1 / T) - np.logaddexp(0, -eps0 / T))


def classical_sudden_wdf(eps_d0, A, gamma, T):
    """Two-peak sudden-quench distribution <n> delta(W - A) + (1 - <n>) delta(W)."""
    _check_positive(T=T, gamma=gamma)
    from .work import WorkDistribution
    n0 = float(fermi(eps_d0, T))
    return WorkDistribution.from_atoms([0.0, A], [1 - n0, n0],
                                       delta_f=float(_free_energy_change(eps_d0, eps_d0 + A, T)))


def _trajectory_chunk(rng, n_traj, eps_d0, A, tau, rate, T):
    """W for ``n_traj`` trajectories. Candidate events arrive at rate Gamma;
    at each one the occupation is redrawn from f(eps_d(t)), which realizes the
    rates Gamma f (0 -> 1) and Gamma (1 - f) (1 -> 0) by thinning."""
    n0 = (rng.random(n_traj) < fermi(eps_d0, T)).astype(float)
    if tau == 0:
        return A * n0
    counts = rng.poisson(rate * tau, n_traj)
    owner = np.repeat(np.arange(n_traj), counts)
    u = np.sort(owner + rng.random(owner.size)) - owner  # per-trajectory sorted in [0,1)
    occ = (rng.random(owner.size) < fermi(eps_d0 + A * u, T)).astype(float)
    # each event's state lasts until the next event of the same trajectory or u = 1
    nxt = np.ones_like(u)
    same = owner[1:] == owner[:-1]
    nxt[:-1][same] = u[1:][same]
    first = np.ones(n_traj)
    starts = np.cumsum(counts) - counts
    has = counts > 0
    first[has] = u[starts[has]]
    occupied_time = n0 * first + np.bincount(owner, weights=occ * (nxt - u), minlength=n_traj)
    return A * occupied_time


def classical_trajectory_work(eps_d0, A, tau, gamma_rate, T, cfg):
    """Work W = int_0^tau (A/tau) n(t) dt of a classical two-state level with
    Markovian tunnelling rate ``gamma_rate`` under eps_d(t) = eps_d0 + A t/tau,
    starting from equilibrium. Deterministic for a given ``cfg.seed``."""
    _check_positive(T=T, gamma_rate=gamma_rate)
    if not tau >= 0:
        raise DomainError("tau must be >= 0")
    from .work import WorkDistribution
    mean_events = max(gamma_rate * tau, 1.0)
    per_chunk = max(1, int(cfg.chunk_events / mean_events))
    sizes = [per_chunk] * (cfg.n_samples // per_chunk)
    if cfg.n_samples % per_chunk:
        sizes.append(cfg.n_samples % per_chunk)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    samples = np.concatenate([
        _trajectory_chunk(np.random.default_rng(s), n, eps_d0, A, tau, gamma_rate, T)
        for s, n in zip(seeds, sizes)])
    return WorkDistribution.from_samples(
        samples, delta_f=float(_free_energy_change(eps_d0, eps_d0 + A, T)))
