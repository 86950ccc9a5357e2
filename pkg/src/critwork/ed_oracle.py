"""Exact diagonalization of small fermionic systems: two-time-measurement work
statistics, Lehmann relaxation functions and the static c(T) anomaly.

Matrices are dense and real; the many-body Fock space of spinless modes is
built with Jordan-Wigner strings. Thermal states are grand canonical at zero
chemical potential.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from .errors import DimensionTooLarge, DomainError, PropagatorNotConverged
from .lr_engine import RampProtocol
from .work import WorkDistribution

__all__ = ['EdSystem', 'build_discretized_rlm', 'build_two_level', 'rlm_coupling_builder',
           'fock_operators', 'wdf_two_time', 'generating_function', 'zassenhaus_moments',
           'ZassenhausMoments', 'relaxation_lehmann', 'response_function', 'verify_eq5',
           'lehmann_cumulants', 'lr_vs_exact', 'LrComparison', 'maxwell_check',
           'two_level_cT', 'MAX_MODES']

MAX_MODES = 14
_HERMITIAN_TOL = 1e-12
_DEGENERACY_RTOL = 1e-12


def _spectral_tol(E):
    span = float(E.max() - E.min()) if E.size > 1 else 0.0
    return _DEGENERACY_RTOL * (span if span > 0 else 1.0)


def _thermal(E, beta):
    """Boltzmann weights from shifted exponentials."""
    x = -beta * (E - E.min())
    return np.exp(x - logsumexp(x))


def _log_z(E, beta):
    return logsumexp(-beta * E)


def _thermal_average(rho, V, op):
    # sum_n rho_n <n|op|n> with eigenvectors in the columns of V
    return float(np.dot(rho, np.sum(V * (op @ V), axis=0)))


class EdSystem:
    """H_0, the driven charge N_S and the coupling H_SE of a finite system at
    inverse temperature ``beta``. Immutable; the spectrum of H_0 is cached."""

    is_continuum = False

    def __init__(self, h0, n_s, h_se, beta, n_total=None):
        h0, n_s, h_se = (np.array(m, dtype=float) for m in (h0, n_s, h_se))
        dim = h0.shape[0]
        for name, m in (('h0', h0), ('n_s', n_s), ('h_se', h_se)):
            if m.shape != (dim, dim):
                raise DomainError(f"{name} must be a {dim}x{dim} matrix")
            if np.max(np.abs(m - m.T), initial=0.0) > _HERMITIAN_TOL * max(1.0, np.abs(m).max()):
                raise DomainError(f"{name} is not Hermitian")
            m.setflags(write=False)
        if not beta > 0:
            raise DomainError("beta must be positive")
        if n_total is not None:
            comm = h0 @ n_total - n_total @ h0
            if np.abs(comm).max() > 1e-13 * max(1.0, np.abs(h0).max()):
                raise DomainError("H_0 does not conserve the total charge")
        self.h0, self.n_s, self.h_se = h0, n_s, h_se
        self.beta = float(beta)
        self.dim = dim

    @property
    def temperature(self):
        return 1 / self.beta

    @cached_property
    def spectrum(self):
        """(E, V) of H_0."""
        E, V = np.linalg.eigh(self.h0)
        E.setflags(write=False)
        V.setflags(write=False)
        return E, V

    @cached_property
    def rho_diag(self):
        return _thermal(self.spectrum[0], self.beta)

    @cached_property
    def n_eigen(self):
        """N_S in the eigenbasis of H_0."""
        V = self.spectrum[1]
        return V.T @ self.n_s @ V

    def expectation(self, op):
        return _thermal_average(self.rho_diag, self.spectrum[1], op)

    def occupation(self, lam=0.0):
        """Thermal <N_S> of H_0 + lam N_S."""
        if lam == 0:
            return self.expectation(self.n_s)
        E, V = np.linalg.eigh(self.h0 + lam * self.n_s)
        return _thermal_average(_thermal(E, self.beta), V, self.n_s)

    def static_susceptibility(self, step=None):
        """Isothermal -d<N_S>/d lambda by Richardson-extrapolated differences."""
        E = self.spectrum[0]
        h = step if step is not None else 1e-3 * max(float(E.max() - E.min()), 1e-300)
        d1 = (self.occupation(h) - self.occupation(-h)) / (2 * h)
        d2 = (self.occupation(h / 2) - self.occupation(-h / 2)) / h
        return -(4 * d2 - d1) / 3

    def _pairs(self):
        E = self.spectrum[0]
        omega = E[None, :] - E[:, None]  # omega[n, m] = E_m - E_n
        degenerate = np.abs(omega) <= _spectral_tol(E)
        return omega, degenerate, np.abs(self.n_eigen)**2

    def kubo_susceptibility(self):
        """Lehmann sum over non-degenerate pairs, the Kramers-Kronig part."""
        omega, deg, n2 = self._pairs()
        rho = self.rho_diag
        drho = rho[:, None] - rho[None, :]
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = np.where(deg, 0.0, drho * n2 / omega)
        return float(terms.sum())

    def c_T(self):
        """beta (sum_{E_m = E_n} rho_m |N_mn|^2 - <N_S>^2)."""
        _, deg, n2 = self._pairs()
        rho = self.rho_diag
        mean = float(np.dot(rho, np.diag(self.n_eigen)))
        return self.beta * (float(np.sum(np.where(deg, rho[:, None] * n2, 0.0))) - mean**2)

    def hse(self):
        return self.expectation(self.h_se)

    @cached_property
    def blocks(self):
        """Index sets of the blocks left invariant by H_0 and N_S."""
        adj = sparse.csr_matrix((np.abs(self.h0) + np.abs(self.n_s)) > 0)
        n, labels = connected_components(adj, directed=False)
        return [np.flatnonzero(labels == k) for k in range(n)]


# --- model builders ----------------------------------------------------------------

def fock_operators(n_modes):
    """Annihilation operators of ``n_modes`` spinless fermions (sparse, real)."""
    if n_modes > MAX_MODES:
        raise DimensionTooLarge(f"{n_modes} modes exceed the dense cap of {MAX_MODES}")
    a = sparse.csr_matrix([[0.0, 1.0], [0.0, 0.0]])
    z = sparse.diags([1.0, -1.0])
    eye = sparse.identity(2)
    ops = []
    for j in range(n_modes):
        factors = [z] * j + [a] + [eye] * (n_modes - j - 1)
        op = factors[0]
        for f in factors[1:]:
            op = sparse.kron(op, f, format='csr')
        ops.append(op.tocsr())
    return ops


def build_discretized_rlm(n_lead_sites, gamma, band, beta, eps_d=0.0, coupling=None):
    """Star-geometry resonant level: level d (mode 0) coupled to lead levels
    uniform on [-band, band] with pi nu V^2 = gamma, nu = n/(2 band).

    ``coupling`` overrides V (used for derivatives with respect to V).
    """
    if int(n_lead_sites) != n_lead_sites or n_lead_sites < 2:
        raise DomainError("n_lead_sites must be an integer >= 2")
    if n_lead_sites + 1 > MAX_MODES:
        raise DimensionTooLarge(f"{n_lead_sites} lead sites exceed the cap of {MAX_MODES - 1}")
    if not (gamma > 0 and band > 0):
        raise DomainError("gamma and band must be positive")
    n = int(n_lead_sites)
    eps_k = np.linspace(-band, band, n)
    nu = n / (2 * band)
    V = math.sqrt(gamma / (math.pi * nu)) if coupling is None else coupling
    c = fock_operators(n + 1)
    num = [op.T @ op for op in c]
    h_lead = sum(e * num[k + 1] for k, e in enumerate(eps_k))
    hop = sum(c[k + 1].T @ c[0] for k in range(n))
    h_se = V * (hop + hop.T)
    h0 = eps_d * num[0] + h_lead + h_se
    n_total = sum(num)
    return EdSystem(h0.toarray(), num[0].toarray(), h_se.toarray(), beta,
                    n_total=n_total.toarray())


def rlm_coupling_builder(n_lead_sites, band, beta, eps_d=0.0):
    """J -> discretized RLM with hopping amplitude V = J."""
    def build(J):
        return build_discretized_rlm(n_lead_sites, 1.0, band, beta, eps_d, coupling=J)
    return build


def build_two_level(w, x, beta=1.0):
    """Isolated two-level system H_0 = w [[x, 1], [1, 0]], N_S = diag(1, 0)."""
    return EdSystem(w * np.array([[x, 1.0], [1.0, 0.0]]), np.diag([1.0, 0.0]),
                    np.zeros((2, 2)), beta)


def two_level_cT(w, x, beta):
    """Closed form beta x^2 / [2 (4 + x^2)(1 + cosh(beta w sqrt(4 + x^2)))]."""
    r = math.sqrt(4 + x * x)
    return beta * x * x / (2 * (4 + x * x) * (1 + math.cosh(beta * w * r)))


# --- propagation ---------------------------------------------------------------------

_BATCH = 4096


def _ordered_product(mats):
    """mats[-1] @ ... @ mats[0] by pairwise batched products."""
    while len(mats) > 1:
        if len(mats) % 2:
            mats = np.concatenate([mats, np.eye(mats.shape[1])[None]])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _propagator(sys, ramp, n_steps):
    """Midpoint-rule product of exp(-i H(t_j + dt/2) dt), block by block."""
    A, tau = ramp.amplitude, ramp.duration
    U = np.zeros((sys.dim, sys.dim), dtype=complex)
    dt = tau / n_steps
    lam_all = A * (np.arange(n_steps) + 0.5) / n_steps
    for idx in sys.blocks:
        h0 = sys.h0[np.ix_(idx, idx)]
        ns = sys.n_s[np.ix_(idx, idx)]
        u = np.eye(idx.size, dtype=complex)
        for start in range(0, n_steps, _BATCH):
            lam = lam_all[start:start + _BATCH]
            E, V = np.linalg.eigh(h0[None] + lam[:, None, None] * ns[None])
            steps = (V * np.exp(-1j * E * dt)[:, None, :]) @ V.transpose(0, 2, 1)
            u = _ordered_product(steps) @ u
        U[np.ix_(idx, idx)] = u
    return U


def _final_spectrum(sys, A):
    return np.linalg.eigh(sys.h0 + A * sys.n_s)


def _delta_f(sys, E1):
    return -(_log_z(E1, sys.beta) - _log_z(sys.spectrum[0], sys.beta)) / sys.beta


def _wdf_from_u(sys, U, E1, V1):
    E0, V0 = sys.spectrum
    P = np.abs(V1.T @ U @ V0)**2  # P[m, n] = |<m_tau|U|n_0>|^2
    p = P * sys.rho_diag[None, :]
    w = E1[:, None] - E0[None, :]
    tol = _spectral_tol(np.concatenate([E0, E1]))
    return WorkDistribution.from_atoms(w.ravel(), p.ravel() / p.sum(), _delta_f(sys, E1),
                                       merge_tol=tol)


def _auto_steps(sys, ramp):
    E = sys.spectrum[0]
    span = float(E.max() - E.min()) + abs(ramp.amplitude) * float(np.abs(sys.n_s).max())
    return max(8, int(math.ceil(2 * ramp.duration * span)))


def wdf_two_time(sys, ramp, n_steps=None, tol=1e-7, max_steps=2**16):
    """Two-time-measurement work distribution for H_0 + (A t/tau) N_S.

    The number of midpoint steps doubles from ``n_steps`` until the estimated
    error of every dissipated-work cumulant (one third of the change under
    doubling, the scheme being second order) is below ``tol`` relative to the
    cumulant, or ``tol`` times (|A| ||N_S||)^k in absolute terms.
    ``tol=None`` evaluates exactly ``n_steps`` steps without refinement.
    """
    if ramp.amplitude == 0:
        return WorkDistribution.from_atoms([0.0], [1.0])
    E1, V1 = _final_spectrum(sys, ramp.amplitude)
    if ramp.duration == 0:
        return _wdf_from_u(sys, np.eye(sys.dim), E1, V1)
    n = n_steps or _auto_steps(sys, ramp)
    scale = abs(ramp.amplitude) * float(np.abs(sys.n_s).max())
    prev = _wdf_from_u(sys, _propagator(sys, ramp, n), E1, V1)
    if tol is None:
        return prev
    while 2 * n <= max_steps:
        n *= 2
        cur = _wdf_from_u(sys, _propagator(sys, ramp, n), E1, V1)
        ok = all(abs(a - b) / 3 <= tol * (abs(a) + scale**k * 1e-3)
                 for k, (a, b) in enumerate(zip(cur.cumulants(), prev.cumulants()), start=1))
        if ok:
            return cur
        prev = cur
    raise PropagatorNotConverged(f"work cumulants not converged with {n} steps")


def generating_function(sys, ramp, u, n_steps=None, U=None):
    """<e^{-u W}> = Tr[U^dag e^{-u H_tau} U e^{-(beta-u) H_0}] / Z by matrix
    functions (complex u allowed)."""
    E1, V1 = _final_spectrum(sys, ramp.amplitude)
    E0, V0 = sys.spectrum
    if U is None:
        if ramp.duration == 0 or ramp.amplitude == 0:
            U = np.eye(sys.dim)
        else:
            U = _propagator(sys, ramp, n_steps or 64 * _auto_steps(sys, ramp))
    s0, s1 = E0.min(), E1.min()
    b = sys.beta
    left = (V1 * np.exp(-u * (E1 - s1))) @ V1.T
    right = (V0 * np.exp(-(b - u) * (E0 - s0))) @ V0.T
    tr = np.trace(U.conj().T @ left @ U @ right)
    log_z = _log_z(E0 - s0, b)
    return complex(tr * np.exp(-u * (s1 - s0) - log_z))


# --- sudden limit -----------------------------------------------------------------------

class ZassenhausMoments(NamedTuple):
    m1: float
    m2: float
    m3: float
    dq3: float
    double_commutator: np.ndarray


def zassenhaus_moments(sys, A):
    """Classical parts A^n <N_S^n>_0 and the coherence term
    dQ_3 = (A^2/2) <[N_S, [H_0, N_S]]>_0 of the sudden-quench moments."""
    N, H = sys.n_s, sys.h0
    inner = H @ N - N @ H
    dc = N @ inner - inner @ N
    N2 = N @ N
    return ZassenhausMoments(A * sys.expectation(N), A**2 * sys.expectation(N2),
                             A**3 * sys.expectation(N2 @ N), 0.5 * A**2 * sys.expectation(dc), dc)


# --- Lehmann representations -------------------------------------------------------------------

def relaxation_lehmann(sys, t_grid):
    """Psi_0(t) = beta [sum' (rho_n - rho_m)/(E_m - E_n) |N_nm|^2 e^{i(E_n-E_m)t} + c(T)],
    the prime excluding degenerate pairs. Returns (Psi_0 values, c(T))."""
    t = np.asarray(t_grid, dtype=float)
    omega, deg, n2 = sys._pairs()
    rho = sys.rho_diag
    with np.errstate(divide='ignore', invalid='ignore'):
        weights = np.where(deg, 0.0, (rho[:, None] - rho[None, :]) * n2 / omega)
    mask = weights != 0
    wts, om = weights[mask], omega[mask]
    phase = np.exp(-1j * np.multiply.outer(t, om))
    vals = sys.beta * (phase @ wts + sys.c_T())
    if np.any(np.abs(vals.imag) > 1e-12 * max(1.0, np.abs(vals.real).max())):
        raise ArithmeticError("Lehmann relaxation function is not real")
    return vals.real, sys.c_T()


def response_function(sys, t_grid):
    """chi(t) = i Tr rho [N_S(t), N_S] for t >= 0."""
    t = np.asarray(t_grid, dtype=float)
    omega, _, n2 = sys._pairs()
    rho = sys.rho_diag
    b = ((rho[:, None] - rho[None, :]) * n2).ravel()
    vals = 1j * (np.exp(-1j * np.multiply.outer(t, omega.ravel())) @ b)
    return vals.real


def _group_poles(omega, weights, tol):
    """Sum weights sharing a pole frequency (within tol)."""
    order = np.argsort(omega, kind='stable')
    om, wt = omega[order], weights[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(om) > tol) + 1])
    return om[starts], np.add.reduceat(wt, starts)


def verify_eq5(sys, n_nodes=None):
    """Compare the pole weights of the Fourier-transformed relaxation function,
    built directly from Kubo's definition beta^-1 int_0^beta ds <dN(-is) dN>,
    with the weights of 2 Im chi(omega)/(omega T); the omega = 0 weight is
    compared with c(T)/T. Returns the maximum residual."""
    E = sys.spectrum[0]
    rho, b = sys.rho_diag, sys.beta
    omega, deg, n2 = sys._pairs()
    tol = _spectral_tol(E)
    span = float(E.max() - E.min())
    n_nodes = n_nodes or max(64, int(2 * b * span) + 32)
    x, gw = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * b * (x + 1)
    gw = 0.5 * b * gw
    # weight of the (n, m) pole: beta rho_n |N_nm|^2 int_0^beta ds e^{s (E_n - E_m)}
    kubo = b * rho[:, None] * n2 * np.tensordot(gw, np.exp(np.multiply.outer(s, -omega)), axes=1)
    mean = float(np.dot(rho, np.diag(sys.n_eigen)))
    # Psi~ weights (per 2 pi) from Kubo's definition
    psi_om, psi_w = _group_poles(omega.ravel(), kubo.ravel(), tol)
    zero = np.abs(psi_om) <= tol
    psi_w = psi_w.copy()
    psi_w[zero] -= b * b * mean**2
    # 2 Im chi / (omega T) weights from commutator weights b_nm
    comm = ((rho[:, None] - rho[None, :]) * n2)
    with np.errstate(divide='ignore', invalid='ignore'):
        chi_w = np.where(deg, 0.0, b * comm / omega)
    chi_om, chi_w = _group_poles(omega.ravel(), chi_w.ravel(), tol)
    chi_w = chi_w.copy()
    chi_w[np.abs(chi_om) <= tol] = sys.c_T() / sys.temperature
    if psi_om.shape != chi_om.shape:
        raise ArithmeticError("pole sets differ")
    return float(np.max(np.abs(psi_w - chi_w)))


def lehmann_cumulants(sys, ramp):
    """Linear-response cumulants from the system's own discrete spectrum,
    including the c(T) terms A^2 c/2 and A^2 T c."""
    A2, tau = ramp.amplitude**2, ramp.duration
    omega, deg, n2 = sys._pairs()
    rho = sys.rho_diag
    s2 = np.sinc(omega * tau / (2 * np.pi))**2
    live = ~deg
    diff = np.where(live, (rho[:, None] - rho[None, :]) * n2 * s2, 0.0)
    summ = np.where(live, (rho[:, None] + rho[None, :]) * n2 * s2, 0.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        k1 = 0.5 * A2 * float(np.sum(np.where(live, diff / omega, 0.0)))
    k2 = 0.5 * A2 * float(summ.sum())
    k3 = 0.5 * A2 * float(np.sum(diff * omega))
    c = sys.c_T()
    return k1 + 0.5 * A2 * c, k2 + A2 * sys.temperature * c, k3


class LrComparison(NamedTuple):
    amplitudes: np.ndarray
    exact: np.ndarray        # shape (len(A), 3)
    linear_response: np.ndarray
    deviation: np.ndarray    # relative, per cumulant
    exponents: np.ndarray    # fitted d ln(deviation)/d ln A per cumulant


def lr_vs_exact(sys, tau, A_list, tol=1e-7):
    """Exact versus linear-response cumulants over amplitudes ``A_list``; the
    relative deviation should shrink like A (first subleading order)."""
    A_arr = np.asarray(A_list, dtype=float)
    exact, lr = [], []
    for A in A_arr:
        ramp = RampProtocol(A, tau)
        exact.append(wdf_two_time(sys, ramp, tol=tol).cumulants())
        lr.append(lehmann_cumulants(sys, ramp))
    exact, lr = np.array(exact), np.array(lr)
    with np.errstate(divide='ignore', invalid='ignore'):
        dev = np.abs(exact - lr) / np.abs(lr)
    nz = A_arr != 0
    exps = np.array([np.polyfit(np.log(np.abs(A_arr[nz])), np.log(dev[nz, k]), 1)[0]
                     if nz.sum() >= 2 else np.nan for k in range(3)])
    return LrComparison(A_arr, exact, lr, dev, exps)


# --- thermodynamics ------------------------------------------------------------------------------

def _free_energy(E, T):
    return -T * _log_z(E, 1 / T)


def _entropy_and_o(builder, J, T, dJ):
    sys = builder(J)
    E, V = sys.spectrum
    rho = _thermal(E, 1 / T)
    mean_h = float(np.dot(rho, E))
    S = (mean_h - _free_energy(E, T)) / T
    o_op = (builder(J + dJ).h0 - builder(J - dJ).h0) / (2 * dJ)  # dH/dJ, exact for linear J
    o = _thermal_average(rho, V, o_op)
    return S, o


def maxwell_check(builder, J, T_grid, step=1e-4):
    """max over T of |dS/dJ + d<O_SE>/dT| with O_SE = dH/dJ, both by central
    differences of exact thermodynamics."""
    res = 0.0
    for T in np.atleast_1d(T_grid):
        S_p, _ = _entropy_and_o(builder, J + step, T, step)
        S_m, _ = _entropy_and_o(builder, J - step, T, step)
        _, o_p = _entropy_and_o(builder, J, T + step, step)
        _, o_m = _entropy_and_o(builder, J, T - step, step)
        res = max(res, abs((S_p - S_m) / (2 * step) + (o_p - o_m) / (2 * step)))
    return res
