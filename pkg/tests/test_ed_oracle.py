import math

import numpy as np
import pytest
from scipy.linalg import expm

from critwork import ed_oracle as ed
from critwork.errors import DimensionTooLarge, DomainError, PropagatorNotConverged
from critwork.lr_engine import RampProtocol


@pytest.fixture(scope='module')
def two():
    return ed.build_two_level(1.0, 1.0, 2.0)


@pytest.fixture(scope='module')
def rlm3():
    return ed.build_discretized_rlm(3, 0.5, 1.0, 2.0, eps_d=0.2)


def test_fock_anticommutation():
    c = [op.toarray() for op in ed.fock_operators(3)]
    eye = np.eye(8)
    for i in range(3):
        for j in range(3):
            assert np.allclose(c[i] @ c[j].T + c[j].T @ c[i], eye * (i == j))
            assert np.allclose(c[i] @ c[j] + c[j] @ c[i], 0)


def test_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        ed.fock_operators(ed.MAX_MODES + 1)
    with pytest.raises(DimensionTooLarge):
        ed.build_discretized_rlm(ed.MAX_MODES, 0.5, 1.0, 1.0)


def test_system_validation():
    with pytest.raises(DomainError):
        ed.EdSystem([[0, 1], [0, 0]], np.eye(2), np.zeros((2, 2)), 1.0)
    with pytest.raises(DomainError):
        ed.EdSystem(np.eye(2), np.eye(2), np.zeros((2, 2)), 0.0)
    with pytest.raises(DomainError):
        ed.EdSystem([[0, 1], [1, 0]], np.eye(2), np.zeros((2, 2)), 1.0,
                    n_total=np.diag([1.0, 0.0]))


def test_discretized_rlm_conserves_charge_and_blocks(rlm3):
    # particle-number sectors of 4 modes: binomial(4, k)
    assert sorted(len(b) for b in rlm3.blocks) == [1, 1, 4, 4, 6]


def test_hse_is_double_commutator(rlm3):
    N, H = rlm3.n_s, rlm3.h0
    dc = N @ (H @ N - N @ H) - (H @ N - N @ H) @ N
    assert np.allclose(dc, -rlm3.h_se, atol=1e-14)


def test_two_level_cT_closed_form(two):
    assert abs(two.c_T() - ed.two_level_cT(1.0, 1.0, 2.0)) < 1e-12
    assert abs(two.static_susceptibility() - two.kubo_susceptibility() - two.c_T()) < 1e-9
    assert ed.build_two_level(1.0, 0.0, 2.0).c_T() == pytest.approx(0.0, abs=1e-15)


def test_response_function_two_level(two):
    t = np.linspace(0, 4, 9)
    r = math.sqrt(5)
    ref = 2 * math.tanh(r) / 5 * np.sin(t * r)
    assert np.allclose(ed.response_function(two, t), ref, atol=1e-14)


def test_relaxation_function_identities(rlm3):
    vals, c = ed.relaxation_lehmann(rlm3, [0.0])
    assert vals[0] * rlm3.temperature == pytest.approx(rlm3.static_susceptibility(), rel=1e-9)
    # d Psi_0/dt = -beta chi(t)
    h, t = 1e-5, 0.7
    v, _ = ed.relaxation_lehmann(rlm3, [t - h, t + h])
    assert (v[1] - v[0]) / (2 * h) == pytest.approx(
        -rlm3.beta * ed.response_function(rlm3, [t])[0], abs=1e-8)


@pytest.mark.parametrize('builder', [
    lambda: ed.build_two_level(1.0, 1.0, 2.0),
    lambda: ed.build_two_level(0.5, 0.0, 1.0),
    lambda: ed.build_discretized_rlm(3, 0.5, 1.0, 2.0, eps_d=0.2),
    lambda: ed.build_discretized_rlm(4, 0.3, 1.0, 1.5)])
def test_pole_weight_identity(builder):
    assert ed.verify_eq5(builder()) < 1e-10


def test_static_weight_matches_kubo_integral():
    """Psi~ at omega = 0 from Kubo's definition equals c(T)/T; checked by a
    node count independent of the default."""
    sys = ed.build_two_level(1.0, 1.0, 2.0)
    assert ed.verify_eq5(sys, n_nodes=200) < 1e-12


@pytest.mark.parametrize('tau', [0.0, 0.5, 3.0])
def test_jarzynski_equality(rlm3, tau):
    d = ed.wdf_two_time(rlm3, RampProtocol(0.6, tau), n_steps=32, tol=None)
    assert abs(d.jarzynski(rlm3.beta) - 1) < 1e-10


def test_generating_function(two):
    ramp = RampProtocol(0.4, 1.5)
    d = ed.wdf_two_time(two, ramp, n_steps=64, tol=None)
    U = ed._propagator(two, ramp, 64)
    g = ed.generating_function(two, ramp, two.beta, U=U)
    assert g == pytest.approx(math.exp(-two.beta * d.delta_f), rel=1e-12)
    h = 1e-4
    deriv = (ed.generating_function(two, ramp, -h, U=U) - ed.generating_function(two, ramp, h, U=U)) / (2 * h)
    assert deriv.real == pytest.approx(d.mean, rel=1e-7)


def test_propagator_is_unitary_and_matches_expm(two):
    ramp = RampProtocol(0.0, 2.0)
    U = ed._propagator(two, ramp, 16)
    assert np.allclose(U, expm(-1j * two.h0 * 2.0), atol=1e-13)
    U = ed._propagator(two, RampProtocol(0.7, 2.0), 50)
    assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-13)


def test_wdf_convergence_and_failure(two):
    ramp = RampProtocol(0.4, 1.0)
    d = ed.wdf_two_time(two, ramp)
    fine = ed.wdf_two_time(two, ramp, n_steps=8192, tol=None)
    assert np.allclose(d.cumulants(), fine.cumulants(), rtol=1e-6)
    with pytest.raises(PropagatorNotConverged):
        ed.wdf_two_time(two, ramp, n_steps=8, tol=1e-14, max_steps=32)


def test_sudden_quench_moments(rlm3):
    A = 0.3
    z = ed.zassenhaus_moments(rlm3, A)
    m = ed.wdf_two_time(rlm3, RampProtocol(A, 0.0)).moments
    assert abs(m[0] - z.m1) < 1e-12
    assert abs(m[1] - z.m2) < 1e-12
    assert abs(m[2] - z.m3 - z.dq3) < 1e-12
    assert abs(z.dq3 + 0.5 * A**2 * rlm3.hse()) < 1e-14


def test_lehmann_cumulants_sudden_limit(rlm3):
    k1, k2, _ = ed.lehmann_cumulants(rlm3, RampProtocol(0.2, 0.0))
    assert k1 == pytest.approx(0.02 * rlm3.static_susceptibility(), rel=1e-8)
    n = rlm3.n_s
    var = rlm3.expectation(n @ n) - rlm3.expectation(n)**2
    assert k2 == pytest.approx(0.04 * var, rel=1e-10)


def test_lr_vs_exact_scaling():
    sys = ed.build_discretized_rlm(4, 0.5, 1.0, 2.0, eps_d=0.2)
    r = ed.lr_vs_exact(sys, 1.0, [0.1, 0.01, 0.001])
    assert np.all(np.abs(r.exponents - 1) < 0.2)
    assert np.all(r.deviation[-1] < 1e-2)


def test_maxwell_relation():
    b = ed.rlm_coupling_builder(3, 1.0, 2.0, eps_d=0.1)
    coarse = ed.maxwell_check(b, 0.4, [0.3, 1.0], step=1e-3)
    fine = ed.maxwell_check(b, 0.4, [0.3, 1.0], step=1e-4)
    assert fine < 1e-6
    assert fine < coarse


def test_small_rlm_dimension_and_conservation():
    sys = ed.build_discretized_rlm(2, 0.5, 1.0, 1.0)
    assert sys.dim == 8
    c = ed.fock_operators(3)
    n_tot = sum((op.T @ op).toarray() for op in c)
    assert np.abs(sys.h0 @ n_tot - n_tot @ sys.h0).max() < 1e-13


def test_discretized_occupation_converges():
    """Finite-band discretization error shrinks monotonically with the number
    of lead sites (band = 1, beta band = 2, narrow level)."""
    from critwork.chi_models import rlm_occupation
    gamma, eps_d, beta = 0.1, 0.3, 2.0
    exact = rlm_occupation(eps_d, gamma, 1 / beta)
    errs = [abs(ed.build_discretized_rlm(n, gamma, 1.0, beta, eps_d).occupation() / exact - 1)
            for n in (6, 8, 10)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.03


def test_two_level_eigenvalues():
    w, x = 0.7, 1.3
    E = ed.build_two_level(w, x, 1.0).spectrum[0]
    r = math.sqrt(4 + x * x)
    assert np.allclose(E, [w / 2 * (x - r), w / 2 * (x + r)], rtol=1e-14)


def test_wdf_trivial_protocols(two):
    d = ed.wdf_two_time(two, RampProtocol(0.0, 1.0))
    assert d.support() == (0.0, 0.0) and d.delta_f == 0.0
    d = ed.wdf_two_time(two, RampProtocol(0.5, 0.0))
    E0, V0 = two.spectrum
    E1, V1 = np.linalg.eigh(two.h0 + 0.5 * two.n_s)
    P = (V1.T @ V0)**2 * two.rho_diag[None, :]
    for m in range(2):
        for n in range(2):
            w = E1[m] - E0[n]
            assert d.p[np.argmin(np.abs(d.w - w))] == pytest.approx(P[m, n], rel=1e-12)


def test_wdf_adiabatic_concentrates(two):
    d = ed.wdf_two_time(two, RampProtocol(0.3, 200.0), n_steps=4096, tol=None)
    E0 = two.spectrum[0]
    E1 = np.linalg.eigvalsh(two.h0 + 0.3 * two.n_s)
    for n in range(2):
        p = d.p[np.argmin(np.abs(d.w - (E1[n] - E0[n])))]
        assert p / two.rho_diag[n] > 0.999


def test_generating_function_moments_by_contour(two):
    """<W^n> = (-1)^n n! (1/2 pi i) oint g(u) u^-(n+1) du on a small circle."""
    ramp = RampProtocol(0.4, 1.5)
    U = ed._propagator(two, ramp, 256)
    d = ed.wdf_two_time(two, ramp, n_steps=256, tol=None)
    assert ed.generating_function(two, ramp, 0.0, U=U) == pytest.approx(1.0, abs=1e-12)
    r, K = 0.5, 48
    u = r * np.exp(2j * np.pi * np.arange(K) / K)
    g = np.array([ed.generating_function(two, ramp, z, U=U) for z in u])
    for n in (1, 2, 3):
        coeff = np.mean(g * u**(-n)).real
        assert (-1)**n * math.factorial(n) * coeff == pytest.approx(d.moment(n), abs=1e-10)


def test_two_level_coherent_third_moment():
    """H_SE = 0 yet [N,[H_0,N]] != 0: the third sudden moment carries the coherence term."""
    sys = ed.build_two_level(1.0, 0.5, 1.5)
    A = 0.4
    z = ed.zassenhaus_moments(sys, A)
    m3 = ed.wdf_two_time(sys, RampProtocol(A, 0.0)).moment(3)
    assert m3 - z.m3 == pytest.approx(z.dq3, abs=1e-13)
    assert abs(z.dq3) > 1e-3
    assert sys.hse() == 0.0


def test_relaxation_function_is_real(rlm3):
    vals, _ = ed.relaxation_lehmann(rlm3, np.linspace(0, 20, 41))
    assert vals.dtype.kind == 'f'


@pytest.mark.parametrize('tau', [0.0, 0.4, 2.0])
def test_second_law(rlm3, tau):
    d = ed.wdf_two_time(rlm3, RampProtocol(-0.5, tau), n_steps=64, tol=None)
    assert d.mean >= d.delta_f


def test_lr_vs_exact_zero_drive(rlm3):
    r = ed.lr_vs_exact(rlm3, 1.0, [0.0, 0.1, 0.01])
    assert np.all(r.exact[0] == 0) and np.all(r.linear_response[0] == 0)
    assert np.all(np.isfinite(r.exponents))


def test_maxwell_decoupled_and_step_order():
    b = ed.rlm_coupling_builder(4, 1.0, 2.0)
    assert ed.maxwell_check(b, 0.0, [0.5]) < 1e-10
    r1 = ed.maxwell_check(b, 0.3, [0.5], step=2e-3)
    r2 = ed.maxwell_check(b, 0.3, [0.5], step=1e-3)
    assert 3.0 < r1 / r2 < 5.0
