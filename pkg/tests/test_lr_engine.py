import math

import numpy as np
import pytest

from critwork import cft_scaling as cs
from critwork import lr_engine as lr
from critwork.cft_scaling import CftChi, CftParams
from critwork.chi_models import RLM, MajoranaRLM, TabulatedChi
from critwork.ed_oracle import build_discretized_rlm
from critwork.errors import DivergenceError, DomainError
from critwork.lr_engine import CumulantResult, RampProtocol, cumulant


def test_ramp_validation():
    with pytest.raises(DomainError):
        RampProtocol(1.0, -1.0)
    with pytest.raises(DomainError):
        RampProtocol(float('inf'), 1.0)
    assert RampProtocol(-0.2, 1.0).lr_validity(3.0) == pytest.approx(0.6)


def test_cumulant_result_rejects_negative_variance():
    with pytest.raises(DomainError):
        CumulantResult(2, -1e-3, 1e-6, 'frequency')
    assert CumulantResult(2, -1e-9, 1e-6, 'frequency').value < 0
    with pytest.raises(DomainError):
        CumulantResult(1, 1.0, 0.0, 'guess')


def test_order_and_divergence_errors():
    m = MajoranaRLM(1.0, 0.1)
    with pytest.raises(DomainError):
        cumulant(4, m, RampProtocol(1, 1))
    with pytest.raises(DivergenceError):
        cumulant(3, m, RampProtocol(1, 0))
    with pytest.raises(DivergenceError):
        cumulant(3, CftChi(0.5, 1.0, 0.01), RampProtocol(1, 10))


@pytest.mark.parametrize('T', [1e-4, 0.1, 10.0])
def test_sudden_kappa1_is_static_susceptibility(T):
    m = MajoranaRLM(1.0, T)
    r = cumulant(1, m, RampProtocol(0.3, 0.0))
    assert r.value == pytest.approx(lr.sudden_kappa1(m, 0.3), rel=1e-8)
    assert r.quadrature_error < 1e-8 * r.value


@pytest.mark.parametrize('T', [1e-3, 0.5])
def test_sudden_variance_of_majorana_charge(T):
    """The MRLM charge N = 1/2 + i a b has <dN^2> = 1/4 at any temperature."""
    r = cumulant(2, MajoranaRLM(1.0, T), RampProtocol(1.0, 0.0))
    assert r.value == pytest.approx(0.25, rel=1e-8)


@pytest.mark.parametrize('T', [1e-3, 0.1, 1.0])
def test_adiabatic_limit(T):
    m = MajoranaRLM(1.0, T)
    tau = 1e4 / T
    r = cumulant(1, m, RampProtocol(1.0, tau))
    assert r.value == pytest.approx(lr.wdiss_adiabatic(m, T, RampProtocol(1.0, tau)), rel=1e-3)


def test_monotone_crossover():
    m = MajoranaRLM(1.0, 1e-3)
    vals = [cumulant(1, m, RampProtocol(1, tau)).value for tau in (0, 1, 10, 1e2, 1e3, 1e5)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_time_and_frequency_routes_agree_mrlm():
    m = MajoranaRLM(1.0, 0.01)
    psi = lr.psi_from_chi(m)
    assert psi(0.0) * m.temperature == pytest.approx(m.static_susceptibility(), rel=1e-8)
    r1 = lr.wdiss_time_domain(psi, 0.01, RampProtocol(1, 100.0))
    assert r1.value == pytest.approx(cumulant(1, m, RampProtocol(1, 100.0)).value, rel=1e-6)
    r3 = lr.kappa3_time_domain(psi, 0.01, RampProtocol(1, 10.0))
    assert r3.value == pytest.approx(cumulant(3, m, RampProtocol(1, 10.0)).value, rel=1e-6)


def test_time_and_frequency_routes_agree_cft():
    m = CftChi(0.4, 1.0, 1e-3)
    ramp = RampProtocol(1.0, 300.0)
    td = lr.wdiss_time_domain(m.psi, m.temperature, ramp)
    assert td.value == pytest.approx(cumulant(1, m, ramp).value, rel=1e-7)
    k3 = lr.kappa3_time_domain(m.psi, m.temperature, ramp)
    assert k3.value == pytest.approx(cumulant(3, m, ramp).value, rel=1e-7)


def test_cft_log_case_adiabatic_closed_form():
    """Delta = 1/2: int Psi_0 dt = pi/(2 Lambda T^2), so <W> = pi A^2 / (2 Lambda T tau)."""
    T, L, tau = 1e-3, 1.0, 1e6
    ramp = RampProtocol(1.0, tau)
    exact = math.pi / (2 * L * T * tau)
    assert lr.wdiss_adiabatic(CftChi(0.5, L, T), T, ramp) == pytest.approx(exact, rel=1e-12)
    p = CftParams(0.5, L, T)
    assert lr.wdiss_adiabatic(lambda t: cs.psi0(t, p), T, ramp) == pytest.approx(exact, rel=1e-8)
    assert cumulant(1, CftChi(0.5, L, T), ramp).value == pytest.approx(exact, rel=1e-3)


def test_kz_window_delta_half_constant_offset():
    """In the KZ window the exact <W> differs from the logarithmic asymptote by
    a tau-independent constant (3/2 + ln 2)/Lambda."""
    T, L = 1e-8, 1.0
    m = CftChi(0.5, L, T)
    p = m.params
    for x in (1e-4, 1e-3, 1e-2):
        w = cumulant(1, m, RampProtocol(1.0, x / T)).value
        assert w - cs.kz_wdiss(x / T, p, 1.0) == pytest.approx((1.5 + math.log(2)) / L, rel=2e-3)


def test_kz_window_delta_two_fifths_kappa3():
    T = 1e-8
    m = CftChi(0.4, 1.0, T)
    for x in (1e-4, 1e-3):
        k = cumulant(3, m, RampProtocol(1.0, x / T)).value
        assert k == pytest.approx(cs.kz_kappa3(x / T, m.params, 1.0), rel=1e-5)


def test_kappa3_log_case_time_domain():
    T = 1e-6
    p = CftParams(0.5, 1.0, T)
    tau = 1e-3 / T
    r = lr.kappa3_time_domain(lambda t: cs.psi0(t, p), T, RampProtocol(1, tau), tau0=p.tau0)
    assert r.value == pytest.approx(cs.kz_kappa3(tau, p, 1.0), rel=1e-2)
    with pytest.raises(DivergenceError):
        lr.kappa3_time_domain(lambda t: cs.psi0(t, p), T, RampProtocol(1, tau))


def test_rlm_sudden_kappa3_and_cT():
    m = RLM(1.0, 0.1, eps_d=0.2, band_cutoff=50.0)
    assert lr.sudden_kappa3(m, 0.5) == pytest.approx(-0.125 * m.hse(), rel=1e-15)
    sym = RLM(1.0, 0.1)
    assert abs(lr.check_cT(sym)) < 1e-6 * sym.static_susceptibility()


def test_check_cT_on_discrete_system(caplog):
    sys = build_discretized_rlm(3, 0.5, 1.0, 2.0, eps_d=0.2)
    c = lr.check_cT(sys)
    assert c == pytest.approx(sys.c_T(), abs=1e-8)


def test_check_cT_warns_for_inconsistent_table(caplog):
    # Im chi / omega tabulated far too small for the claimed occupation
    class Bad(TabulatedChi):
        def static_susceptibility(self):
            return 1.0

    w = np.linspace(0, 10, 200)
    bad = Bad(w, 1e-3 * np.tanh(w), 0.5)
    with caplog.at_level('WARNING'):
        lr.check_cT(bad)
    assert 'not negligible' in caplog.text


def test_dkappa3_dT_matches_c2ck():
    g = 1.0
    m = MajoranaRLM(g, 1e-3)
    ramp = RampProtocol(1.0, 1e3)
    assert lr.dkappa3_dT(m, ramp) == pytest.approx(
        cs.dkappa3_dT_c2ck(1e3, 1e-3, 2 * math.pi * g, 1.0), rel=1e-4)


def test_dkappa3_dT_finite_in_sudden_limit():
    v = lr.dkappa3_dT(MajoranaRLM(1.0, 0.3), RampProtocol(1.0, 0.0))
    assert math.isfinite(v) and v < 0


def test_sudden_limits_tuple():
    m = RLM(1.0, 0.2)
    s = lr.sudden_limits(m, 0.4)
    assert s.kappa1 == pytest.approx(0.08 * m.static_susceptibility())
    assert s.kappa3 == pytest.approx(-0.08 * m.hse())


def test_thread_count(monkeypatch):
    monkeypatch.setenv('CRITWORK_THREADS', '3')
    assert lr.thread_count() == 3
    assert lr.thread_count(2) == 2
    monkeypatch.delenv('CRITWORK_THREADS')
    assert lr.thread_count() >= 1
    with pytest.raises(DomainError):
        lr.thread_count(0)


def test_sweep_statuses_and_order():
    rows = lr.crossover_sweep(MajoranaRLM(1.0, 0.1), [0.1, 0.01], [1.0, 0.0], [0.1], (3, 1),
                              threads=1)
    keys = [(r.T, r.tau, r.n) for r in rows]
    assert keys == sorted(keys)
    by = {(r.T, r.tau, r.n): r for r in rows}
    assert by[(0.1, 0.0, 3)].status == 'observable-unavailable'
    assert by[(0.1, 1.0, 1)].status == 'ok'
    rlm = lr.crossover_sweep(RLM(1.0, 0.1), [0.1], [0.0], 0.1, (3,), threads=1)
    assert rlm[0].route == 'limit-formula' and rlm[0].status == 'ok'
    cft = lr.crossover_sweep(CftChi(0.5, 1.0, 1e-3), [1e-3], [0.0, 10.0], 0.1, (3,), threads=1)
    assert [r.status for r in cft] == ['divergent', 'ok']
    assert cft[1].route == 'time-domain'


def test_sweep_independent_of_worker_count():
    args = (MajoranaRLM(1.0, 0.1), [0.1, 0.02], [0.0, 3.0], [0.1, 0.2], (1, 2))
    a = lr.crossover_sweep(*args, threads=1)
    b = lr.crossover_sweep(*args, threads=2)
    assert [repr(r) for r in a] == [repr(r) for r in b]
