import math

import mpmath
import numpy as np
import pytest

from critwork.chi_models import (RLM, ClassicalTrajectoryConfig, MajoranaRLM, TabulatedChi,
                                 classical_sudden_wdf, classical_trajectory_work,
                                 load_chi_table, mrlm_im_chi, rlm_chi_integral, rlm_hse,
                                 rlm_im_chi, rlm_occupation, static_susceptibility_kk)
from critwork.errors import DomainError, ObservableUnavailable
from critwork.lr_engine import RampProtocol, cumulant


def _mp_fermi(e, T):
    return 1 / (1 + mpmath.exp(e / T))


def _mp_lorentz(e, eps_d, gamma):
    return gamma / mpmath.pi / ((e - eps_d)**2 + gamma**2)


def _mp_rlm_im_chi(omega, eps_d, T, gamma):
    """pi int A(e) A(e + w) [f(e) - f(e + w)] de for a non-interacting level."""
    f = lambda e: (_mp_lorentz(e, eps_d, gamma) * _mp_lorentz(e + omega, eps_d, gamma)
                   * (_mp_fermi(e, T) - _mp_fermi(e + omega, T)))
    pts = sorted({-mpmath.inf, eps_d - omega, eps_d, -omega, 0, mpmath.inf})
    return float(mpmath.pi * mpmath.quad(f, pts))


@pytest.mark.parametrize('omega', [1e-5, 0.05, 0.5, 3.0, 40.0])
def test_rlm_symmetric_closed_form_matches_golden_rule(omega):
    T, g = 0.2, 1.0
    ref = _mp_rlm_im_chi(omega, 0.0, T, g)
    assert abs(rlm_im_chi(omega, T, g) - ref) <= 1e-9 * abs(ref)


@pytest.mark.parametrize('omega', [0.1, 0.7, 5.0])
def test_rlm_general_level_matches_golden_rule(omega):
    T, g, eps_d = 0.2, 1.0, 0.3
    ref = _mp_rlm_im_chi(omega, eps_d, T, g)
    assert abs(rlm_chi_integral(omega, eps_d, T, g).imag - ref) <= 1e-8 * abs(ref)


def test_rlm_im_chi_odd_and_positive():
    w = np.array([1e-4, 0.3, 2.0, 50.0])
    vals = rlm_im_chi(w, 0.1, 1.0)
    assert np.all(vals > 0)
    assert np.allclose(rlm_im_chi(-w, 0.1, 1.0), -vals, rtol=1e-14)
    m = RLM(1.0, 0.1, eps_d=0.4)
    assert m.im_chi(-0.7) == pytest.approx(-m.im_chi(0.7), rel=1e-9)


def test_rlm_occupation_matches_integral():
    T, g, eps_d = 0.05, 0.7, 0.2
    ref = mpmath.quad(lambda e: _mp_fermi(e, T) * _mp_lorentz(e, eps_d, g),
                      [-mpmath.inf, 0, eps_d, mpmath.inf])
    assert abs(rlm_occupation(eps_d, g, T) - float(ref)) < 1e-12
    assert rlm_occupation(0.0, g, T) == pytest.approx(0.5, abs=1e-15)


def test_rlm_hse_matches_integral():
    T, g, eps_d, D = 0.1, 1.0, 0.3, 100.0
    f = lambda w: _mp_fermi(w, T) * (w - eps_d) / ((w - eps_d)**2 + g * g)
    ref = 2 * g / mpmath.pi * mpmath.quad(f, [-D, -1, 0, eps_d, 1, D])
    assert abs(rlm_hse(eps_d, g, T, D) - float(ref)) < 1e-9 * abs(float(ref))


def test_rlm_hse_cutoff_dependence():
    a = rlm_hse(0.0, 1.0, 0.1, 100.0)
    b = rlm_hse(0.0, 1.0, 0.1, 200.0)
    assert b - a == pytest.approx(-2 / math.pi * math.log(2), rel=1e-3)
    with pytest.raises(DomainError):
        RLM(1.0, 0.1, band_cutoff=5.0)


def test_mrlm_im_chi_formula_and_slope():
    m = MajoranaRLM(1.0, 0.3)
    assert m.im_chi(0.5) == pytest.approx(0.5 * math.tanh(0.5 / 0.6) / 1.25, rel=1e-15)
    assert m.im_chi_over_omega(0.0) == pytest.approx(1 / (4 * 0.3), rel=1e-15)
    assert m.im_chi_over_omega(1e-9) == pytest.approx(m.low_frequency_slope(), rel=1e-12)
    assert m.im_chi_over_omega(1e4) == pytest.approx(mrlm_im_chi(1e4, 0.3, 1.0) / 1e4, rel=1e-12)


@pytest.mark.parametrize('model', [MajoranaRLM(1.0, 0.1), MajoranaRLM(0.3, 2.0),
                                   RLM(1.0, 0.05), RLM(1.0, 1.0)])
def test_static_susceptibility_equals_kramers_kronig(model):
    """Open continuum models carry no static delta term: both routes agree."""
    assert model.static_susceptibility() == pytest.approx(
        static_susceptibility_kk(model), rel=1e-7)


def test_mrlm_susceptibility_logarithm():
    g = 1.0
    Ts = np.geomspace(1e-6, 1e-3, 5)
    chi = [MajoranaRLM(g, T).static_susceptibility() for T in Ts]
    slope = np.polyfit(np.log(g / Ts), chi, 1)[0]
    assert slope == pytest.approx(1 / (math.pi * g), rel=1e-4)


def test_rlm_susceptibility_saturates():
    chi = [RLM(1.0, T).static_susceptibility() for T in (1e-7, 1e-6, 1e-5)]
    assert np.ptp(chi) / np.mean(chi) < 1e-5
    assert chi[0] == pytest.approx(1 / math.pi, rel=1e-5)


def test_rlm_general_level_susceptibility():
    m = RLM(1.0, 0.1, eps_d=0.5)
    # T -> 0 limit of the Lorentzian density of states at the Fermi level
    cold = RLM(1.0, 1e-6, eps_d=0.5).static_susceptibility()
    assert cold == pytest.approx(1 / (math.pi * 1.25), rel=1e-5)
    assert m.static_susceptibility() < cold


def test_scales_and_with_temperature():
    m = RLM(1.0, 0.1, eps_d=0.2)
    assert m.with_temperature(0.5).temperature == 0.5
    assert m.with_temperature(0.5).eps_d == 0.2
    assert set(m.scales()) == {0.1, 1.0, 0.2}


def test_mrlm_has_no_hse():
    with pytest.raises(ObservableUnavailable):
        MajoranaRLM(1.0, 0.1).hse()


def test_invalid_parameters():
    with pytest.raises(DomainError):
        MajoranaRLM(0.0, 0.1)
    with pytest.raises(DomainError):
        RLM(1.0, -0.1)


def test_tabulated_chi_round_trip(tmp_path):
    ref = MajoranaRLM(1.0, 0.2)
    w = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 4000)])
    path = tmp_path / 'chi.txt'
    np.savetxt(path, np.column_stack([w, ref.im_chi(w)]), header='omega im_chi')
    tab = TabulatedChi.from_file(path, 0.2)
    assert tab.im_chi(-0.5) == pytest.approx(-ref.im_chi(0.5), rel=1e-5)
    assert tab.low_frequency_slope() == pytest.approx(ref.low_frequency_slope(), rel=1e-6)
    ramp = RampProtocol(1.0, 2.0)
    a = cumulant(1, tab, ramp, 1e-6).value
    b = cumulant(1, ref, ramp).value
    assert a == pytest.approx(b, rel=2e-3)


def test_tabulated_chi_validation(tmp_path):
    with pytest.raises(DomainError):
        TabulatedChi([0.0, 1.0], [0.5, 1.0], 0.1)
    with pytest.raises(DomainError):
        TabulatedChi([1.0, 0.5], [0.1, 0.2], 0.1)
    bad = tmp_path / 'bad.txt'
    bad.write_text('1 2 3\n4 5 6\n')
    with pytest.raises(DomainError):
        load_chi_table(bad)


def test_tabulated_chi_warns_beyond_table(caplog):
    tab = TabulatedChi([0.0, 1.0, 2.0], [0.0, 1.0, 0.5], 0.1)
    with caplog.at_level('WARNING'):
        assert tab.im_chi(3.0) == 0.0
    assert 'beyond the table' in caplog.text
    caplog.clear()
    with caplog.at_level('WARNING'):
        tab.im_chi(5.0)
    assert caplog.text == ''


def test_tabulated_kramers_kronig_exact():
    # Im chi = omega on [0, 1], then 2 - omega on [1, 2]: int Im chi/omega = 1 + 2 ln 2 - 1
    tab = TabulatedChi([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], 0.1)
    assert static_susceptibility_kk(tab) == pytest.approx(2 / math.pi * 2 * math.log(2), rel=1e-15)


# --- classical master equation ------------------------------------------------------

def test_classical_sudden_distribution():
    d = classical_sudden_wdf(0.2, 0.5, 1.0, 0.3)
    n0 = 1 / (1 + math.exp(0.2 / 0.3))
    for k in (1, 2, 3):
        assert d.moment(k) == pytest.approx(0.5**k * n0, rel=1e-14)
    assert d.jarzynski(1 / 0.3) == pytest.approx(1.0, rel=1e-14)


def test_classical_sampler_sudden_limit_and_seed():
    cfg = ClassicalTrajectoryConfig(20_000, seed=3)
    a = classical_trajectory_work(0.0, 0.5, 0.0, 1.0, 1.0, cfg)
    b = classical_trajectory_work(0.0, 0.5, 0.0, 1.0, 1.0, cfg)
    assert np.array_equal(a.w, b.w)
    assert set(np.unique(a.w)) <= {0.0, 0.5}
    se = a.moment_stderr()[0]
    assert abs(a.mean - 0.25) < 4 * se


def test_classical_sampler_quasistatic_limit():
    """Slow driving: <W> -> Delta F and the variance vanishes like 1/tau."""
    cfg = ClassicalTrajectoryConfig(4000, seed=1)
    d = classical_trajectory_work(0.0, 0.5, 2e3, 1.0, 0.5, cfg)
    mean, var, _ = d.central_moments()
    assert abs(mean - d.delta_f) < 4 * d.moment_stderr()[0] + 1e-4
    assert var < 1e-3


def test_classical_sampler_jarzynski_finite_tau():
    cfg = ClassicalTrajectoryConfig(50_000, seed=7)
    d = classical_trajectory_work(0.1, 0.8, 1.5, 1.0, 0.4, cfg)
    assert abs(d.jarzynski(1 / 0.4) - 1) < 3 * d.jarzynski_stderr(1 / 0.4)
    assert d.mean > d.delta_f


def test_classical_config_validation():
    with pytest.raises(DomainError):
        ClassicalTrajectoryConfig(1)
    with pytest.raises(DomainError):
        ClassicalTrajectoryConfig(10, seed=-1)
