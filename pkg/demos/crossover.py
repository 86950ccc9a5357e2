"""Dissipated work of a linear ramp across the sudden/adiabatic crossover.

A Majorana resonant level is driven with amplitude A over a time tau.  Short
ramps dissipate (A^2/2) chi_static, which grows like ln(Gamma/T) for this
model.  Slow ramps dissipate slope/tau.  In between, a logarithmic window
appears for 1/Gamma << tau << 1/T.

Run:  python demos/crossover.py
"""
import numpy as np

from critwork import MajoranaRLM, RampProtocol, cumulant

gamma, T, A = 1.0, 1e-4, 1.0
model = MajoranaRLM(gamma, T)
sudden = 0.5 * A**2 * model.static_susceptibility()

print(f'Majorana level, Gamma = {gamma}, T = {T}')
print(f'sudden plateau (A^2/2) chi_static = {sudden:.6f}\n')
print(f'{"tau Gamma":>10} {"<W_diss>":>12} {"k2":>12} {"k3":>12} {"slope/tau":>12}')
for tau in np.geomspace(1e-3, 1e7, 11):
    p = RampProtocol(A, tau)
    k = [cumulant(n, model, p).value for n in (1, 2, 3)]
    print(f'{tau:10.0e} {k[0]:12.5e} {k[1]:12.5e} {k[2]:12.5e} '
          f'{A**2 * model.low_frequency_slope() / tau:12.5e}')

print('\nInside the window each decade of tau lowers <W_diss> by ln(10)/(2 pi Gamma):')
w = [cumulant(1, model, RampProtocol(A, t)).value for t in (1e2, 1e3)]
print(f'  measured {w[0] - w[1]:.5f}, expected {np.log(10) / (2 * np.pi * gamma):.5f}')
