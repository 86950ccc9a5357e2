"""Kibble-Zurek scaling of work statistics near a boundary critical point.

With a conformal susceptibility of dimension Delta < 1/2 and a ramp inside
the window 1/Lambda << tau << 1/T, <W_diss> sits below a constant by an
amount growing like tau^(1 - 2 Delta), while k3 falls like tau^-(1 + 2 Delta).
At Delta = 1/2 the first of these turns into a logarithm.

Run:  python demos/kz_scaling.py
"""
import numpy as np

from critwork import CftChi, RampProtocol, cumulant, scaling_dimension
from critwork.cft_scaling import CftParams, kz_kappa3, kz_wdiss

L, T = 1.0, 1e-9
taus = np.geomspace(1e3, 1e6, 4)
for M in (3, 4, 2):
    D = scaling_dimension(M)
    chi = CftChi(D, L, T)
    p = CftParams(D, L, T)
    k1 = np.array([cumulant(1, chi, RampProtocol(1.0, t)).value for t in taus])
    print(f'{M}-channel Kondo, Delta = {D:.4f}')
    if p.is_log_case:
        s = np.polyfit(np.log(taus), k1, 1)[0]
        print(f'  <W> slope in ln tau: {s:.5f} (expected {-1 / L:.5f})')
        continue
    k3 = np.array([cumulant(3, chi, RampProtocol(1.0, t)).value for t in taus])
    plateau = kz_wdiss(0.0, p, 1.0)  # the constant term of the asymptote
    s1 = np.polyfit(np.log(taus), np.log(plateau - k1), 1)[0]
    s3 = np.polyfit(np.log(taus), np.log(k3), 1)[0]
    print(f'  plateau - <W> ~ tau^{s1:+.4f}  (expected {1 - 2 * D:+.4f})')
    print(f'  k3            ~ tau^{s3:+.4f}  (expected {-1 - 2 * D:+.4f})')
    print(f'  ratio to closed form at tau = {taus[-1]:.0e}: '
          f'<W> {k1[-1] / kz_wdiss(taus[-1], p, 1.0):.4f}, k3 {k3[-1] / kz_kappa3(taus[-1], p, 1.0):.4f}')
