"""Classical two-state level driven through a ramp.

The level occupation hops with a detailed-balance master equation while
the level energy moves by A.  Sudden ramps reproduce the exact two-point
distribution and every ramp obeys the Jarzynski equality within
sampling error.

Run:  python demos/classical.py
"""
from critwork.chi_models import (ClassicalTrajectoryConfig, classical_sudden_wdf,
                                 classical_trajectory_work)

T, g, A, eps0 = 0.5, 1.0, 1.0, 0.2
cfg = ClassicalTrajectoryConfig(100_000, seed=1)
ref = classical_sudden_wdf(eps0, A, g, T)
print('exact sudden moments ' + ', '.join(f'{m:.5f}' for m in ref.moments))
for tau in (0.0, 0.3, 3.0, 30.0):
    d = classical_trajectory_work(eps0, A, tau, g, T, cfg)
    jz, se = d.jarzynski(1 / T), d.jarzynski_stderr(1 / T)
    print(f'tau = {tau:5.1f}: <W> = {d.moments[0]:.5f} +- {d.moment_stderr()[0]:.5f}, '
          f'Jarzynski {jz:.4f} +- {se:.4f}')
