"""
A torus in two degrees of freedom
=================================

Frequency vector built from the real cubic field of the plastic number,
Q = I and the single mode cos(2 pi (theta_1 + theta_2)).
"""

import time
import warnings

import numpy as np

from kamtorus import series as fs
from kamtorus.cohomology import check_diophantine, small_divisor_spectrum
from kamtorus.normalform import KolmogorovForm
from kamtorus.scheme import ScheduleParams, SmallnessWarning, kam_run
from kamtorus.verify import flow_check, invariance_residual, torus_embedding

warnings.simplefilter("ignore", SmallnessWarning)
alpha = np.array([0.7548776662, 0.5698402910])

# %%
# Diophantine margin with tau = 2 and the worst small divisors up to |k| = 32.
rep = check_diophantine(alpha, 2.0, 32)
print("min margin:", rep.min_margin, "at k =", rep.argmin_k)
for k, d, amp in small_divisor_spectrum(alpha, 32)[:3]:
    print(f"  k={k}  dist={d:.2e}  amplification={amp:.3f}")

# %%
# Newton run.
K0 = KolmogorovForm.standard(alpha, kmax=32, mmax=4, tau=2.0)
H = K0.assemble() + fs.make_series(2, 32, 4, {((1, 1), (0, 0)): 5e-5, ((-1, -1), (0, 0)): 5e-5})
t0 = time.perf_counter()
K, gamma, G, report = kam_run(H, K0, ScheduleParams())
print(f"{report.outcome} in {len(report.steps)} steps, {time.perf_counter() - t0:.1f} s")
print("defects:", ["%.2e" % d for d in report.defects])
print("conjugacy residual:", report.conjugacy_residual)

# %%
# The torus and a short flow check on it.
emb = torus_embedding(gamma, N=32)
print("max |r| on torus:", np.abs(emb.r_image).max())
print("invariance residual:", invariance_residual(H, emb, alpha))
flow = flow_check(H, emb, alpha, T=2.0, dt=1e-3, npoints=4)
print(f"flow over T=2: distance {flow.max_torus_distance:.2e}, rotation error {flow.rotation_error:.2e}")
