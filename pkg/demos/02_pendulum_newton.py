"""
Newton iteration for a perturbed pendulum torus
===============================================

H = alpha r + r^2 + eps cos(2 pi theta) with golden alpha.  The Newton
scheme conjugates H to Kolmogorov normal form and the defect should
square at each step.
"""

import warnings

import numpy as np

from kamtorus import group as gr
from kamtorus import series as fs
from kamtorus.normalform import KolmogorovForm
from kamtorus.scheme import ScheduleParams, SmallnessWarning, kam_run
from kamtorus.verify import flow_check, invariance_residual, torus_embedding

alpha = (np.sqrt(5.0) - 1.0) / 2.0
eps = 1e-3

# %%
# Unperturbed normal form K0 = alpha r + r^2 and the perturbed Hamiltonian.
K0 = KolmogorovForm.standard([alpha], kmax=64, mmax=4, tau=1.0)
pert = fs.make_series(1, 64, 4, {((1,), (0,)): eps / 2, ((-1,), (0,)): eps / 2})
H = K0.assemble() + pert

# %%
# Run the scheme on the default strip schedule.  The first steps exceed the
# conservative smallness threshold, which is reported but not enforced.
warnings.simplefilter("ignore", SmallnessWarning)
schedule = ScheduleParams()
K, gamma, G, report = kam_run(H, K0, schedule)
print("outcome:", report.outcome)
for j, d in enumerate(report.defects):
    print(f"  defect after {j} steps: {d:.3e}")
print("fitted exponent:", report.fitted_exponent)
print("conjugacy residual |H o gamma - K|:", report.conjugacy_residual)

# %%
# The torus is the image of r = 0 under gamma.  To first order its height
# is -eps cos(2 pi theta) / alpha.
emb = torus_embedding(gamma, N=64)
first_order = -eps * np.cos(2 * np.pi * emb.theta[:, 0]) / alpha
print("max |r| on torus:", np.abs(emb.r_image).max(), " first-order:", eps / alpha)
print("second-order correction:", np.abs(emb.r_image[:, 0] - first_order).max())

# %%
# Invariance: the Hamiltonian field is tangent to the torus and the
# pulled-back motion is the rigid rotation by alpha.
print("invariance residual:", invariance_residual(H, emb, [alpha]))
flow = flow_check(H, emb, [alpha], T=5.0, dt=1e-3, npoints=5)
print(f"flow over T=5: distance {flow.max_torus_distance:.2e}, "
      f"rotation error {flow.rotation_error:.2e}, energy drift {flow.energy_drift:.2e}")

# %%
# gamma is symplectic: its Jacobian preserves the standard form.
print("symplectic defect of gamma:", gr.symplectic_defect(gamma, npoints=20))
