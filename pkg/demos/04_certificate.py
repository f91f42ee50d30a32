"""
Convergence certificate for the abstract Newton map
===================================================

If each step obeys y_{j+1} <= c sigma_j^-t y_j^2 on shrinking strips
sigma_j = 2^-(j+1) sigma, then q = c 4^t sigma^-t |y_0| <= 1/2 forces
y_j <= q^(2^j).  Here the constants are fitted to a real run and the
certificate is compared with the measured defects.
"""

import warnings

import numpy as np

from kamtorus import series as fs
from kamtorus.normalform import KolmogorovForm
from kamtorus.scheme import (CertificateConstants, ScheduleParams, SmallnessWarning,
                             abstract_fp_simulate, closed_form_bound, convergence_certificate,
                             fit_quadratic_constants, kam_run)

warnings.simplefilter("ignore", SmallnessWarning)

# %%
# Textbook constants: c = t = 1 with a small initial defect.
consts = CertificateConstants()
cert = convergence_certificate(consts, sigma=0.1, y_norm=2e-4)
print("q =", cert.q, "ok =", cert.ok)
print("predicted bounds:", ["%.1e" % p for p in cert.predicted[:4]])
for j, (x, y) in enumerate(abstract_fp_simulate(consts, 0.1, 2e-4, 4), start=1):
    print(f"  j={j}: simulated y={y:.3e}  closed form={closed_form_bound(consts, 0.1, 2e-4, j):.3e}")

# %%
# Too large a defect: the certificate is refused with a reason.
print(convergence_certificate(consts, sigma=0.1, y_norm=0.1).reason)

# %%
# Fit (c, t) to the pendulum run so that every step satisfies the
# quadratic law, then check the measured defects against the bounds.
alpha = (np.sqrt(5.0) - 1.0) / 2.0
K0 = KolmogorovForm.standard([alpha], kmax=64, mmax=4, tau=1.0)
H = K0.assemble() + fs.make_series(1, 64, 4, {((1,), (0,)): 5e-4, ((-1,), (0,)): 5e-4})
schedule = ScheduleParams()
_, _, _, report = kam_run(H, K0, schedule)
c, t = fit_quadratic_constants(report, schedule)
print(f"fitted c = {c:.3f}, t = {t:.3f}")
for j in range(len(report.defects) - 1):
    d, nxt = report.defects[j], report.defects[j + 1]
    bound = c * schedule.sigma_j(j) ** -t * d * d
    print(f"  step {j}: {nxt:.3e} <= {bound:.3e}")
