"""
Fourier-Taylor series and small divisors
========================================

Functions on T^n x R^n are stored as dense coefficient arrays
c[monomial, k], truncated to |k|_1 <= kmax and |m|_1 <= mmax.
"""

import numpy as np

from kamtorus import series as fs
from kamtorus.cohomology import Frequency, check_diophantine, small_divisor_spectrum, solve_homological

golden = (np.sqrt(5.0) - 1.0) / 2.0

# %%
# cos(2 pi theta) from its two modes; products go through an oversampled grid.
c = fs.make_series(1, 4, 2, {((1,), (0,)): 0.5, ((-1,), (0,)): 0.5})
r = fs.monomial(1, (1,), 4, 2)
H = r * golden + r * r + c * 1e-3
print("H(0.3, 0.1) =", fs.evaluate(H, 0.3, 0.1))
c2 = fs.mul(c, c)
print("cos^2 modes:", {k: round(c2.coefficient((k,)).real, 12) for k in (-2, 0, 2)})

# %%
# The majorant norm weighs mode k by exp(2 pi s |k|) and r^m by s^|m|.
for s in (0.0, 0.1, 0.2):
    print(f"|H|_{s} = {fs.majorant_norm(H, s):.6f}")

# %%
# Small divisors of the golden mean: k alpha is never close to an integer.
rep = check_diophantine([golden], 1.0, 8)
print("min |k alpha|_Z |k| =", rep.min_margin, "at k =", rep.argmin_k)
for k, d, amp in small_divisor_spectrum([golden], 5)[:3]:
    print(f"k={k}  dist={d:.6f}  amplification={amp:.4f}")

# %%
# The homological equation L_alpha f = g divides mode k by 2 pi i k.alpha.
f = solve_homological(c.resize(mmax=0), Frequency([golden]))
print("sin coefficient of f:", -2 * f.coefficient((1,)).imag, "expected", 1 / (2 * np.pi * golden))
