"""
The exponential map on the symplectic group
===========================================

A group element (v, R, S) acts by theta -> theta + v(theta) on angles.  Its
Lie algebra elements (R_dot, S_dot, phi_dot) generate vector fields that
are affine in r, and exp integrates them for unit time.
"""

import math

import numpy as np

from kamtorus import group as gr
from kamtorus import series as fs
from kamtorus.exceptions import PreconditionError
from kamtorus.normalform import LieElement

kmax = 32
strips = fs.StripParams(0.05, 0.3)

# %%
# phi_dot = delta sin(2 pi theta).  The angle flow has the closed form
# tan(pi theta(t)) = tan(pi theta(0)) exp(2 pi delta t).
delta = 0.01
phi = fs.make_series(1, kmax, 0, {((1,), (0,)): -0.5j * delta, ((-1,), (0,)): 0.5j * delta})
Gdot = LieElement([0.0], fs.zeros(1, kmax), (phi,))

# %%
# Direct exp only accepts generators with |Gdot| <= sigma^2 / 36, so this
# one is refused.  Scaling by 2^-m and squaring m times gets around it.
try:
    gr.exp(Gdot, strips)
except PreconditionError as err:
    print("exp refused:", err)
g, m = gr.exp_by_squaring(Gdot, strips)
print("squarings used:", m)
q = gr.apply_point(g, [0.25], [0.0])[0][0]
print("theta(1) from 0.25:", q, " closed form:", math.atan(math.exp(2 * math.pi * delta)) / math.pi)

# %%
# exp(-Gdot) inverts exp(Gdot), and the Newton inverse agrees with it.
ginv, _ = gr.exp_by_squaring(-Gdot, strips)
ident = gr.GroupElement.identity(1, kmax)
print("|exp(G) o exp(-G) - id|:", gr.identity_distance(gr.compose(g, ginv), ident))
print("|inverse(g) - exp(-G)|:", gr.identity_distance(gr.inverse(g), ginv))

# %%
# Pullback is a right action: H o (g1 o g2) = (H o g1) o g2.
H = fs.monomial(1, (2,), kmax, 4) + fs.make_series(1, kmax, 4, {((1,), (0,)): 0.05, ((-1,), (0,)): 0.05})
t = gr.GroupElement.translation([0.01], kmax)
lhs = gr.pullback(H, gr.compose(g, t))
rhs = gr.pullback(gr.pullback(H, g), t)
print("right-action defect:", fs.max_abs_diff(lhs, rhs))
print("symplectic defect of g:", gr.symplectic_defect(g, npoints=20))
