"""Fibered symplectomorphisms (theta, r) -> (phi(theta), (r + rho(theta)) . phi'(theta)^-1).

An element stores phi = id + v with v periodic, and the closed 1-form rho as
R + grad S (constant plus exact part).  Composition, inversion and the action
on Hamiltonians are computed on an oversampled uniform angle grid and
Fourier-analysed back to the run's truncation.
"""

from __future__ import annotations

import math
import numpy as np
from numpy.polynomial import legendre

from . import series as fs
from .exceptions import AliasingError, ConvergenceError, PreconditionError
from .series import StripParams

OVERSAMPLE = 2
PICARD_TOL = 1e-14
PICARD_MAX_SWEEPS = 50
TIME_NODES = 10


def gamma0(dim):
    """Smallness constant of the exponential: |G_dot|_{s+sigma} <= gamma0 sigma^2."""
    return 1.0 / (36.0 * dim)


def c0(dim):
    """Constant of the displacement bound |exp G_dot - id|_s <= c0 sigma^-1 |G_dot|_{s+sigma}."""
    return 6.0 * dim


def _theta_stack(parts, kmax):
    return np.stack([p.resize(kmax, 0).coeffs[0] for p in parts])


def _zero_mean(f):
    c = np.array(f.coeffs)
    c[(slice(None),) + f.center] = 0
    return fs.FourierTaylorSeries._raw(f.dim, f.kmax, f.mmax, c)


class GroupElement:
    """phi(theta) = theta + v(theta), rho = R + grad S."""

    __slots__ = ("v", "R", "S")

    def __init__(self, v, R, S):
        v = tuple(v)
        R = np.atleast_1d(np.asarray(R, float))
        if len(v) != len(R):
            raise ValueError("v and R must have one entry per angle")
        kmax = max([p.kmax for p in v] + [S.kmax])
        self.v = tuple(p.resize(kmax, 0) for p in v)
        self.R = R
        self.S = _zero_mean(S.resize(kmax, 0))

    @classmethod
    def identity(cls, dim, kmax=0):
        z = fs.zeros(dim, kmax)
        return cls((z,) * dim, np.zeros(dim), z)

    @classmethod
    def translation(cls, R, kmax=0):
        R = np.atleast_1d(np.asarray(R, float))
        z = fs.zeros(len(R), kmax)
        return cls((z,) * len(R), R, z)

    @property
    def dim(self):
        return len(self.R)

    @property
    def kmax(self):
        return self.S.kmax

    def resize(self, kmax):
        return GroupElement([p.resize(kmax, 0) for p in self.v], self.R, self.S.resize(kmax, 0))

    def rho(self):
        return [fs.deriv_theta(self.S, j + 1) + float(self.R[j]) for j in range(self.dim)]

    def __repr__(self):
        return (f"GroupElement(dim={self.dim}, kmax={self.kmax}, R={self.R.tolist()}, "
                f"|v|_0={fs.vector_norm(self.v, 0.0):.3e}, |S|_0={fs.majorant_norm(self.S, 0.0):.3e})")

    # -- grid data ------------------------------------------------------
    def _stack(self):
        """v_i, dv_i/dtheta_j, dS/dtheta_j stacked as theta-coefficient arrays."""
        n = self.dim
        parts = list(self.v)
        parts += [fs.deriv_theta(self.v[i], j + 1) for i in range(n) for j in range(n)]
        parts += [fs.deriv_theta(self.S, j + 1) for j in range(n)]
        return _theta_stack(parts, self.kmax)

    def fields_at(self, theta):
        """(v, v', rho) at points theta of shape (P, n); v'[i, j] = d v_i / d theta_j."""
        n = self.dim
        vals = fs.trig_eval(self._stack(), np.asarray(theta, float)).real
        P = vals.shape[1]
        v = vals[:n]
        Dv = vals[n:n + n * n].reshape(n, n, P)
        rho = vals[n + n * n:] + self.R[:, None]
        return v, Dv, rho

    def fields_on_grid(self, N):
        n = self.dim
        vals = fs.coeffs_to_grid(self._stack(), n, N).reshape(-1, N ** n)
        v = vals[:n]
        Dv = vals[n:n + n * n].reshape(n, n, -1)
        rho = vals[n + n * n:] + self.R[:, None]
        return v, Dv, rho

    def min_jacobian_det(self, N=64):
        _, Dv, _ = self.fields_on_grid(max(N, 2 * self.kmax + 1))
        return float(np.linalg.det(_jacobian(Dv)).min())

    def distance_from_identity(self, s, oversample=OVERSAMPLE):
        """Majorant size at ``s`` of (theta, r) -> G(theta, r) - (theta, r).

        The angle part is v; the action part is rho.A + r.(A - I) with
        A = phi'^-1, and |r_i| <= s on the strip.
        """
        n = self.dim
        N = fs.grid_size(self.kmax, oversample)
        _, Dv, rho = self.fields_on_grid(N)
        A = np.linalg.inv(_jacobian(Dv))  # (P, n, n)
        # A - I = -v' A, formed without cancellation
        AmI = -np.einsum("ikp,pkj->pij", Dv, A)
        b = np.einsum("ip,pij->jp", rho, A)
        shape = (N,) * n
        dv = fs.vector_norm(self.v, s)
        worst = 0.0
        for j in range(n):
            bj, _ = fs.from_grid(b[j].reshape(shape), n, self.kmax, 0)
            total = fs.majorant_norm(bj, s)
            for i in range(n):
                aij, _ = fs.from_grid(AmI[:, i, j].reshape(shape), n, self.kmax, 0)
                total += s * fs.majorant_norm(aij, s)
            worst = max(worst, total)
        return max(dv, worst)

    # -- serialization ---------------------------------------------------
    def to_record(self):
        return {"v": [fs.to_literal(p) for p in self.v], "R": [float(x) for x in self.R],
                "S": fs.to_literal(self.S)}

    @classmethod
    def from_record(cls, rec, kmax):
        R = np.asarray(rec["R"], float)
        n = len(R)
        v = [fs.from_literal(p, n, kmax, 0) for p in rec["v"]]
        return cls(v, R, fs.from_literal(rec["S"], n, kmax, 0))


# ---------------------------------------------------------------------------
# exponential


def _gauss_legendre_picard(Q):
    """Nodes t_q and weights on [0, 1] plus the matrix W[q, l] = int_0^{t_q} l_l(t) dt."""
    x, w = legendre.leggauss(Q)
    V = legendre.legvander(x, Q - 1)
    basis = np.linalg.inv(V)  # column l: Legendre coefficients of the l-th Lagrange polynomial
    W = np.empty((Q, Q))
    for l in range(Q):
        integral = legendre.legint(basis[:, l], lbnd=-1)
        W[:, l] = 0.5 * legendre.legval(x, integral)
    return 0.5 * (x + 1), 0.5 * w, W


def exp(Gdot, strips, *, oversample=OVERSAMPLE, tol=PICARD_TOL, max_sweeps=PICARD_MAX_SWEEPS,
        nodes=TIME_NODES):
    """Time-one map of the vector field generated by ``Gdot``.

    The angle flow f(t, theta) = int_0^t phi_dot(theta + f(s, theta)) ds is
    found by Picard iteration on Gauss-Legendre nodes in t, pointwise on an
    oversampled angle grid.  Since the field is affine in r and tangent to the
    group, the action part follows by pulling rho_dot back along the flow:

        R = R_dot,  S = int_0^1 [S_dot(theta + f) + R_dot . f] dt.

    Refuses (``PreconditionError``) unless |Gdot|_{s+sigma} <= sigma^2/(36 n).
    """
    n = Gdot.dim
    s, sigma = strips.s, strips.sigma
    size = Gdot.norm(s + sigma)
    limit = gamma0(n) * sigma ** 2
    if size > limit:
        raise PreconditionError(
            "exp_smallness", f"|G_dot|_(s+sigma) = {size:.3e} exceeds gamma0 sigma^2 = {limit:.3e}")
    kmax = Gdot.kmax
    if size == 0.0:
        return GroupElement.identity(n, kmax)
    N = fs.grid_size(kmax, oversample)
    theta = fs.grid_points(n, N)
    P = len(theta)
    t, w, W = _gauss_legendre_picard(nodes)
    coeffs = _theta_stack(list(Gdot.phi_dot) + [Gdot.S_dot], kmax)

    def field(f):
        pts = (theta[None] + np.moveaxis(f, 1, 2)).reshape(-1, n)
        return fs.trig_eval(coeffs, pts).real.reshape(n + 1, nodes, P)

    f = np.zeros((nodes, n, P))
    for _ in range(max_sweeps):
        g = field(f)
        f_new = np.einsum("ql,nlp->qnp", W, g[:n])
        delta = np.abs(f_new - f).max()
        f = f_new
        if delta <= tol:
            break
    else:
        raise ConvergenceError(f"Picard iteration did not contract (last update {delta:.3e})")
    g = field(f)
    v_grid = np.einsum("l,nlp->np", w, g[:n])
    S_grid = np.einsum("l,lp->p", w, g[n] + np.einsum("n,lnp->lp", Gdot.R_dot, f))
    shape = (N,) * n
    v = [fs.from_grid(v_grid[i].reshape(shape), n, kmax, 0)[0] for i in range(n)]
    S = fs.from_grid(S_grid.reshape(shape), n, kmax, 0)[0]
    G = GroupElement(v, Gdot.R_dot, S)
    bound = c0(n) / sigma * size
    dist = G.distance_from_identity(s, oversample)
    if dist > bound:
        raise ConvergenceError(f"|exp G_dot - id|_s = {dist:.3e} exceeds c0 bound {bound:.3e}")
    return G


def exp_by_squaring(Gdot, strips, **kw):
    """exp(Gdot) = exp(Gdot / 2^m)^(2^m) with the smallest m meeting exp's precondition.

    Returns ``(G, m)``.
    """
    n = Gdot.dim
    size = Gdot.norm(strips.s + strips.sigma)
    limit = gamma0(n) * strips.sigma ** 2
    m = 0 if size <= limit else int(math.ceil(math.log2(size / limit)))
    G = exp(Gdot.scaled(2.0 ** -m), strips, **kw)
    for _ in range(m):
        G = compose(G, G, oversample=kw.get("oversample", OVERSAMPLE))
    return G, m


# ---------------------------------------------------------------------------
# group law


def _jacobian(Dv):
    """I + v' as a stack of matrices, shape (P, n, n)."""
    return np.moveaxis(Dv, -1, 0) + np.eye(Dv.shape[0])


def _check_invertible(Dv, name, floor=0.0):
    d = np.linalg.det(_jacobian(Dv)).min()
    if not d > floor:
        raise PreconditionError(name, f"min det(phi') = {d:.3e} on the grid (need > {floor})")
    return float(d)


def compose(G1, G2, *, oversample=OVERSAMPLE):
    """G1 o G2: phi = phi1 o phi2, rho = rho2 + phi2^* rho1.

    With rho_i = R_i + grad S_i this is R = R1 + R2 and
    S = S2 + S1 o phi2 + R1 . v2, so closedness holds by construction.
    """
    n = G1.dim
    kmax = max(G1.kmax, G2.kmax)
    N = fs.grid_size(kmax, oversample)
    theta = fs.grid_points(n, N)
    v2, Dv2, _ = G2.resize(kmax).fields_on_grid(N)
    _check_invertible(Dv2, "compose_invertibility")
    G1 = G1.resize(kmax)
    vals = fs.trig_eval(_theta_stack(list(G1.v) + [G1.S], kmax), theta + v2.T).real
    v = v2 + vals[:n]
    S = fs.coeffs_to_grid(G2.S.resize(kmax, 0).coeffs, n, N).reshape(-1) + vals[n] + G1.R @ v2
    shape = (N,) * n
    vs = [fs.from_grid(v[i].reshape(shape), n, kmax, 0)[0] for i in range(n)]
    return GroupElement(vs, G1.R + G2.R, fs.from_grid(S.reshape(shape), n, kmax, 0)[0])


def inverse(G, *, oversample=OVERSAMPLE, tol=1e-15, max_iter=50):
    """G^-1, with phi^-1 = id + w from Newton's method on w + v(theta + w) = 0."""
    n = G.dim
    kmax = G.kmax
    N = fs.grid_size(kmax, oversample)
    theta = fs.grid_points(n, N)
    v, Dv, _ = G.fields_on_grid(N)
    _check_invertible(Dv, "inverse_near_identity", floor=0.5)
    w = -v.copy()
    for _ in range(max_iter):
        vv, Dv, _ = G.fields_at(theta + w.T)
        F = w + vv
        dw = np.linalg.solve(_jacobian(Dv), F.T[..., None])[..., 0].T
        w -= dw
        if np.abs(dw).max() <= tol:
            break
    else:
        raise ConvergenceError("Newton inversion of phi stagnated")
    S_at = fs.trig_eval(_theta_stack([G.S], kmax), theta + w.T).real[0]
    S = -(S_at + G.R @ w)
    shape = (N,) * n
    ws = [fs.from_grid(w[i].reshape(shape), n, kmax, 0)[0] for i in range(n)]
    return GroupElement(ws, -G.R, fs.from_grid(S.reshape(shape), n, kmax, 0)[0])


# ---------------------------------------------------------------------------
# action on Hamiltonians


def _poly_mul(a, b, table, M):
    out = np.zeros((M,) + a.shape[1:])
    for i, j, t in table:
        out[t] += a[i] * b[j]
    return out


def pullback(H, G, *, oversample=OVERSAMPLE, alias_tol=1e-8):
    """H o G as a series with H's truncation.

    On the grid: evaluate each Taylor coefficient h_m at phi(theta), substitute
    the affine map r -> (r + rho) A (A = phi'^-1) into the polynomial in r,
    and Fourier-analyse every resulting Taylor coefficient.  Raises
    ``AliasingError`` when the retained modes with |k|_1 > 2 kmax / 3 carry more
    than ``alias_tol`` of the energy.
    """
    n = H.dim
    kmax = max(H.kmax, G.kmax)
    mmax = H.mmax
    N = fs.grid_size(kmax, oversample)
    theta = fs.grid_points(n, N)
    v, Dv, rho = G.resize(kmax).fields_on_grid(N)
    _check_invertible(Dv, "pullback_invertibility")
    A = np.linalg.inv(_jacobian(Dv))  # (P, n, n)
    b = np.einsum("ip,pij->jp", rho, A)
    h = fs.trig_eval(H.resize(kmax).coeffs, theta + v.T).real  # (M, P)
    monos = fs.monomials(n, mmax)
    index = fs.monomial_index(n, mmax)
    M, P = len(monos), len(theta)
    table = fs._product_table(n, mmax, mmax, mmax)
    # u_j = b_j + sum_i r_i A_ij
    u = []
    for j in range(n):
        uj = np.zeros((M, P))
        uj[0] = b[j]
        if mmax >= 1:
            for i in range(n):
                e = [0] * n
                e[i] = 1
                uj[index[tuple(e)]] = A[:, i, j]
        u.append(uj)
    one = np.zeros((M, P))
    one[0] = 1.0
    powers = []
    for j in range(n):
        pw = [one]
        for _ in range(mmax):
            pw.append(_poly_mul(pw[-1], u[j], table, M))
        powers.append(pw)
    out = np.zeros((M, P))
    for idx, m in enumerate(monos):
        if not np.any(h[idx]):
            continue
        term = powers[0][m[0]]
        for j in range(1, n):
            term = _poly_mul(term, powers[j][m[j]], table, M)
        out += h[idx] * term
    res, _ = fs.from_grid(out.reshape((M,) + (N,) * n), n, kmax, mmax)
    if alias_tol is not None:
        energy = np.abs(res.coeffs) ** 2
        top = fs.l1_norms(n, kmax) > (2 * kmax) / 3
        total = energy.sum()
        if total > 0 and energy[:, top].sum() > alias_tol * total:
            raise AliasingError(
                f"{energy[:, top].sum() / total:.2e} of the energy sits in the top third of modes")
    return res


def apply_point(G, theta, r):
    """Image of (theta, r) under G; theta is returned as a lift (not reduced mod 1)."""
    n = G.dim
    th = np.asarray(theta, float)
    rr = np.asarray(r, float)
    single = th.ndim == 1 and th.shape[0] == n
    th2 = np.atleast_2d(th).reshape(-1, n)
    r2 = np.broadcast_to(rr, th.shape).reshape(-1, n)
    v, Dv, rho = G.fields_at(th2)
    A = np.linalg.inv(_jacobian(Dv))
    th_new = th2 + v.T
    r_new = np.einsum("pi,pij->pj", r2 + rho.T, A)
    if single:
        return th_new[0], r_new[0]
    return th_new.reshape(th.shape), r_new.reshape(th.shape)


def symplectic_form(dim):
    I = np.eye(dim)
    Z = np.zeros((dim, dim))
    return np.block([[Z, I], [-I, Z]])


def symplectic_defect(G, npoints=100, *, seed=0, h=1e-5, r_max=0.1):
    """max over random points of ||J^T Omega J - Omega||_inf, J by central differences.

    ``G`` only needs ``dim`` and an ``apply_point``-compatible behaviour, so
    hand-built maps can be checked too.
    """
    n = G.dim
    rng = np.random.default_rng(seed)
    th = rng.random((npoints, n))
    r = rng.uniform(-r_max, r_max, (npoints, n))
    z = np.concatenate([th, r], axis=1)
    mapping = getattr(G, "apply_point", None) or (lambda a, b: apply_point(G, a, b))

    def F(zz):
        a, b = mapping(zz[:, :n], zz[:, n:])
        return np.concatenate([a, b], axis=1)

    J = np.empty((npoints, 2 * n, 2 * n))
    for c in range(2 * n):
        dz = np.zeros(2 * n)
        dz[c] = h
        J[:, :, c] = (F(z + dz) - F(z - dz)) / (2 * h)
    Om = symplectic_form(n)
    D = np.einsum("pki,kl,plj->pij", J, Om, J) - Om
    return float(np.abs(D).sum(axis=2).max())


def identity_distance(G1, G2):
    """Largest coefficient difference between two elements (0 for equal elements)."""
    kmax = max(G1.kmax, G2.kmax)
    a, b = G1.resize(kmax), G2.resize(kmax)
    d = float(np.abs(a.R - b.R).max(initial=0.0))
    d = max(d, fs.max_abs_diff(a.S, b.S))
    for p, q in zip(a.v, b.v):
        d = max(d, fs.max_abs_diff(p, q))
    return d


__all__ = [
    "GroupElement", "StripParams", "apply_point", "c0", "compose", "exp", "exp_by_squaring",
    "gamma0", "identity_distance", "inverse", "pullback", "symplectic_defect",
]
