"""Dynamical check that gamma(T_0) is an invariant torus of H with frequency alpha.

Nothing here reuses the Newton machinery: the torus is known only through
samples of (theta', r') = gamma(theta, 0) on a uniform grid, interpolated with
numpy's FFT, and the Hamiltonian vector field is evaluated by direct summation
over the nonzero coefficients of H and integrated with classical RK4.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import TorusEscapeError
from .group import apply_point

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Hamiltonian vector field


class SparseHamiltonian:
    """H(theta, r) = Re sum c exp(2 pi i k.theta) r^m over the nonzero coefficients."""

    def __init__(self, H, tol=0.0):
        n, kmax = H.dim, H.kmax
        idx = np.argwhere(np.abs(H.coeffs) > tol)
        self.dim = n
        self.k = (idx[:, 1:] - kmax).astype(float)
        self.m = H.monos[idx[:, 0]]
        self.c = H.coeffs[tuple(idx.T)]
        self.mmax = int(self.m.max(initial=0))
        n = self.dim
        cols = np.arange(n)
        # gather indices into the power table: plain exponents, then one lowered per j
        self._cols = cols[:, None]
        self._exp = self.m.T
        self._low = np.stack([np.where(cols[:, None] == j, np.maximum(self.m.T - 1, 0), self.m.T)
                              for j in range(n)])
        self._dk = TWO_PI * 1j * self.k
        self._mt = self.m.T.astype(float)

    def _table(self, r):
        # table[p, i, e] = r_i^e
        return r[:, :, None] ** np.arange(self.mmax + 1)

    def value(self, theta, r):
        theta, r = np.atleast_2d(theta), np.atleast_2d(r)
        E = np.exp(TWO_PI * 1j * theta @ self.k.T)
        rp = self._table(r)[:, self._cols, self._exp].prod(axis=1)
        return (E * rp @ self.c).real

    def vector_field(self, theta, r):
        """(dH/dr, -dH/dtheta) at points of shape (P, n)."""
        Ec = np.exp(TWO_PI * 1j * theta @ self.k.T) * self.c
        table = self._table(r)
        rp = table[:, self._cols, self._exp].prod(axis=1)
        dtheta = ((Ec * rp) @ self._dk).real
        low = table[:, self._cols[None], self._low].prod(axis=2)  # (P, n, nnz)
        dr = (Ec[:, None, :] * low * self._mt).sum(axis=2).real
        return dr, -dtheta


# ---------------------------------------------------------------------------
# embedding


@dataclass
class TorusEmbedding:
    """Samples (theta', r') = gamma(theta, 0) on a uniform N^n grid.

    ``theta_image`` is a lift: theta_image - theta is periodic.
    """

    N: int
    theta: np.ndarray
    theta_image: np.ndarray
    r_image: np.ndarray

    def __post_init__(self):
        n = self.dim
        u = self.theta_image - self.theta
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(self.r_image))):
            raise ValueError("embedding has non-finite samples")
        if np.abs(u).max(initial=0.0) >= 0.5:
            raise ValueError("embedding is not a degree-one graph over the grid")
        fields = np.concatenate([u, self.r_image], axis=1).T.reshape((2 * n,) + (self.N,) * n)
        C = np.fft.fftn(fields, axes=tuple(range(1, n + 1))) / self.N ** n
        freqs = np.fft.fftfreq(self.N, 1.0 / self.N)
        k = np.stack(np.meshgrid(*([freqs] * n), indexing="ij"), axis=-1).reshape(-1, n)
        C = C.reshape(2 * n, -1)
        if self.N % 2 == 0:
            C[:, np.any(np.abs(k) == self.N // 2, axis=1)] = 0
        keep = np.abs(C).max(axis=0) > 1e-17 * max(np.abs(C).max(), 1e-300)
        self._k = k[keep]
        self._C = C[:, keep]

    @property
    def dim(self):
        return self.theta.shape[1]

    def evaluate(self, psi, derivatives=False):
        """theta'(psi), r'(psi) and optionally their psi-Jacobians, shape (P, n, n)."""
        psi = np.atleast_2d(psi)
        n = self.dim
        E = np.exp(TWO_PI * 1j * psi @ self._k.T)
        vals = (E @ self._C.T).real
        th = psi + vals[:, :n]
        r = vals[:, n:]
        if not derivatives:
            return th, r
        D = np.stack([(E @ (self._C * (TWO_PI * 1j * self._k[:, j])).T).real for j in range(n)], axis=-1)
        Dth = D[:, :n, :] + np.eye(n)
        return th, r, Dth, D[:, n:, :]

    def parameter_of(self, angle, guess=None, tol=1e-14, max_iter=30):
        """psi with theta'(psi) = angle (both lifts), by Newton's method."""
        angle = np.atleast_2d(angle)
        psi = np.array(angle if guess is None else guess, float)
        for _ in range(max_iter):
            th, _, Dth, _ = self.evaluate(psi, derivatives=True)
            step = np.linalg.solve(Dth, (th - angle)[..., None])[..., 0]
            psi -= step
            if np.abs(step).max() <= tol:
                break
        return psi

    def to_csv(self, path):
        n = self.dim
        head = ([f"theta_{j + 1}" for j in range(n)] + [f"theta_image_{j + 1}" for j in range(n)]
                + [f"r_image_{j + 1}" for j in range(n)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(head)
            for row in np.concatenate([self.theta, self.theta_image, self.r_image], axis=1):
                w.writerow([repr(float(x)) for x in row])


def _grid(n, N):
    axes = [np.arange(N) / N] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def torus_embedding(gamma, N=64):
    """Image of the zero section under ``gamma`` sampled on an N^n grid."""
    theta = _grid(gamma.dim, N)
    th, r = apply_point(gamma, theta, np.zeros_like(theta))
    return TorusEmbedding(N=N, theta=theta, theta_image=th, r_image=r)


def invariance_residual(H, emb, alpha):
    """max over the grid of |X_H(gamma(theta, 0)) - D gamma(theta, 0) (alpha, 0)|."""
    alpha = np.atleast_1d(np.asarray(alpha, float))
    ham = H if isinstance(H, SparseHamiltonian) else SparseHamiltonian(H)
    th, r, Dth, Dr = emb.evaluate(emb.theta, derivatives=True)
    dth, dr = ham.vector_field(th, r)
    res = np.concatenate([dth - Dth @ alpha, dr - Dr @ alpha], axis=1)
    return float(np.abs(res).max())


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class FlowCheckResult:
    max_torus_distance: float
    rotation_error: float
    energy_drift: float
    angle_drift: float
    npoints: int
    T: float
    dt: float

    def to_dict(self):
        return asdict(self)


def rk4_step(field, theta, r, dt):
    k1 = field(theta, r)
    k2 = field(theta + 0.5 * dt * k1[0], r + 0.5 * dt * k1[1])
    k3 = field(theta + 0.5 * dt * k2[0], r + 0.5 * dt * k2[1])
    k4 = field(theta + dt * k3[0], r + dt * k3[1])
    theta = theta + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    r = r + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return theta, r


def _wrap(x):
    return np.abs(x - np.rint(x))


def flow_check(H, emb, alpha, T=100.0, dt=1e-3, *, npoints=20, seed=0, r_escape=0.1,
               r_offset=0.0, samples=1000):
    """Integrate points started on the torus and measure how far they leave it.

    ``max_torus_distance`` is the largest |r - r'(psi)| where psi is the torus
    parameter whose image angle matches the trajectory's.  ``rotation_error``
    is the distance to Z of psi(T) - psi(0) - alpha T, i.e. the rotation
    measured in torus coordinates; ``angle_drift`` is the same quantity in the
    original angles, which carries the O(|gamma - id|) shape of the torus.
    ``r_offset`` shifts the initial actions off the torus.
    """
    if not dt <= 1e-2:
        raise ValueError("dt must be at most 1e-2")
    alpha = np.atleast_1d(np.asarray(alpha, float))
    n = emb.dim
    ham = H if isinstance(H, SparseHamiltonian) else SparseHamiltonian(H)
    rng = np.random.default_rng(seed)
    psi0 = rng.random((npoints, n))
    theta, r = emb.evaluate(psi0)
    r = r + r_offset
    theta0 = theta.copy()
    energy0 = ham.value(theta, r)
    steps = int(round(T / dt))
    stride = max(1, steps // max(samples, 1))
    dist = 0.0
    drift = 0.0
    psi = psi0.copy()
    t = 0.0
    for i in range(1, steps + 1):
        theta, r = rk4_step(ham.vector_field, theta, r, dt)
        if i % stride == 0 or i == steps:
            t = i * dt
            if not (np.all(np.isfinite(r)) and np.abs(r).max() <= r_escape):
                raise TorusEscapeError(f"trajectory left |r| <= {r_escape} at t = {t:.3f}", time=t)
            psi = emb.parameter_of(theta, guess=psi0 + alpha * t)
            _, r_on = emb.evaluate(psi)
            dist = max(dist, float(np.abs(r - r_on).max()))
            drift = max(drift, float(np.abs(ham.value(theta, r) - energy0).max()))
    T_eff = steps * dt
    rot = float(_wrap(psi - psi0 - alpha * T_eff).max())
    raw = float(_wrap(theta - theta0 - alpha * T_eff).max())
    return FlowCheckResult(max_torus_distance=dist, rotation_error=rot, energy_drift=drift,
                           angle_drift=raw, npoints=npoints, T=T_eff, dt=dt)


def pointwise_conjugacy_residual(H, K, gamma, N=256, r_max=0.05, nr=5):
    """max |H(gamma(theta, r)) - K(theta, r)| over an N^n angle grid times nr^n action levels."""
    n = gamma.dim
    hs = H if isinstance(H, SparseHamiltonian) else SparseHamiltonian(H)
    ks = K if isinstance(K, SparseHamiltonian) else SparseHamiltonian(K)
    theta = _grid(n, N)
    levels = np.linspace(-r_max, r_max, nr)
    worst = 0.0
    for rv in itertools.product(levels, repeat=n):
        r = np.broadcast_to(np.asarray(rv, float), theta.shape).copy()
        th2, r2 = apply_point(gamma, theta, r)
        worst = max(worst, float(np.abs(hs.value(th2, r2) - ks.value(theta, r)).max()))
    return worst


__all__ = [
    "FlowCheckResult", "SparseHamiltonian", "TorusEmbedding", "TorusEscapeError", "flow_check",
    "invariance_residual", "pointwise_conjugacy_residual", "rk4_step", "torus_embedding",
]
