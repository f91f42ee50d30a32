"""Kolmogorov normal forms K = c + alpha.r + r.Q(theta).r + O(r^3) and the linearized conjugacy solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import series as fs
from .cohomology import Frequency, lie_derivative, solve_homological
from .exceptions import NondegeneracyError, PreconditionError

NONDEGENERACY_FLOOR = 1e-8
MAX_CONDITION = 1e8


def _unit(dim, j):
    e = np.zeros(dim, int)
    e[j] = 1
    return tuple(e)


def _pair(dim, i, j):
    e = np.zeros(dim, int)
    e[i] += 1
    e[j] += 1
    return tuple(e)


def _mean(f):
    return float(f.coeffs[(0,) + f.center].real)


@dataclass(frozen=True)
class TangentForm:
    """A direction tangent to the normal forms: a constant plus O(r^2) terms."""

    c_dot: float
    K2_dot: fs.FourierTaylorSeries

    def as_series(self):
        return self.K2_dot + self.c_dot

    def norm(self, s):
        return abs(self.c_dot) + fs.majorant_norm(self.K2_dot, s)


@dataclass(frozen=True)
class LieElement:
    """Generator (R_dot, S_dot, phi_dot) of the vector field

        (theta, r) -> (phi_dot(theta), rho_dot(theta) - r . phi_dot'(theta)),

    with rho_dot = R_dot + grad S_dot a closed 1-form.  ``S_dot`` and the
    components of ``phi_dot`` are theta-only series with zero average.
    """

    R_dot: np.ndarray
    S_dot: fs.FourierTaylorSeries
    phi_dot: tuple

    def __post_init__(self):
        object.__setattr__(self, "R_dot", np.atleast_1d(np.asarray(self.R_dot, float)))
        object.__setattr__(self, "phi_dot", tuple(self.phi_dot))
        if len(self.phi_dot) != self.dim:
            raise ValueError("phi_dot needs one component per angle")

    @classmethod
    def zero(cls, dim, kmax):
        z = fs.zeros(dim, kmax)
        return cls(np.zeros(dim), z, (z,) * dim)

    @property
    def dim(self):
        return len(self.R_dot)

    @property
    def kmax(self):
        return self.S_dot.kmax

    def rho_dot(self):
        return [fs.deriv_theta(self.S_dot, j + 1) + float(self.R_dot[j]) for j in range(self.dim)]

    def norm(self, s):
        """max(|rho_dot|_s, |phi_dot|_s) with majorant norms, componentwise sup."""
        return max(fs.vector_norm(self.rho_dot(), s), fs.vector_norm(self.phi_dot, s))

    def scaled(self, lam):
        return LieElement(lam * self.R_dot, fs.scale(self.S_dot, lam),
                          tuple(fs.scale(p, lam) for p in self.phi_dot))

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        return LieElement(self.R_dot + other.R_dot, self.S_dot + other.S_dot,
                          tuple(a + b for a, b in zip(self.phi_dot, other.phi_dot)))


class KolmogorovForm:
    """Hamiltonian c + alpha.r + r.Q(theta).r + tail with tail = O(r^3).

    ``Q`` is an n x n nested list of theta-only series, symmetric.
    """

    def __init__(self, c, freq, Q, tail=None, *, kmax=None, mmax=4):
        if not isinstance(freq, Frequency):
            freq = Frequency(freq)
        n = freq.dim
        Q = [[_as_theta_series(q, n) for q in row] for row in Q]
        if len(Q) != n or any(len(row) != n for row in Q):
            raise ValueError(f"Q must be {n} x {n}")
        if kmax is None:
            kmax = max([q.kmax for row in Q for q in row] + [tail.kmax if tail is not None else 0])
        Q = [[q.resize(kmax, 0) for q in row] for row in Q]
        for i in range(n):
            for j in range(i):
                if not fs.isclose(Q[i][j], Q[j][i], atol=0.0):
                    raise ValueError(f"Q is not symmetric at ({i}, {j})")
        if tail is None:
            tail = fs.zeros(n, kmax, mmax)
        tail = tail.resize(kmax, mmax)
        if np.any(tail.coeffs[tail.degrees < 3]):
            raise ValueError("tail must only contain terms of order >= 3 in r")
        self.c = float(c)
        self.freq = freq
        self.Q = Q
        self.tail = tail
        self.kmax = int(kmax)
        self.mmax = int(mmax)

    @property
    def dim(self):
        return self.freq.dim

    @property
    def alpha(self):
        return self.freq.alpha

    @classmethod
    def standard(cls, alpha, Q=None, c=0.0, *, kmax=64, mmax=4, tau=None):
        """c + alpha.r + r.Q.r with constant Q (identity by default)."""
        freq = alpha if isinstance(alpha, Frequency) else Frequency(alpha, tau=tau or len(np.atleast_1d(alpha)))
        n = freq.dim
        Q = np.eye(n) if Q is None else np.atleast_2d(np.asarray(Q, float))
        return cls(c, freq, [[fs.constant(n, Q[i, j], kmax) for j in range(n)] for i in range(n)],
                   kmax=kmax, mmax=mmax)

    @classmethod
    def from_series(cls, H, freq, *, tol=1e-12):
        """Read a series in K^alpha shape; raises if its 1-jet is not c + alpha.r."""
        if not isinstance(freq, Frequency):
            freq = Frequency(freq)
        H0, H1, _ = decompose(H)
        n = H.dim
        c = _mean(H0)
        if fs.majorant_norm(H0 - c, 0.0) > tol:
            raise PreconditionError("normal_form", "r^0 part is not constant")
        for j in range(n):
            if fs.majorant_norm(H1[j] - float(freq.alpha[j]), 0.0) > tol:
                raise PreconditionError("normal_form", f"r_{j + 1} coefficient differs from alpha")
        Q = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                q = fs.taylor_coefficient(H, _pair(n, i, j))
                if i != j:
                    q = q * 0.5
                Q[i][j] = Q[j][i] = q
        return cls(c, freq, Q, fs.remainder(H, 2), kmax=H.kmax, mmax=H.mmax)

    def assemble(self):
        n = self.dim
        parts = {(0,) * n: fs.constant(n, self.c, self.kmax)}
        for j in range(n):
            parts[_unit(n, j)] = fs.constant(n, self.alpha[j], self.kmax)
        for i in range(n):
            for j in range(i, n):
                w = 1.0 if i == j else 2.0
                parts[_pair(n, i, j)] = self.Q[i][j] * w
        base = fs.from_taylor_coefficients(parts, n, self.kmax, self.mmax)
        return base + self.tail

    def Q_average(self):
        n = self.dim
        return np.array([[_mean(self.Q[i][j]) for j in range(n)] for i in range(n)])

    def norm(self, s):
        return fs.majorant_norm(self.assemble(), s)

    def add_tangent(self, Kdot):
        """K + K_dot: c_dot goes into c, |m| = 2 terms into Q, the rest into the tail."""
        n = self.dim
        K2 = Kdot.K2_dot.resize(self.kmax, self.mmax)
        Q = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                q = fs.taylor_coefficient(K2, _pair(n, i, j))
                if i != j:
                    q = q * 0.5
                Q[i][j] = Q[j][i] = self.Q[i][j] + q
        return KolmogorovForm(self.c + Kdot.c_dot, self.freq, Q, self.tail + fs.remainder(K2, 2),
                              kmax=self.kmax, mmax=self.mmax)

    def __repr__(self):
        return f"KolmogorovForm(c={self.c:.6g}, alpha={self.alpha.tolist()}, kmax={self.kmax}, mmax={self.mmax})"


def _as_theta_series(q, n):
    if isinstance(q, fs.FourierTaylorSeries):
        if not q.is_theta_only():
            raise ValueError("Q entries must not depend on r")
        return q.resize(mmax=0)
    return fs.constant(n, float(q))


def decompose(H):
    """Split H = H0(theta) + H1(theta).r + O(r^2).

    Returns ``(H0, [H1_1, ..., H1_n], rest)``; H0 and H1_j are theta-only
    series and ``rest`` keeps every |m|_1 >= 2 term of H.
    """
    n = H.dim
    H0 = fs.taylor_coefficient(H, (0,) * n)
    H1 = [fs.taylor_coefficient(H, _unit(n, j)) for j in range(n)]
    return H0, H1, fs.remainder(H, 1)


@dataclass(frozen=True)
class NondegeneracyCheck:
    det: float
    ok: bool
    condition: float


def check_nondegeneracy(K, reference=None, floor=NONDEGENERACY_FLOOR):
    """det of the theta-average of Q, tested against a floor and half the reference's."""
    Qbar = K.Q_average()
    det = float(np.linalg.det(Qbar))
    cond = float(np.linalg.cond(Qbar)) if det != 0 else np.inf
    ok = abs(det) >= floor
    if reference is not None:
        ok = ok and abs(det) >= 0.5 * abs(np.linalg.det(reference.Q_average()))
    return NondegeneracyCheck(det=det, ok=bool(ok), condition=cond)


def directional_derivative(K, Gdot):
    """K'.G_dot = dK/dtheta . phi_dot + dK/dr . (rho_dot - r . phi_dot')."""
    H = K.assemble() if isinstance(K, KolmogorovForm) else K
    n = H.dim
    kmax, mmax = H.kmax, H.mmax
    rho = Gdot.rho_dot()
    r = [fs.monomial(n, _unit(n, i), kmax, 1) for i in range(n)]
    total = fs.zeros(n, kmax, mmax)
    for j in range(n):
        # covector (r . phi_dot')_j = sum_i r_i d phi_dot_i / d theta_j
        w = fs.zeros(n, kmax, 1)
        for i in range(n):
            w = w + fs.mul(r[i], fs.deriv_theta(Gdot.phi_dot[i], j + 1), kmax=kmax, mmax=1)
        total = total + fs.mul(fs.deriv_theta(H, j + 1), Gdot.phi_dot[j], kmax=kmax, mmax=mmax)
        total = total + fs.mul(fs.deriv_r(H, j + 1), rho[j] - w, kmax=kmax, mmax=mmax)
    return total


def solve_linearized(K, Hdot, freq=None, *, info=None, mean_tol=1e-12):
    """Unique (K_dot, G_dot) with K_dot + K'.G_dot = Hdot through first order in r.

    Triangular solve:

        S_dot   = L^-1 (H0 - <H0>)
        R_dot   = 1/2 <Q>^-1 <H1 - 2 Q grad S_dot>
        phi_dot = L^-1 (2 Q (R_dot + grad S_dot) - H1)
        c_dot   = <H0> - R_dot . alpha
        K2_dot  = (Hdot - K'.G_dot) restricted to |m| >= 2

    ``info``, if a dict, receives ``phi_rhs_average`` (largest theta-average
    of the phi_dot right-hand side before it is removed) and ``condition``.
    """
    freq = K.freq if freq is None else freq
    n = K.dim
    kmax = K.kmax
    Hdot = Hdot.resize(kmax, K.mmax)
    H0, H1, _ = decompose(Hdot)
    h0 = _mean(H0)
    S_dot = solve_homological(H0 - h0, freq)
    grad_S = fs.gradient_theta(S_dot)
    Qbar = K.Q_average()
    cond = float(np.linalg.cond(Qbar))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NondegeneracyError(f"averaged Q has condition number {cond:.3e}")
    QgS = [fs.linear_combination((1.0, fs.mul(K.Q[i][j], grad_S[j], kmax=kmax, mmax=0)) for j in range(n))
           for i in range(n)]
    rhs = np.array([_mean(H1[i]) - 2.0 * _mean(QgS[i]) for i in range(n)])
    R_dot = 0.5 * np.linalg.solve(Qbar, rhs)
    phi_dot = []
    worst = 0.0
    for i in range(n):
        g = fs.scale(QgS[i], 2.0) - H1[i]
        for j in range(n):
            g = g + fs.scale(K.Q[i][j], 2.0 * R_dot[j])
        m = _mean(g)
        scale = max(fs.majorant_norm(H1[i], 0.0), fs.majorant_norm(QgS[i], 0.0),
                    float(np.abs(R_dot).max(initial=0.0)) * np.abs(Qbar).max(), 1e-300)
        worst = max(worst, abs(m))
        if abs(m) > mean_tol * max(scale, 1.0):
            raise PreconditionError("zero_average", f"phi_dot right-hand side has average {m:.3e}")
        phi_dot.append(solve_homological(g - m, freq))
    c_dot = h0 - float(R_dot @ freq.alpha)
    Gdot = LieElement(R_dot, S_dot, tuple(phi_dot))
    KG = directional_derivative(K, Gdot)
    Kdot = TangentForm(c_dot, fs.remainder(Hdot - KG, 1))
    if info is not None:
        info["phi_rhs_average"] = worst
        info["condition"] = cond
    return Kdot, Gdot


def linearized_residual(K, Hdot, Kdot, Gdot, s):
    """Majorant norm at ``s`` of K_dot + K'.G_dot - Hdot."""
    res = Kdot.as_series() + directional_derivative(K, Gdot) - Hdot
    return fs.majorant_norm(res, s)


__all__ = [
    "KolmogorovForm", "LieElement", "NondegeneracyCheck", "TangentForm", "check_nondegeneracy",
    "decompose", "directional_derivative", "lie_derivative", "linearized_residual",
    "solve_linearized",
]
