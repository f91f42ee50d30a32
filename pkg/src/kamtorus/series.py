"""Truncated Fourier-Taylor series on T^n x R^n.

A series is

    f(theta, r) = sum_{k, m} c[m, k] exp(2 pi i k.theta) r^m

with |k|_1 <= kmax and |m|_1 <= mmax.  Coefficients are stored densely:
``coeffs[j, k_1 + kmax, ..., k_n + kmax]`` holds the coefficient of the j-th
monomial of :func:`monomials`.  Entries outside the l1 ball are kept at zero.

Monomials are listed in graded order, so the list for a lower ``mmax`` is a
prefix of the list for a higher one; changing ``mmax`` is a slice or a pad.

Everything that goes through a sampling grid (products, compositions) is
"chopped": coefficients below ``CHOP_TOL`` times the result's scale are set to
zero.  Without it, FFT round-off in high modes is amplified by the strip
weight exp(2 pi s |k|) and the majorant norms become meaningless.
"""

from __future__ import annotations

import contextlib
import contextvars
import functools
import itertools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .exceptions import RealityError

CHOP_TOL = 1e-14
FFT_WORKERS = 1  # set_threads() raises it
TWO_PI = 2.0 * np.pi



def set_threads(n):
    """Cap the worker count used by the grid transforms."""
    global FFT_WORKERS
    FFT_WORKERS = max(1, int(n))

@dataclass(frozen=True)
class StripParams:
    """Complex strip |Im theta_j|, |r_j| <= s, and the width sigma an operation may consume."""

    s: float
    sigma: float

    def __post_init__(self):
        if not (0.0 <= self.s < 1.0 and self.sigma > 0.0 and self.s + self.sigma < 1.0):
            raise ValueError(f"need 0 <= s < 1, sigma > 0, s + sigma < 1; got {self}")


# ---------------------------------------------------------------------------
# index bookkeeping


@functools.lru_cache(maxsize=None)
def monomials(dim, mmax):
    """Exponent vectors m with |m|_1 <= mmax, graded, shape (M, dim)."""
    out = []
    for deg in range(mmax + 1):
        for m in itertools.product(range(deg, -1, -1), repeat=dim):
            if sum(m) == deg:
                out.append(m)
    arr = np.array(out, dtype=int).reshape(len(out), dim)
    arr.flags.writeable = False
    return arr


@functools.lru_cache(maxsize=None)
def monomial_index(dim, mmax):
    return {tuple(int(x) for x in m): i for i, m in enumerate(monomials(dim, mmax))}


@functools.lru_cache(maxsize=None)
def _degrees(dim, mmax):
    d = monomials(dim, mmax).sum(axis=1)
    d.flags.writeable = False
    return d


@functools.lru_cache(maxsize=None)
def _product_table(dim, ma, mb, mc):
    """Triples (i, j, t) with mono_a[i] + mono_b[j] = mono_c[t]."""
    A, B = monomials(dim, ma), monomials(dim, mb)
    idx = monomial_index(dim, mc)
    table = []
    for i, mi in enumerate(A):
        for j, mj in enumerate(B):
            t = idx.get(tuple(int(x) for x in mi + mj))
            if t is not None:
                table.append((i, j, t))
    return tuple(table)


@functools.lru_cache(maxsize=None)
def kvectors(dim, kmax):
    """Integer wave vectors on the box [-kmax, kmax]^dim, shape (dim,) + box."""
    ks = np.arange(-kmax, kmax + 1)
    grids = np.meshgrid(*([ks] * dim), indexing="ij")
    arr = np.stack(grids)
    arr.flags.writeable = False
    return arr


@functools.lru_cache(maxsize=None)
def l1_norms(dim, kmax):
    arr = np.abs(kvectors(dim, kmax)).sum(axis=0)
    arr.flags.writeable = False
    return arr


@functools.lru_cache(maxsize=None)
def ball_mask(dim, kmax):
    arr = l1_norms(dim, kmax) <= kmax
    arr.flags.writeable = False
    return arr


def box_shape(dim, kmax):
    return (2 * kmax + 1,) * dim


def _kaxes(dim):
    return tuple(range(-dim, 0))


def grid_size(kmax, oversample=2):
    """Points per angle for an oversampled grid resolving |k| <= kmax."""
    return int(sfft.next_fast_len(max(oversample, 2) * (2 * kmax + 1)))


@functools.lru_cache(maxsize=None)
def grid_points(dim, N):
    """Uniform grid on T^dim, shape (N**dim, dim), C-ordered like grid values."""
    x = np.arange(N) / N
    mesh = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    pts.flags.writeable = False
    return pts


# ---------------------------------------------------------------------------
# truncation debt


class TruncationDebt:
    """Accumulates majorant norms of discarded Fourier tails at strip ``s``."""

    def __init__(self, s):
        self.s = float(s)
        self.total = 0.0
        self.events = 0

    def add(self, amount):
        self.total += float(amount)
        self.events += 1


_DEBT = contextvars.ContextVar("kamtorus_truncation_debt", default=None)


@contextlib.contextmanager
def track_truncation(s):
    """Collect the tail norms dropped by every truncating operation in the block."""
    debt = TruncationDebt(s)
    token = _DEBT.set(debt)
    try:
        yield debt
    finally:
        _DEBT.reset(token)


def _record_tail(amount):
    debt = _DEBT.get()
    if debt is not None and amount > 0.0:
        debt.add(amount)


def _debt_strip():
    debt = _DEBT.get()
    return 0.0 if debt is None else debt.s


# ---------------------------------------------------------------------------
# the series type


def _symmetrize(c, dim):
    flipped = np.flip(c, axis=_kaxes(dim))
    return 0.5 * (c + np.conj(flipped))


class FourierTaylorSeries:
    """Immutable truncated Fourier-Taylor series with real values."""

    __slots__ = ("dim", "kmax", "mmax", "coeffs")
    __array_ufunc__ = None

    def __init__(self, dim, kmax, mmax, coeffs, *, symmetrize=True):
        if dim < 1:
            raise ValueError("dim must be positive")
        if kmax < 0 or mmax < 0:
            raise ValueError("truncation orders must be nonnegative")
        c = np.array(coeffs, dtype=complex)
        shape = (len(monomials(dim, mmax)),) + box_shape(dim, kmax)
        if c.shape != shape:
            raise ValueError(f"coefficient array has shape {c.shape}, expected {shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        mask = ball_mask(dim, kmax)
        if np.any(c[:, ~mask] != 0):
            raise ValueError("coefficient outside the |k|_1 <= kmax ball")
        if symmetrize:
            c = _symmetrize(c, dim)
        c.flags.writeable = False
        self.dim, self.kmax, self.mmax, self.coeffs = int(dim), int(kmax), int(mmax), c

    @classmethod
    def _raw(cls, dim, kmax, mmax, coeffs):
        obj = object.__new__(cls)
        coeffs.flags.writeable = False
        obj.dim, obj.kmax, obj.mmax, obj.coeffs = dim, kmax, mmax, coeffs
        return obj

    # -- shape helpers --------------------------------------------------
    @property
    def monos(self):
        return monomials(self.dim, self.mmax)

    @property
    def degrees(self):
        return _degrees(self.dim, self.mmax)

    @property
    def center(self):
        return (self.kmax,) * self.dim

    def coefficient(self, k, m=None):
        k = np.atleast_1d(k).astype(int)
        m = np.zeros(self.dim, int) if m is None else np.atleast_1d(m).astype(int)
        if np.abs(k).sum() > self.kmax:
            return 0j
        j = monomial_index(self.dim, self.mmax).get(tuple(int(x) for x in m))
        if j is None:
            return 0j
        return complex(self.coeffs[(j,) + tuple(k + self.kmax)])

    def resize(self, kmax=None, mmax=None):
        """Same series with different truncation orders (dropping or zero-padding)."""
        kmax = self.kmax if kmax is None else int(kmax)
        mmax = self.mmax if mmax is None else int(mmax)
        if kmax == self.kmax and mmax == self.mmax:
            return self
        M = len(monomials(self.dim, mmax))
        out = np.zeros((M,) + box_shape(self.dim, kmax), complex)
        Mc = min(M, self.coeffs.shape[0])
        K = min(kmax, self.kmax)
        src = (slice(0, Mc),) + (slice(self.kmax - K, self.kmax + K + 1),) * self.dim
        dst = (slice(0, Mc),) + (slice(kmax - K, kmax + K + 1),) * self.dim
        out[dst] = self.coeffs[src]
        out[:, ~ball_mask(self.dim, kmax)] = 0
        return FourierTaylorSeries._raw(self.dim, kmax, mmax, out)

    def is_theta_only(self):
        return not np.any(self.coeffs[1:])

    def support_radius(self):
        """Largest |k_j| carrying a nonzero coefficient (0 for a constant)."""
        nz = np.any(self.coeffs != 0, axis=0)
        if not nz.any():
            return 0
        return int(np.abs(kvectors(self.dim, self.kmax)[:, nz]).max())

    # -- arithmetic -----------------------------------------------------
    def _check_dim(self, other):
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return add(self, other)
        if np.isscalar(other):
            return add(self, constant(self.dim, other, self.kmax, self.mmax))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return FourierTaylorSeries._raw(self.dim, self.kmax, self.mmax, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, FourierTaylorSeries) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return mul(self, other)
        if np.isscalar(other):
            return scale(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return scale(self, 1.0 / other)
        return NotImplemented

    def __repr__(self):
        nnz = int(np.count_nonzero(self.coeffs))
        return (f"FourierTaylorSeries(dim={self.dim}, kmax={self.kmax}, "
                f"mmax={self.mmax}, nnz={nnz})")

    # -- grid transforms ------------------------------------------------
    def to_grid(self, N):
        """Values of every Taylor coefficient function on the uniform N^dim grid."""
        return coeffs_to_grid(self.coeffs, self.dim, N)

    def reality_defect(self):
        flipped = np.flip(self.coeffs, axis=_kaxes(self.dim))
        return float(np.abs(self.coeffs - np.conj(flipped)).max(initial=0.0))


def coeffs_to_grid(coeffs, dim, N):
    kmax = (coeffs.shape[-1] - 1) // 2
    if N < 2 * kmax + 1:
        raise ValueError(f"grid of {N} points cannot resolve kmax={kmax}")
    lead = coeffs.shape[:-dim]
    idx = np.arange(-kmax, kmax + 1) % N
    full = np.zeros(lead + (N,) * dim, complex)
    full[(Ellipsis,) + np.ix_(*([idx] * dim))] = coeffs
    vals = sfft.ifftn(full, axes=_kaxes(dim), norm="forward", workers=FFT_WORKERS)
    return vals.real


def from_grid(values, dim, kmax, mmax=None, *, chop=CHOP_TOL, scale=None):
    """Fourier-analyse real grid values into a series.

    ``values`` has shape (M,) + (N,)*dim with M monomials (or no leading axis
    for a theta-only function).  Returns ``(series, tail)`` where ``tail`` is
    the majorant norm, at the active truncation-debt strip, of the resolved
    modes that fall outside the |k|_1 <= kmax ball.
    """
    values = np.asarray(values, float)
    if values.ndim == dim:
        values = values[None]
    N = values.shape[-1]
    if mmax is None:
        mmax = _mmax_for(dim, values.shape[0])
    C = sfft.fftn(values, axes=_kaxes(dim), norm="forward", workers=FFT_WORKERS)
    if scale is None:
        scale = float(np.abs(C).max(initial=0.0))
    thresh = chop * scale
    if thresh > 0:
        C[np.abs(C) < thresh] = 0
    K = min(kmax, (N - 1) // 2)
    idx = np.arange(-K, K + 1) % N
    sel = (Ellipsis,) + np.ix_(*([idx] * dim))
    box = np.zeros((values.shape[0],) + box_shape(dim, kmax), complex)
    inner = (slice(None),) + (slice(kmax - K, kmax + K + 1),) * dim
    box[inner] = C[sel]
    mask = ball_mask(dim, kmax)
    # resolved modes outside the ball form the tail
    C[sel] = np.where(mask[(slice(kmax - K, kmax + K + 1),) * dim], 0, C[sel])
    box[:, ~mask] = 0
    tail = 0.0
    if np.any(C):
        s = _debt_strip()
        freqs = np.rint(sfft.fftfreq(N, 1.0 / N)).astype(int)
        l1 = np.abs(np.stack(np.meshgrid(*([freqs] * dim), indexing="ij"))).sum(axis=0)
        deg = _degrees(dim, mmax)
        w = np.exp(TWO_PI * s * l1)[None] * _radial_weight(deg, s)[(slice(None),) + (None,) * dim]
        tail = float((np.abs(C) * w).sum())
        _record_tail(tail)
    series = FourierTaylorSeries._raw(dim, kmax, mmax, _symmetrize(box, dim))
    return series, tail


def _mmax_for(dim, M):
    for mmax in range(64):
        if len(monomials(dim, mmax)) == M:
            return mmax
    raise ValueError(f"{M} is not a monomial count in dimension {dim}")


def _radial_weight(deg, s):
    return np.where(deg == 0, 1.0, float(s) ** np.maximum(deg, 1))


# ---------------------------------------------------------------------------
# constructors


def _as_vec(x, dim):
    v = np.atleast_1d(np.asarray(x, dtype=int))
    if v.shape != (dim,):
        raise ValueError(f"index {x!r} is not a {dim}-vector")
    return v


def make_series(dim, kmax, mmax, coeffs):
    """Build a series from ``{(k, m): value}``; reality is enforced by averaging.

    ``k`` and ``m`` are integer ``dim``-vectors (plain ints when ``dim == 1``).
    Each coefficient is replaced by ``(c[k,m] + conj(c[-k,m])) / 2``.
    """
    M = len(monomials(dim, mmax))
    c = np.zeros((M,) + box_shape(dim, kmax), complex)
    index = monomial_index(dim, mmax)
    for (k, m), val in dict(coeffs).items():
        kv, mv = _as_vec(k, dim), _as_vec(m, dim)
        if np.abs(kv).sum() > kmax:
            raise ValueError(f"|k|_1 of {tuple(kv)} exceeds kmax={kmax}")
        if np.any(mv < 0) or mv.sum() > mmax:
            raise ValueError(f"monomial {tuple(mv)} outside |m|_1 <= {mmax}")
        val = complex(val)
        if not np.isfinite(val):
            raise ValueError(f"non-finite coefficient at k={tuple(kv)}, m={tuple(mv)}")
        c[(index[tuple(int(x) for x in mv)],) + tuple(kv + kmax)] += val
    return FourierTaylorSeries(dim, kmax, mmax, c)


def zeros(dim, kmax, mmax=0):
    M = len(monomials(dim, mmax))
    return FourierTaylorSeries._raw(dim, kmax, mmax, np.zeros((M,) + box_shape(dim, kmax), complex))


def constant(dim, value, kmax=0, mmax=0):
    out = np.zeros((len(monomials(dim, mmax)),) + box_shape(dim, kmax), complex)
    out[(0,) + (kmax,) * dim] = float(np.real(value))
    return FourierTaylorSeries._raw(dim, kmax, mmax, out)


def monomial(dim, m, kmax=0, mmax=None, coef=1.0):
    """The series ``coef * r^m``."""
    mv = _as_vec(m, dim)
    mmax = int(mv.sum()) if mmax is None else mmax
    return make_series(dim, kmax, mmax, {((0,) * dim, tuple(mv)): coef})


def _promote(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    kmax, mmax = max(a.kmax, b.kmax), max(a.mmax, b.mmax)
    return a.resize(kmax, mmax), b.resize(kmax, mmax)


def add(a, b):
    """Coefficient-wise sum; the truncation orders are the larger of the operands'.

    A real scalar operand is read as a constant series.
    """
    if np.isscalar(a):
        a = constant(b.dim, a, b.kmax)
    if np.isscalar(b):
        b = constant(a.dim, b, a.kmax)
    a, b = _promote(a, b)
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, a.coeffs + b.coeffs)


def scale(a, lam):
    lam = float(np.real(lam))
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, a.coeffs * lam)


def linear_combination(terms):
    """Sum of ``w * f`` over ``(w, f)`` pairs."""
    terms = list(terms)
    out = None
    for w, f in terms:
        out = scale(f, w) if out is None else add(out, scale(f, w))
    return out


def mul(a, b, *, kmax=None, mmax=None, return_tail=False):
    """Product of two series, truncated to ``(kmax, mmax)``.

    The full convolution is formed on a grid large enough to avoid aliasing,
    then truncated.  With ``return_tail=True`` also returns the majorant norm
    (at the active debt strip, 0 by default) of what was cut off in k.
    Products of Taylor terms beyond ``mmax`` are dropped exactly.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dim = a.dim
    kmax = max(a.kmax, b.kmax) if kmax is None else kmax
    mmax = max(a.mmax, b.mmax) if mmax is None else mmax
    ka, kb = a.support_radius(), b.support_radius()
    if not np.any(a.coeffs) or not np.any(b.coeffs):
        out = zeros(dim, kmax, mmax)
        return (out, 0.0) if return_tail else out
    N = int(sfft.next_fast_len(2 * (ka + kb) + 1))
    Va = coeffs_to_grid(_trim(a.coeffs, a.kmax, ka, dim), dim, N)
    Vb = coeffs_to_grid(_trim(b.coeffs, b.kmax, kb, dim), dim, N)
    Vc = np.zeros((len(monomials(dim, mmax)),) + (N,) * dim)
    for i, j, t in _product_table(dim, a.mmax, b.mmax, mmax):
        Vc[t] += Va[i] * Vb[j]
    sc = np.abs(a.coeffs).sum() * np.abs(b.coeffs).sum()
    out, tail = from_grid(Vc, dim, kmax, mmax, scale=sc)
    return (out, tail) if return_tail else out


def _trim(coeffs, kmax, K, dim):
    sl = (slice(None),) + (slice(kmax - K, kmax + K + 1),) * dim
    return coeffs[sl]


def deriv_theta(a, j):
    """d/d theta_j (j is 1-based): multiplies c_k by 2 pi i k_j."""
    if not 1 <= j <= a.dim:
        raise IndexError(f"angle index {j} outside 1..{a.dim}")
    factor = TWO_PI * 1j * kvectors(a.dim, a.kmax)[j - 1]
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, a.coeffs * factor[None])


def deriv_r(a, j):
    """d/d r_j (j is 1-based); keeps ``mmax``."""
    if not 1 <= j <= a.dim:
        raise IndexError(f"action index {j} outside 1..{a.dim}")
    monos = a.monos
    index = monomial_index(a.dim, a.mmax)
    out = np.zeros_like(a.coeffs)
    for i, m in enumerate(monos):
        if m[j - 1] > 0:
            lower = m.copy()
            lower[j - 1] -= 1
            out[index[tuple(int(x) for x in lower)]] += m[j - 1] * a.coeffs[i]
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, out)


def gradient_theta(a):
    return [deriv_theta(a, j) for j in range(1, a.dim + 1)]


def jet(a, order):
    """Terms with |m|_1 <= order."""
    keep = (a.degrees <= order)[(slice(None),) + (None,) * a.dim]
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, np.where(keep, a.coeffs, 0))


def remainder(a, order):
    """Terms with |m|_1 > order; ``jet(a, d) + remainder(a, d) == a`` exactly."""
    keep = (a.degrees > order)[(slice(None),) + (None,) * a.dim]
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, np.where(keep, a.coeffs, 0))


def theta_average(a):
    """The k = 0 part (integral over the torus), still a function of r."""
    out = np.zeros_like(a.coeffs)
    c = (slice(None),) + a.center
    out[c] = a.coeffs[c]
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, out)


def taylor_coefficient(a, m):
    """The theta-function multiplying r^m, as a series with mmax = 0."""
    j = monomial_index(a.dim, a.mmax).get(tuple(int(x) for x in _as_vec(m, a.dim)))
    out = np.zeros((1,) + box_shape(a.dim, a.kmax), complex)
    if j is not None:
        out[0] = a.coeffs[j]
    return FourierTaylorSeries._raw(a.dim, a.kmax, 0, out)


def from_taylor_coefficients(parts, dim, kmax, mmax):
    """Inverse of :func:`taylor_coefficient`: ``{m: theta-series}`` -> series."""
    index = monomial_index(dim, mmax)
    out = np.zeros((len(index),) + box_shape(dim, kmax), complex)
    for m, f in parts.items():
        f = f.resize(kmax, 0)
        out[index[tuple(int(x) for x in _as_vec(m, dim))]] += f.coeffs[0]
    return FourierTaylorSeries._raw(dim, kmax, mmax, out)


# ---------------------------------------------------------------------------
# evaluation and norms


def trig_eval(coeffs, theta):
    """Evaluate stacked theta-coefficient arrays at arbitrary points.

    ``coeffs`` has shape (M,) + box, ``theta`` shape (P, dim).  Returns the
    complex values, shape (M, P).  Direct summation, separable across angles.
    """
    theta = np.asarray(theta, float)
    dim = theta.shape[-1]
    kmax = (coeffs.shape[-1] - 1) // 2
    nz = np.any(coeffs != 0, axis=0)
    if not nz.any():
        return np.zeros((coeffs.shape[0], theta.shape[0]), complex)
    K = int(np.abs(kvectors(dim, kmax)[:, nz]).max())
    c = _trim(coeffs, kmax, K, dim)
    ks = np.arange(-K, K + 1)
    t = np.tensordot(c, np.exp(TWO_PI * 1j * np.outer(theta[:, -1], ks)), axes=([-1], [1]))
    for j in range(dim - 2, -1, -1):
        E = np.exp(TWO_PI * 1j * np.outer(theta[:, j], ks))
        t = np.einsum("...ap,pa->...p", t, E)
    return t


def _points(x, dim):
    x = np.asarray(x, float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def evaluate(a, theta, r):
    """Real value of the series at real (theta, r); broadcasts over leading axes."""
    th, rr = _points(theta, a.dim), _points(r, a.dim)
    th, rr = np.broadcast_arrays(th, rr)
    lead = th.shape[:-1]
    th2, r2 = th.reshape(-1, a.dim), rr.reshape(-1, a.dim)
    cf = trig_eval(a.coeffs, th2)
    rp = np.prod(r2[:, None, :] ** a.monos[None], axis=-1)
    val = np.einsum("mp,pm->p", cf, rp)
    if np.any(np.abs(val.imag) > 1e-12 * (1 + np.abs(val.real))):
        raise RealityError(f"imaginary part {np.abs(val.imag).max():.3e} on evaluation")
    out = val.real.reshape(lead)
    return float(out) if out.ndim == 0 else out


def majorant_norm(a, s):
    """sum |c_{k,m}| exp(2 pi s |k|_1) s^|m|_1, an upper bound for sup |f| on the strip."""
    if s < 0:
        raise ValueError("strip width must be nonnegative")
    w = np.exp(TWO_PI * s * l1_norms(a.dim, a.kmax))
    rw = _radial_weight(a.degrees, s)
    return float((np.abs(a.coeffs).reshape(len(rw), -1) * w.ravel()[None]).sum(axis=1) @ rw)


def vector_norm(parts, s):
    """Max of majorant norms over a list of series (sup over components)."""
    return max((majorant_norm(p, s) for p in parts), default=0.0)


# ---------------------------------------------------------------------------
# literal format


def to_literal(a, tol=0.0):
    """Records ``{k, m, re, im}`` for one representative of each +/-k pair."""
    recs = []
    kv = kvectors(a.dim, a.kmax)
    for j, m in enumerate(a.monos):
        for idx in zip(*np.nonzero(np.abs(a.coeffs[j]) > tol)):
            k = kv[(slice(None),) + idx]
            nzk = k[np.nonzero(k)[0]]
            if nzk.size and nzk[0] < 0:
                continue
            c = a.coeffs[(j,) + idx]
            recs.append({"k": [int(x) for x in k], "m": [int(x) for x in m],
                         "re": float(c.real), "im": float(c.imag)})
    return recs


def from_literal(records, dim, kmax, mmax):
    """Parse series records.  A record whose partner -k is absent is completed by conjugation."""
    given = {}
    for rec in records:
        k = tuple(int(x) for x in _as_vec(rec["k"], dim))
        m = tuple(int(x) for x in _as_vec(rec.get("m", [0] * dim), dim))
        val = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
        given[(k, m)] = given.get((k, m), 0) + val
    full = dict(given)
    for (k, m), val in given.items():
        partner = (tuple(-x for x in k), m)
        if partner not in given:
            if any(k):
                full[partner] = np.conj(val)
            else:
                full[(k, m)] = val.real
    return make_series(dim, kmax, mmax, full)


def chop(a, tol=CHOP_TOL, scale=None):
    """Zero coefficients below ``tol * scale`` (default scale: largest |c|)."""
    scale = float(np.abs(a.coeffs).max(initial=0.0)) if scale is None else scale
    c = np.where(np.abs(a.coeffs) < tol * scale, 0, a.coeffs)
    return FourierTaylorSeries._raw(a.dim, a.kmax, a.mmax, c)


def random_series(rng, dim, kmax, mmax, *, decay=0.3, amplitude=1.0, theta_only=False,
                  zero_mean=False):
    """Random real series with coefficients ~ amplitude * decay^(|k|_1 + |m|_1)."""
    M = len(monomials(dim, mmax))
    shape = (M,) + box_shape(dim, kmax)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    l1 = l1_norms(dim, kmax)
    deg = _degrees(dim, mmax)
    c *= amplitude * decay ** (l1[None] + deg[(slice(None),) + (None,) * dim])
    c[:, ~ball_mask(dim, kmax)] = 0
    if theta_only:
        c[1:] = 0
    if zero_mean:
        c[(slice(None),) + (kmax,) * dim] = 0
    return FourierTaylorSeries(dim, kmax, mmax, c)


def isclose(a, b, atol=1e-14):
    """Coefficient-wise comparison after promoting to common truncation."""
    a, b = _promote(a, b)
    return bool(np.abs(a.coeffs - b.coeffs).max(initial=0.0) <= atol)


def max_abs_diff(a, b):
    a, b = _promote(a, b)
    return float(np.abs(a.coeffs - b.coeffs).max(initial=0.0))


__all__ = [
    "CHOP_TOL", "FourierTaylorSeries", "TruncationDebt", "add", "chop", "constant",
    "deriv_r", "deriv_theta", "evaluate", "from_grid", "from_literal", "grid_points",
    "grid_size", "jet", "majorant_norm", "make_series", "monomial", "monomials", "mul",
    "remainder", "scale", "taylor_coefficient", "theta_average", "to_literal",
    "track_truncation", "trig_eval", "vector_norm", "zeros",
]
