"""Small-divisor solver for L_alpha f = grad f . alpha and Diophantine diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import series as fs
from .exceptions import PreconditionError, ResonanceError, SmallDivisorError

DIVISOR_FLOOR = 1e-10


def _lattice_half(dim, kmax):
    """Nonzero k with |k|_1 <= kmax, one representative per +/-k pair, shape (P, dim)."""
    if kmax < 1:
        return np.zeros((0, dim), int)
    ks = fs.kvectors(dim, kmax).reshape(dim, -1).T
    ks = ks[np.abs(ks).sum(axis=1) <= kmax]
    first = np.zeros(len(ks), int)
    for j in range(dim - 1, -1, -1):
        first = np.where(ks[:, j] != 0, ks[:, j], first)
    return ks[first > 0]


def divisor_magnitudes(alpha, ks, convention="rotation"):
    """|k.alpha| as used by the scans.

    ``"rotation"`` measures the distance from k.alpha to the nearest integer
    (alpha read as a rotation vector); ``"flow"`` uses |k.alpha| itself, which
    is the divisor that actually appears in :func:`solve_homological`.  Since
    dist(x, Z) <= |x|, a margin verified under ``"rotation"`` also holds for
    ``"flow"``.
    """
    x = ks @ np.asarray(alpha, float)
    if convention == "rotation":
        return np.abs(x - np.rint(x))
    if convention == "flow":
        return np.abs(x)
    raise ValueError(f"unknown divisor convention {convention!r}")


def _resonance_eps(alpha, ks):
    return 16 * np.finfo(float).eps * (1 + np.abs(ks).sum(axis=1) * np.abs(alpha).max())


@dataclass(frozen=True)
class DiophantineReport:
    min_margin: float
    argmin_k: tuple
    admissible_gamma: float
    tau: float
    kmax: int


def check_diophantine(alpha, tau, kmax, convention="rotation"):
    """Exhaustive scan of |k.alpha| |k|_1^tau over 0 < |k|_1 <= kmax.

    Returns the minimum (which is also the largest gamma for which
    |k.alpha| >= gamma |k|^-tau holds up to kmax) and its minimiser.  Raises
    :class:`ResonanceError` if some k.alpha is an exact resonance.
    """
    alpha = np.atleast_1d(np.asarray(alpha, float))
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    ks = _lattice_half(len(alpha), kmax)
    d = divisor_magnitudes(alpha, ks, convention)
    bad = d <= _resonance_eps(alpha, ks)
    if bad.any():
        k = tuple(int(x) for x in ks[np.argmax(bad)])
        raise ResonanceError(f"exact resonance k.alpha = 0 at k={k}", k=k)
    margins = d * np.abs(ks).sum(axis=1).astype(float) ** tau
    i = int(np.argmin(margins))
    return DiophantineReport(
        min_margin=float(margins[i]),
        argmin_k=tuple(int(x) for x in ks[i]),
        admissible_gamma=float(margins[i]),
        tau=float(tau),
        kmax=int(kmax),
    )


def small_divisor_spectrum(alpha, kmax, convention="rotation"):
    """List of ``(k, |k.alpha|, 1/(2 pi |k.alpha|))`` sorted by amplification, largest first.

    Resonant entries carry amplification ``math.inf``.
    """
    alpha = np.atleast_1d(np.asarray(getattr(alpha, "alpha", alpha), float))
    ks = _lattice_half(len(alpha), kmax)
    if len(ks) == 0:
        return []
    d = divisor_magnitudes(alpha, ks, convention)
    res = d <= _resonance_eps(alpha, ks)
    with np.errstate(divide="ignore"):
        amp = np.where(res, np.inf, 1.0 / (2 * np.pi * np.where(res, 1.0, d)))
    order = np.lexsort((np.abs(ks).sum(axis=1), -amp))
    return [(tuple(int(x) for x in ks[i]), float(0.0 if res[i] else d[i]),
             math.inf if res[i] else float(amp[i])) for i in order]


@dataclass
class Frequency:
    """Frequency vector with Diophantine data.

    ``gamma`` is filled in from the scan by :meth:`verify` when not given.
    """

    alpha: np.ndarray
    tau: float = 1.0
    gamma: float | None = None
    divisor_floor: float = DIVISOR_FLOOR
    verified_kmax: int = field(default=0, compare=False)

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, float))
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("alpha must be finite")

    @property
    def dim(self):
        return len(self.alpha)

    def verify(self, kmax, convention="rotation"):
        """Scan the divisors up to ``kmax``; sets ``gamma`` if it was unset."""
        report = check_diophantine(self.alpha, self.tau, kmax, convention)
        if self.gamma is None or self.gamma > report.admissible_gamma:
            self.gamma = report.admissible_gamma
        self.verified_kmax = max(self.verified_kmax, kmax)
        return report


def _alpha_dot_k(alpha, dim, kmax):
    kv = fs.kvectors(dim, kmax)
    return np.tensordot(np.asarray(alpha, float), kv, axes=(0, 0))


def lie_derivative(f, alpha):
    """L_alpha f = sum_j alpha_j d f / d theta_j (on every Taylor coefficient)."""
    factor = 2j * np.pi * _alpha_dot_k(alpha, f.dim, f.kmax)
    return fs.FourierTaylorSeries._raw(f.dim, f.kmax, f.mmax, f.coeffs * factor[None])


def solve_homological(g, freq, *, mean_tol=1e-13):
    """Zero-mean solution f of L_alpha f = g: f_k = g_k / (2 pi i k.alpha).

    ``g`` must be a theta-only series with zero average.  Any retained mode of
    ``g`` whose divisor |k.alpha| is below ``freq.divisor_floor`` aborts the
    solve with :class:`SmallDivisorError`.
    """
    if not g.is_theta_only():
        raise PreconditionError("theta_only", "right-hand side depends on r")
    if g.mmax:
        g = g.resize(mmax=0)
    alpha = getattr(freq, "alpha", freq)
    floor = getattr(freq, "divisor_floor", DIVISOR_FLOOR)
    c = g.coeffs[0]
    mean = c[g.center]
    scale = fs.majorant_norm(g, 0.0)
    if abs(mean) > mean_tol * max(scale, 1e-300):
        raise PreconditionError("zero_average", f"right-hand side has average {mean.real:.3e}")
    kd = _alpha_dot_k(alpha, g.dim, g.kmax)
    live = c != 0
    live[g.center] = False
    small = live & (np.abs(kd) < floor)
    if small.any():
        idx = np.argwhere(small)[0]
        k = tuple(int(x) - g.kmax for x in idx)
        raise SmallDivisorError(f"divisor |k.alpha| = {abs(kd[tuple(idx)]):.3e} below floor at k={k}",
                                k=k, divisor=float(abs(kd[tuple(idx)])))
    out = np.zeros_like(g.coeffs)
    out[0][live] = c[live] / (2j * np.pi * kd[live])
    return fs.FourierTaylorSeries._raw(g.dim, g.kmax, 0, out)


def fit_loss_of_width(g, freq, s, sigmas):
    """Fit |f|_s <= c sigma^-t |g|_{s+sigma} over a list of widths.

    Returns ``(c, t, ratios)``: a least-squares fit of log ratio against
    log sigma, with ``c`` raised so that the bound holds at every sample.
    """
    f = solve_homological(g, freq)
    fs_norm = fs.majorant_norm(f, s)
    sig = np.asarray(sigmas, float)
    ratios = np.array([fs_norm / fs.majorant_norm(g, s + x) for x in sig])
    if len(sig) > 1:
        slope, _ = np.polyfit(np.log(sig), np.log(ratios), 1)
        t = max(0.0, -slope)
    else:
        t = 0.0
    c = float(np.max(ratios * sig ** t))
    return c, t, ratios
