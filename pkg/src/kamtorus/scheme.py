"""Newton iteration on shrinking strips and the abstract convergence certificate.

One step maps (K, Hdot) to (K + K_dot, (K + Hdot) o exp(-G_dot) - (K + K_dot))
where (K_dot, G_dot) solve the linearized conjugacy equation.  Step j works
from the strip s_j = s + 2^-j sigma down to s_{j+1}, consuming
sigma_j = 2^-(j+1) sigma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import group as gr
from . import series as fs
from .exceptions import DivergenceError, KAMError, NondegeneracyError, PreconditionError
from .normalform import LieElement, check_nondegeneracy, linearized_residual, solve_linearized
from .series import StripParams

DEFECT_TOL = 1e-13
MAX_ITERS = 12
GAMMA2 = 1e-2


class SmallnessWarning(UserWarning):
    """The soft smallness test of a Newton step failed; the step is attempted anyway."""


@dataclass(frozen=True)
class ScheduleParams:
    s: float = 0.1
    sigma: float = 0.2
    max_iters: int = MAX_ITERS
    defect_tol: float = DEFECT_TOL

    def __post_init__(self):
        StripParams(self.s, self.sigma)
        if self.max_iters < 0 or not self.defect_tol > 0:
            raise ValueError("max_iters must be >= 0 and defect_tol > 0")

    def s_j(self, j):
        return self.s + 2.0 ** -j * self.sigma

    def sigma_j(self, j):
        return 2.0 ** -(j + 1) * self.sigma

    def strips(self, j):
        """Strip pair used by step j: target s_{j+1}, width sigma_j."""
        return StripParams(self.s_j(j + 1), self.sigma_j(j))


@dataclass(frozen=True)
class CertificateConstants:
    C: float = 1.0
    gamma_cert: float = 1.0
    tau_cert: float = 1.0
    c_cert: float = 1.0
    t_cert: float = 1.0

    def __post_init__(self):
        vals = (self.C, self.gamma_cert, self.tau_cert, self.c_cert, self.t_cert)
        if not all(x > 0 for x in vals):
            raise ValueError("certificate constants must be positive")
        if self.c_cert < 2.0 ** -self.t_cert * (1 - 1e-12):
            raise ValueError("need c >= 2^-t")


@dataclass
class StepRecord:
    j: int
    s_j: float
    sigma_j: float
    defect_norm: float
    Kdot_norm: float
    Gdot_norm: float
    truncation_debt: float
    exp_margin: float
    squarings: int
    smallness_ratio: float
    new_defect_norm: float
    quadratic_ratio: float
    linear_residual: float


@dataclass
class IterationReport:
    steps: list = field(default_factory=list)
    defects: list = field(default_factory=list)
    outcome: str = "pending"
    fitted_exponent: float | None = None
    exponent_ratios: list = field(default_factory=list)
    conjugacy_residual: float | None = None
    truncation_debt: float = 0.0
    fitted_c: float | None = None
    fitted_t: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# one step


def newton_step(K, Hdot, strips, *, gamma2=GAMMA2, tau2=None, oversample=gr.OVERSAMPLE,
                alias_tol=1e-8, info=None):
    """One Newton step on the strip pair ``strips`` = (s, sigma).

    Returns ``(K_new, Hdot_new, G_dot)``.  ``info``, if a dict, receives the
    group element ``g = exp(-G_dot)`` and per-step diagnostics.

    Hard gates: nondegeneracy of the averaged Q, and the exponential budget
    |G_dot|_{s+sigma/2} <= sigma/2 together with |g - id|_s <= sigma/2.  The
    exponential itself is evaluated as exp(-G_dot / 2^m)^(2^m) so that every
    call to :func:`group.exp` meets its own smallness condition.  The step's
    smallness test (1 + |K|) |Hdot| <= gamma2 sigma^tau2 only warns.
    """
    n = K.dim
    s, sigma = strips.s, strips.sigma
    tau2 = (K.freq.tau + 2.0) if tau2 is None else tau2
    Hdot = Hdot.resize(K.kmax, K.mmax)
    d_in = fs.majorant_norm(Hdot, s + sigma)
    diag = {} if info is None else info
    if d_in == 0.0:
        diag.update(g=gr.GroupElement.identity(n, K.kmax), exp_margin=0.0, squarings=0,
                    smallness_ratio=0.0, truncation_debt=0.0, linear_residual=0.0,
                    quadratic_ratio=0.0, Kdot_norm=0.0, Gdot_norm=0.0)
        return K, Hdot, LieElement.zero(n, K.kmax)
    nd = check_nondegeneracy(K)
    if not nd.ok:
        raise NondegeneracyError(f"det <Q> = {nd.det:.3e}")
    K_norm = K.norm(s + sigma)
    smallness = (1.0 + K_norm) * d_in / (gamma2 * sigma ** tau2)
    if smallness > 1.0:
        msg = f"(1+|K|)|Hdot| is {smallness:.3g} times gamma2 sigma^tau2"
        warnings.warn(msg, SmallnessWarning, stacklevel=2)
        diag.setdefault("warnings", []).append(msg)
    with fs.track_truncation(s) as debt:
        lin = {}
        Kdot, Gdot = solve_linearized(K, Hdot, info=lin)
        delta = 0.5 * sigma
        g_size = Gdot.norm(s + delta)
        if g_size > delta:
            raise PreconditionError(
                "exp_budget", f"|G_dot|_(s+sigma/2) = {g_size:.3e} exceeds sigma/2 = {delta:.3e}")
        g, m = gr.exp_by_squaring(-Gdot, StripParams(s, delta), oversample=oversample)
        disp = g.distance_from_identity(s, oversample)
        if disp > delta:
            raise PreconditionError(
                "exp_budget", f"|exp(-G_dot) - id|_s = {disp:.3e} exceeds sigma/2 = {delta:.3e}")
        K_new = K.add_tangent(Kdot)
        moved = gr.pullback(K.assemble() + Hdot, g, oversample=oversample, alias_tol=alias_tol)
        Hdot_new = moved - K_new.assemble()
    d_out = fs.majorant_norm(Hdot_new, s)
    diag.update(
        g=g,
        exp_margin=g_size / (gr.gamma0(n) * delta ** 2),
        squarings=m,
        smallness_ratio=smallness,
        truncation_debt=debt.total,
        linear_residual=linearized_residual(K, Hdot, Kdot, Gdot, s),
        quadratic_ratio=d_out / ((1.0 + K_norm) ** 2 * d_in ** 2),
        Kdot_norm=Kdot.norm(s),
        Gdot_norm=Gdot.norm(s + delta),
        phi_rhs_average=lin.get("phi_rhs_average", 0.0),
    )
    return K_new, Hdot_new, Gdot


# ---------------------------------------------------------------------------
# driver


def fitted_exponent(defects, floor):
    """Ratios log d_{j+1} / log d_j over d_j > floor, and their least-squares slope through 0."""
    d = np.asarray(defects, float)
    pairs = [(math.log(d[j]), math.log(d[j + 1])) for j in range(len(d) - 1)
             if d[j] > floor and 0 < d[j] < 1 and d[j + 1] > 0]
    if not pairs:
        return None, []
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    return float(x @ y / (x @ x)), [float(v) for v in y / x]


def kam_run(H, K0, schedule=None, *, gamma2=GAMMA2, tau2=None, oversample=gr.OVERSAMPLE,
            alias_tol=1e-8, progress=None):
    """Iterate :func:`newton_step` from (K0, H - K0) on the schedule's strips.

    Returns ``(K, gamma, G, report)`` with gamma = exp(-G_dot_0) o ... o
    exp(-G_dot_j) so that H o gamma = K up to the final defect, and
    G = gamma^-1.  Raises :class:`DivergenceError` (carrying the report)
    after two consecutive defect increases.
    """
    schedule = schedule or ScheduleParams()
    n = K0.dim
    kmax = K0.kmax
    K0.freq.verify(max(kmax, 1))
    report = IterationReport()
    K = K0
    Hdot = (H.resize(kmax, K0.mmax) - K0.assemble())
    gamma = gr.GroupElement.identity(n, kmax)
    increases = 0
    for j in range(schedule.max_iters + 1):
        d = fs.majorant_norm(Hdot, schedule.s_j(j))
        report.defects.append(d)
        if d <= schedule.defect_tol:
            report.outcome = "converged"
            break
        if j > 0 and d > report.defects[-2]:
            increases += 1
            if increases >= 2:
                report.outcome = "diverged"
                raise DivergenceError(f"defect grew on two consecutive steps (now {d:.3e})", report)
        else:
            increases = 0
        if j == schedule.max_iters:
            report.outcome = "max_iters"
            break
        strips = schedule.strips(j)
        info = {}
        try:
            K, Hdot, _ = newton_step(K, Hdot, strips, gamma2=gamma2, tau2=tau2,
                                     oversample=oversample, alias_tol=alias_tol, info=info)
        except KAMError as exc:
            report.outcome = "failed"
            exc.report = report
            raise
        gamma = gr.compose(gamma, info["g"], oversample=oversample)
        rec = StepRecord(
            j=j, s_j=schedule.s_j(j), sigma_j=schedule.sigma_j(j), defect_norm=d,
            Kdot_norm=info["Kdot_norm"], Gdot_norm=info["Gdot_norm"],
            truncation_debt=info["truncation_debt"], exp_margin=info["exp_margin"],
            squarings=info["squarings"], smallness_ratio=info["smallness_ratio"],
            new_defect_norm=fs.majorant_norm(Hdot, strips.s),
            quadratic_ratio=info["quadratic_ratio"], linear_residual=info["linear_residual"])
        report.steps.append(rec)
        report.warnings.extend(info.get("warnings", []))
        report.truncation_debt += rec.truncation_debt
        if progress is not None:
            progress(rec)
    report.fitted_exponent, report.exponent_ratios = fitted_exponent(
        report.defects, 100.0 * schedule.defect_tol)
    if len(report.steps) >= 1:
        c, t = fit_quadratic_constants(report, schedule)
        report.fitted_c, report.fitted_t = c, t
    G = gr.inverse(gamma, oversample=oversample)
    with fs.track_truncation(schedule.s) as debt:
        residual = gr.pullback(H.resize(kmax, K.mmax), gamma, oversample=oversample,
                               alias_tol=alias_tol) - K.assemble()
    report.truncation_debt += debt.total
    report.conjugacy_residual = fs.majorant_norm(residual, schedule.s)
    return K, gamma, G, report


# ---------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class Certificate:
    ok: bool
    q: float
    predicted: list
    reason: str = ""


def convergence_certificate(consts, sigma, y_norm, max_iters=MAX_ITERS):
    """q = c 4^t sigma^-t |y|; ok iff 2q <= 1 and |y| <= gamma sigma^tau.

    ``predicted[j] = q^(2^j)`` bounds the defect after j steps.
    """
    if not (sigma > 0 and y_norm >= 0):
        raise ValueError("need sigma > 0 and y_norm >= 0")
    c, t = consts.c_cert, consts.t_cert
    q = c * 4.0 ** t * sigma ** -t * y_norm
    with np.errstate(over="ignore"):
        predicted = [float(np.float64(q) ** (2 ** j)) for j in range(max_iters + 1)]
    reasons = []
    if y_norm > consts.gamma_cert * sigma ** consts.tau_cert:
        reasons.append(f"|y| = {y_norm:.3e} outside the ball gamma sigma^tau = "
                       f"{consts.gamma_cert * sigma ** consts.tau_cert:.3e}")
    if 2.0 * q > 1.0:
        reasons.append(f"2q = {2 * q:.3g} > 1")
    return Certificate(ok=not reasons, q=q, predicted=predicted, reason="; ".join(reasons))


def abstract_fp_simulate(consts, sigma, y_norm, iters):
    """Worst-case orbit of the abstract Newton map.

    y_{j+1} = c sigma_j^-t y_j^2 and x_{j+1} = x_j + c sigma_j^-t y_j^2 with
    sigma_j = 2^-(j+1) sigma.  Returns ``[(x_1, y_1), ..., (x_iters, y_iters)]``.
    Warns when 2q = 1, where the bounds no longer shrink geometrically.
    """
    c, t = consts.c_cert, consts.t_cert
    q = c * 4.0 ** t * sigma ** -t * y_norm
    if iters > 0 and math.isclose(2.0 * q, 1.0, rel_tol=1e-12):
        warnings.warn("borderline certificate: 2q = 1", SmallnessWarning, stacklevel=2)
    out = []
    x, y = 0.0, float(y_norm)
    for j in range(iters):
        step = c * (2.0 ** -(j + 1) * sigma) ** -t * y * y
        x += step
        y = step
        out.append((x, y))
    if out and out[-1][0] > consts.C:
        warnings.warn(f"x-drift {out[-1][0]:.3e} exceeds C = {consts.C}", SmallnessWarning, stacklevel=2)
    return out


def closed_form_bound(consts, sigma, y_norm, j):
    """Exact value of the j-th simulated y: (y prod_{k<j} d_k^(2^-(k+1)))^(2^j), d_k = c sigma_k^-t."""
    c, t = consts.c_cert, consts.t_cert
    log_y = math.log(y_norm) if y_norm > 0 else -math.inf
    for k in range(j):
        log_y += 2.0 ** -(k + 1) * (math.log(c) - t * math.log(2.0 ** -(k + 1) * sigma))
    return math.exp(2.0 ** j * log_y)


def fit_quadratic_constants(report, schedule):
    """Empirical (c, t) with d_{j+1} <= c sigma_j^-t d_j^2 at every recorded step.

    ``t`` comes from a regression over the steps with d_j > 100 defect_tol;
    ``c`` is then the smallest constant valid for every step, raised to 2^-t
    if necessary.
    """
    d = report.defects
    js = [j for j in range(len(d) - 1) if d[j] > 0 and d[j + 1] > 0]
    if not js:
        return None, None
    qual = [j for j in js if d[j] > 100.0 * schedule.defect_tol]
    t = 0.0
    if len(qual) >= 2:
        x = np.log([schedule.sigma_j(j) for j in qual])
        y = np.log([d[j + 1] / d[j] ** 2 for j in qual])
        t = max(0.0, -float(np.polyfit(x, y, 1)[0]))
    c = max(d[j + 1] * schedule.sigma_j(j) ** t / d[j] ** 2 for j in js)
    return max(c, 2.0 ** -t), t


__all__ = [
    "Certificate", "CertificateConstants", "IterationReport", "ScheduleParams", "SmallnessWarning",
    "StepRecord", "abstract_fp_simulate", "closed_form_bound", "convergence_certificate",
    "fit_quadratic_constants", "fitted_exponent", "kam_run", "newton_step",
]
