"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is reported rather than hidden.
"""

import math
import time

import numpy as np
import pytest

from conftest import GOLDEN, cos_mode, record_criterion, sin_mode
from kamtorus import group as gr
from kamtorus import series as fs
from kamtorus.cohomology import Frequency, check_diophantine, lie_derivative, solve_homological
from kamtorus.normalform import KolmogorovForm, linearized_residual, solve_linearized
from kamtorus.scheme import (CertificateConstants, ScheduleParams, abstract_fp_simulate,
                             convergence_certificate, kam_run, newton_step)
from kamtorus.series import StripParams
from kamtorus.verify import flow_check, pointwise_conjugacy_residual, torus_embedding
import oracles

EPS = 1e-3
ALPHA2 = np.array([0.7548776662, 0.5698402910])
ALPHAS = {1: np.array([GOLDEN]), 2: ALPHA2, 3: np.array([0.7548776662, 0.5698402910, 0.3247179572])}


@pytest.fixture(scope="module", autouse=True)
def single_thread():
    old = fs.FFT_WORKERS
    fs.set_threads(1)
    yield
    fs.set_threads(old)


@pytest.fixture(scope="module")
def K0():
    return KolmogorovForm.standard([GOLDEN], kmax=64, mmax=4, tau=1.0)


@pytest.fixture(scope="module")
def run1(K0):
    H = K0.assemble() + cos_mode(1, 64, (1,), EPS, mmax=4)
    sched = ScheduleParams(s=0.1, sigma=0.2)
    t0 = time.perf_counter()
    K, gamma, G, rep = kam_run(H, K0, sched)
    return {"H": H, "K": K, "gamma": gamma, "G": G, "report": rep, "schedule": sched,
            "seconds": time.perf_counter() - t0}


def test_criterion_01_quadratic_convergence(run1):
    rep = run1["report"]
    d = rep.defects
    decreasing = all(b < a for a, b in zip(d, d[1:]))
    ratios = [math.log(d[j + 1]) / math.log(d[j]) for j in range(len(d) - 1) if d[j] > 1e-11]
    slope = rep.fitted_exponent
    ok = (decreasing and rep.outcome == "converged" and d[-1] <= 1e-13 and len(rep.steps) <= 6
          and 1.7 <= slope <= 2.3 and all(1.7 <= r <= 2.3 for r in ratios)
          and run1["seconds"] < 30.0)
    record_criterion(1, ok, f"defects={['%.2e' % x for x in d]} exponent={slope:.3f} "
                            f"ratios={['%.3f' % r for r in ratios]} steps={len(rep.steps)} "
                            f"time={run1['seconds']:.2f}s")
    assert ok


def test_criterion_02_conjugacy_identity(run1):
    pointwise = pointwise_conjugacy_residual(run1["H"], run1["K"].assemble(), run1["gamma"],
                                             N=256, r_max=0.05, nr=5)
    majorant = run1["report"].conjugacy_residual
    ok = pointwise <= 1e-9 and majorant <= 1e-12
    record_criterion(2, ok, f"pointwise={pointwise:.2e} majorant={majorant:.2e}")
    assert ok


def test_criterion_03_exact_conjugate_recovery(K0):
    G0 = gr.GroupElement([fs.zeros(1, 64)], [0.0], sin_mode(1, 64, (1,), EPS / (2 * math.pi)))
    H = gr.pullback(K0.assemble(), G0, alias_tol=None)
    K, gamma, G, rep = kam_run(H, K0, ScheduleParams())
    fc = flow_check(H, torus_embedding(gamma, N=256), [GOLDEN], T=100.0, dt=1e-3, npoints=20, seed=0)
    ok = rep.conjugacy_residual <= 1e-10 and fc.rotation_error <= 1e-6
    record_criterion(3, ok, f"residual={rep.conjugacy_residual:.2e} rotation_error={fc.rotation_error:.2e} "
                            f"|G-G0|={gr.identity_distance(G, G0):.1e}")
    assert ok


def test_criterion_04_linearized_residual():
    rng = np.random.default_rng(2024)
    kmax = 8
    q = cos_mode(1, kmax, (1,), 0.1)
    K = KolmogorovForm(0.0, Frequency([GOLDEN], tau=1.0), [[q + 1.0]], kmax=kmax, mmax=4)
    worst_excess, worst_avg, worst_res = -np.inf, 0.0, 0.0
    for _ in range(50):
        Hdot = fs.random_series(rng, 1, kmax, 4)
        Hdot = Hdot * (rng.uniform(0.1, 1.0) * 1e-3 / fs.majorant_norm(Hdot, 0.1))
        info = {}
        with fs.track_truncation(0.1) as debt:
            Kdot, Gdot = solve_linearized(K, Hdot, info=info)
            res = linearized_residual(K, Hdot, Kdot, Gdot, 0.1)
        worst_excess = max(worst_excess, res - (1e-11 + debt.total))
        worst_res = max(worst_res, res)
        worst_avg = max(worst_avg, info["phi_rhs_average"])
    ok = worst_excess <= 0.0 and worst_avg <= 1e-12
    record_criterion(4, ok, f"max residual={worst_res:.2e} max excess over 1e-11+debt={worst_excess:.2e} "
                            f"max phi rhs average={worst_avg:.1e}")
    assert ok


def _random_lie(rng, n, kmax):
    from kamtorus.normalform import LieElement
    S = fs.random_series(rng, n, kmax, 0, theta_only=True, zero_mean=True, decay=0.05)
    phi = tuple(fs.random_series(rng, n, kmax, 0, theta_only=True, zero_mean=True, decay=0.05)
                for _ in range(n))
    return LieElement(rng.standard_normal(n), S, phi)


def test_criterion_05_exp_contract():
    from kamtorus.exceptions import PreconditionError
    rng = np.random.default_rng(7)
    strips = StripParams(0.05, 0.3)
    w = strips.s + strips.sigma
    worst_ratio, refused, succeeded = 0.0, 0, 0
    for i in range(50):
        n = 1 if i % 2 == 0 else 2
        kmax = 8 if n == 1 else 4
        base = _random_lie(rng, n, kmax)
        base = base.scaled(1.0 / base.norm(w))
        limit = gr.gamma0(n) * strips.sigma ** 2
        inside = base.scaled(0.9 * limit)
        G = gr.exp(inside, strips)
        succeeded += 1
        bound = gr.c0(n) / strips.sigma * inside.norm(w)
        worst_ratio = max(worst_ratio, G.distance_from_identity(strips.s) / bound)
        try:
            gr.exp(base.scaled(1.1 * limit), strips)
        except PreconditionError:
            refused += 1
    ok = succeeded == 50 and refused == 50 and worst_ratio <= 1.0
    record_criterion(5, ok, f"succeeded={succeeded}/50 refused={refused}/50 "
                            f"max |exp-id|/bound={worst_ratio:.3f}")
    assert ok


def test_criterion_06_group_laws(run1, K0):
    strips = StripParams(0.05, 0.3)
    rng = np.random.default_rng(11)
    round_trip, action = 0.0, 0.0
    produced = []
    for n, kmax in [(1, 8), (2, 4)]:
        for _ in range(3):
            Gd = _random_lie(rng, n, kmax)
            Gd = Gd.scaled(0.5 * gr.gamma0(n) * strips.sigma ** 2 / Gd.norm(strips.s + strips.sigma))
            E, Em = gr.exp(Gd, strips), gr.exp(-Gd, strips)
            I = gr.GroupElement.identity(n, kmax)
            Einv = gr.inverse(E)
            round_trip = max(round_trip, gr.identity_distance(gr.compose(E, Em), I),
                             gr.identity_distance(gr.compose(E, Einv), I),
                             gr.identity_distance(gr.compose(Einv, E), I))
            produced += [E, Em, Einv]
        alpha = [GOLDEN] if n == 1 else ALPHA2
        big = 16 if n == 1 else 8
        H = KolmogorovForm.standard(alpha, kmax=big, mmax=4).assemble() + cos_mode(n, big, (1,) * n, EPS, mmax=4)
        G1, G2 = produced[-3].resize(big), produced[-6].resize(big)
        action = max(action, fs.max_abs_diff(gr.pullback(gr.pullback(H, G1), G2),
                                             gr.pullback(H, gr.compose(G1, G2))))
    # the run's own elements: every step map, the accumulated gamma and G
    sched = run1["schedule"]
    K, Hdot = K0, run1["H"] - K0.assemble()
    for j in range(len(run1["report"].steps)):
        info = {}
        K, Hdot, _ = newton_step(K, Hdot, sched.strips(j), info=info)
        produced.append(info["g"])
    produced += [run1["gamma"], run1["G"]]
    defect = max(gr.symplectic_defect(G, 100) for G in produced)
    ok = round_trip <= 1e-10 and action <= 1e-10 and defect <= 1e-7
    record_criterion(6, ok, f"round trips={round_trip:.1e} right action={action:.1e} "
                            f"max symplectic defect={defect:.1e} over {len(produced)} elements")
    assert ok


def test_criterion_07_cohomological_oracle():
    rng = np.random.default_rng(3)
    worst_coef, worst_round = 0.0, 0.0
    for i in range(100):
        n = 1 + i % 3
        kmax = [8, 6, 4][n - 1]
        alpha = ALPHAS[n]
        g = fs.random_series(rng, n, kmax, 0, theta_only=True, zero_mean=True)
        f = solve_homological(g, Frequency(alpha))
        fd = oracles.as_dict(f)
        for (k, m), c in oracles.as_dict(g).items():
            if not any(k):
                continue
            ref = c / (2j * math.pi * sum(a * b for a, b in zip(k, alpha)))
            worst_coef = max(worst_coef, abs(fd.get((k, m), 0) - ref) / abs(ref))
        back = lie_derivative(f, alpha)
        worst_round = max(worst_round, fs.max_abs_diff(back, g) / np.abs(g.coeffs).max())
    ok = worst_coef <= 1e-14 and worst_round <= 1e-13
    record_criterion(7, ok, f"max coefficient rel err={worst_coef:.1e} max round trip={worst_round:.1e}")
    assert ok


def test_criterion_08_certificate(run1):
    worst = 0.0
    for c, t, sigma, y in [(1.0, 1.0, 0.5, 0.01), (0.7, 2.0, 0.3, 1e-4), (2.0, 0.5, 0.2, 1e-3)]:
        consts = CertificateConstants(C=1.0, gamma_cert=1.0, tau_cert=1.0, c_cert=c, t_cert=t)
        cert = convergence_certificate(consts, sigma, y, 12)
        q = oracles.certificate_q(c, t, sigma, y)
        worst = max(worst, abs(cert.q - q) / q)
        for j, p in enumerate(cert.predicted):
            ref = q ** (2 ** j)
            if ref > 1e-300:
                worst = max(worst, abs(p - ref) / ref)
    rep, sched = run1["report"], run1["schedule"]
    consts = CertificateConstants(C=1e6, c_cert=rep.fitted_c, t_cert=rep.fitted_t)
    d = rep.defects
    sim = abstract_fp_simulate(consts, sched.sigma, d[0], len(d) - 1)
    dominated = all(d[j] <= y * (1 + 1e-12) for j, (_, y) in enumerate(sim, start=1))
    ok = worst <= 1e-12 and dominated
    record_criterion(8, ok, f"max rel err={worst:.1e} fitted c={rep.fitted_c:.3g} t={rep.fitted_t:.3g} "
                            f"dominated={dominated}")
    assert ok


def test_criterion_09_dynamical_verification(run1):
    emb = torus_embedding(run1["gamma"], N=256)
    fc = flow_check(run1["H"], emb, [GOLDEN], T=100.0, dt=1e-3, npoints=20, seed=0)
    ok = fc.max_torus_distance <= 1e-6 and fc.rotation_error <= 1e-5 and fc.energy_drift <= 1e-9
    record_criterion(9, ok, f"distance={fc.max_torus_distance:.2e} rotation_error={fc.rotation_error:.2e} "
                            f"energy_drift={fc.energy_drift:.2e}")
    assert ok


def test_criterion_10_two_dimensional_smoke():
    margin = check_diophantine(ALPHA2, 2.0, 32).min_margin
    K0 = KolmogorovForm.standard(ALPHA2, kmax=32, mmax=4, tau=2.0)
    H = K0.assemble() + cos_mode(2, 32, (1, 1), 1e-4, mmax=4)
    t0 = time.perf_counter()
    K, gamma, G, rep = kam_run(H, K0, ScheduleParams())
    seconds = time.perf_counter() - t0
    ok = (margin > 0 and rep.outcome == "converged" and len(rep.steps) <= 6
          and rep.conjugacy_residual <= 1e-8 and seconds < 300)
    record_criterion(10, ok, f"margin={margin:.3f} steps={len(rep.steps)} "
                             f"residual={rep.conjugacy_residual:.2e} time={seconds:.1f}s")
    assert ok
