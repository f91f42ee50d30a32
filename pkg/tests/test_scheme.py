import math

import numpy as np
import pytest

from conftest import GOLDEN, cos_mode, sin_mode
from kamtorus import group as gr
from kamtorus import scheme as sc
from kamtorus import series as fs
from kamtorus.exceptions import DivergenceError
from kamtorus.normalform import KolmogorovForm, LieElement, decompose
from kamtorus.scheme import (CertificateConstants, ScheduleParams, abstract_fp_simulate,
                             closed_form_bound, convergence_certificate, fitted_exponent, kam_run,
                             newton_step)
from kamtorus.series import StripParams
import oracles

EPS = 1e-3


@pytest.fixture(scope="module")
def K0():
    return KolmogorovForm.standard([GOLDEN], kmax=64, mmax=4, tau=1.0)


@pytest.fixture(scope="module")
def pendulum(K0):
    H = K0.assemble() + cos_mode(1, 64, (1,), EPS, mmax=4)
    return H, kam_run(H, K0, ScheduleParams())


def exact_conjugate(K0, eps=EPS):
    G0 = gr.GroupElement([fs.zeros(1, K0.kmax)], [0.0], sin_mode(1, K0.kmax, (1,), eps / (2 * math.pi)))
    return gr.pullback(K0.assemble(), G0, alias_tol=None), G0


# -- single step --------------------------------------------------------------------------------


def test_fixed_point(K0):
    K, Hd, Gd = newton_step(K0, fs.zeros(1, 64, 4), StripParams(0.1, 0.2))
    assert K is K0
    assert not np.any(Hd.coeffs)
    assert Gd.norm(0.3) == 0.0


def test_exact_conjugate_single_step(K0):
    H, _ = exact_conjugate(K0)
    Hdot = H - K0.assemble()
    strips = StripParams(0.1, 0.2)
    info = {}
    K1, Hd1, Gd = newton_step(K0, Hdot, strips, info=info)
    d_in = fs.majorant_norm(Hdot, 0.3)
    d_out = fs.majorant_norm(Hd1, 0.1)
    assert d_in > 1e-3
    assert d_out < 10 * EPS ** 2
    # the new defect is the composed pullback computed directly
    direct = gr.pullback(gr.pullback(K0.assemble(), gr.GroupElement([fs.zeros(1, 64)], [0.0],
                         sin_mode(1, 64, (1,), EPS / (2 * math.pi))), alias_tol=None), info["g"])
    assert fs.max_abs_diff(direct - K1.assemble(), Hd1) < 1e-15
    assert K1.freq is K0.freq


def test_pendulum_step_gains_two_orders(K0):
    Hdot = cos_mode(1, 64, (1,), EPS, mmax=4)
    strips = StripParams(0.2, 0.1)
    info = {}
    _, Hd1, _ = newton_step(K0, Hdot, strips, info=info)
    assert fs.majorant_norm(Hd1, 0.2) * 1e2 <= fs.majorant_norm(Hdot, 0.3)
    assert info["linear_residual"] < 1e-12
    assert info["squarings"] >= 0 and info["exp_margin"] > 0


def test_new_jet_is_normal_form(K0):
    K1, _, _ = newton_step(K0, cos_mode(1, 64, (1,), EPS, mmax=4), StripParams(0.1, 0.2))
    H0, H1, _ = decompose(K1.assemble())
    assert fs.max_abs_diff(H0, fs.constant(1, K1.c)) == 0.0
    assert fs.max_abs_diff(H1[0], fs.constant(1, GOLDEN)) == 0.0


def test_smallness_gate_only_warns(K0):
    with pytest.warns(sc.SmallnessWarning):
        newton_step(K0, cos_mode(1, 64, (1,), EPS, mmax=4), StripParams(0.1, 0.2), gamma2=1e-8)


def test_exp_budget_is_a_hard_gate(K0):
    from kamtorus.exceptions import PreconditionError
    with pytest.raises(PreconditionError) as err:
        newton_step(K0, cos_mode(1, 64, (1,), 0.5, mmax=4), StripParams(0.1, 0.2))
    assert err.value.name == "exp_budget"


# -- driver -------------------------------------------------------------------------------------


def test_integrable_needs_no_steps(K0):
    K, gamma, G, rep = kam_run(K0.assemble(), K0)
    assert rep.steps == [] and rep.outcome == "converged"
    assert gr.identity_distance(gamma, gr.GroupElement.identity(1, 64)) == 0.0
    assert rep.conjugacy_residual == 0.0


def test_pendulum_run(pendulum):
    _, (K, gamma, G, rep) = pendulum
    d = rep.defects
    assert rep.outcome == "converged" and len(rep.steps) <= 6
    assert all(b < a for a, b in zip(d, d[1:]))
    assert 1.7 <= rep.fitted_exponent <= 2.3
    assert all(1.7 <= r <= 2.3 for r in rep.exponent_ratios)
    # orders of magnitude: O(eps), O(eps^2), O(eps^4) up to the strip weights, then noise
    assert EPS <= d[0] <= 10 * EPS
    assert 1e-7 <= d[1] <= 1e-4
    assert d[2] <= 1e-8
    assert d[-1] <= 1e-13
    assert rep.conjugacy_residual <= 10 * 1e-13
    assert rep.truncation_debt < 1e-13


def test_pendulum_pointwise_conjugacy(pendulum):
    H, (K, gamma, _, _) = pendulum
    th = np.linspace(0, 1, 256, endpoint=False)
    worst = 0.0
    for r in np.linspace(-0.05, 0.05, 5):
        a, b = gr.apply_point(gamma, th[:, None], np.full((256, 1), r))
        worst = max(worst, np.abs(fs.evaluate(H, a, b) - fs.evaluate(K.assemble(), th, r)).max())
    assert worst <= 1e-13 ** 0.9


def test_exact_conjugate_recovery(K0):
    H, G0 = exact_conjugate(K0)
    K, gamma, G, rep = kam_run(H, K0)
    assert rep.outcome == "converged"
    assert rep.conjugacy_residual <= 1e-10
    assert gr.identity_distance(G, G0) < 1e-12
    # K is K0 up to the energy constant
    assert fs.max_abs_diff(K.assemble() - K.c, K0.assemble()) < 1e-12


def test_accumulator_consistency(K0):
    H = K0.assemble() + cos_mode(1, 64, (1,), EPS, mmax=4)
    sched = ScheduleParams()
    K, Hdot = K0, H - K0.assemble()
    gamma = gr.GroupElement.identity(1, 64)
    for j in range(3):
        info = {}
        K, Hdot, _ = newton_step(K, Hdot, sched.strips(j), info=info)
        gamma = gr.compose(gamma, info["g"])
        d = fs.majorant_norm(Hdot, sched.s_j(j + 1))
        direct = fs.majorant_norm(gr.pullback(H, gamma) - K.assemble(), sched.s_j(j + 1))
        # composition and sequential pullbacks agree up to roundoff in the O(1) part of H
        assert abs(direct - d) <= 1e-12 * d + 1e-15


def test_schedule_law():
    sched = ScheduleParams(s=0.1, sigma=0.2)
    for j in range(20):
        assert sched.sigma_j(j) == 0.2 * 2.0 ** -(j + 1)
        assert sched.s_j(j) - sched.s_j(j + 1) == pytest.approx(sched.sigma_j(j), abs=1e-16)
        st = sched.strips(j)
        assert st.s == sched.s_j(j + 1) and st.sigma == sched.sigma_j(j)
    assert math.fsum(sched.sigma_j(j) for j in range(60)) == pytest.approx(0.2, abs=1e-16)
    assert all(sched.s_j(j + 1) < sched.s_j(j) for j in range(30))


def test_divergence_is_detected(K0, monkeypatch):
    def blow_up(K, Hdot, strips, info=None, **kw):
        info.update(g=gr.GroupElement.identity(1, K.kmax), Kdot_norm=0.0, Gdot_norm=0.0,
                    truncation_debt=0.0, exp_margin=0.0, squarings=0, smallness_ratio=0.0,
                    quadratic_ratio=0.0, linear_residual=0.0)
        return K, Hdot * 3.0, LieElement.zero(1, K.kmax)

    monkeypatch.setattr(sc, "newton_step", blow_up)
    H = K0.assemble() + cos_mode(1, 64, (1,), EPS, mmax=4)
    with pytest.raises(DivergenceError) as err:
        kam_run(H, K0)
    rep = err.value.report
    assert rep.outcome == "diverged" and len(rep.steps) == 2
    assert rep.defects[2] > rep.defects[1] > rep.defects[0]


def test_step_failure_attaches_report(K0):
    from kamtorus.exceptions import PreconditionError
    H = K0.assemble() + cos_mode(1, 64, (1,), 0.5, mmax=4)
    with pytest.raises(PreconditionError) as err:
        kam_run(H, K0)
    assert err.value.report.outcome == "failed"


def test_fitted_exponent_of_exact_squares():
    slope, ratios = fitted_exponent([1e-2, 1e-4, 1e-8, 1e-16], 1e-11)
    assert slope == pytest.approx(2.0) and ratios == pytest.approx([2.0, 2.0, 2.0])


# -- certificate --------------------------------------------------------------------------------


def test_certificate_ok_example():
    consts = CertificateConstants(C=1.0, gamma_cert=1.0, tau_cert=1.0, c_cert=1.0, t_cert=1.0)
    cert = convergence_certificate(consts, 0.5, 0.01)
    assert cert.ok
    assert cert.q == pytest.approx(0.08, rel=1e-15)
    assert cert.predicted[:3] == pytest.approx([0.08, 0.0064, 4.096e-5], rel=1e-12)
    q = oracles.certificate_q(1.0, 1.0, 0.5, 0.01)
    for j, p in enumerate(cert.predicted):
        ref = q ** (2 ** j)
        assert p == pytest.approx(ref, rel=1e-12) if ref > 0 else p == 0.0


def test_certificate_zero_and_failure():
    consts = CertificateConstants()
    cert = convergence_certificate(consts, 0.5, 0.0)
    assert cert.ok and cert.q == 0.0 and all(p == 0.0 for p in cert.predicted)
    cert = convergence_certificate(consts, 0.1, 0.1)
    assert not cert.ok and cert.q == pytest.approx(4.0) and "2q" in cert.reason


def test_certificate_domain_violation():
    consts = CertificateConstants(gamma_cert=0.01, tau_cert=2.0)
    cert = convergence_certificate(consts, 0.5, 0.01)
    assert not cert.ok and "ball" in cert.reason


def test_constants_validation():
    with pytest.raises(ValueError):
        CertificateConstants(c_cert=0.1, t_cert=1.0)
    with pytest.raises(ValueError):
        CertificateConstants(C=0.0)


@pytest.mark.parametrize("c,t,sigma,y", [(1.0, 1.0, 0.5, 0.01), (0.7, 2.0, 0.3, 1e-4), (3.0, 0.5, 0.2, 1e-3)])
def test_simulation_matches_closed_form_and_hand_recursion(c, t, sigma, y):
    consts = CertificateConstants(C=10.0, c_cert=c, t_cert=t)
    out = abstract_fp_simulate(consts, sigma, y, 8)
    xs, ys = oracles.simulate_by_hand(c, t, sigma, y, 8)
    q = oracles.certificate_q(c, t, sigma, y)
    for j, (x, yy) in enumerate(out, start=1):
        assert yy == pytest.approx(ys[j - 1], rel=1e-12)
        assert x == pytest.approx(xs[j - 1], rel=1e-12)
        ref = closed_form_bound(consts, sigma, y, j)
        if ref > 1e-300:
            assert yy == pytest.approx(ref, rel=1e-12)
        assert yy <= q ** (2 ** j) * (1 + 1e-12)


def test_simulation_empty_and_borderline():
    consts = CertificateConstants()
    assert abstract_fp_simulate(consts, 0.5, 0.01, 0) == []
    with pytest.warns(sc.SmallnessWarning, match="borderline"):
        out = abstract_fp_simulate(consts, 0.5, 1 / 16, 6)
    ys = [y for _, y in out]
    assert all(b <= a for a, b in zip(ys, ys[1:]))


def test_simulation_warns_on_x_drift():
    with pytest.warns(sc.SmallnessWarning, match="drift"):
        abstract_fp_simulate(CertificateConstants(C=1e-9), 0.5, 0.01, 4)


def test_fitted_constants_bound_every_step(pendulum):
    _, (_, _, _, rep) = pendulum
    sched = ScheduleParams()
    c, t = sc.fit_quadratic_constants(rep, sched)
    assert c >= 2.0 ** -t
    d = rep.defects
    for j in range(len(d) - 1):
        assert d[j + 1] <= c * sched.sigma_j(j) ** -t * d[j] ** 2 * (1 + 1e-12)
