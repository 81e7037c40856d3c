import math

import numpy as np
import pytest

from emglab import density, em
from emglab.adapters import ConstantAdapter, IdentityAdapter
from emglab.density import EmgParams, MixtureParams
from emglab.em import FitOptions, LineSearchOptions, scaled_descent
from emglab.spectro import _NoParams
from emglab.errors import ContractError, DescentError, DomainError, FitError

from oracles import emg_pdf_quad, golden_section

MIX = MixtureParams(EmgParams(0.0, 1.0, 1.0), 0.5)


def test_options_validation():
    with pytest.raises(DomainError):
        FitOptions(max_em_iters=0)
    with pytest.raises(DomainError):
        FitOptions(loglik_rel_tol=0.0)
    with pytest.raises(DomainError):
        FitOptions(line_search=LineSearchOptions(shrink=1.0))
    with pytest.raises(DomainError):
        FitOptions(line_search=LineSearchOptions(c=0.0))
    with pytest.raises(DomainError):
        FitOptions(sigma_prior_scale=-1.0)


def test_e_step_degenerate_and_value():
    d = np.array([0.0, 1.0, -2.0])
    p = np.zeros(3)
    assert np.all(em.e_step(d, p, MixtureParams(MIX.emg, 0.0)) == 0)
    assert np.all(em.e_step(d, p, MixtureParams(MIX.emg, 1.0)) == 1)
    g = em.e_step(np.zeros(1), np.zeros(1), MIX)[0]
    e = emg_pdf_quad(0.0, 0.0, 1.0, 1.0)
    n = 1 / math.sqrt(2 * math.pi)
    assert g == pytest.approx(e / (n + e), abs=1e-12)
    assert g == pytest.approx(0.3961, abs=1e-4)


def test_e_step_is_bayes_rule():
    rng = np.random.default_rng(0)
    for _ in range(50):
        mix = MixtureParams(EmgParams(0.0, math.exp(rng.normal()), math.exp(rng.normal())),
                            rng.uniform(0.05, 0.95))
        d, m = rng.normal(0, 3), rng.normal()
        le = density.emg_log_pdf(d - m, mix.emg)
        ln = density.gaussian_log_pdf(d - m, 0.0, mix.emg.sigma)
        want = mix.epsilon * math.exp(le) / ((1 - mix.epsilon) * math.exp(ln)
                                             + mix.epsilon * math.exp(le))
        assert em.e_step(np.array([d]), np.array([m]), mix)[0] == pytest.approx(want, rel=1e-12)


def test_length_mismatch():
    with pytest.raises(ContractError):
        em.e_step(np.zeros(3), np.zeros(2), MIX)
    with pytest.raises(ContractError):
        em.expected_loglik(np.zeros(3), np.zeros(3), np.zeros(2), MIX)
    with pytest.raises(ContractError):
        em.observed_loglik(np.zeros(3), np.zeros(4), MIX)


def test_expected_loglik_against_direct_sum():
    rng = np.random.default_rng(1)
    d = rng.normal(0, 2, 40)
    p = rng.normal(0, 1, 40)
    g = rng.uniform(size=40)
    ln = density.gaussian_log_pdf(d - p, 0.0, 1.0)
    le = density.emg_log_pdf(d - p, MIX.emg)
    assert em.expected_loglik(d, p, np.zeros(40), MIX) == pytest.approx(ln.sum(), rel=1e-14)
    assert em.expected_loglik(d, p, np.ones(40), MIX) == pytest.approx(le.sum(), rel=1e-14)
    want = math.fsum((1 - g) * ln + g * le)
    got = em.expected_loglik(d, p, g, MIX)
    assert got == pytest.approx(want, rel=1e-12)
    assert min(ln.sum(), le.sum()) <= got <= max(ln.sum(), le.sum())
    # prior adds the half-Normal log density
    lp = math.log(2) - 0.5 * math.log(2 * math.pi) - math.log(0.3) - 0.5 * (1 / 0.3) ** 2
    assert em.expected_loglik(d, p, g, MIX, 0.3) == pytest.approx(got + lp, rel=1e-14)


def test_observed_loglik():
    rng = np.random.default_rng(2)
    d = rng.normal(0, 2, 50)
    p = np.zeros(50)
    g0 = MixtureParams(MIX.emg, 0.0)
    assert em.observed_loglik(d, p, g0) == pytest.approx(
        density.gaussian_log_pdf(d, 0.0, 1.0).sum(), rel=1e-14)
    one = em.observed_loglik(d[:1], p[:1], MIX)
    ln = density.gaussian_log_pdf(d[0], 0.0, 1.0)
    le = density.emg_log_pdf(d[0], MIX.emg)
    assert one == pytest.approx(np.logaddexp(math.log(0.5) + ln, math.log(0.5) + le), rel=1e-14)
    want = math.fsum(density.emgm_log_pdf(d, MIX))
    assert em.observed_loglik(d, p, MIX) == pytest.approx(want, rel=1e-12)


class Quadratic:
    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)

    def __call__(self, x):
        return 0.5 * float(np.sum(self.a * x * x)), self.a * x

    def curvature(self, x):
        return self.a


def test_scaled_descent_newton_exact_on_quadratic():
    q = Quadratic([1.0, 10.0, 1e-3])
    res = scaled_descent(q, np.array([3.0, -2.0, 5.0]), q.curvature, FitOptions())
    assert np.allclose(res.x, 0.0, atol=1e-15)
    assert res.iterations <= 2


def test_scaled_descent_abs_with_floor():
    f = lambda x: (float(abs(x[0])), np.sign(x))   # noqa: E731
    curv = lambda x: np.zeros(1)                     # noqa: E731
    res = scaled_descent(f, np.array([1e-3]), curv, FitOptions(max_inner_iters=50))
    assert abs(res.x[0]) <= 1e-3
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


def test_scaled_descent_stall_can_raise():
    # reports a gradient that does not describe the function: no Armijo step exists
    f = lambda x: (float(x[0] ** 2 + 1.0), np.array([1.0]))   # noqa: E731
    curv = lambda x: np.ones(1)                                 # noqa: E731
    x0 = np.array([0.0])
    res = scaled_descent(f, x0, curv, FitOptions())
    assert res.status == "stalled"
    assert res.x[0] == 0.0 and res.value == 1.0
    with pytest.raises(DescentError) as exc:
        scaled_descent(f, x0, curv, FitOptions(raise_on_stall=True))
    assert exc.value.grad_norm == pytest.approx(1.0)


def test_scaled_descent_emg_location():
    p = EmgParams(0.0, 0.7, 1.3)
    x = 0.4

    def f(m):
        mu = float(m[0])
        ps = density.neg_log_emg_partials(x, EmgParams(mu, p.sigma, p.lam))
        self_val = -float(density.emg_log_pdf(x, EmgParams(mu, p.sigma, p.lam)))
        f.curv = np.array([float(ps.d2_mu)])
        return self_val, np.array([float(ps.d_mu)])
    res = scaled_descent(f, np.array([10.0]), lambda m: f.curv,
                         FitOptions(max_inner_iters=200, loglik_rel_tol=1e-16))
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    assert abs(f(res.x)[1][0]) < 1e-8
    oracle = golden_section(lambda mu: -float(density.emg_log_pdf(x, EmgParams(mu, p.sigma, p.lam))),
                            -20, 20)
    assert res.x[0] == pytest.approx(oracle, abs=1e-5)


def test_scaled_descent_rejects_non_finite_start():
    with pytest.raises(FitError):
        scaled_descent(lambda x: (float("nan"), np.zeros(1)), np.zeros(1),
                       lambda x: np.ones(1), FitOptions())


def test_m_step_gaussian_mle():
    rng = np.random.default_rng(3)
    d = rng.normal(1.0, 2.0, 500)
    theta = np.zeros(500)
    mix = MixtureParams(EmgParams(0.0, 1.0, 1.0), 0.0)
    opts = FitOptions(max_inner_iters=100, loglik_rel_tol=1e-15)
    theta1, mix1 = em.m_step(d, IdentityAdapter(500), theta, mix, np.zeros(500), opts)
    np.testing.assert_allclose(theta1, d, atol=1e-8)
    # with a constant location the Gaussian MLE of sigma is the population std
    theta2, mix2 = em.m_step(d, ConstantAdapter(500), np.zeros(1), mix, np.zeros(500), opts)
    assert theta2[0] == pytest.approx(d.mean(), abs=1e-8)
    theta3, mix3 = em.m_step(d, ConstantAdapter(500), theta2, mix, np.zeros(500), opts)
    assert mix3.emg.sigma == pytest.approx(d.std(), rel=1e-6)


def test_m_step_lambda_convex_region():
    rng = np.random.default_rng(4)
    r = density.emg_sample(rng, EmgParams(0.0, 0.3, 0.8), 4000)
    opts = FitOptions(max_inner_iters=200, loglik_rel_tol=1e-15)
    ones = np.ones(r.size)
    lams = []
    for lam0 in (0.2, 0.5, 2.0):
        mix = MixtureParams(EmgParams(0.0, 0.3, lam0), 1.0)
        # location held fixed so that phase 2 alone decides lambda
        _, m1 = em.m_step(r, _NoParams(r.size), np.zeros(0), mix, ones, opts)
        lams.append(m1.emg.lam)
    assert max(lams) - min(lams) < 1e-5 * max(lams)
    assert lams[0] == pytest.approx(0.8, rel=0.1)


def test_m_step_epsilon_and_monotone():
    d = np.array([0.1, 2.5, 3.0, -0.2])
    g = np.array([0.0, 1.0, 1.0, 0.0])
    th, mix = em.m_step(d, ConstantAdapter(4), np.zeros(1), MIX, g, FitOptions())
    assert mix.epsilon == 0.5
    before = em.expected_loglik(d, np.zeros(4), g, MIX)
    after = em.expected_loglik(d, np.full(4, th[0]), g, mix)
    assert after >= before


def test_fit_emgm_gaussian_data():
    rng = np.random.default_rng(5)
    d = rng.normal(0.0, 1.0, 4000)
    res = em.fit_emgm(d, ConstantAdapter(d.size), (np.zeros(1), MIX))
    mle = -0.5 * d.size * (math.log(2 * math.pi * d.var()) + 1)
    assert res.trace[-1] >= mle - 0.01 * abs(mle)
    assert res.mix.epsilon < 0.2 or res.mix.emg.lam > 5
    assert np.all(np.diff(res.trace) >= -1e-9)
    assert np.all((res.gamma >= 0) & (res.gamma <= 1))


def test_fit_emgm_recovers_parameters():
    """Average over 32 seeds of EMGM data, n = 2^14, scalar location."""
    mus, lams = [], []
    n = 2 ** 14
    opts = FitOptions(max_em_iters=300, loglik_rel_tol=1e-9)
    for seed in range(32):
        rng = np.random.default_rng(seed)
        peak = rng.uniform(size=n) < 0.25
        d = rng.normal(0.0, 0.5, n) + np.where(peak, rng.exponential(2.0, n), 0.0)
        res = em.fit_emgm(d, ConstantAdapter(n), (np.array([0.5]), MIX), opts)
        mus.append(res.theta[0])
        lams.append(res.mix.emg.lam)
    assert abs(np.mean(mus)) < 0.03
    assert abs(np.mean(lams) / 0.5 - 1) < 0.2


def test_fit_emgm_deterministic_and_init_error():
    rng = np.random.default_rng(6)
    d = rng.normal(size=300) + rng.exponential(1.0, 300) * (rng.uniform(size=300) < 0.3)
    a = em.fit_emgm(d, ConstantAdapter(300), (np.zeros(1), MIX))
    b = em.fit_emgm(d, ConstantAdapter(300), (np.zeros(1), MIX))
    assert np.array_equal(a.trace, b.trace) and np.array_equal(a.theta, b.theta)
    assert a.mix == b.mix
    with pytest.raises(FitError):
        em.fit_emgm(np.array([0.0, np.inf]), ConstantAdapter(2), (np.zeros(1), MIX))


def test_fit_emgm_with_prior_trace_is_monotone():
    rng = np.random.default_rng(7)
    d = rng.normal(0, 0.2, 2000) + rng.exponential(1.0, 2000) * (rng.uniform(size=2000) < 0.3)
    res = em.fit_emgm(d, ConstantAdapter(2000), (np.zeros(1), MIX),
                      FitOptions(sigma_prior_scale=0.05))
    assert np.all(np.diff(res.trace) >= -1e-9)
    free = em.fit_emgm(d, ConstantAdapter(2000), (np.zeros(1), MIX))
    assert res.mix.emg.sigma < free.mix.emg.sigma
