import math

import numpy as np
import pytest

from relaypd import privacy
from relaypd.errors import CalibrationError, ValidationError


def test_noise_variance_base_and_halvings():
    s = privacy.NoiseSchedule(sigma1_sq=1.0, attenuation=2.0)
    assert privacy.noise_variance(s, 1) == 1.0
    assert privacy.noise_variance(s, 3) == 0.25


def test_noise_variance_recurrence():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = privacy.NoiseSchedule(
            sigma1_sq=float(rng.uniform(0.1, 5.0)),
            attenuation=float(rng.uniform(1.01, 3.0)),
        )
        tau = int(rng.integers(1, 40))
        lhs = privacy.noise_variance(s, tau)
        rhs = s.attenuation * privacy.noise_variance(s, tau + 1)
        assert abs(lhs - rhs) <= 1e-14 * max(lhs, 1.0)
    with pytest.raises(ValidationError):
        privacy.noise_variance(s, 0)


def test_schedule_validation():
    with pytest.raises(ValidationError):
        privacy.NoiseSchedule(sigma1_sq=0.0, attenuation=2.0)
    with pytest.raises(ValidationError):
        privacy.NoiseSchedule(sigma1_sq=1.0, attenuation=1.0)
    with pytest.raises(ValidationError):
        privacy.NoiseSchedule(sigma1_sq=1.0, attenuation=0.5)


def test_sample_noise():
    rng = np.random.default_rng(0)
    assert np.array_equal(privacy.sample_noise(0.0, 4, rng), np.zeros(4))
    draws = np.array([privacy.sample_noise(4.0, 1, rng)[0] for _ in range(4000)])
    assert abs(draws.std() - 2.0) < 0.1
    assert abs(draws.mean()) < 0.1
    with pytest.raises(ValidationError):
        privacy.sample_noise(-1.0, 2, rng)


def test_sensitivity_and_rho_first():
    assert privacy.sensitivity(0.5, 0.25, 8.0) == pytest.approx(4.0 * 0.5 * 0.25 * 8.0)
    # rho_first = Delta^2 / (2 sigma^2) = 8 (alpha beta L)^2 / sigma^2
    a, b, L, sig = 0.3, 0.1, 5.0, 2.0
    want = 8.0 * (a * b * L) ** 2 / sig
    assert privacy.rho_first(a, b, L, sig) == pytest.approx(want, rel=1e-14)
    d = privacy.sensitivity(a, b, L)
    assert privacy.rho_first(a, b, L, sig) == pytest.approx(d * d / (2 * sig), rel=1e-14)
    with pytest.raises(ValidationError):
        privacy.sensitivity(0.0, b, L)


def test_zcdp_conversion():
    assert privacy.zcdp_to_dp(0.0, 1e-3) == 0.0
    rho, delta = 0.37, 1e-4
    want = rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))
    assert privacy.zcdp_to_dp(rho, delta) == pytest.approx(want, rel=1e-14)
    with pytest.raises(ValidationError):
        privacy.zcdp_to_dp(0.1, 1.0)
    with pytest.raises(ValidationError):
        privacy.zcdp_to_dp(-0.1, 1e-3)


def _ledger(alpha, beta, L, delta, sig, R, tau):
    return privacy.PrivacyLedger(
        alpha=alpha, beta=beta, lipschitz=L, delta=delta,
        schedule=privacy.NoiseSchedule(sigma1_sq=sig, attenuation=R),
        tau=np.asarray(tau, dtype=np.int64),
    )


def test_total_zcdp_closed_form_vs_term_sum():
    # per-activation cost rho_1 * R^(tau-1); the ledger sums the first
    # xi of them in closed form
    alpha, beta, L, sig = 0.4, 0.1, 3.0, 1.7
    rho1 = privacy.rho_first(alpha, beta, L, sig)
    for R in (1.1, 1.5, 2.0, 3.0):
        for xi in (1, 2, 5, 17, 64):
            led = _ledger(alpha, beta, L, 1e-3, sig, R, [xi, max(xi - 3, 0)])
            term_sum = sum(rho1 * R ** (t - 1) for t in range(1, xi + 1))
            got = privacy.total_zcdp(led)
            assert abs(got - term_sum) <= 1e-12 * term_sum


def test_ledger_xi_and_zero_case():
    led = _ledger(0.4, 0.1, 3.0, 1e-3, 1.7, 2.0, [3, 9, 1])
    assert led.xi == 9
    led0 = _ledger(0.4, 0.1, 3.0, 1e-3, 1.7, 2.0, [0, 0])
    assert led0.xi == 0
    assert privacy.total_zcdp(led0) == 0.0
    assert privacy.total_budget(led0)[0] == 0.0


def test_xi_one_budget_identity():
    alpha, beta, L, sig, delta = 0.5, 0.125, 2.0, 0.9, 1e-3
    led = _ledger(alpha, beta, L, delta, sig, 1.5, [1])
    rho1 = privacy.rho_first(alpha, beta, L, sig)
    want = rho1 + 2.0 * math.sqrt(rho1 * math.log(1.0 / delta))
    eps, d = privacy.total_budget(led)
    assert eps == pytest.approx(want, rel=1e-13)
    assert d == delta


def test_epsilon_for_xi_monotone():
    sched = privacy.NoiseSchedule(sigma1_sq=2.0, attenuation=1.2)
    vals = [
        privacy.epsilon_for_xi(0.3, 0.1, 4.0, sched, 1e-3, xi) for xi in range(0, 30)
    ]
    assert vals[0] == 0.0
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_calibrate_sigma_round_trip_and_closed_form():
    alpha, beta, L, delta, R = 0.35, 1.0 / 18.0, 6.0, 1e-3, 1.3
    for target in (0.5, 1.0, 5.0, 10.0):
        for xi in (1, 7, 40):
            sig = privacy.calibrate_sigma(target, delta, alpha, beta, L, R, xi)
            sched = privacy.NoiseSchedule(sigma1_sq=sig, attenuation=R)
            got = privacy.epsilon_for_xi(alpha, beta, L, sched, delta, xi)
            assert got <= target * (1 + 1e-9)
            assert abs(got - target) <= 1e-6 * target
            # closed form: eps determines rho_tot, which determines sigma
            ln = math.log(1.0 / delta)
            rho_tot = (-math.sqrt(ln) + math.sqrt(ln + target)) ** 2
            geom = (R**xi - 1.0) / (R - 1.0)
            sig_closed = 8.0 * (alpha * beta * L) ** 2 * geom / rho_tot
            assert sig == pytest.approx(sig_closed, rel=1e-9)


def test_calibrate_sigma_errors():
    with pytest.raises(CalibrationError):
        privacy.calibrate_sigma(0.0, 1e-3, 0.3, 0.1, 4.0, 1.2, 5)
    with pytest.raises(CalibrationError):
        privacy.calibrate_sigma(1.0, 1e-3, 0.3, 0.1, 4.0, 1.2, 0)
    with pytest.raises(ValidationError):
        privacy.calibrate_sigma(1.0, 1e-3, 0.3, 0.1, 4.0, 1.0, 5)


def test_budget_saturates_to_inf_on_long_compositions():
    # R^xi leaves double range near xi*ln(R) ~ 709; the accountant must
    # report inf there, not raise, and calibration must refuse cleanly
    sched = privacy.NoiseSchedule(sigma1_sq=0.5, attenuation=1.5)
    led = privacy.PrivacyLedger(
        alpha=0.08, beta=1.0 / 14.0, lipschitz=20.0, delta=1e-3,
        schedule=sched, tau=np.array([3400]),
    )
    assert privacy.total_zcdp(led) == math.inf
    assert privacy.total_budget(led)[0] == math.inf
    assert privacy.epsilon_for_xi(0.08, 1.0 / 14.0, 20.0, sched, 1e-3, 3400) == math.inf
    below = privacy.epsilon_for_xi(0.08, 1.0 / 14.0, 20.0, sched, 1e-3, 1700)
    assert math.isfinite(below)
    with pytest.raises(CalibrationError):
        privacy.calibrate_sigma(5.0, 1e-3, 0.08, 1.0 / 14.0, 20.0, 1.5, 3400)
