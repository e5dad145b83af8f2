import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hetvec.snc import (
    CV2I,
    DelayBoundInputs,
    RegimeViolation,
    closed_form_delay,
    comm_envelope,
    comp_envelope,
    dsrc_access_delay,
    log_violation_bound,
    max_delay_check,
    mmwave_rate,
    violation_bound,
)
from oracles import bound_mp, dsrc_envelope, invert_bound


def inputs(xi_comm=40.0, xi_comp=200.0, eta_comm=5.0, eta_comp=10.0, rho=0.62, sigma=18.6,
           phi=0.4, theta=0.01, eps=0.01):
    return DelayBoundInputs(xi_comm, xi_comp, eta_comm, eta_comp, rho, sigma, phi, theta, eps)


# ------------------------------------------------------------------ rates


def test_mmwave_rate_matches_arbitrary_precision_log():
    got = mmwave_rate(1.0, 10.0, 20.0, 1.0, 2.45)
    ref = mp.mpf(20) * mp.log(1 + mp.mpf(10)) / mp.log(2)
    assert got == pytest.approx(float(ref), rel=1e-14)


def test_mmwave_rate_zero_snr_and_linearity():
    assert mmwave_rate(0.0, 10.0, 20.0, 1.0, 2.45) == 0.0
    r = mmwave_rate(0.7, 10.0, 20.0, 3.0, 2.45)
    assert mmwave_rate(0.7, 10.0, 40.0, 3.0, 2.45) == 2 * r


def test_dsrc_access_delay():
    assert dsrc_access_delay(1.0, 27.0, 1.0) == pytest.approx(1 / 27)


# -------------------------------------------------------------- envelopes


def test_dsrc_envelope_hand_example():
    phi = np.full((3, 3), 1 / 3)
    rho, sigma = np.full(3, 0.62), np.full(3, 18.6)
    t = dsrc_access_delay(1.0, 27.0, 1.0)
    env = comm_envelope("dsrc", phi, rho, sigma, r_dsrc=27.0, t_serv=t)
    assert np.allclose(env.xi, 27 - 2 * (1 / 3) * 0.62, rtol=0, atol=1e-13)
    assert np.allclose(env.eta, 27 * (1 / 27) + 2 * (1 / 3) * 18.6, rtol=0, atol=1e-13)
    for i in range(3):
        xi, eta = dsrc_envelope(i, phi, rho, sigma, 27.0, t)
        assert env.xi[i] == pytest.approx(xi, rel=1e-15)
        assert env.eta[i] == pytest.approx(eta, rel=1e-15)


def test_single_type_mmw_has_no_competitors():
    env = comm_envelope("mmw", np.array([[0.2, 0.3, 0.5]]), [0.62], [18.6], beta_mmw=55.0)
    assert env.xi[0] == 55.0 and env.eta[0] == 0.0


def test_cv2i_envelope_ignores_allocation():
    rng = np.random.default_rng(0)
    for _ in range(5):
        phi = rng.dirichlet(np.ones(3), size=3)
        env = comm_envelope("cv2i", phi, np.ones(3), np.ones(3), r_cv2i=27.0)
        assert np.all(env.xi == 27.0) and np.all(env.eta == 0.0)


@given(st.integers(0, 2), st.floats(0, 1), st.floats(0, 1))
def test_comm_envelopes_ignore_own_row(i, w0, w1):
    rng = np.random.default_rng(1)
    phi = rng.dirichlet(np.ones(3), size=3)
    rho, sigma = rng.uniform(0.1, 2, 3), rng.uniform(0, 20, 3)
    alt = phi.copy()
    w0, w1 = min(w0, 1.0), min(w1, 1.0 - min(w0, 1.0))
    alt[i] = [w0, w1, 1 - w0 - w1]
    for tech, kw in (("mmw", {"beta_mmw": 60.0}), ("dsrc", {"r_dsrc": 27.0, "t_serv": 1 / 27})):
        a = comm_envelope(tech, phi, rho, sigma, **kw)
        b = comm_envelope(tech, alt, rho, sigma, **kw)
        assert a.xi[i] == b.xi[i] and a.eta[i] == b.eta[i]


def test_comp_envelope_examples():
    rho, sigma, full = np.array([0.62]), np.array([18.6]), np.array([300.0])
    env = comp_envelope("mmw", np.array([0.5]), np.array([[1.0, 0.0, 0.0]]), rho, sigma, full)
    assert env.xi[0] == 150.0 and env.eta[0] == 0.0
    third = np.full((1, 3), 1 / 3)
    for g in ("mmw", "dsrc", "cv2i"):
        env = comp_envelope(g, np.array([0.5]), third, rho, sigma, full)
        assert env.eta[0] == pytest.approx(2 / 3 * 18.6, rel=1e-15)
    env = comp_envelope("dsrc", np.array([0.0]), np.array([[0.2, 0.5, 0.3]]), rho, sigma, full)
    assert env.xi[0] == pytest.approx(-0.5 * 0.62)
    assert not env.valid[0]


# -------------------------------------------------------------- the bound


def test_log_bound_matches_direct_high_precision_formula():
    rng = np.random.default_rng(5)
    for _ in range(200):
        xc, xp = rng.uniform(1, 300, 2)
        args = (xc, xp, rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(0.1, 2),
                rng.uniform(0, 30), rng.uniform(0, 1), 10 ** rng.uniform(-3, -1))
        assume_ok = min(xc, xp) > args[6] * args[4]
        if not assume_ok or abs(xc - xp) < 1e-3:
            continue
        w = rng.uniform(0, 200)
        ref = float(mp.log(bound_mp(*args, omega=w)))
        got = float(log_violation_bound(DelayBoundInputs(*args, eps=0.01), w))
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_bound_finite_when_exponents_are_huge():
    inp = inputs(xi_comm=5e4, xi_comp=6e4, theta=1.0)
    v = log_violation_bound(inp, 10.0)
    assert np.isfinite(v)
    assert np.isfinite(closed_form_delay(inp).raw)


def test_bound_strictly_decreasing_in_omega():
    grid = np.linspace(0, 300, 601)
    vals = violation_bound(inputs(), grid)
    assert np.all(np.diff(vals) < 0)


def test_branch_selection():
    assert bool(closed_form_delay(inputs(xi_comp=10.0, xi_comm=5.0)).comm_branch)
    assert not bool(closed_form_delay(inputs(xi_comp=5.0, xi_comm=10.0)).comm_branch)


def test_regime_violation_is_inf_not_nan():
    inp = inputs(xi_comm=0.1, xi_comp=200.0, phi=1.0, rho=0.62)
    out = closed_form_delay(inp)
    assert out.omega == math.inf and not out.regime_ok
    assert np.isnan(log_violation_bound(inp, 5.0))
    with pytest.raises(RegimeViolation):
        closed_form_delay(inp, strict=True)


@given(st.floats(1.0, 1e5), st.floats(1.0, 1e5), st.floats(1e-4, 1.0), st.floats(1e-6, 0.99))
def test_closed_form_is_never_negative(x1, x2, theta, eps):
    # Every term of the numerator is non-negative, so the zero clamp never fires.
    assume(abs(x1 - x2) > 1e-6 * max(x1, x2))
    out = closed_form_delay(inputs(xi_comm=x1, xi_comp=x2, sigma=0.0, eta_comm=0, eta_comp=0,
                                   theta=theta, eps=eps, phi=0.0))
    assert out.raw > 0 and not out.slack and out.omega == out.raw


def test_equal_rates_are_perturbed_and_finite():
    out = closed_form_delay(inputs(xi_comm=50.0, xi_comp=50.0))
    assert np.isfinite(out.omega)
    assert np.isfinite(log_violation_bound(inputs(xi_comm=50.0, xi_comp=50.0), 20.0))


def test_bound_at_closed_form_never_exceeds_eps():
    rng = np.random.default_rng(11)
    n = 2000
    xc, xp = rng.uniform(1, 400, n), rng.uniform(1, 400, n)
    inp = DelayBoundInputs(xc, xp, rng.uniform(0, 40, n), rng.uniform(0, 40, n), 0.62, rng.uniform(0, 40, n),
                           rng.uniform(0, 1, n), 0.01, 0.01)
    cf = closed_form_delay(inp)
    vals = violation_bound(inp, cf.raw)
    ok = cf.regime_ok & (cf.raw > -1)
    assert np.all(vals[ok] <= 0.01 * (1 + 1e-12))


def test_closed_form_matches_inversion_when_rates_are_well_separated():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 150:
        small = rng.uniform(20, 150)
        big = small * rng.uniform(4, 10)
        xc, xp = (small, big) if rng.random() < 0.5 else (big, small)
        args = (xc, xp, rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(0.1, 2), rng.uniform(0, 30),
                rng.uniform(0, 1), 0.01)
        eps = 10 ** rng.uniform(-3, -1)
        root = invert_bound(args, eps)
        if root is None or root < 1:
            continue
        cf = float(closed_form_delay(DelayBoundInputs(*args, eps=eps)).raw)
        assert abs(cf - root) / abs(root) <= 1e-6
        assert float(violation_bound(DelayBoundInputs(*args, eps=eps), cf)) == pytest.approx(eps, rel=1e-6)
        checked += 1


def test_leading_term_depends_on_smaller_rate_only():
    # Raising the larger rate only shrinks the correction term.
    a = closed_form_delay(inputs(xi_comm=30.0, xi_comp=3000.0)).raw
    b = closed_form_delay(inputs(xi_comm=30.0, xi_comp=30000.0)).raw
    lead = (-math.log(0.01) + 0.01 * (18.6 + 15.0)) / (0.01 * 30.0)
    assert a == pytest.approx(b, rel=1e-12)
    assert a > lead


positive = st.floats(1.0, 400.0)


@given(positive, positive, st.floats(0, 40), st.floats(0.0, 1.0), st.floats(0.0, 30.0))
def test_closed_form_monotone_in_larger_rate_and_bursts(x1, x2, sig, phi, bump):
    assume(abs(x1 - x2) > 1e-6)
    base = inputs(xi_comm=x1, xi_comp=x2, sigma=sig, phi=phi)
    assume(bool(closed_form_delay(base).regime_ok))
    w = closed_form_delay(base).raw
    hi_comm = x1 + bump if x1 > x2 else x1
    hi_comp = x2 + bump if x2 > x1 else x2
    assert closed_form_delay(inputs(xi_comm=hi_comm, xi_comp=hi_comp, sigma=sig, phi=phi)).raw <= w + 1e-9
    assert closed_form_delay(inputs(xi_comm=x1, xi_comp=x2, sigma=sig + bump, phi=phi)).raw >= w - 1e-9
    assert closed_form_delay(inputs(xi_comm=x1, xi_comp=x2, sigma=sig, eta_comm=5 + bump, phi=phi)).raw >= w - 1e-9
    assert closed_form_delay(inputs(xi_comm=x1, xi_comp=x2, sigma=sig, eta_comp=10 + bump, phi=phi)).raw >= w - 1e-9


@given(positive, positive, st.floats(1.01, 3.0))
def test_closed_form_non_increasing_when_both_rates_scale(x1, x2, k):
    assume(abs(x1 - x2) > 1e-6)
    base = closed_form_delay(inputs(xi_comm=x1, xi_comp=x2))
    assume(bool(base.regime_ok))
    assert closed_form_delay(inputs(xi_comm=k * x1, xi_comp=k * x2)).raw <= base.raw + 1e-9


@given(positive, positive, st.floats(0, 200), st.floats(0.5, 50))
def test_bound_decreasing_in_each_rate(x1, x2, w, bump):
    assume(abs(x1 - x2) > 1e-3 and abs(x1 + bump - x2) > 1e-3 and abs(x2 + bump - x1) > 1e-3)
    v = log_violation_bound(inputs(xi_comm=x1, xi_comp=x2), w)
    assume(np.isfinite(v))
    assert np.isfinite(v)
    assert log_violation_bound(inputs(xi_comm=x1 + bump, xi_comp=x2), w) < v
    assert log_violation_bound(inputs(xi_comm=x1, xi_comp=x2 + bump), w) < v


@given(st.floats(0.01, 1e4), st.floats(0.01, 1e4), st.floats(1e-4, 1.0), st.floats(1e-6, 0.5))
def test_bound_finite_in_valid_regime(x1, x2, theta, eps):
    assume(abs(x1 - x2) > 1e-6 * max(x1, x2))
    inp = inputs(xi_comm=x1, xi_comp=x2, theta=theta, eps=eps, phi=0.0)
    assert np.isfinite(closed_form_delay(inp).raw)
    assert np.isfinite(log_violation_bound(inp, np.array([0.0, 10.0, 1e3])).all())


# ---------------------------------------------------------- max-delay check


def test_max_delay_check_examples():
    ok, margin = max_delay_check([10, 20, 29], 30)
    assert ok and margin == 1
    ok, _ = max_delay_check([10, 31, 5], 30)
    assert not ok
    ok, margin = max_delay_check([10, math.inf, 5], 30)
    assert not ok and margin == -math.inf
    ok, margin = max_delay_check([10, math.nan, 5], 30)
    assert not ok and margin == -math.inf


def test_cv2i_index():
    assert CV2I == 2
