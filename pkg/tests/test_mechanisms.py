import math

import pytest
from hypothesis import given, settings, strategies as st

from gwilab.mechanisms import (
    BivariateExponent,
    BranchingMechanism,
    ImmigrationMechanism,
    LiteralError,
    check_conditions,
    eval_Phi,
    eval_psi,
    parse_bivariate,
    parse_immigration,
    parse_mechanism,
)


def test_psi_examples():
    assert eval_psi(BranchingMechanism.quadratic(1.0), 2.0) == pytest.approx(4.0)
    assert eval_psi(BranchingMechanism.stable(1.0, 1.5), 4.0) == pytest.approx(8.0, rel=1e-14)
    m = BranchingMechanism.finite_jumps([(1.0, 1.0)], alpha=1.0)
    assert eval_psi(m, 1.0) == pytest.approx(1.0 + math.exp(-1.0), rel=1e-14)


def test_psi_small_lambda_jump_term_is_accurate():
    # e^{-lr} - 1 + lr ~ (lr)^2/2 must not cancel to zero
    m = BranchingMechanism.finite_jumps([(1.0, 1.0)])
    assert eval_psi(m, 1e-8) == pytest.approx(0.5e-16, rel=1e-6)


def test_Phi_examples():
    sb = BivariateExponent.size_biased(BranchingMechanism.quadratic(1.0))
    assert eval_Phi(sb, 3.0, 3.0) == pytest.approx(6.0)
    assert eval_Phi(sb, 1.0, 3.0) == pytest.approx(4.0)
    assert eval_Phi(BivariateExponent.grid(1.0, 2.0), 1.0, 1.0) == pytest.approx(3.0)


def test_conditions_examples():
    m = BranchingMechanism.quadratic(1.0)
    rep = check_conditions(m, BivariateExponent.size_biased(m))
    assert (rep.subcritical, rep.conservative, rep.grey, rep.uv_continuous) == (True, True, True, True)

    m = BranchingMechanism.finite_jumps([(1.0, 1.0)], alpha=1.0)
    rep = check_conditions(m, BivariateExponent.grid(0.0, 0.0, [(1.0, 1.0, 1.0)]))
    assert not rep.grey and not rep.uv_continuous

    m = BranchingMechanism.stable(1.0, 1.5)
    assert check_conditions(m, BivariateExponent.size_biased(m)).grey


def test_stable_two_is_quadratic():
    assert BranchingMechanism.stable(1.0, 2.0).psi(3.0) == BranchingMechanism.quadratic(1.0).psi(3.0)


def test_invalid_mechanisms_rejected():
    with pytest.raises(ValueError):
        BranchingMechanism.quadratic(-1.0)
    with pytest.raises(ValueError):
        BranchingMechanism.stable(1.0, 2.5)
    with pytest.raises(ValueError):
        BivariateExponent.grid(-1.0, 0.0)


@pytest.mark.parametrize(
    "text",
    ["quadratic:beta=1", "quadratic:beta=0.5,alpha=2", "stable:c=1,gamma=1.5", "finitejump:alpha=1,pairs=1:1;2:0.5"],
)
def test_literal_roundtrip(text):
    m = parse_mechanism(text)
    assert parse_mechanism(m.literal()) == m


@pytest.mark.parametrize("text", ["bogus", "quadratic", "quadratic:beta=x", "quadratic:beta=1,zeta=2", "stable:c=1"])
def test_bad_literals(text):
    with pytest.raises(LiteralError):
        parse_mechanism(text)


def test_parse_bivariate_and_immigration():
    m = parse_mechanism("quadratic:beta=1")
    assert parse_bivariate("sizebiased", m)(1.0, 3.0) == pytest.approx(4.0)
    assert parse_bivariate("grid:d=1,dprime=2")(1.0, 1.0) == pytest.approx(3.0)
    with pytest.raises(LiteralError):
        parse_bivariate("sizebiased")
    assert parse_immigration("zero").is_zero
    assert parse_immigration("linear:m=2")(3.0) == pytest.approx(6.0)
    # derived immigration phi(lam) = Phi(lam, lam) = psi'(lam) - alpha
    assert parse_immigration("sizebiased", m)(2.0) == pytest.approx(4.0)


def test_linear_immigration():
    phi = ImmigrationMechanism.linear(1.5)
    assert phi(2.0) == pytest.approx(3.0)
    assert phi.mean_rate == pytest.approx(1.5)


positive = st.floats(0.01, 100.0)


@settings(max_examples=200, deadline=None)
@given(p=positive, beta=st.floats(0.1, 5.0), alpha=st.floats(0.0, 3.0), gamma=st.floats(1.05, 1.95))
def test_Phi_diagonal_is_continuous(p, beta, alpha, gamma):
    for m in (BranchingMechanism.quadratic(beta, alpha), BranchingMechanism.stable(beta, gamma, alpha)):
        b = BivariateExponent.size_biased(m)
        on = eval_Phi(b, p, p)
        assert abs(eval_Phi(b, p, p + 1e-6) - on) <= 1e-4 * (1 + on)


@settings(max_examples=200, deadline=None)
@given(p=positive, q=positive)
def test_Phi_symmetric_and_nonnegative(p, q):
    b = BivariateExponent.size_biased(BranchingMechanism.stable(1.0, 1.5, 0.5))
    assert eval_Phi(b, p, q) >= 0
    assert eval_Phi(b, p, q) == pytest.approx(eval_Phi(b, q, p), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0.01, 50.0), r=st.floats(0.1, 3.0), mass=st.floats(0.1, 2.0))
def test_psi_increasing_and_derivative(lam, r, mass):
    m = BranchingMechanism.finite_jumps([(r, mass)], alpha=0.3, beta=0.7)
    h = 1e-6 * lam
    fd = (m.psi(lam + h) - m.psi(lam - h)) / (2 * h)
    assert m.dpsi(lam) == pytest.approx(fd, rel=1e-5, abs=1e-7)
    assert m.psi(lam + 1.0) >= m.psi(lam)
