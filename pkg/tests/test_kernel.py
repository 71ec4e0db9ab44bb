import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp

from gwilab.csbp_kernel import CumulantSolver, UnsupportedMechanism
from gwilab.mechanisms import BranchingMechanism as B, ImmigrationMechanism, BivariateExponent


def test_u_examples():
    assert CumulantSolver(B.quadratic(1.0)).u(1.0, 1.0) == pytest.approx(0.5, rel=1e-14)
    for m in (B.quadratic(1.0), B.stable(1.0, 1.3), B.finite_jumps([(1.0, 1.0)], alpha=1.0)):
        assert CumulantSolver(m).u(0.0, 7.0) == 7.0


def test_v_examples():
    assert CumulantSolver(B.stable(1.0, 1.5)).v(2.0) == pytest.approx(1.0, rel=1e-12)
    assert CumulantSolver(B.quadratic(1.0)).v(2.0) == pytest.approx(0.5, rel=1e-14)
    assert CumulantSolver(B.quadratic(1.0, 1.0)).v(1.0) == pytest.approx(1 / (math.e - 1), rel=1e-13)
    assert CumulantSolver(B.stable(1.0, 2.0)).v(3.0) == pytest.approx(1 / 3, rel=1e-14)


@pytest.mark.parametrize("m", [B.quadratic(1.0), B.quadratic(0.5, 1.0), B.stable(1.0, 1.5), B.stable(2.0, 1.2, 0.5)])
def test_v_ode_route_matches_closed(m):
    s = CumulantSolver(m)
    for a in (0.1, 1.0, 5.0):
        assert s.v(a, "ode") == pytest.approx(s.v(a, "closed"), rel=1e-7)


def test_v_needs_grey():
    s = CumulantSolver(B.finite_jumps([(1.0, 1.0)], alpha=1.0))
    with pytest.raises(UnsupportedMechanism):
        s.v(1.0)


def test_laplace_examples():
    s = CumulantSolver(B.quadratic(1.0))
    assert s.csbp_laplace(1.0, 1.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert s.csbp_laplace(3.0, 2.0, 0.0) == 1.0
    assert s.csbp_laplace(3.0, 0.0, 2.0) == 1.0
    assert s.csbpi_laplace(ImmigrationMechanism.linear(1.0), 1.0, 1.0, 0.0) == pytest.approx(0.5, rel=1e-13)
    assert s.csbpi_laplace(ImmigrationMechanism.linear(2.0), 1.0, 3.0, 1.0) == pytest.approx(
        math.exp(-0.75) / 16, rel=1e-13
    )
    assert s.csbpi_laplace(ImmigrationMechanism.linear(2.0), 0.0, 3.0, 0.7) == pytest.approx(math.exp(-2.1))


def test_csbpi_ode_matches_closed():
    for m in (B.quadratic(1.0), B.quadratic(1.0, 0.5), B.stable(1.0, 1.5)):
        s = CumulantSolver(m)
        imm = ImmigrationMechanism.derived(BivariateExponent.size_biased(m))
        for a, lam, x0 in ((0.5, 2.0, 1.0), (2.0, 0.3, 0.0), (1.0, 20.0, 0.5)):
            closed = s.csbpi_laplace_result(imm, a, lam, x0, "closed")
            ode = s.csbpi_laplace_result(imm, a, lam, x0, "ode")
            assert closed.method == "closed" and ode.method == "ode"
            assert ode.value == pytest.approx(closed.value, rel=1e-7)


def test_jump_mechanism_against_scipy():
    m = B.finite_jumps([(0.5, 2.0), (2.0, 0.3)], alpha=0.2, beta=0.4)
    imm = ImmigrationMechanism(kappa=0.5, rho=((1.0, 0.7),))
    s = CumulantSolver(m)
    a, lam, x0 = 1.5, 3.0, 0.8
    sol = solve_ivp(lambda t, y: [-m.psi(y[0]), imm(y[0])], (0, a), [lam, 0.0], method="DOP853", rtol=1e-12, atol=1e-14)
    u_ref, integral = sol.y[0, -1], sol.y[1, -1]
    assert s.u(a, lam) == pytest.approx(u_ref, rel=1e-8)
    assert s.csbpi_laplace(imm, a, lam, x0) == pytest.approx(math.exp(-x0 * u_ref - integral), rel=1e-8)


def test_integral_equation_residual():
    m = B.finite_jumps([(1.0, 1.0)], alpha=0.5, beta=0.2)
    s = CumulantSolver(m)
    a, lam = 2.0, 5.0
    integral, _ = quad(lambda r: m.psi(s.u(r, lam)), 0.0, a, epsabs=1e-12, epsrel=1e-11)
    assert s.u(a, lam) + integral == pytest.approx(lam, rel=1e-8)


def test_closed_method_refuses_jump_mechanism():
    s = CumulantSolver(B.finite_jumps([(1.0, 1.0)]))
    with pytest.raises(UnsupportedMechanism):
        s.u(1.0, 1.0, "closed")


def test_result_dict():
    d = CumulantSolver(B.quadratic(1.0)).u_result(1.0, 1.0).as_dict()
    assert d == {"value": 0.5, "method": "closed", "est_error": 0.0}


def test_domain_errors():
    s = CumulantSolver(B.quadratic(1.0))
    with pytest.raises(ValueError):
        s.u(-1.0, 1.0)
    with pytest.raises(ValueError):
        s.u(1.0, -1.0)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.01, 5.0), b=st.floats(0.01, 5.0), lam=st.floats(0.01, 100.0),
       mech=st.sampled_from([B.quadratic(1.0), B.quadratic(0.7, 0.4), B.stable(1.0, 1.4),
                             B.finite_jumps([(1.0, 1.0)], alpha=0.3, beta=0.5)]))
def test_semigroup_flow(a, b, lam, mech):
    s = CumulantSolver(mech)
    assert s.u(a + b, lam) == pytest.approx(s.u(a, s.u(b, lam)), rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 10.0), lam=st.floats(0.01, 100.0))
def test_u_monotone_and_bounded(a, lam):
    s = CumulantSolver(B.stable(1.0, 1.5))
    u = s.u(a, lam)
    assert 0 < u <= lam
    assert u <= s.v(a) * (1 + 1e-12)
    assert s.u(a, lam * 1.5) >= u
