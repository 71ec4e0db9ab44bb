"""Cumulant u(a, lam), extinction functional v(a) and CSBP/CSBPI Laplace kernels.

``u`` solves du/da = -psi(u), u(0, lam) = lam. When psi = alpha*lam +
c*lam**gamma the substitution w = u**(1-gamma) linearises the equation and
gives a closed form; otherwise the equation is integrated in the variable
log(u) with an adaptive Dormand-Prince 5(4) pair. The immigration integral
int_0^a phi(u(s, lam)) ds is carried along as a second state component, so
it reuses the trajectory and is controlled by the same step-size logic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .mechanisms import BranchingMechanism, ImmigrationMechanism

__all__ = [
    "CumulantSolver",
    "KernelResult",
    "IntegrationError",
    "UnsupportedMechanism",
]

MAX_STEPS = 1_000_000
# lam_big ladder for v(a); each rung squares the previous one.
ESCALATION = tuple(10.0**e for e in (3, 6, 12, 24, 48, 96, 192, 300))

# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


class IntegrationError(RuntimeError):
    """The ODE integrator did not reach the requested time."""

    def __init__(self, a: float, lam: float, last_u: float, reason: str):
        super().__init__(f"integration failed for a={a}, lam={lam} (last u={last_u}): {reason}")
        self.a = a
        self.lam = lam
        self.last_u = last_u


class UnsupportedMechanism(ValueError):
    """The requested functional does not exist for this mechanism."""


@dataclass(frozen=True)
class KernelResult:
    value: float
    method: str  # "closed" or "ode"
    est_error: float

    def as_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "est_error": self.est_error}


def _dopri(rhs, y0, t_end, rtol_w, rtol_i, max_steps=MAX_STEPS):
    """Integrate y' = rhs(y) for the two-component state (log u, I).

    Returns (y, accumulated_error_estimate). The log component is controlled
    in absolute terms (relative accuracy of u), the integral relatively.
    """
    w, acc = y0
    t = 0.0
    k1 = rhs(w)
    rate = abs(k1[0]) + abs(k1[1]) / max(abs(acc), 1.0)
    h = min(t_end, 0.05 * rtol_w**0.2 / rate if rate > 0 else t_end)
    err_w = 0.0
    err_i = 0.0
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise IntegrationError(t_end, math.exp(y0[0]), math.exp(w), f"exceeded {max_steps} steps")
        h = min(h, t_end - t)
        ks = [k1]
        for i in range(1, 7):
            a_row = _A[i]
            wi = w + h * sum(a * k[0] for a, k in zip(a_row, ks))
            ks.append(rhs(wi))
        w_new = w + h * sum(b * k[0] for b, k in zip(_B, ks))
        i_new = acc + h * sum(b * k[1] for b, k in zip(_B, ks))
        e_w = h * sum(e * k[0] for e, k in zip(_E, ks))
        e_i = h * sum(e * k[1] for e, k in zip(_E, ks))
        scale_i = rtol_i * max(abs(acc), abs(i_new)) + 1e-300
        err = max(abs(e_w) / rtol_w, abs(e_i) / scale_i)
        steps += 1
        if not math.isfinite(err):
            h *= 0.1
            if h < 1e-300:
                raise IntegrationError(t_end, math.exp(y0[0]), math.exp(w), "step size underflow")
            continue
        if err <= 1.0:
            t += h
            w, acc = w_new, i_new
            k1 = ks[6]
            err_w += abs(e_w)
            err_i += abs(e_i)
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err**-0.2))
        h *= factor
        if h < 1e-300:
            raise IntegrationError(t_end, math.exp(y0[0]), math.exp(w), "step size underflow")
    return (w, acc), (err_w, err_i)


class CumulantSolver:
    """Evaluates u, v and the Laplace kernels for one branching mechanism.

    Parameters
    ----------
    mechanism:
        A subcritical, conservative branching mechanism.
    ode_rel_tol:
        Relative tolerance on u for the numeric route.
    quad_rel_tol:
        Relative tolerance on the immigration integral.
    """

    def __init__(self, mechanism: BranchingMechanism, ode_rel_tol: float = 1e-10, quad_rel_tol: float = 1e-9):
        if not (mechanism.subcritical and mechanism.conservative):
            raise UnsupportedMechanism("mechanism must be subcritical and conservative")
        if not (ode_rel_tol > 0 and quad_rel_tol > 0):
            raise ValueError("tolerances must be positive")
        self.mechanism = mechanism
        self.ode_rel_tol = ode_rel_tol
        self.quad_rel_tol = quad_rel_tol

    def __repr__(self):
        return f"CumulantSolver({self.mechanism!r}, ode_rel_tol={self.ode_rel_tol}, quad_rel_tol={self.quad_rel_tol})"

    # -- closed forms ---------------------------------------------------------

    def _closed_u(self, a: float, lam: float) -> float:
        c, gamma = self.mechanism.power_form
        alpha = self.mechanism.alpha
        k = gamma - 1.0
        # w = u**(-k) solves dw/da = k*(alpha*w + c).
        if alpha == 0:
            w = lam**-k + c * k * a
        else:
            w = lam**-k * math.exp(k * alpha * a) + (c / alpha) * math.expm1(k * alpha * a)
        return w ** (-1.0 / k)

    def _closed_v(self, a: float) -> float:
        c, gamma = self.mechanism.power_form
        alpha = self.mechanism.alpha
        k = gamma - 1.0
        if alpha == 0:
            w = c * k * a
        else:
            w = (c / alpha) * math.expm1(k * alpha * a)
        return w ** (-1.0 / k)

    def _closed_integral(self, imm: ImmigrationMechanism, a: float, lam: float, u_a: float) -> float | None:
        """int_0^a phi(u(s,lam)) ds = int_{u_a}^{lam} phi(v)/psi(v) dv when elementary."""
        terms = imm.power_terms()
        if terms is None or self.mechanism.power_form is None:
            return None
        kappa, derived = terms
        c, gamma = self.mechanism.power_form
        alpha = self.mechanism.alpha
        k = gamma - 1.0
        total = 0.0
        if derived is not None:
            if derived != self.mechanism:
                return None
            # phi = c*gamma*v**k: integrand c*gamma*v**(k-1)/(alpha + c*v**k).
            if alpha == 0:
                total += gamma * math.log(lam / u_a)
            else:
                total += (gamma / k) * math.log((alpha + c * lam**k) / (alpha + c * u_a**k))
        if kappa:
            # integrand kappa/(alpha + c*v**k).
            if alpha == 0:
                if k == 1.0:
                    total += kappa * math.log(lam / u_a) / c
                else:
                    total += kappa * (lam ** (1 - k) - u_a ** (1 - k)) / (c * (1 - k))
            elif k == 1.0:
                total += kappa * math.log((alpha + c * lam) / (alpha + c * u_a)) / c
            else:
                return None
        return total

    # -- numeric route --------------------------------------------------------

    def _ode(self, a: float, lam: float, imm: ImmigrationMechanism | None):
        m = self.mechanism
        phi = imm if imm is not None and not imm.is_zero else None

        def rhs(w):
            u = math.exp(w)
            return (-m.psi_over_lambda(u), phi(u) if phi is not None else 0.0)

        (w, acc), (err_w, err_i) = _dopri(rhs, (math.log(lam), 0.0), a, self.ode_rel_tol, self.quad_rel_tol)
        u = math.exp(w)
        return u, acc, u * err_w, err_i

    # -- public API -----------------------------------------------------------

    def u_result(self, a: float, lam: float, method: str = "auto") -> KernelResult:
        if a < 0 or lam < 0:
            raise ValueError("u(a, lam) needs a >= 0 and lam >= 0")
        if method not in ("auto", "closed", "ode"):
            raise ValueError(f"unknown method {method!r}")
        if lam == 0.0:
            return KernelResult(0.0, "closed", 0.0)
        if a == 0.0:
            return KernelResult(float(lam), "closed", 0.0)
        closed = self.mechanism.power_form is not None
        if method == "closed" and not closed:
            raise UnsupportedMechanism("no closed form for this mechanism")
        if closed and method != "ode":
            return KernelResult(self._closed_u(a, lam), "closed", 0.0)
        u, _, err, _ = self._ode(a, lam, None)
        return KernelResult(u, "ode", err)

    def u(self, a: float, lam: float, method: str = "auto") -> float:
        return self.u_result(a, lam, method).value

    def v_result(self, a: float, method: str = "auto") -> KernelResult:
        if not self.mechanism.grey:
            raise UnsupportedMechanism("v(a) is infinite: the Grey condition fails for this mechanism")
        if not a > 0:
            raise ValueError("v(a) needs a > 0")
        closed = self.mechanism.power_form is not None
        if closed and method != "ode":
            return KernelResult(self._closed_v(a), "closed", 0.0)
        previous = None
        for lam_big in ESCALATION:
            res = self.u_result(a, lam_big, method="ode")
            if previous is not None and abs(res.value - previous) <= self.ode_rel_tol * res.value:
                return KernelResult(res.value, "ode", res.est_error + abs(res.value - previous))
            previous = res.value
        raise IntegrationError(a, ESCALATION[-1], previous, "lam escalation did not converge")

    def v(self, a: float, method: str = "auto") -> float:
        return self.v_result(a, method).value

    def csbp_laplace_result(self, a: float, lam: float, x0: float, method: str = "auto") -> KernelResult:
        if x0 < 0:
            raise ValueError("x0 must be nonnegative")
        res = self.u_result(a, lam, method)
        value = math.exp(-x0 * res.value)
        return KernelResult(value, res.method, value * x0 * res.est_error)

    def csbp_laplace(self, a: float, lam: float, x0: float, method: str = "auto") -> float:
        return self.csbp_laplace_result(a, lam, x0, method).value

    def csbpi_laplace_result(
        self, imm: ImmigrationMechanism, a: float, lam: float, x0: float, method: str = "auto"
    ) -> KernelResult:
        if a < 0 or lam < 0 or x0 < 0:
            raise ValueError("csbpi_laplace needs a, lam, x0 >= 0")
        if imm.is_zero:
            return self.csbp_laplace_result(a, lam, x0, method)
        if a == 0.0 or lam == 0.0:
            return KernelResult(math.exp(-x0 * lam), "closed", 0.0)
        if method != "ode" and self.mechanism.power_form is not None:
            u_a = self._closed_u(a, lam)
            integral = self._closed_integral(imm, a, lam, u_a)
            if integral is not None:
                return KernelResult(math.exp(-x0 * u_a - integral), "closed", 0.0)
        if method == "closed":
            raise UnsupportedMechanism("no closed form for this (psi, phi) pair")
        u_a, integral, err_u, err_i = self._ode(a, lam, imm)
        value = math.exp(-x0 * u_a - integral)
        return KernelResult(value, "ode", value * (x0 * err_u + err_i))

    def csbpi_laplace(
        self, imm: ImmigrationMechanism, a: float, lam: float, x0: float, method: str = "auto"
    ) -> float:
        return self.csbpi_laplace_result(imm, a, lam, x0, method).value
