"""Scaling schemes and the continuum targets of rescaled GWI processes.

A scheme fixes the mass scale p and the time scale gamma_p. Under the
"linear" rule (gamma_p = p) a fixed offspring law with mean mu_bar and
variance sigma^2 is matched by psi(lam) = (1 - mu_bar)*gamma_p*lam +
sigma^2*gamma_p/(2p)*lam^2 and a fixed immigration law with mean m by
phi(lam) = m*gamma_p/p*lam. Under the "power" rule gamma_p =
round(p**exponent); with the stable-domain offspring law of index gamma
and exponent gamma - 1 the target is the stable mechanism
c*lam**gamma with c = gamma_p*p**(1 - gamma)/gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..mechanisms import BivariateExponent, BranchingMechanism, ImmigrationMechanism, ZERO_IMMIGRATION
from ..trees.laws import (
    DispatchingLaw,
    Induced,
    OffspringLaw,
    SizeBiasedDispatch,
    StableDomain,
)

__all__ = ["ScalingScheme", "DegenerateConfig", "parse_scheme", "branching_target", "immigration_target", "dispatch_target"]


class DegenerateConfig(ValueError):
    """The configuration has no nondegenerate continuum limit."""


@dataclass(frozen=True)
class ScalingScheme:
    p: int
    rule: str = "linear"
    exponent: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be a positive integer")
        if self.rule not in ("linear", "power"):
            raise ValueError(f"unknown scaling rule {self.rule!r}")
        if self.rule == "power" and not self.exponent > 0:
            raise ValueError("power rule needs a positive exponent")

    @classmethod
    def linear(cls, p: int) -> "ScalingScheme":
        return cls(int(p), "linear", 1.0)

    @classmethod
    def power(cls, p: int, exponent: float) -> "ScalingScheme":
        return cls(int(p), "power", float(exponent))

    @property
    def gamma_p(self) -> int:
        if self.rule == "linear":
            return int(self.p)
        return max(1, round(self.p**self.exponent))

    def generations(self, t: float) -> int:
        """[gamma_p * t], robust to t*gamma_p landing a hair below an integer."""
        return int(math.floor(self.gamma_p * t + 1e-9))

    def with_p(self, p: int) -> "ScalingScheme":
        return ScalingScheme(int(p), self.rule, self.exponent)

    def as_dict(self) -> dict:
        return {"p": self.p, "rule": self.rule, "exponent": self.exponent, "gamma_p": self.gamma_p}


def branching_target(mu: OffspringLaw, scheme: ScalingScheme) -> BranchingMechanism:
    gp, p = scheme.gamma_p, scheme.p
    if isinstance(mu, StableDomain):
        c = gp * p ** (1.0 - mu.gamma) / mu.gamma
        return BranchingMechanism.stable(c, mu.gamma)
    if mu.mean > 1:
        raise DegenerateConfig("supercritical offspring law has no subcritical target")
    if not math.isfinite(mu.variance):
        raise DegenerateConfig("infinite-variance offspring law needs the stable-domain scheme")
    return BranchingMechanism.quadratic(mu.variance * gp / (2.0 * p), (1.0 - mu.mean) * gp)


def immigration_target(nu: OffspringLaw | None, scheme: ScalingScheme) -> ImmigrationMechanism:
    """Linear immigration exponent of a fixed immigration law."""
    if nu is None:
        return ZERO_IMMIGRATION
    if isinstance(nu, Induced):
        raise TypeError("use dispatch_target for immigration induced by a dispatching law")
    m = nu.mean
    if not math.isfinite(m):
        raise DegenerateConfig("immigration law with infinite mean has no linear target")
    if m == 0:
        return ZERO_IMMIGRATION
    return ImmigrationMechanism.linear(m * scheme.gamma_p / scheme.p)


def dispatch_target(mu: OffspringLaw, r: DispatchingLaw, scheme: ScalingScheme) -> BivariateExponent:
    """Bivariate exponent of the spine-sibling subordinators; rejects degenerate limits."""
    psi = branching_target(mu, scheme)
    if isinstance(r, SizeBiasedDispatch):
        if r.mu != mu:
            raise DegenerateConfig("size-biased dispatch must use the tree's own offspring law")
        b = BivariateExponent.size_biased(psi)
    else:
        scale = scheme.gamma_p / scheme.p
        b = BivariateExponent.grid(r.mean_left * scale, r.mean_right * scale)
    if not b.uv_continuous:
        raise DegenerateConfig(
            "dispatching law puts no mass on one side of the spine (d*d' = 0): "
            "the left/right sibling subordinators are not continuous"
        )
    return b


def parse_scheme(text: str, p: int) -> ScalingScheme:
    """``linear`` or ``power:exponent=<f>``."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    if name == "linear" and not rest.strip():
        return ScalingScheme.linear(p)
    if name == "power":
        key, eq, value = rest.partition("=")
        if key.strip() == "exponent" and eq:
            return ScalingScheme.power(p, float(value))
    raise ValueError(f"scheme must be 'linear' or 'power:exponent=<f>', got {text!r}")
