"""Branching mechanisms, bivariate dispatching exponents and immigration.

A (sub)critical branching mechanism has the Levy-Khintchine form

    psi(lam) = alpha*lam + beta*lam**2 + int pi(dr) (exp(-lam*r) - 1 + lam*r)

with ``alpha, beta >= 0``. The jump measure ``pi`` is restricted to three
parametric families so that the analytic conditions used throughout the
package (Grey, conservativity, continuity of the height processes) can be
decided exactly instead of by improper-integral tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "Stable",
    "FiniteJumps",
    "BranchingMechanism",
    "FiniteGrid",
    "SizeBiased",
    "BivariateExponent",
    "ImmigrationMechanism",
    "ConditionReport",
    "check_conditions",
    "eval_psi",
    "eval_Phi",
    "parse_mechanism",
    "parse_bivariate",
    "parse_immigration",
    "LiteralError",
]

# |p - q| below this fraction of max(1, p) switches Phi to the derivative.
DIAGONAL_RTOL = 1e-8


class LiteralError(ValueError):
    """Raised for malformed mechanism literals."""


def _compensated_exp(x):
    """exp(-x) - 1 + x without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, x, 0.0)
    series = xs * xs * (0.5 - xs / 6.0 + xs * xs / 24.0 - xs**3 / 120.0)
    return np.where(small, series, np.expm1(-x) + x)


@dataclass(frozen=True)
class Stable:
    """Stable jumps, pi(dr) proportional to r**(-1-gamma), contributing c*lam**gamma."""

    c: float
    gamma: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"stable constant must be positive, got {self.c}")
        if not 1.0 < self.gamma < 2.0:
            raise ValueError(
                f"stable index must lie in (1, 2), got {self.gamma}; "
                "use the quadratic coefficient for gamma = 2"
            )


@dataclass(frozen=True)
class FiniteJumps:
    """Finitely many atoms ``(r_i, mass_i)`` of the jump measure."""

    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(r), float(m)) for r, m in self.pairs)
        for r, m in pairs:
            if not (r > 0 and m > 0):
                raise ValueError(f"jump atoms need r > 0 and mass > 0, got ({r}, {m})")
        object.__setattr__(self, "pairs", pairs)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r for r, _ in self.pairs])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.pairs])


Jumps = Union[None, Stable, FiniteJumps]


@dataclass(frozen=True)
class BranchingMechanism:
    """The triple (alpha, beta, pi) of a (sub)critical branching mechanism."""

    alpha: float = 0.0
    beta: float = 0.0
    jumps: Jumps = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0 (subcritical), got {self.alpha}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.jumps is not None and not isinstance(self.jumps, (Stable, FiniteJumps)):
            raise TypeError("jumps must be None, Stable or FiniteJumps")
        if self.alpha == 0 and self.beta == 0 and self.jumps is None:
            raise ValueError("the zero mechanism is not a branching mechanism")

    # -- constructors -------------------------------------------------------

    @classmethod
    def quadratic(cls, beta: float, alpha: float = 0.0) -> "BranchingMechanism":
        return cls(alpha=alpha, beta=beta)

    @classmethod
    def stable(cls, c: float, gamma: float, alpha: float = 0.0) -> "BranchingMechanism":
        """``alpha*lam + c*lam**gamma``; gamma = 2 is stored as beta = c."""
        if gamma == 2.0:
            return cls(alpha=alpha, beta=c)
        return cls(alpha=alpha, jumps=Stable(c, gamma))

    @classmethod
    def finite_jumps(cls, pairs, alpha: float = 0.0, beta: float = 0.0) -> "BranchingMechanism":
        return cls(alpha=alpha, beta=beta, jumps=FiniteJumps(tuple(pairs)))

    # -- evaluation ---------------------------------------------------------

    def psi(self, lam):
        lam_arr = np.asarray(lam, dtype=float)
        out = self.alpha * lam_arr + self.beta * lam_arr**2
        if isinstance(self.jumps, Stable):
            out = out + self.jumps.c * lam_arr**self.jumps.gamma
        elif isinstance(self.jumps, FiniteJumps):
            r = self.jumps.sizes
            m = self.jumps.masses
            out = out + np.sum(m * _compensated_exp(np.multiply.outer(lam_arr, r)), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def psi_star(self, lam):
        """psi(lam) - alpha*lam."""
        return self.psi(lam) - self.alpha * np.asarray(lam, dtype=float)

    def psi_over_lambda(self, lam: float) -> float:
        """psi(lam)/lam, finite down to lam = 0 where it equals alpha."""
        out = self.alpha + self.beta * lam
        if isinstance(self.jumps, Stable):
            out += self.jumps.c * lam ** (self.jumps.gamma - 1.0)
        elif isinstance(self.jumps, FiniteJumps):
            if lam == 0.0:
                return out
            r = self.jumps.sizes
            out += float(np.sum(self.jumps.masses * _compensated_exp(lam * r))) / lam
        return out

    def dpsi(self, lam):
        """Derivative psi'(lam)."""
        lam_arr = np.asarray(lam, dtype=float)
        out = self.alpha + 2.0 * self.beta * lam_arr
        if isinstance(self.jumps, Stable):
            g = self.jumps.gamma
            out = out + self.jumps.c * g * lam_arr ** (g - 1.0)
        elif isinstance(self.jumps, FiniteJumps):
            r = self.jumps.sizes
            m = self.jumps.masses
            out = out + np.sum(m * r * -np.expm1(-np.multiply.outer(lam_arr, r)), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    # -- analytic conditions ------------------------------------------------

    @property
    def subcritical(self) -> bool:
        return self.alpha >= 0

    @property
    def conservative(self) -> bool:
        # psi(0) = 0 and psi'(0+) = alpha is finite for every admitted family,
        # so psi(u) <= C*u near 0 and int_0+ du/psi(u) diverges.
        return True

    @property
    def grey(self) -> bool:
        return self.beta > 0 or isinstance(self.jumps, Stable)

    @property
    def power_form(self) -> tuple[float, float] | None:
        """``(c, gamma)`` when psi = alpha*lam + c*lam**gamma, else None."""
        if self.jumps is None and self.beta > 0:
            return self.beta, 2.0
        if isinstance(self.jumps, Stable) and self.beta == 0:
            return self.jumps.c, self.jumps.gamma
        return None

    def literal(self) -> str:
        if self.jumps is None:
            return f"quadratic:beta={self.beta!r},alpha={self.alpha!r}"
        if isinstance(self.jumps, Stable) and self.beta == 0:
            return f"stable:c={self.jumps.c!r},gamma={self.jumps.gamma!r},alpha={self.alpha!r}"
        if isinstance(self.jumps, FiniteJumps):
            pairs = ";".join(f"{r!r}:{m!r}" for r, m in self.jumps.pairs)
            return f"finitejump:alpha={self.alpha!r},beta={self.beta!r},pairs={pairs}"
        return f"stable:c={self.jumps.c!r},gamma={self.jumps.gamma!r},alpha={self.alpha!r},beta={self.beta!r}"


def eval_psi(m: BranchingMechanism, lam: float) -> float:
    if lam < 0:
        raise ValueError("psi is evaluated on lam >= 0 only")
    return m.psi(lam)


@dataclass(frozen=True)
class FiniteGrid:
    atoms: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        atoms = tuple((float(x), float(y), float(w)) for x, y, w in self.atoms)
        for x, y, w in atoms:
            if x < 0 or y < 0 or x + y == 0 or not w > 0:
                raise ValueError(f"grid atom must sit in [0,inf)^2 minus 0 with mass > 0: {(x, y, w)}")
        object.__setattr__(self, "atoms", atoms)


@dataclass(frozen=True)
class SizeBiased:
    mechanism: BranchingMechanism


@dataclass(frozen=True)
class BivariateExponent:
    """Laplace exponent Phi(p, q) of the bivariate subordinator (U, V)."""

    d: float = 0.0
    dprime: float = 0.0
    R: Union[FiniteGrid, SizeBiased] = field(default_factory=FiniteGrid)

    def __post_init__(self):
        if self.d < 0 or self.dprime < 0:
            raise ValueError("drifts d, d' must be nonnegative")
        if isinstance(self.R, SizeBiased):
            beta = self.R.mechanism.beta
            if self.d != beta or self.dprime != beta:
                raise ValueError("size-biased exponent has d = d' = beta; use BivariateExponent.size_biased")

    @classmethod
    def size_biased(cls, m: BranchingMechanism) -> "BivariateExponent":
        return cls(d=m.beta, dprime=m.beta, R=SizeBiased(m))

    @classmethod
    def grid(cls, d: float = 0.0, dprime: float = 0.0, atoms=()) -> "BivariateExponent":
        return cls(d=d, dprime=dprime, R=FiniteGrid(tuple(atoms)))

    def __call__(self, p: float, q: float) -> float:
        if p < 0 or q < 0:
            raise ValueError("Phi is evaluated on p, q >= 0 only")
        if isinstance(self.R, SizeBiased):
            m = self.R.mechanism
            if abs(p - q) < DIAGONAL_RTOL * max(1.0, p):
                return float(m.dpsi(0.5 * (p + q)) - m.alpha)
            return float((m.psi_star(p) - m.psi_star(q)) / (p - q))
        out = self.d * p + self.dprime * q
        for x, y, w in self.R.atoms:
            out += w * -math.expm1(-p * x - q * y)
        return out

    def phi(self, lam: float) -> float:
        return self(lam, lam)

    @property
    def uv_continuous(self) -> bool:
        if self.d * self.dprime != 0:
            return True
        if isinstance(self.R, SizeBiased):
            # R has infinite mass exactly when pi does.
            return isinstance(self.R.mechanism.jumps, Stable)
        return False


def eval_Phi(b: BivariateExponent, p: float, q: float) -> float:
    return b(p, q)


@dataclass(frozen=True)
class ImmigrationMechanism:
    """phi(lam) = kappa*lam + sum rho_i (1 - exp(-lam*r_i)), or the diagonal of Phi."""

    kappa: float = 0.0
    rho: tuple[tuple[float, float], ...] = ()
    bivariate: BivariateExponent | None = None

    def __post_init__(self):
        if self.bivariate is not None and (self.kappa or self.rho):
            raise ValueError("an immigration mechanism is either derived or standalone")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        rho = tuple((float(r), float(m)) for r, m in self.rho)
        for r, m in rho:
            if not (r > 0 and m > 0):
                raise ValueError(f"immigration jumps need r > 0 and mass > 0, got ({r}, {m})")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def linear(cls, m: float) -> "ImmigrationMechanism":
        return cls(kappa=m)

    @classmethod
    def derived(cls, b: BivariateExponent) -> "ImmigrationMechanism":
        return cls(bivariate=b)

    def __call__(self, lam: float) -> float:
        if self.bivariate is not None:
            return self.bivariate(lam, lam)
        out = self.kappa * lam
        for r, m in self.rho:
            out += m * -math.expm1(-lam * r)
        return out

    @property
    def is_zero(self) -> bool:
        if self.bivariate is None:
            return self.kappa == 0 and not self.rho
        R = self.bivariate.R
        return (
            isinstance(R, FiniteGrid)
            and not R.atoms
            and self.bivariate.d == 0
            and self.bivariate.dprime == 0
        )

    @property
    def mean_rate(self) -> float:
        """phi'(0), the mean immigration per unit time (may be infinite)."""
        if self.bivariate is None:
            return self.kappa + sum(r * m for r, m in self.rho)
        b = self.bivariate
        if isinstance(b.R, SizeBiased):
            m = b.R.mechanism
            if isinstance(m.jumps, Stable):
                return math.inf
            out = 2.0 * m.beta
            if isinstance(m.jumps, FiniteJumps):
                out += float(np.sum(m.jumps.masses * m.jumps.sizes**2))
            return out
        return b.d + b.dprime + sum(w * (x + y) for x, y, w in b.R.atoms)

    def power_terms(self) -> tuple[float, BranchingMechanism | None] | None:
        """Decompose phi = kappa*lam + [psi'(lam) - alpha] when possible.

        Returns ``(kappa, m)`` where ``m`` is the mechanism whose shifted
        derivative appears (or None), or None if phi has jump terms.
        """
        if self.bivariate is None:
            return (self.kappa, None) if not self.rho else None
        b = self.bivariate
        if isinstance(b.R, SizeBiased):
            return 0.0, b.R.mechanism
        return (b.d + b.dprime, None) if not b.R.atoms else None


ZERO_IMMIGRATION = ImmigrationMechanism()


@dataclass(frozen=True)
class ConditionReport:
    subcritical: bool
    conservative: bool
    grey: bool
    uv_continuous: bool

    def as_dict(self) -> dict:
        return {
            "subcritical": self.subcritical,
            "conservative": self.conservative,
            "grey": self.grey,
            "uv_continuous": self.uv_continuous,
        }


def check_conditions(m: BranchingMechanism, b: BivariateExponent) -> ConditionReport:
    return ConditionReport(
        subcritical=m.subcritical,
        conservative=m.conservative,
        grey=m.grey,
        uv_continuous=b.uv_continuous,
    )


# -- literal parsing ---------------------------------------------------------


def _split_literal(text: str) -> tuple[str, dict[str, str]]:
    text = text.strip()
    name, _, rest = text.partition(":")
    params: dict[str, str] = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip():
                raise LiteralError(f"expected key=value in {text!r}, got {item!r}")
            params[key.strip()] = value.strip()
    return name.strip().lower(), params


def _float(params: dict, key: str, text: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise LiteralError(f"missing {key}= in {text!r}")
        return default
    try:
        return float(params.pop(key))
    except ValueError as exc:
        raise LiteralError(f"{key} is not a number in {text!r}") from exc


def _tuples(value: str, width: int, text: str) -> tuple[tuple[float, ...], ...]:
    out = []
    for chunk in filter(None, (c.strip() for c in value.split(";"))):
        parts = chunk.split(":")
        if len(parts) != width:
            raise LiteralError(f"expected {width} ':'-separated numbers, got {chunk!r} in {text!r}")
        try:
            out.append(tuple(float(x) for x in parts))
        except ValueError as exc:
            raise LiteralError(f"bad number in {chunk!r} of {text!r}") from exc
    return tuple(out)


def _no_leftovers(params: dict, text: str) -> None:
    if params:
        raise LiteralError(f"unknown keys {sorted(params)} in {text!r}")


def parse_mechanism(text: str) -> BranchingMechanism:
    """Parse ``quadratic:beta=..``, ``stable:c=..,gamma=..`` or ``finitejump:..``."""
    name, params = _split_literal(text)
    try:
        if name == "quadratic":
            beta = _float(params, "beta", text)
            alpha = _float(params, "alpha", text, 0.0)
            _no_leftovers(params, text)
            return BranchingMechanism.quadratic(beta, alpha)
        if name == "stable":
            c = _float(params, "c", text)
            gamma = _float(params, "gamma", text)
            alpha = _float(params, "alpha", text, 0.0)
            beta = _float(params, "beta", text, 0.0)
            _no_leftovers(params, text)
            if beta:
                if gamma == 2.0:
                    return BranchingMechanism(alpha=alpha, beta=beta + c)
                return BranchingMechanism(alpha=alpha, beta=beta, jumps=Stable(c, gamma))
            return BranchingMechanism.stable(c, gamma, alpha)
        if name == "finitejump":
            alpha = _float(params, "alpha", text, 0.0)
            beta = _float(params, "beta", text, 0.0)
            if "pairs" not in params:
                raise LiteralError(f"missing pairs= in {text!r}")
            pairs = _tuples(params.pop("pairs"), 2, text)
            _no_leftovers(params, text)
            return BranchingMechanism.finite_jumps(pairs, alpha, beta)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, LiteralError):
            raise
        raise LiteralError(str(exc)) from exc
    raise LiteralError(f"unknown mechanism family {name!r} in {text!r}")


def parse_bivariate(text: str, mechanism: BranchingMechanism | None = None) -> BivariateExponent:
    """Parse ``sizebiased`` (needs ``mechanism``) or ``grid:d=..,dprime=..,atoms=x:y:m;..``."""
    name, params = _split_literal(text)
    if name == "sizebiased":
        _no_leftovers(params, text)
        if mechanism is None:
            raise LiteralError("sizebiased needs a branching mechanism")
        return BivariateExponent.size_biased(mechanism)
    if name == "grid":
        d = _float(params, "d", text, 0.0)
        dprime = _float(params, "dprime", text, 0.0)
        atoms = _tuples(params.pop("atoms", ""), 3, text)
        _no_leftovers(params, text)
        try:
            return BivariateExponent.grid(d, dprime, atoms)
        except ValueError as exc:
            raise LiteralError(str(exc)) from exc
    raise LiteralError(f"unknown bivariate family {name!r} in {text!r}")


def parse_immigration(text: str, mechanism: BranchingMechanism | None = None) -> ImmigrationMechanism:
    """Parse ``zero``, ``linear:m=..``, ``jump:kappa=..,pairs=r:m;..`` or a bivariate literal."""
    name, params = _split_literal(text)
    if name in ("zero", "none"):
        _no_leftovers(params, text)
        return ZERO_IMMIGRATION
    if name == "linear":
        m = _float(params, "m", text)
        _no_leftovers(params, text)
        return ImmigrationMechanism.linear(m)
    if name == "jump":
        kappa = _float(params, "kappa", text, 0.0)
        rho = _tuples(params.pop("pairs", ""), 2, text)
        _no_leftovers(params, text)
        return ImmigrationMechanism(kappa=kappa, rho=rho)
    return ImmigrationMechanism.derived(parse_bivariate(text, mechanism))
