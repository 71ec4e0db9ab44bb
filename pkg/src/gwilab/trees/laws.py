"""Offspring laws and dispatching distributions.

All laws are frozen dataclasses with vectorised samplers taking a numpy
``Generator``. ``sum_sample`` draws the total offspring of a whole
population in one call; for Geometric and Poisson laws this is an exact
compound draw (negative binomial / Poisson additivity), so a generation
costs O(1) regardless of its size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import gammaln

from ..mechanisms import LiteralError

__all__ = [
    "OffspringLaw",
    "FinitePMF",
    "Geometric",
    "Poisson",
    "StableDomain",
    "Induced",
    "DispatchingLaw",
    "DispatchTable",
    "SizeBiasedDispatch",
    "TwoTypeDispatch",
    "AscendingParticleDispatch",
    "PopulationCapExceeded",
    "parse_offspring",
    "parse_dispatch",
]

MASS_TOL = 1e-12


class PopulationCapExceeded(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"population {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class OffspringLaw:
    """Common interface of laws on the nonnegative integers."""

    mean: float
    variance: float

    def pmf(self, k):
        raise NotImplementedError

    def pgf(self, z: float) -> float:
        raise NotImplementedError

    def dpgf(self, z: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def size_biased_sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws from k*mu(k)/mean."""
        raise NotImplementedError

    def sum_sample(self, rng: np.random.Generator, counts: np.ndarray, cap: int = 10**7) -> np.ndarray:
        """Total offspring of ``counts[i]`` independent individuals, for each i."""
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total > cap:
            raise PopulationCapExceeded(total, cap)
        out = np.zeros(counts.shape, dtype=np.int64)
        if total == 0:
            return out
        draws = self.sample(rng, total)
        nz = counts > 0
        starts = np.concatenate(([0], np.cumsum(counts[nz])[:-1]))
        out[nz] = np.add.reduceat(draws, starts)
        return out

    @property
    def max_support(self) -> int | None:
        return None

    def tail(self, K: int) -> float:
        """Mass strictly above K."""
        return max(0.0, 1.0 - float(np.sum(self.pmf(np.arange(K + 1)))))


@dataclass(frozen=True)
class FinitePMF(OffspringLaw):
    masses: tuple[float, ...]

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        if not masses or any(m < 0 for m in masses):
            raise ValueError("masses must be a nonempty sequence of nonnegative numbers")
        if abs(sum(masses) - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {sum(masses)!r}, not 1")
        while len(masses) > 1 and masses[-1] == 0:
            masses = masses[:-1]
        object.__setattr__(self, "masses", masses)

    @classmethod
    def dirac(cls, k: int) -> "FinitePMF":
        return cls(tuple([0.0] * k + [1.0]))

    @property
    def _arr(self) -> np.ndarray:
        return np.array(self.masses)

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.masses)), self._arr))

    @property
    def variance(self) -> float:
        k = np.arange(len(self.masses))
        return float(np.dot(k * k, self._arr) - self.mean**2)

    @property
    def max_support(self) -> int:
        return len(self.masses) - 1

    def pmf(self, k):
        k = np.asarray(k)
        arr = self._arr
        inside = (k >= 0) & (k < len(arr))
        out = np.where(inside, arr[np.clip(k, 0, len(arr) - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def pgf(self, z: float) -> float:
        return float(np.polynomial.polynomial.polyval(z, self._arr))

    def dpgf(self, z: float) -> float:
        return float(np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(self._arr)))

    def sample(self, rng, size):
        return rng.choice(len(self.masses), size=size, p=self._arr).astype(np.int64)

    def size_biased_sample(self, rng, size):
        w = np.arange(len(self.masses)) * self._arr
        return rng.choice(len(self.masses), size=size, p=w / w.sum()).astype(np.int64)

    def sum_sample(self, rng, counts, cap=10**7):
        counts = np.asarray(counts, dtype=np.int64)
        if len(self.masses) == 1:
            return np.zeros(counts.shape, dtype=np.int64)
        # Multinomial cell counts give the exact law of a sum of iid draws.
        cells = rng.multinomial(counts, self._arr)
        return cells @ np.arange(len(self.masses), dtype=np.int64)


@dataclass(frozen=True)
class Geometric(OffspringLaw):
    """pmf q*(1-q)**k on k >= 0."""

    q: float

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError("Geometric q must lie in (0, 1]")

    @property
    def mean(self) -> float:
        return (1 - self.q) / self.q

    @property
    def variance(self) -> float:
        return (1 - self.q) / self.q**2

    def pmf(self, k):
        k = np.asarray(k)
        out = np.where(k >= 0, self.q * (1 - self.q) ** np.maximum(k, 0), 0.0)
        return float(out) if out.ndim == 0 else out

    def pgf(self, z):
        return self.q / (1 - (1 - self.q) * z)

    def dpgf(self, z):
        return self.q * (1 - self.q) / (1 - (1 - self.q) * z) ** 2

    def sample(self, rng, size):
        return rng.geometric(self.q, size=size).astype(np.int64) - 1

    def size_biased_sample(self, rng, size):
        # k*q^2*(1-q)^(k-1) is one plus a negative binomial with two successes.
        return rng.negative_binomial(2, self.q, size=size).astype(np.int64) + 1

    def sum_sample(self, rng, counts, cap=10**7):
        counts = np.asarray(counts, dtype=np.int64)
        out = np.zeros(counts.shape, dtype=np.int64)
        nz = counts > 0
        if self.q == 1.0 or not nz.any():
            return out
        out[nz] = rng.negative_binomial(counts[nz], self.q)
        return out

    def tail(self, K):
        return (1 - self.q) ** (K + 1)


@dataclass(frozen=True)
class Poisson(OffspringLaw):
    m: float

    def __post_init__(self):
        if not self.m >= 0:
            raise ValueError("Poisson mean must be nonnegative")

    @property
    def mean(self):
        return self.m

    @property
    def variance(self):
        return self.m

    def pmf(self, k):
        k = np.asarray(k)
        kk = np.maximum(k, 0)
        if self.m == 0:
            out = np.where(k == 0, 1.0, 0.0)
        else:
            out = np.where(k >= 0, np.exp(kk * math.log(self.m) - self.m - gammaln(kk + 1)), 0.0)
        return float(out) if out.ndim == 0 else out

    def pgf(self, z):
        return math.exp(self.m * (z - 1))

    def dpgf(self, z):
        return self.m * math.exp(self.m * (z - 1))

    def sample(self, rng, size):
        return rng.poisson(self.m, size=size).astype(np.int64)

    def size_biased_sample(self, rng, size):
        return rng.poisson(self.m, size=size).astype(np.int64) + 1

    def sum_sample(self, rng, counts, cap=10**7):
        return rng.poisson(self.m * np.asarray(counts, dtype=float)).astype(np.int64)


def _power_tail_sampler(log_pmf: Callable, head: int, tail_exponent: float):
    """Exact sampler for a law whose pmf beyond ``head`` is dominated by a power tail.

    The head is drawn by table inversion; the tail by rejection from a
    continuous Pareto proposal, which requires pmf(k+1)/pmf(k) <= (k/(k+1))**tail_exponent
    for k >= head.
    """
    ks = np.arange(head + 1)
    head_pmf = np.exp(log_pmf(ks))
    cdf = np.cumsum(head_pmf)
    tail_mass = max(0.0, 1.0 - cdf[-1])
    s = tail_exponent - 1.0
    log_bound = float(log_pmf(np.array([head]))[0]) + math.log(head) - math.log(s)

    def draw(rng, size):
        u = rng.random(size) * (cdf[-1] + tail_mass)
        out = np.searchsorted(cdf, u, side="right").astype(np.int64)
        idx = np.flatnonzero(out > head)
        while idx.size:
            x = head * rng.random(idx.size) ** (-1.0 / s)
            if np.any(x > 2.0**62):
                raise PopulationCapExceeded(int(min(x.max(), 2.0**63 - 1)), 2**62)
            k = np.floor(x).astype(np.int64) + 1
            kf = k.astype(float)
            log_prop = s * math.log(head) - s * np.log(kf) + np.log(np.expm1(-s * np.log1p(-1.0 / kf)))
            accept = np.log(rng.random(idx.size)) <= log_pmf(k) - log_bound - log_prop
            out[idx[accept]] = k[accept]
            idx = idx[~accept]
        return out

    return draw


@dataclass(frozen=True)
class StableDomain(OffspringLaw):
    """Critical law with pgf z + (1-z)**gamma/gamma, in the domain of attraction of a gamma-stable law."""

    gamma: float
    head: int = 4096

    def __post_init__(self):
        if not 1.0 < self.gamma < 2.0:
            raise ValueError("StableDomain gamma must lie in (1, 2)")
        object.__setattr__(self, "_draw", _power_tail_sampler(self._log_pmf, self.head, 1.0 + self.gamma))
        object.__setattr__(
            self, "_draw_sb", _power_tail_sampler(lambda k: np.log(np.maximum(k, 1)) + self._log_pmf(k), self.head, self.gamma)
        )

    def _log_pmf(self, k):
        g = self.gamma
        k = np.asarray(k, dtype=float)
        big = np.maximum(k, 2.0)
        body = math.log(g - 1) + gammaln(big - g) - gammaln(2 - g) - gammaln(big + 1)
        return np.where(k == 0, -math.log(g), np.where(k == 1, -np.inf, body))

    @property
    def mean(self):
        return 1.0

    @property
    def variance(self):
        return math.inf

    def pmf(self, k):
        k = np.asarray(k)
        out = np.where(k >= 0, np.exp(self._log_pmf(np.maximum(k, 0))), 0.0)
        return float(out) if out.ndim == 0 else out

    def pgf(self, z):
        return z + (1 - z) ** self.gamma / self.gamma

    def dpgf(self, z):
        return 1 - (1 - z) ** (self.gamma - 1)

    def sample(self, rng, size):
        return self._draw(rng, size)

    def size_biased_sample(self, rng, size):
        return self._draw_sb(rng, size)


# -- dispatching distributions --------------------------------------------------


class DispatchingLaw:
    """Law r(k, j) of (children of a spine vertex, rank of its spine child)."""

    def pmf(self, k: int, j: int) -> float:
        raise NotImplementedError

    def k_pmf(self, k: int) -> float:
        """sum_j r(k, j)."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def mean_left(self) -> float:
        """E[j - 1]: expected number of spine siblings on the left."""
        raise NotImplementedError

    @property
    def mean_right(self) -> float:
        raise NotImplementedError

    def immigration_pgf(self, z: float) -> float:
        raise NotImplementedError

    def immigration(self) -> "Induced":
        return Induced(self)


@dataclass(frozen=True)
class DispatchTable(DispatchingLaw):
    masses: Mapping[tuple[int, int], float]

    def __post_init__(self):
        items = {}
        for (k, j), m in dict(self.masses).items():
            k, j, m = int(k), int(j), float(m)
            if not 1 <= j <= k:
                raise ValueError(f"dispatching support must satisfy 1 <= j <= k, got {(k, j)}")
            if m < 0:
                raise ValueError("negative dispatching mass")
            if m > 0:
                items[(k, j)] = items.get((k, j), 0.0) + m
        total = sum(items.values())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"dispatching masses sum to {total!r}, not 1")
        object.__setattr__(self, "masses", dict(sorted(items.items())))

    def __hash__(self):
        return hash(tuple(self.masses.items()))

    @classmethod
    def bare(cls) -> "DispatchTable":
        return cls({(1, 1): 1.0})

    def pmf(self, k, j):
        return self.masses.get((k, j), 0.0)

    def k_pmf(self, k):
        return sum(m for (kk, _), m in self.masses.items() if kk == k)

    def sample(self, rng, size):
        keys = list(self.masses)
        probs = np.array([self.masses[key] for key in keys])
        idx = rng.choice(len(keys), size=size, p=probs / probs.sum())
        kj = np.array(keys, dtype=np.int64)
        return kj[idx, 0], kj[idx, 1]

    @property
    def mean_left(self):
        return sum(m * (j - 1) for (k, j), m in self.masses.items())

    @property
    def mean_right(self):
        return sum(m * (k - j) for (k, j), m in self.masses.items())

    def immigration_pgf(self, z):
        return sum(m * z ** (k - 1) for (k, _), m in self.masses.items())


@dataclass(frozen=True)
class SizeBiasedDispatch(DispatchingLaw):
    """r(k, j) = mu(k)/mean(mu) for 1 <= j <= k."""

    mu: OffspringLaw

    def __post_init__(self):
        if not self.mu.mean > 0:
            raise ValueError("size-biasing needs a law with positive mean")

    def pmf(self, k, j):
        return float(self.mu.pmf(k)) / self.mu.mean if 1 <= j <= k else 0.0

    def k_pmf(self, k):
        return k * float(self.mu.pmf(k)) / self.mu.mean if k >= 1 else 0.0

    def sample(self, rng, size):
        k = self.mu.size_biased_sample(rng, size)
        j = np.floor(rng.random(size) * k).astype(np.int64) + 1
        return k, j

    @property
    def mean_left(self):
        # E[(k-1)/2] under k*mu(k)/mean.
        return 0.5 * ((self.mu.variance + self.mu.mean**2) / self.mu.mean - 1.0)

    @property
    def mean_right(self):
        return self.mean_left

    def immigration_pgf(self, z):
        return self.mu.dpgf(z) / self.mu.mean


class TwoTypeDispatch(DispatchTable):
    """Limit dispatching law of the two-type tree conditioned on a type-1 line."""

    def __init__(self, rho: Mapping[tuple[int, int], float]):
        rho = {(int(a), int(b)): float(w) for (a, b), w in dict(rho).items() if w > 0}
        total = sum(rho.values())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"rho sums to {total!r}, not 1")
        m = sum(a * w for (a, _), w in rho.items())
        if m <= 0:
            raise ValueError("two-type law needs type-1 children with positive mean")
        kmax = max(a + b for a, b in rho)
        table = {}
        for k in range(1, kmax + 1):
            for ell in range(1, k + 1):
                mass = sum(rho.get((j, k - j), 0.0) for j in range(ell, k + 1)) / m
                if mass > 0:
                    table[(k, ell)] = mass
        super().__init__(table)
        object.__setattr__(self, "rho", rho)

    def offspring(self) -> FinitePMF:
        """Type-blind offspring law mu(n) = sum_{k+l=n} rho(k, l)."""
        kmax = max(a + b for a, b in self.rho)
        masses = [0.0] * (kmax + 1)
        for (a, b), w in self.rho.items():
            masses[a + b] += w
        return FinitePMF(tuple(masses))


class AscendingParticleDispatch(DispatchTable):
    """r(k, l) = mu(k)/(1 - mu(0)) * pi_k(l) for a particle climbing a GW tree."""

    def __init__(self, mu: FinitePMF, ladder="uniform"):
        if not isinstance(mu, FinitePMF):
            raise TypeError("ascending particle dispatch needs a finite offspring law")
        if mu.masses[0] >= 1.0:
            raise ValueError("mu(0) = 1 leaves nothing to climb")
        table = {}
        for k in range(1, len(mu.masses)):
            if mu.masses[k] == 0:
                continue
            pi_k = _ladder_law(ladder, k)
            for ell, w in enumerate(pi_k, start=1):
                if w > 0:
                    table[(k, ell)] = mu.masses[k] / (1 - mu.masses[0]) * w
        super().__init__(table)
        object.__setattr__(self, "mu", mu)


def _ladder_law(ladder, k: int) -> tuple[float, ...]:
    if ladder == "uniform":
        return tuple([1.0 / k] * k)
    if ladder == "leftmost":
        return (1.0,) + (0.0,) * (k - 1)
    if ladder == "rightmost":
        return (0.0,) * (k - 1) + (1.0,)
    law = ladder(k) if callable(ladder) else ladder[k]
    law = tuple(float(w) for w in law)
    if len(law) != k or abs(sum(law) - 1.0) > MASS_TOL:
        raise ValueError(f"ladder law for k={k} must be a pmf on 1..{k}")
    return law


@dataclass(frozen=True)
class Induced(OffspringLaw):
    """Immigration law nu(k-1) = sum_j r(k, j) induced by a dispatching law."""

    r: DispatchingLaw

    @property
    def mean(self):
        return self.r.mean_left + self.r.mean_right

    @property
    def variance(self):
        if isinstance(self.r, DispatchTable):
            second = sum(m * (k - 1) ** 2 for (k, _), m in self.r.masses.items())
            return second - self.mean**2
        raise NotImplementedError("variance of a size-biased immigration law")

    def pmf(self, k):
        k = np.asarray(k)
        out = np.vectorize(lambda kk: self.r.k_pmf(int(kk) + 1) if kk >= 0 else 0.0, otypes=[float])(k)
        return float(out) if out.ndim == 0 else out

    def pgf(self, z):
        return self.r.immigration_pgf(z)

    def sample(self, rng, size):
        k, _ = self.r.sample(rng, size)
        return k - 1


# -- literals -------------------------------------------------------------------


def _kv(text: str) -> tuple[str, dict[str, str]]:
    name, _, rest = text.strip().partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise LiteralError(f"expected key=value in {text!r}")
        params[key.strip()] = value.strip()
    return name.strip().lower(), params


def parse_offspring(text: str) -> OffspringLaw:
    """``geometric:q=..``, ``poisson:m=..``, ``pmf:masses=m0;m1;..``, ``dirac:k=..``, ``stable:gamma=..``."""
    name, p = _kv(text)
    try:
        law = _offspring(name, p)
    except KeyError as exc:
        raise LiteralError(f"missing parameter {exc} in {text!r}") from None
    except ValueError as exc:
        raise LiteralError(f"{text!r}: {exc}") from None
    if law is None:
        raise LiteralError(f"unknown offspring family {name!r} in {text!r}")
    return law


def _offspring(name: str, p: dict) -> OffspringLaw | None:
    if name == "geometric":
        return Geometric(float(p["q"]))
    if name == "poisson":
        return Poisson(float(p["m"]))
    if name == "pmf":
        return FinitePMF(tuple(float(x) for x in p["masses"].split(";")))
    if name == "dirac":
        return FinitePMF.dirac(int(p["k"]))
    if name == "stable":
        return StableDomain(float(p["gamma"]))
    return None


def parse_dispatch(text: str, mu: OffspringLaw | None = None) -> DispatchingLaw:
    """``sizebiased``, ``bare``, ``table:pairs=k:j:m;..``, ``twotype:rho=k:l:m;..``, ``ascending:ladder=..``."""
    name, p = _kv(text)
    try:
        law = _dispatch(name, p, mu)
    except KeyError as exc:
        raise LiteralError(f"missing parameter {exc} in {text!r}") from None
    except ValueError as exc:
        raise LiteralError(f"{text!r}: {exc}") from None
    if law is None:
        raise LiteralError(f"unknown dispatching family {name!r} in {text!r}")
    return law


def _dispatch(name: str, p: dict, mu: OffspringLaw | None) -> DispatchingLaw | None:
    def triples(value):
        out = {}
        for chunk in filter(None, value.split(";")):
            a, b, w = chunk.split(":")
            out[(int(a), int(b))] = float(w)
        return out

    if name == "sizebiased":
        if mu is None:
            raise ValueError("sizebiased dispatch needs an offspring law")
        return SizeBiasedDispatch(mu)
    if name == "bare":
        return DispatchTable.bare()
    if name == "table":
        return DispatchTable(triples(p["pairs"]))
    if name == "twotype":
        return TwoTypeDispatch(triples(p["rho"]))
    if name == "ascending":
        if not isinstance(mu, FinitePMF):
            raise ValueError("ascending dispatch needs a finite pmf offspring law")
        return AscendingParticleDispatch(mu, p.get("ladder", "uniform"))
    return None
