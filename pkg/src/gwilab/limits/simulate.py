"""Block-parallel Monte Carlo of rescaled GWI generation sizes.

Replicas are simulated in fixed-size blocks. Block b always draws from the
stream ``mix(seed, b)`` and the blocks are concatenated in index order, so
the output depends on (law, seed, N, block size) and never on how many
workers ran the blocks.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..rng import generator
from ..trees.laws import OffspringLaw, PopulationCapExceeded
from ..trees.ordered import gf_iterate
from .scaling import ScalingScheme

__all__ = [
    "BLOCK",
    "POPULATION_CAP",
    "run_blocks",
    "gwi_generation_sizes",
    "simulate_gwi_marginal",
    "discrete_laplace",
]

BLOCK = 8192
POPULATION_CAP = 10**7


def run_blocks(fn, n: int, seed: int, args: tuple, block: int = BLOCK, workers: int = 1) -> np.ndarray:
    """Concatenates ``fn(size, seed, b, *args)`` over blocks b covering n replicas."""
    if n < 1:
        raise ValueError("need at least one replica")
    sizes = [min(block, n - start) for start in range(0, n, block)]
    jobs = [(size, seed, b) + tuple(args) for b, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) == 1:
        parts = [fn(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, *zip(*jobs)))
    return np.concatenate(parts)


def gwi_generation_sizes(
    mu: OffspringLaw,
    nu: OffspringLaw | None,
    z0: int,
    generations: int,
    size: int,
    rng: np.random.Generator,
    cap: int = POPULATION_CAP,
) -> np.ndarray:
    """Z_n for ``size`` independent chains Z_{k+1} = offspring(Z_k) + immigration."""
    z = np.full(size, z0, dtype=np.int64)
    for _ in range(generations):
        if z.max(initial=0) > cap:
            raise PopulationCapExceeded(int(z.max()), cap)
        z = mu.sum_sample(rng, z, cap=cap * size)
        if nu is not None:
            z += nu.sample(rng, size)
    if z.max(initial=0) > cap:
        raise PopulationCapExceeded(int(z.max()), cap)
    return z


def _marginal_block(size, seed, b, mu, nu, z0, generations, p, cap):
    rng = generator(seed, b)
    return gwi_generation_sizes(mu, nu, z0, generations, size, rng, cap) / p


def simulate_gwi_marginal(
    mu: OffspringLaw,
    nu: OffspringLaw | None,
    x: float,
    scheme: ScalingScheme,
    t: float,
    n: int,
    seed: int,
    workers: int = 1,
    block: int = BLOCK,
    cap: int = POPULATION_CAP,
) -> np.ndarray:
    """N samples of Y_{[gamma_p t]}/p started from Y_0 = [p x]."""
    if t < 0 or x < 0:
        raise ValueError("t and x must be nonnegative")
    z0 = int(math.floor(scheme.p * x + 1e-9))
    args = (mu, nu, z0, scheme.generations(t), scheme.p, cap)
    return run_blocks(_marginal_block, n, seed, args, block=block, workers=workers)


def discrete_laplace(mu: OffspringLaw, nu: OffspringLaw | None, x: float, scheme: ScalingScheme, t: float, lam: float) -> float:
    """Exact E[exp(-lam*Y_n/p)] = g_n(s)^{Z_0} * prod_{k<n} f(g_k(s)), s = exp(-lam/p).

    Separates the discretisation bias at finite p from Monte Carlo noise.
    """
    s = math.exp(-lam / scheme.p)
    z0 = int(math.floor(scheme.p * x + 1e-9))
    log_value = 0.0
    g = s
    for _ in range(scheme.generations(t)):
        if nu is not None:
            log_value += math.log(nu.pgf(g))
        g = gf_iterate(mu, 1, g)
    if z0 == 0:
        return math.exp(log_value)
    return math.exp(log_value + z0 * math.log(g)) if g > 0 else 0.0
