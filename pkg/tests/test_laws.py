import math

import numpy as np
import pytest
from scipy import stats

from gwilab.mechanisms import LiteralError
from gwilab.rng import generator
from gwilab.trees.laws import (
    AscendingParticleDispatch,
    DispatchTable,
    FinitePMF,
    Geometric,
    Induced,
    Poisson,
    SizeBiasedDispatch,
    StableDomain,
    TwoTypeDispatch,
    parse_dispatch,
    parse_offspring,
)


def _chi2_pvalue(draws, pmf, kmax):
    """Chi-square goodness of fit on {0..kmax-1} plus a pooled tail cell."""
    n = len(draws)
    obs = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)
    exp = np.array([pmf(k) for k in range(kmax)] + [0.0]) * n
    exp[-1] = n - exp[:-1].sum()
    keep = exp > 5
    obs = np.append(obs[keep], obs[~keep].sum())
    exp = np.append(exp[keep], exp[~keep].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    return stats.chisquare(obs, exp).pvalue


@pytest.mark.parametrize("law", [Geometric(0.5), Geometric(0.3), Poisson(1.7), FinitePMF((0.2, 0.3, 0.0, 0.5))])
def test_pmf_mean_variance(law):
    ks = np.arange(400)
    pmf = np.array([law.pmf(k) for k in ks])
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert (ks * pmf).sum() == pytest.approx(law.mean, rel=1e-10)
    assert ((ks - law.mean) ** 2 * pmf).sum() == pytest.approx(law.variance, rel=1e-9)
    assert law.pgf(0.4) == pytest.approx((pmf * 0.4**ks).sum(), rel=1e-12)
    assert law.dpgf(0.4) == pytest.approx((ks * pmf * 0.4 ** np.maximum(ks - 1, 0)).sum(), rel=1e-10)


@pytest.mark.parametrize("law", [Geometric(0.5), Poisson(1.7), FinitePMF((0.2, 0.3, 0.0, 0.5))])
def test_samplers_fit_pmf(law):
    rng = generator(11, 0)
    assert _chi2_pvalue(law.sample(rng, 20000), law.pmf, 25) > 1e-3
    sb = lambda k: k * law.pmf(k) / law.mean
    assert _chi2_pvalue(law.size_biased_sample(rng, 20000), sb, 25) > 1e-3


@pytest.mark.parametrize("law", [Geometric(0.5), Poisson(0.8), FinitePMF((0.3, 0.2, 0.5))])
def test_sum_sample_matches_convolution(law):
    rng = generator(5, 1)
    counts = np.full(20000, 3)
    draws = law.sum_sample(rng, counts)
    naive = np.sum([law.sample(rng, 20000) for _ in range(3)], axis=0)
    assert stats.ks_2samp(draws, naive).pvalue > 1e-3
    assert draws.mean() == pytest.approx(3 * law.mean, rel=0.03)


def test_geometric_size_biased_closed_form():
    # P(k) = k 2^{-(k+1)} for Geometric(1/2)
    r = SizeBiasedDispatch(Geometric(0.5))
    for k in range(1, 10):
        assert r.k_pmf(k) == pytest.approx(k * 2.0 ** -(k + 1), rel=1e-14)
        assert r.pmf(k, 1) == pytest.approx(2.0 ** -(k + 1), rel=1e-14)
    k, j = r.sample(generator(3), 20000)
    assert np.all((1 <= j) & (j <= k))
    assert _chi2_pvalue(k, r.k_pmf, 20) > 1e-3
    # j uniform given k
    sel = k == 4
    assert stats.chisquare(np.bincount(j[sel], minlength=5)[1:]).pvalue > 1e-3


def test_two_type_example():
    rho = {(0, 0): 0.25, (0, 1): 0.25, (1, 0): 0.25, (1, 1): 0.25}
    r = TwoTypeDispatch(rho)
    assert r.masses == {(1, 1): 0.5, (2, 1): 0.5}
    assert r.offspring().masses == (0.25, 0.5, 0.25)


def test_two_type_general_formula():
    rho = {(0, 2): 0.1, (1, 0): 0.2, (2, 1): 0.3, (3, 0): 0.4}
    m = sum(k * w for (k, _), w in rho.items())
    r = TwoTypeDispatch(rho)
    for k in range(1, 5):
        for ell in range(1, k + 1):
            expect = sum(rho.get((j, k - j), 0.0) for j in range(ell, k + 1)) / m
            assert r.pmf(k, ell) == pytest.approx(expect, abs=1e-15)


def test_ascending_particle():
    mu = FinitePMF((0.5, 0.25, 0.25))
    r = AscendingParticleDispatch(mu, "leftmost")
    assert r.masses == {(1, 1): 0.5, (2, 1): 0.5}
    r = AscendingParticleDispatch(mu)
    assert r.masses == {(1, 1): 0.5, (2, 1): 0.25, (2, 2): 0.25}


def test_induced_immigration():
    r = SizeBiasedDispatch(Geometric(0.5))
    nu = r.immigration()
    assert isinstance(nu, Induced)
    # nu(k-1) = sum_j r(k, j) = k mu(k)/mean
    for k in range(1, 8):
        assert nu.pmf(k - 1) == pytest.approx(r.k_pmf(k), rel=1e-14)
    assert nu.mean == pytest.approx(2.0)
    assert nu.pgf(0.3) == pytest.approx(r.immigration_pgf(0.3), rel=1e-12)


def test_dispatch_table_validation():
    with pytest.raises(ValueError):
        DispatchTable({(1, 2): 1.0})
    with pytest.raises(ValueError):
        DispatchTable({(1, 1): 0.5})
    assert DispatchTable.bare().mean_left == 0.0


def test_stable_domain_law():
    law = StableDomain(1.5)
    ks = np.arange(200000)
    pmf = law.pmf(ks)
    assert pmf[0] == pytest.approx(1 / 1.5)
    assert pmf[1] == 0.0
    # pgf z + (1-z)^gamma/gamma at a point; the remaining mass sits in the power tail
    z = 0.5
    assert (pmf * z**ks).sum() == pytest.approx(law.pgf(z), rel=1e-12)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-3)
    draws = law.sample(generator(2), 40000)
    assert _chi2_pvalue(draws, law.pmf, 12) > 1e-3


def test_parsers():
    assert parse_offspring("geometric:q=0.5") == Geometric(0.5)
    assert parse_offspring("dirac:k=2").masses == (0.0, 0.0, 1.0)
    assert parse_offspring("pmf:masses=0.5;0;0.5").masses == (0.5, 0.0, 0.5)
    assert isinstance(parse_dispatch("sizebiased", Geometric(0.5)), SizeBiasedDispatch)
    assert parse_dispatch("table:pairs=1:1:0.5;2:2:0.5").masses == {(1, 1): 0.5, (2, 2): 0.5}
    for bad in ("geometric", "geometric:q=2", "zeta:s=2", "geometric:q"):
        with pytest.raises(LiteralError):
            parse_offspring(bad)
    for bad in ("table", "sizebiased", "nope"):
        with pytest.raises(LiteralError):
            parse_dispatch(bad)
