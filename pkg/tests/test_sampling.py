import numpy as np
import pytest
from scipy import stats

from gwilab.rng import generator
from gwilab.trees import OrderedTree
from gwilab.trees.laws import FinitePMF, Geometric, SizeBiasedDispatch
from gwilab.trees.sampling import SizeCapExceeded, sample_forest, sample_gw, sample_gwi


def test_dirac_zero_gives_leaf():
    assert sample_gw(FinitePMF.dirac(0), 1).kids == (0,)


def test_binary_gw_frequencies():
    mu = FinitePMF((0.5, 0.0, 0.5))
    n, leaf, cherry, capped = 4000, 0, 0, 0
    for i in range(n):
        try:
            t = sample_gw(mu, generator(17, i), size_cap=500)
        except SizeCapExceeded:
            capped += 1
            continue
        leaf += t.kids == (0,)
        cherry += t.kids == (2, 0, 0)
    assert stats.binomtest(leaf, n, 0.5).pvalue > 1e-3
    assert stats.binomtest(cherry, n, 0.125).pvalue > 1e-3
    assert capped < 0.1 * n


def test_critical_geometric_height_survival():
    # P(height >= n) = 1 - g_n(0) = 1/(n+1)
    mu = Geometric(0.5)
    n, hits = 3000, 0
    for i in range(n):
        try:
            t = sample_gw(mu, generator(23, i), size_cap=100_000)
        except SizeCapExceeded:
            hits += 1  # a capped tree of this size is certainly taller than 3
            continue
        hits += t.height >= 3
    assert stats.binomtest(hits, n, 0.25).pvalue > 1e-3


def test_size_cap():
    with pytest.raises(SizeCapExceeded):
        sample_gw(FinitePMF.dirac(2), 1, size_cap=100)
    with pytest.raises(ValueError):
        sample_gw(FinitePMF.dirac(2), 1, size_cap=None)


def test_forest_is_reproducible():
    a = sample_forest(Geometric(0.6), 5, 42)
    b = sample_forest(Geometric(0.6), 5, 42)
    assert a == b and len(a) == 5
    assert all(isinstance(t, OrderedTree) for t in a)


def test_size_biased_root_law():
    # P(k0 = k) = k 2^{-(k+1)}, j0 uniform on 1..k
    mu = Geometric(0.5)
    st_ = sample_gwi(Geometric(0.9), SizeBiasedDispatch(mu), 20000, 3)  # marks only depend on r
    k, j = st_.marks
    obs = np.bincount(np.minimum(k, 12), minlength=13)[1:]
    p = np.array([kk * 2.0 ** -(kk + 1) for kk in range(1, 12)])
    p = np.append(p, 1 - p.sum())
    assert stats.chisquare(obs, p * len(k)).pvalue > 1e-3
    assert stats.chisquare(np.bincount(j[k == 3], minlength=4)[1:]).pvalue > 1e-3


def test_spine_jump_law():
    # (L(t), L(t mirror)) increments (m, m') have law r(m + m' + 1, m + 1)
    mu = Geometric(0.6)
    r = SizeBiasedDispatch(mu)
    st_ = sample_gwi(mu, r, 10_000, 8)
    left = np.diff(st_.spine_sums())
    right = np.diff(st_.mirror().spine_sums())
    obs, exp = {}, {}
    for m, mp in zip(left.tolist(), right.tolist()):
        obs[(m, mp)] = obs.get((m, mp), 0) + 1
    n = len(left)
    cells = [(m, mp) for m in range(8) for mp in range(8) if r.pmf(m + mp + 1, m + 1) * n > 5]
    o = np.array([obs.get(c, 0) for c in cells] + [n - sum(obs.get(c, 0) for c in cells)])
    e = np.array([r.pmf(m + mp + 1, m + 1) * n for m, mp in cells])
    e = np.append(e, n - e.sum())
    assert stats.chisquare(o, e).pvalue > 1e-3


def test_change_of_measure_depth_two():
    # P*([t]_2 has root degree a and Z_2 = z) = z mu(a) P(a i.i.d. mu-draws sum to z) / mean^2
    q = 0.6
    mu = Geometric(q)
    st_ = sample_gwi(mu, SizeBiasedDispatch(mu), 20_000, 5)
    k, _ = st_.marks
    samples = []
    for i in range(0, st_.depth - 1, 2):
        s = st_.spine[i]
        z2 = k[i + 1] + sum(b.kids[0] for b in s.left + s.right)
        samples.append((int(k[i]), int(z2)))
    K = 8
    mean = mu.mean
    cells, e = [], []
    for a in range(1, K + 1):
        for z in range(0, K + 1):
            cells.append((a, z))
            e.append(z * mu.pmf(a) * stats.nbinom.pmf(z, a, q) / mean**2)
    n = len(samples)
    counts = {}
    for c in samples:
        counts[c] = counts.get(c, 0) + 1
    e = np.array(e) * n
    o = np.array([counts.get(c, 0) for c in cells])
    keep = e > 5
    o = np.append(o[keep], n - o[keep].sum())
    e = np.append(e[keep], n - e[keep].sum())
    assert stats.chisquare(o, e).pvalue > 1e-3
