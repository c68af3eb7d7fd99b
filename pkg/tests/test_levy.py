import math

import numpy as np
import pytest
from scipy import stats

from macrodim.estimator import estimate_dim_shell
from macrodim.levy import (
    LevyPath,
    PeaksConfig,
    StepBudgetError,
    graph_pixels,
    positive_stable,
    range_pixels,
    sample_stable_increment,
    simulate_path,
    symmetric_stable,
    tall_peaks_pixels,
    zero_set_pixels,
)


def stable_tail(beta, x, terms=40):
    """P(X_1 > x) for exp(-|z|^beta) from the classical series expansion.

    Convergent for beta < 1, exact for beta = 1 and asymptotic for beta > 1
    (used there only for x >= 30, where four terms are plenty)."""
    if beta == 1:
        return 0.5 - math.atan(x) / math.pi
    if beta > 1:
        terms = 4
    s = 0.0
    for k in range(1, terms + 1):
        s += ((-1) ** (k + 1) * math.gamma(k * beta) / math.factorial(k)
              * math.sin(k * math.pi * beta / 2) * x ** (-k * beta))
    return s / math.pi


def rho_const(beta):
    # lim lam^beta P(X_1 > lam), the leading series coefficient
    return math.gamma(beta) * math.sin(math.pi * beta / 2) / math.pi


def rng(seed):
    return np.random.default_rng(seed)


def test_gaussian_variance_two():
    x = sample_stable_increment(2.0, 1.0, rng(1), 10**6)
    assert abs(x.var() - 2.0) <= 0.01


def test_cauchy_median_and_tail():
    x = sample_stable_increment(1.0, 1.0, rng(2), 10**6)
    assert abs(np.median(x)) < 0.01
    for lam in (50.0, 200.0):
        assert (x > lam).mean() * lam == pytest.approx(1 / math.pi, rel=0.1)


def test_rho_limit_stabilizes_beta_07():
    x = symmetric_stable(rng(3), 0.7, 10**7)
    vals = [(x > lam).mean() * lam**0.7 for lam in (1e2, 1e3, 1e4)]
    assert max(vals) / min(vals) < 1.1
    assert np.mean(vals) == pytest.approx(rho_const(0.7), rel=0.05)


@pytest.mark.parametrize("beta, lam0", [(0.5, 100.0), (1.0, 10.0), (1.5, 30.0)])
def test_tail_law_flat_over_two_decades(beta, lam0):
    n = 10**7
    x = symmetric_stable(rng(int(beta * 100)), beta, n)
    lams = lam0 * np.logspace(0, 2, 5)
    exact = np.array([stable_tail(beta, lam) for lam in lams])
    weighted = exact * lams**beta
    # the law itself: lam^beta P(X > lam) flat within 10%
    assert weighted.max() / weighted.min() < 1.1
    # the sampler reproduces the exact tail within binomial noise
    for lam, p in zip(lams, exact):
        k = np.count_nonzero(x > lam)
        assert abs(k - n * p) <= 4 * math.sqrt(n * p * (1 - p)), (lam, k, n * p)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8, 1.0, 1.5, 2.0])
def test_symmetry(beta):
    x = symmetric_stable(rng(7), beta, 10**6)
    assert abs(np.sign(x).mean()) <= 3 / math.sqrt(x.size)


@pytest.mark.parametrize("beta, c", [(0.7, 4), (0.5, 3), (1.2, 4), (2.0, 5)])
def test_self_similarity_ks(beta, c):
    g = rng(11)
    n = 10**4
    # X_{c t} as a sum of c independent unit increments, rescaled
    summed = symmetric_stable(g, beta, (n, c)).sum(axis=1) / c ** (1 / beta)
    single = symmetric_stable(g, beta, n)
    assert stats.ks_2samp(summed, single).pvalue > 1e-3


def test_characteristic_function():
    z = np.array([0.3, 1.0, 2.0])
    for beta in (0.6, 1.4):
        x = symmetric_stable(rng(13), beta, 10**6)
        emp = np.cos(np.outer(z, x)).mean(axis=1)
        np.testing.assert_allclose(emp, np.exp(-z**beta), atol=4e-3)


def test_positive_stable_laplace_transform():
    for rho in (0.25, 0.5, 0.75):
        x = positive_stable(rng(17), rho, 10**6)
        assert x.min() > 0
        for lam in (0.5, 1.0, 2.0):
            v = np.exp(-lam * x)
            assert abs(v.mean() - math.exp(-(lam**rho))) <= 4 * v.std() / 1e3


def test_path_starts_at_zero_and_chains_blocks():
    p = LevyPath("symmetric-stable", 1.5, 2, 100.0, 1.0, seed=5, block=16)
    t, v = p.values()
    assert t[0] == 0 and np.all(v[0] == 0)
    assert len(t) == 101
    np.testing.assert_allclose(np.diff(t), 1.0)
    assert np.array_equal(p.endpoint(), v[-1])
    assert np.array_equal(simulate_path("symmetric-stable", 1.5, 100.0, 1.0, 5, d=2).values()[1].shape, (101, 2))


def test_path_determinism():
    a = simulate_path("brownian", 2.0, 5000.0, 0.5, 9).values()[1]
    b = simulate_path("brownian", 2.0, 5000.0, 0.5, 9).values()[1]
    c = simulate_path("brownian", 2.0, 5000.0, 0.5, 10).values()[1]
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_brownian_endpoint_scaling():
    T = 2.0**20
    ends = np.array([simulate_path("brownian", 2.0, T, 1.0, 1000 + r).endpoint()[0]
                     for r in range(100)]) / math.sqrt(T)
    assert stats.kstest(ends, "norm").pvalue > 1e-3


def test_subordinator_monotone():
    _, v = simulate_path("stable-subordinator", 0.5, 2.0**18, 1.0, 4).values()
    assert np.all(np.diff(v[:, 0]) > 0)


def test_step_guard():
    with pytest.raises(StepBudgetError):
        simulate_path("brownian", 2.0, 2.0**28, 2.0**-4, 0)


def test_csv_export(tmp_path):
    p = simulate_path("symmetric-stable", 0.9, 4.0, 1.0, 1)
    out = tmp_path / "path.csv"
    p.to_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 6
    assert float(lines[-1].split(",")[1]) == p.endpoint()[0]


def test_subordinator_range_dimension():
    p = simulate_path("stable-subordinator", 0.5, 2.0**22, 1.0, 21)
    ps = range_pixels(p)
    c = ps.shell_counts()
    top = int(np.nonzero(c.counts)[0][-1])
    top = min(top, 2 * 22)
    est = estimate_dim_shell(c, (math.ceil(top / 2), top))
    assert abs(est.value - 0.5) <= 0.1


def test_short_path_is_bounded():
    p = simulate_path("brownian", 2.0, 1.0, 1.0, 0)
    ps = range_pixels(p, 20)
    assert len(ps) <= 2
    assert estimate_dim_shell(ps.shell_counts()).value <= 0.1
    assert len(zero_set_pixels(2.0, 1.0, 0, 20)) <= 2


def test_graph_pixels_no_interpolation():
    p = simulate_path("symmetric-stable", 0.5, 64.0, 1.0, 3)
    t, v = p.values()
    ps = graph_pixels(p)
    expected = {(int(math.floor(a)), int(math.floor(b))) for a, b in zip(t, v[:, 0])
                if -64 <= b < 64}
    assert ps.to_set() == expected


def test_graph_dim_brownian_is_one():
    p = simulate_path("symmetric-stable", 2.0, 2.0**18, 2.0**-4, 8)
    c = graph_pixels(p).shell_counts()
    assert abs(estimate_dim_shell(c).value - 1.0) <= 0.15


def test_zero_set_rejects_small_beta():
    with pytest.raises(ValueError):
        zero_set_pixels(1.0, 100.0, 0)


def test_peaks_threshold_domain():
    cfg = PeaksConfig(1.0, "stable", 0.8)
    th = cfg.threshold(np.array([0.0, 1.0, 2.7, 3.0, 1024.0]))
    assert np.all(np.isinf(th[:3]))
    assert th[4] == pytest.approx(1024**1.25 * 10)
    b = PeaksConfig(0.5, "brownian").threshold(np.array([100.0]))
    assert b[0] == pytest.approx(0.5 * math.sqrt(200 * math.log(math.log(100))))
    with pytest.raises(ValueError):
        PeaksConfig(1.0, "stable")


def test_peaks_bruteforce():
    p = simulate_path("brownian", 2.0, 5000.0, 0.25, 2)
    cfg = PeaksConfig(0.3, "brownian")
    t, v = p.values()
    expected = {(int(math.floor(s)),) for s, x in zip(t, v[:, 0])
                if s >= math.e and x >= 0.3 * math.sqrt(2 * s * math.log(math.log(s)))}
    assert tall_peaks_pixels(p, cfg).to_set() == expected
    assert min(expected)[0] >= 2


def test_supercritical_peaks_die_out():
    late = 0
    for r in range(6):
        p = simulate_path("symmetric-stable", 0.8, 2.0**20, 1.0, 300 + r)
        c = tall_peaks_pixels(p, PeaksConfig(2.0, "stable", 0.8)).shell_counts()
        late += int(c.counts[14:].sum() > 0)
    assert late <= 1
