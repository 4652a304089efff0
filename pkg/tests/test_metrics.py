import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from jgan.datasets import MixtureSpec, ring_mixture
from jgan.metrics import (
    GaussianStats,
    ScoreReport,
    fid,
    fit_gaussian_stats,
    inception_score,
    merge_gaussian_stats,
    mode_coverage,
)


def stats(mu, sigma):
    return GaussianStats(np.asarray(mu, float), np.asarray(sigma, float))


def random_spd(d, seed):
    a = np.random.default_rng(seed).standard_normal((d, d + 3))
    return a @ a.T / d


def fid_sqrtm_oracle(a, b):
    covmean = linalg.sqrtm(a.sigma @ b.sigma).real
    diff = a.mu - b.mu
    return diff @ diff + np.trace(a.sigma + b.sigma - 2 * covmean)


def test_is_identical_rows():
    p = np.tile([0.2, 0.5, 0.3], (40, 1))
    mean, std = inception_score(p, 4)
    assert abs(mean - 1) < 1e-9 and std < 1e-9


def test_is_orthogonal_pair():
    mean, std = inception_score(np.array([[1.0, 0.0], [0.0, 1.0]]), 1)
    assert abs(mean - 2) < 1e-9 and std == 0


def test_is_uniform_rows():
    assert abs(inception_score(np.full((10, 7), 1 / 7), 2)[0] - 1) < 1e-9


def test_is_remainder_split():
    p = np.eye(3)[[0, 1, 2, 0, 1, 2, 0]]
    # splits: rows 0-2 (IS 3) and rows 3-6 (marginal 2/4,1/4,1/4)
    second = np.exp(np.mean([np.log(1 / 0.5), np.log(1 / 0.25), np.log(1 / 0.25), np.log(1 / 0.5)]))
    mean, std = inception_score(p, 2)
    assert mean == pytest.approx((3 + second) / 2)
    assert std == pytest.approx(abs(3 - second) / 2)


def test_is_rejects_bad_rows():
    with pytest.raises(ValueError):
        inception_score(np.array([[0.5, 0.6]]), 1)


def test_is_bounds_random():
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 50):
        C = int(rng.integers(2, 12))
        p = rng.dirichlet(np.full(C, rng.uniform(0.05, 2)), size=50)
        mean, _ = inception_score(p, 1)
        assert 1 - 1e-9 <= mean <= C + 1e-9


def test_is_permutation_invariant():
    p = np.random.default_rng(1).dirichlet(np.ones(5), size=30)
    perm = np.random.default_rng(2).permutation(30)
    assert inception_score(p, 1)[0] == pytest.approx(inception_score(p[perm], 1)[0], abs=1e-12)


def test_gaussian_stats_cases():
    x = np.array([[1.0, -2.0, 0.5]])
    assert np.allclose(fit_gaussian_stats(np.vstack([x, -x])).mu, 0)
    assert np.allclose(fit_gaussian_stats(np.ones((5, 3))).sigma, 0)
    s = fit_gaussian_stats(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(s.mu, [1 / 3, 1 / 3])
    # hand: deviations (-1/3,-1/3), (2/3,-1/3), (-1/3,2/3); divide by 2
    assert np.allclose(s.sigma, [[1 / 3, -1 / 6], [-1 / 6, 1 / 3]])
    with pytest.raises(ValueError):
        fit_gaussian_stats(np.ones((1, 3)))


def test_merge_matches_single_pass():
    x = np.random.default_rng(3).standard_normal((101, 4))
    merged = merge_gaussian_stats(fit_gaussian_stats(x[:37]), fit_gaussian_stats(x[37:]))
    whole = fit_gaussian_stats(x)
    assert merged.n == 101
    assert np.allclose(merged.mu, whole.mu, atol=1e-12)
    assert np.allclose(merged.sigma, whole.sigma, atol=1e-12)


def test_fid_analytic_cases():
    a = stats(np.zeros(3), np.eye(3))
    assert fid(a, a) <= 1e-10
    d = np.array([1.0, -2.0, 0.5])
    assert abs(fid(a, stats(d, np.eye(3))) - d @ d) < 1e-8
    for k in (1, 4, 9):
        assert abs(fid(stats(np.zeros(k), 4 * np.eye(k)), stats(np.zeros(k), np.eye(k))) - k) < 1e-8


@pytest.mark.parametrize("d", [2, 8, 32])
def test_fid_commuting_oracle(d):
    rng = np.random.default_rng(d)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam, nu = rng.uniform(0.1, 3, d), rng.uniform(0.1, 3, d)
    mu_a, mu_b = rng.standard_normal(d), rng.standard_normal(d)
    a = stats(mu_a, q @ np.diag(lam) @ q.T)
    b = stats(mu_b, q @ np.diag(nu) @ q.T)
    expected = ((np.sqrt(lam) - np.sqrt(nu)) ** 2).sum() + ((mu_a - mu_b) ** 2).sum()
    assert abs(fid(a, b) - expected) < 1e-8


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 12), seed=st.integers(0, 10_000))
def test_fid_symmetry_and_sqrtm_oracle(d, seed):
    rng = np.random.default_rng(seed)
    a = stats(rng.standard_normal(d), random_spd(d, seed))
    b = stats(rng.standard_normal(d), random_spd(d, seed + 1))
    assert abs(fid(a, b) - fid(b, a)) < 1e-8
    assert fid(a, a) <= 1e-10
    assert fid(a, b) == pytest.approx(fid_sqrtm_oracle(a, b), rel=1e-7, abs=1e-8)


def test_fid_rank_deficient_covariance():
    x = np.random.default_rng(4).standard_normal((3, 6))
    a = fit_gaussian_stats(x)
    assert fid(a, a) <= 1e-10


def test_fid_errors():
    with pytest.raises(ValueError):
        fid(stats(np.zeros(2), np.eye(2)), stats(np.zeros(3), np.eye(3)))
    with pytest.raises(ValueError):
        fid(stats(np.zeros(2), -np.eye(2)), stats(np.zeros(2), np.eye(2)))


def test_coverage_at_means():
    spec = MixtureSpec(ring_mixture().means, 0.05, np.array([0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]))
    samples = np.repeat(spec.means, 10, axis=0)
    labels = np.repeat(np.arange(8), 10)
    covered, tv = mode_coverage(samples, spec, 3.0, labels)
    assert covered == 8
    assert tv == pytest.approx(0.5 * (0.3 - 0.125 + 7 * (0.125 - 0.1)))


def test_coverage_single_mode():
    spec = ring_mixture()
    covered, tv = mode_coverage(np.tile(spec.means[0], (50, 1)), spec, 3.0)
    assert covered == 1 and np.isnan(tv)


def test_coverage_hand_fixture():
    spec = ring_mixture(8, 2.0, 0.1)
    rng = np.random.default_rng(5)
    # N=80, K=8: a mode needs >= 2.5 hits, i.e. 3 points within 0.3
    counts = [20, 10, 3, 2, 0, 15, 30, 0]
    pts = [spec.means[m] + rng.uniform(-0.2, 0.2, (c, 2)) for m, c in enumerate(counts)]
    samples = np.vstack(pts)
    assert len(samples) == 80
    expected = sum(1 for c in counts if c >= 3)
    assert mode_coverage(samples, spec, 3.0)[0] == expected == 5


def test_coverage_soft_labels():
    spec = ring_mixture(4)
    soft = np.full((10, 4), 0.25)
    assert mode_coverage(np.repeat(spec.means, 3, 0), spec, 3.0, soft)[1] == pytest.approx(0.0)


def test_score_report_roundtrip():
    r = ScoreReport(5000, 7.9, 0.1, 0.02, 10_000, 10, {"covered_modes": 8})
    assert ScoreReport.from_json(r.to_json()) == r
