import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score

from anchormix.cdw import gibbs_slr
from anchormix.core import AnchorSet, RegPrior
from anchormix.gibbs import (PosteriorChain, adjusted_rand_index, allocation_counts,
                             gibbs_anchored_mixreg, label_switch_diagnostic, map_allocations,
                             taxonomy_crosstab)
from anchormix.synthetic import simulate_mixreg


def _batch_se(values, batches=50):
    means = [b.mean() for b in np.array_split(values, batches)]
    return np.std(means, ddof=1) / math.sqrt(batches)


def _chain(beta, s, anchors=None):
    beta = np.asarray(beta, dtype=float)
    M, k, _ = beta.shape
    s = np.asarray(s)
    return PosteriorChain(beta, np.ones(M), np.full((M, k), 1.0 / k), s,
                          anchors or AnchorSet.empty(k))


@pytest.fixture(scope="module")
def two_lines():
    return simulate_mixreg([1.0, -1.0], [1.5, 0.2], [20, 20], noise_sd=0.25, x_sd=1.0, rng=2)


# -- sampler -----------------------------------------------------------------------


def test_anchored_points_never_move(three_lines):
    data, labels = three_lines
    anchors = AnchorSet(((0, 1), (20, 21, 22), (40,)))
    chain = gibbs_anchored_mixreg(data, anchors, RegPrior(mu_beta=[2, 0.7]), k=3,
                                  n_samples=2000, burn_in=200, rng=3)
    chain.check_anchored()
    assert np.all(chain.s[:, [0, 1]] == 0)
    assert np.all(chain.s[:, [20, 21, 22]] == 1)
    assert np.all(chain.s[:, 40] == 2)
    np.testing.assert_allclose(chain.eta.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(chain.sigma2 > 0)
    assert chain.beta.shape == (2000, 3, 2)


def test_check_anchored_detects_violation():
    chain = _chain(np.zeros((3, 2, 2)), [[0, 1], [1, 1], [0, 1]], AnchorSet(((0,), ())))
    with pytest.raises(AssertionError):
        chain.check_anchored()


def test_single_component_matches_slr(two_lines):
    data, _ = two_lines
    prior = RegPrior(mu_beta=[0.0, 0.8])
    mix = gibbs_anchored_mixreg(data, AnchorSet.empty(1), prior, k=1, n_samples=20_000,
                                burn_in=1000, rng=4)
    slr = gibbs_slr(data, prior, 20_000, 1000, rng=5)
    for a, b in [(mix.beta[:, 0, 0], slr.beta[:, 0]), (mix.beta[:, 0, 1], slr.beta[:, 1]),
                 (mix.sigma2, slr.sigma2)]:
        se = math.hypot(_batch_se(a), _batch_se(b))
        assert abs(a.mean() - b.mean()) < 3 * se
    assert np.all(mix.s == 0)
    np.testing.assert_array_equal(mix.eta, 1.0)


def test_sampler_deterministic(two_lines):
    data, _ = two_lines
    anchors = AnchorSet(((0,), (20,)))
    a = gibbs_anchored_mixreg(data, anchors, RegPrior(), k=2, n_samples=300, burn_in=50, rng=9)
    b = gibbs_anchored_mixreg(data, anchors, RegPrior(), k=2, n_samples=300, burn_in=50, rng=9)
    for f in ("beta", "sigma2", "eta", "s"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert a.seed == 9 and a.burn_in == 50


def test_sampler_thinning(two_lines):
    data, _ = two_lines
    chain = gibbs_anchored_mixreg(data, AnchorSet(((0,), (20,))), RegPrior(), k=2,
                                  n_samples=100, burn_in=10, rng=1, thin=3)
    assert len(chain) == 100


def test_sampler_rejects_bad_anchors(two_lines):
    data, _ = two_lines
    with pytest.raises(IndexError):
        gibbs_anchored_mixreg(data, AnchorSet(((99,), ())), RegPrior(), k=2, n_samples=5)
    with pytest.raises(ValueError):
        gibbs_anchored_mixreg(data, AnchorSet(((0,), (1,), (2,))), RegPrior(), k=2, n_samples=5)


def test_exchangeability_broken_by_anchors(two_lines):
    data, labels = two_lines
    xs = data.x[:, 1]
    # component 0 is anchored on the steep line, component 1 on the flat line,
    # each at the point where the two lines are furthest apart
    a0 = int(np.flatnonzero(labels == 0)[np.argmax(xs[labels == 0])])
    a1 = int(np.flatnonzero(labels == 1)[np.argmax(xs[labels == 1])])
    chain = gibbs_anchored_mixreg(data, AnchorSet(((a0,), (a1,))), RegPrior(mu_beta=[0, 0.8]),
                                  k=2, n_samples=5000, burn_in=500, rng=6)
    assert np.mean(chain.beta[:, 0, 1] > chain.beta[:, 1, 1]) > 0.99


def test_empty_component_draws_from_prior():
    # one point, two components: whichever component is empty samples its prior
    data, _ = simulate_mixreg([0.0], [1.0], [3], rng=0)
    prior = RegPrior(mu_beta=[5.0, -5.0], v=[0.01, 0.01])
    chain = gibbs_anchored_mixreg(data, AnchorSet(((0, 1, 2), ())), prior, k=2,
                                  n_samples=3000, burn_in=10, rng=2)
    np.testing.assert_allclose(chain.beta[:, 1].mean(axis=0), [5.0, -5.0], atol=0.01)
    np.testing.assert_allclose(chain.beta[:, 1].std(axis=0), 0.1, rtol=0.05)


@pytest.mark.parametrize("flag", [True, False])
def test_eta_count_flag(flag):
    # every point anchored to component 0: counting anchors pushes eta_0 towards 1
    data, _ = simulate_mixreg([0.0], [1.0], [30], rng=1)
    anchors = AnchorSet((tuple(range(30)), ()))
    chain = gibbs_anchored_mixreg(data, anchors, RegPrior(), k=2, n_samples=4000,
                                  burn_in=10, rng=3, eta_counts_anchored=flag)
    expected = 31 / 32 if flag else 0.5
    assert chain.eta_counts_anchored is flag
    assert abs(chain.eta[:, 0].mean() - expected) < 0.02


# -- summaries -----------------------------------------------------------------------


def test_map_constant_chain():
    s = np.tile([0, 2, 1, 1], (10, 1))
    fit = map_allocations(_chain(np.zeros((10, 3, 2)), s))
    np.testing.assert_array_equal(fit.s_hat, [0, 2, 1, 1])
    np.testing.assert_array_equal(fit.sizes, [1, 2, 1])


def test_map_tie_breaks_low():
    s = np.array([[1], [2], [1], [2]])
    fit = map_allocations(_chain(np.zeros((4, 3, 2)), s))
    assert fit.s_hat[0] == 1
    np.testing.assert_allclose(fit.allocation_probs[0], [0, 0.5, 0.5])


def test_map_lines_are_posterior_means(rng):
    beta = rng.normal(size=(50, 3, 2))
    s = rng.integers(3, size=(50, 7))
    fit = map_allocations(_chain(beta, s))
    np.testing.assert_allclose(fit.lines, beta.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(fit.allocation_probs.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(fit.s_hat, np.argmax(fit.allocation_probs, axis=1))
    counts = allocation_counts(s, 3)
    assert counts.sum() == 50 * 7


def test_map_empty_chain():
    with pytest.raises(ValueError):
        map_allocations(_chain(np.zeros((0, 2, 2)), np.zeros((0, 3), dtype=int)))


def test_switch_constant_chain():
    beta = np.tile([[0.0, 1.0], [0.0, 0.2]], (20, 1, 1))
    assert label_switch_diagnostic(_chain(beta, np.zeros((20, 2), dtype=int))).n_switches == 0


def test_switch_alternating_chain():
    base = np.array([[0.0, 1.0], [0.0, 0.2], [0.0, -0.5]])
    beta = np.array([base if m % 2 == 0 else base[[1, 0, 2]] for m in range(30)])
    diag = label_switch_diagnostic(_chain(beta, np.zeros((30, 2), dtype=int)))
    assert diag.n_switches == 29
    np.testing.assert_array_equal(diag.switch_draws, np.arange(1, 30))
    assert diag.slope_traces.shape == (30, 3)


def test_anchored_fewer_switches_than_unanchored():
    data, labels = simulate_mixreg([0.0, 0.0], [1.6, 0.2], [15, 15], noise_sd=0.3,
                                   x_sd=1.0, rng=5)
    xs = data.x[:, 1]
    a = [int(np.flatnonzero(labels == j)[np.argmax(xs[labels == j])]) for j in (0, 1)]
    prior = RegPrior(mu_beta=[0.0, 0.9], v=[1.0, 1.0])
    anch, unanch = 0, 0
    for seed in range(3):
        anch += label_switch_diagnostic(gibbs_anchored_mixreg(
            data, AnchorSet(((a[0],), (a[1],))), prior, 2, 5000, 1000, rng=seed)).n_switches
        unanch += label_switch_diagnostic(gibbs_anchored_mixreg(
            data, AnchorSet.empty(2), prior, 2, 5000, 1000, rng=seed)).n_switches
    assert anch < unanch


# -- adjusted Rand index ----------------------------------------------------------


def test_ari_identical_partitions():
    ct = taxonomy_crosstab([0, 0, 1, 2, 2], ["a", "a", "b", "c", "c"])
    assert ct.ari == pytest.approx(1.0)
    assert ct.labels == ("a", "b", "c")


def test_ari_singletons_vs_one_cluster():
    ct = taxonomy_crosstab(np.arange(6), ["x"] * 6)
    assert ct.ari == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ari_matches_independent_implementation(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, 60))
    a = g.integers(int(g.integers(1, 5)), size=n)
    b = g.integers(int(g.integers(1, 6)), size=n)
    ct = taxonomy_crosstab(a, [f"t{v}" for v in b])
    assert ct.ari == pytest.approx(adjusted_rand_score(b, a), abs=1e-12)
    assert ct.table.sum() == n


def test_ari_shuffled_labels_average_zero(rng):
    truth = np.repeat(np.arange(4), 25)
    vals = [adjusted_rand_index(taxonomy_crosstab(rng.permutation(truth), truth.tolist()).table)
            for _ in range(100)]
    assert abs(np.mean(vals)) < 0.05


def test_crosstab_errors():
    with pytest.raises(ValueError):
        taxonomy_crosstab([0, 1], None)
    with pytest.raises(ValueError):
        taxonomy_crosstab([0, 1], ["a"])


def test_crosstab_fixed_k_keeps_empty_rows():
    ct = taxonomy_crosstab([0, 0], ["a", "b"], k=3)
    assert ct.table.shape == (3, 2)
    assert ct.components == (0, 1, 2)


def test_switch_ignores_near_equal_slopes_with_distinct_intercepts():
    g = np.random.default_rng(0)
    base = np.array([[1.0, 0.75], [-0.5, 0.74]])
    # slope jitter larger than the slope gap, intercepts far apart: no relabeling
    beta = base + np.stack([np.zeros((200, 2)), g.normal(0, 0.05, size=(200, 2))], axis=2)
    assert label_switch_diagnostic(_chain(beta, np.zeros((200, 2), dtype=int))).n_switches == 0
