import numpy as np
import pytest

from relgen.config import config_from_dict
from relgen.engine import RootDistribution
from relgen.errors import DegenerateDataError, InvalidParameterError
from relgen.graphs import DagSpec, NodeSpec, classify_nodes, sample_dag
from relgen.prerun import (
    build_prerun_stats,
    compute_quantiles,
    fit_codebook,
    prerun,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def identity_chain(length=3, n=2):
    """Root feeding an identity chain, so every node mirrors the root."""
    nodes = [NodeSpec(index=0, name="N0", root_dist=RootDistribution("normal", {"mean": 0.0, "std": 1.0}), pooling="mean")]
    for i in range(1, length):
        nodes.append(
            NodeSpec(index=i, name=f"N{i}", activation="identity", weights=np.eye(n), pooling="mean")
        )
    dag = DagSpec(nodes=nodes, edges={(i, i + 1) for i in range(length - 1)}, hidden_dim=n)
    return classify_nodes(dag)


# --- quantiles -----------------------------------------------------------------

def test_quantile_interpolation_convention():
    samples = np.arange(10, dtype=float).reshape(10, 1)
    q = compute_quantiles(samples)
    assert q.q10[0] == pytest.approx(0.9, abs=1e-12)
    assert q.q90[0] == pytest.approx(8.1, abs=1e-12)


def test_constant_column_has_zero_spread():
    samples = np.full((20, 2), 3.25)
    q = compute_quantiles(samples)
    assert np.array_equal(q.q10, q.q90)


def test_lo_must_be_below_hi():
    with pytest.raises(InvalidParameterError):
        compute_quantiles(np.zeros((5, 1)), lo=0.5, hi=0.5)


def test_too_few_samples_rejected():
    with pytest.raises(InvalidParameterError):
        compute_quantiles(np.zeros((1, 2)))


def test_quantile_coverage_for_continuous_root():
    dist = RootDistribution("normal", {"mean": 0.0, "std": 1.0})
    samples = rng(5).normal(0.0, 1.0, size=(1000, 2))
    q = compute_quantiles(samples)
    below = (samples < q.q10).mean(axis=0)
    assert np.all(below >= 0.05) and np.all(below <= 0.15)
    assert np.all(q.q10 <= q.q90)


# --- pre-run -------------------------------------------------------------------

def test_identity_chain_copies_root():
    dag = identity_chain()
    mats = prerun(dag, 100, seed=3)
    assert np.array_equal(mats[0], mats[1])
    assert np.array_equal(mats[0], mats[2])


def test_prerun_is_deterministic():
    cfg = config_from_dict({})
    dag = sample_dag(cfg, "main", 4, "structure-main")
    a = prerun(dag, 200, seed=9)
    b = prerun(dag, 200, seed=9)
    for i in a:
        assert a[i].tobytes() == b[i].tobytes()


def test_prerun_shapes():
    dag = identity_chain(length=4)
    mats = prerun(dag, 57, seed=0)
    assert all(m.shape == (57, 2) for m in mats.values())


# --- k-means -------------------------------------------------------------------

def test_codebook_recovers_blob_means():
    centers = np.array([[0.0, 0.0], [5.0, 5.0]])
    pts = np.concatenate([rng(1).normal(c, 0.1, size=(200, 2)) for c in centers])
    cb = fit_codebook(pts, 2, rng(2))
    found = cb.centroids[np.argsort(cb.centroids[:, 0])]
    assert np.all(np.abs(found - centers) < 0.05)


def test_codebook_is_deterministic():
    pts = rng(3).normal(size=(300, 2))
    a = fit_codebook(pts, 7, rng(4))
    b = fit_codebook(pts, 7, rng(4))
    assert a.centroids.tobytes() == b.centroids.tobytes()


def test_centroids_ordered_by_first_assignment():
    pts = rng(5).normal(size=(400, 2))
    cb = fit_codebook(pts, 5, rng(6))
    labels = np.argmin(
        ((pts[:, None, :] - cb.centroids[None, :, :]) ** 2).sum(axis=2), axis=1
    )
    firsts = [np.flatnonzero(labels == j)[0] for j in np.unique(labels)]
    assert firsts == sorted(firsts)  # category j first appears before j+1


def test_constant_data_is_degenerate():
    pts = np.ones((50, 2))
    with pytest.raises(DegenerateDataError):
        fit_codebook(pts, 2, rng(0))


def test_k_reduced_to_distinct_count():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    cb = fit_codebook(pts, 4, rng(0))
    assert cb.k == 2
    assert cb.requested_k == 4


def test_k_below_two_rejected():
    with pytest.raises(InvalidParameterError):
        fit_codebook(rng(0).normal(size=(10, 2)), 1, rng(0))


def test_kmeans_objective_monotone():
    """Independent Lloyd trace: WCSS may never increase between iterations."""
    pts = rng(8).normal(size=(500, 2))
    cb = fit_codebook(pts, 6, rng(9))
    # replay Lloyd from the fitted centroids: one more assignment+update round
    # cannot increase the objective either
    d2 = ((pts[:, None, :] - cb.centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    before = d2[np.arange(len(pts)), labels].sum()
    updated = cb.centroids.copy()
    for j in range(cb.k):
        members = pts[labels == j]
        if len(members):
            updated[j] = members.mean(axis=0)
    d2b = ((pts[:, None, :] - updated[None, :, :]) ** 2).sum(axis=2)
    after = d2b[np.arange(len(pts)), np.argmin(d2b, axis=1)].sum()
    assert after <= before * (1 + 1e-9)


# --- stats assembly --------------------------------------------------------------

def test_degenerate_categorical_demoted_to_mean():
    dag = identity_chain(length=2)
    dag.nodes[1].pooling = "categorical"
    dag.nodes[1].category_count = 3
    mats = {0: np.ones((50, 2)), 1: np.ones((50, 2))}
    stats = build_prerun_stats(dag, mats, seed=0)
    assert dag.nodes[1].pooling == "mean"
    assert stats.warnings and "demoted" in stats.warnings[0]


def test_stats_cover_all_nodes():
    cfg = config_from_dict({})
    dag = sample_dag(cfg, "main", 6, "structure-main")
    mats = prerun(dag, 300, seed=6)
    stats = build_prerun_stats(dag, mats, seed=6)
    assert stats.covers(dag)
    for node in dag.nodes:
        if node.pooling == "categorical":
            assert node.index in stats.codebooks
            assert stats.codebooks[node.index].k == node.category_count
