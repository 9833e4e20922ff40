"""Noiseless pre-run: quantile estimation and categorical codebook fitting.

A low-sample pass without noise estimates each node's value distribution.
The component-wise 10%/90% quantiles calibrate the noise scale of the main
run, and k-means centroids fitted on the pre-run data define the categories
of every categorical node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import QuantilePair, propagate_rows
from .errors import DegenerateDataError, InvalidParameterError
from .graphs import DagSpec
from .seeding import substream

KMEANS_TOL = 1e-8
KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class Codebook:
    """k-means centroids defining a categorical node's discretization.

    Centroids are ordered by first appearance in the fitted assignment, so a
    refit on the same data and seed reproduces the exact same category ids.
    """

    centroids: np.ndarray  # (K, n)
    fitted_on: int
    requested_k: int

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


@dataclass
class PrerunStats:
    """Per-node quantiles and codebooks estimated from one pre-run."""

    quantiles: dict[int, QuantilePair]
    codebooks: dict[int, Codebook]
    num_presamples: int
    warnings: list[str] = field(default_factory=list)

    def covers(self, dag: DagSpec) -> bool:
        return all(n.index in self.quantiles for n in dag.nodes)


def prerun(dag: DagSpec, num_presamples: int, seed: int, threads: int = 1) -> dict[int, np.ndarray]:
    """Noiseless sampling pass; returns a (num_presamples, n) matrix per node."""
    if num_presamples < 2:
        raise InvalidParameterError(f"need at least 2 pre-samples, got {num_presamples}")
    return propagate_rows(dag, num_presamples, seed, "prerun", noise=None, threads=threads)


def compute_quantiles(samples: np.ndarray, lo: float = 0.1, hi: float = 0.9) -> QuantilePair:
    """Component-wise empirical quantiles with linear interpolation.

    At probability p over m sorted values the index is h = p*(m-1) and the
    value interpolates between the two bracketing order statistics.
    """
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise InvalidParameterError("quantiles need a (rows >= 2, n) matrix")
    if not lo < hi:
        raise InvalidParameterError(f"need lo < hi, got lo={lo}, hi={hi}")
    q = np.quantile(samples, [lo, hi], axis=0, method="linear")
    return QuantilePair(q10=q[0], q90=q[1])


def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # ties resolve to the lowest centroid index
    return labels, d2[np.arange(len(points)), labels]


def fit_codebook(
    samples: np.ndarray,
    k: int,
    rng: np.random.Generator,
    objective_trace: list | None = None,
) -> Codebook:
    """k-means with k-means++ seeding and Lloyd iterations.

    Runs until the largest centroid shift drops below 1e-8 or 100 iterations.
    If the data holds fewer than k distinct vectors, k is reduced to that
    count (the caller records the warning). Fewer than 2 distinct vectors is
    a degenerate node and raises. When ``objective_trace`` is given, the
    within-cluster sum of squares of every iteration is appended to it.
    """
    if k < 2:
        raise InvalidParameterError(f"category count must be >= 2, got {k}")
    samples = np.asarray(samples, dtype=float)
    distinct = np.unique(samples, axis=0)
    if len(distinct) < 2:
        raise DegenerateDataError("fewer than 2 distinct vectors; cannot form categories")
    k_eff = min(k, len(distinct))

    # k-means++: first centroid uniform, then squared-distance weighted picks.
    centroids = np.empty((k_eff, samples.shape[1]))
    centroids[0] = samples[int(rng.integers(len(samples)))]
    d2 = ((samples - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k_eff):
        total = d2.sum()
        if total <= 0.0:  # all mass already covered; take any unused distinct point
            unused = distinct[_nearest(distinct, centroids[:j])[1] > 0]
            centroids[j] = unused[0]
        else:
            centroids[j] = samples[int(rng.choice(len(samples), p=d2 / total))]
        d2 = np.minimum(d2, ((samples - centroids[j]) ** 2).sum(axis=1))

    prev_objective = np.inf
    for _ in range(KMEANS_MAX_ITER):
        labels, nearest_d2 = _nearest(samples, centroids)
        objective = float(nearest_d2.sum())
        if objective > prev_objective * (1 + 1e-12) + 1e-12:
            raise AssertionError("k-means objective increased")
        if objective_trace is not None:
            objective_trace.append(objective)
        prev_objective = objective
        new_centroids = centroids.copy()  # empty clusters keep their centroid
        for j in range(k_eff):
            members = samples[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < KMEANS_TOL:
            break

    # Re-number clusters by first appearance over the sample order; clusters
    # that never win a point keep their relative order at the end.
    labels, _ = _nearest(samples, centroids)
    order: list[int] = []
    seen = set()
    for lab in labels:
        if lab not in seen:
            seen.add(int(lab))
            order.append(int(lab))
    order.extend(j for j in range(k_eff) if j not in seen)
    return Codebook(centroids=centroids[order], fitted_on=len(samples), requested_k=k)


def build_prerun_stats(
    dag: DagSpec, matrices: dict[int, np.ndarray], seed: int
) -> PrerunStats:
    """Quantiles for every node, codebooks for categorical nodes.

    Categorical nodes whose pre-run data is constant are demoted to mean
    pooling with a warning instead of failing the whole generation. The
    passed DagSpec is updated in place so the stored schema reflects the
    pooling actually used.
    """
    num = next(iter(matrices.values())).shape[0] if matrices else 0
    stats = PrerunStats(quantiles={}, codebooks={}, num_presamples=num)
    for node in dag.nodes:
        stats.quantiles[node.index] = compute_quantiles(matrices[node.index])
        if node.pooling != "categorical":
            continue
        try:
            codebook = fit_codebook(
                matrices[node.index], node.category_count, substream(seed, "kmeans", node.index)
            )
        except DegenerateDataError:
            stats.warnings.append(
                f"node {node.name}: constant pre-run data, demoted categorical pooling to mean"
            )
            node.pooling = "mean"
            node.category_count = None
            continue
        if codebook.k < codebook.requested_k:
            stats.warnings.append(
                f"node {node.name}: only {codebook.k} distinct pre-run vectors, "
                f"reduced categories from {codebook.requested_k}"
            )
            node.category_count = codebook.k
        stats.codebooks[node.index] = codebook
    return stats
