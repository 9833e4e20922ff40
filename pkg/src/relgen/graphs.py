"""Random graph sampling and node configuration.

Undirected graphs come from preferential attachment, are oriented from lower
to higher node index (which makes the index order a topological order), and
pruned of isolated nodes. Sinks become the dataset's targets; every other
node, roots included, is a feature column.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import GenerationConfig
from .engine import RootDistribution, init_propagation_fn
from .errors import DegenerateGraphError, InvalidConfigError, InvalidParameterError
from .seeding import substream

ROLE_ROOT = "root"
ROLE_FEATURE = "feature"
ROLE_TARGET = "target"

POOLING_KINDS = ("norm", "mean", "median", "variance", "categorical")


@dataclass(frozen=True)
class UndirectedGraph:
    num_nodes: int
    edges: frozenset  # of (lo, hi) index pairs

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i in (a, b))


@dataclass
class NodeSpec:
    """Full per-node record: role, distribution or weights, and readout."""

    index: int
    name: str
    role: str = ""
    root_dist: RootDistribution | None = None
    activation: str | None = None
    weights: np.ndarray | None = None  # (n, parent_count * n); non-roots only
    pooling: str | None = None
    category_count: int | None = None


@dataclass
class DagSpec:
    """A sampled graph with every edge pointing from lower to higher index."""

    nodes: list[NodeSpec]
    edges: set  # of (parent, child) with parent < child
    hidden_dim: int = 0

    def parent_map(self) -> dict[int, list[int]]:
        parents: dict[int, list[int]] = {node.index: [] for node in self.nodes}
        for a, b in self.edges:
            parents[b].append(a)
        for lst in parents.values():
            lst.sort()
        return parents

    def child_map(self) -> dict[int, list[int]]:
        children: dict[int, list[int]] = {node.index: [] for node in self.nodes}
        for a, b in self.edges:
            children[a].append(b)
        for lst in children.values():
            lst.sort()
        return children

    def roots(self) -> list[int]:
        parents = self.parent_map()
        return [n.index for n in self.nodes if not parents[n.index]]

    def sinks(self) -> list[int]:
        children = self.child_map()
        return [n.index for n in self.nodes if not children[n.index]]

    def node(self, index: int) -> NodeSpec:
        return self.nodes[index]


def sample_ba_graph(num_nodes: int, attach_m: int, rng: np.random.Generator) -> UndirectedGraph:
    """Preferential attachment starting from the connected seed pair {0, 1}.

    Every later node attaches to min(attach_m, existing) distinct earlier
    nodes, picked with probability proportional to current degree.
    """
    if num_nodes < 2:
        raise InvalidParameterError(f"num_nodes must be >= 2, got {num_nodes}")
    if attach_m < 1 or attach_m >= num_nodes:
        raise InvalidParameterError(
            f"attach_m must satisfy 1 <= attach_m < num_nodes, got {attach_m}"
        )
    edges = {(0, 1)}
    repeated = [0, 1]  # node i appears once per incident edge
    for new in range(2, num_nodes):
        m = min(attach_m, new)
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in sorted(targets):
            edges.add((min(t, new), max(t, new)))
            repeated.append(t)
        repeated.extend([new] * m)
    return UndirectedGraph(num_nodes=num_nodes, edges=frozenset(edges))


def orient_and_prune(g: UndirectedGraph, name_prefix: str = "N") -> DagSpec:
    """Direct every edge low->high, drop isolated nodes, re-index contiguously."""
    degree = [0] * g.num_nodes
    for a, b in g.edges:
        degree[a] += 1
        degree[b] += 1
    kept = [i for i in range(g.num_nodes) if degree[i] > 0]
    if not g.edges:
        raise DegenerateGraphError("graph has no edges after pruning")
    remap = {old: new for new, old in enumerate(kept)}
    edges = {(remap[a], remap[b]) for a, b in g.edges}
    nodes = [NodeSpec(index=i, name=f"{name_prefix}{i}") for i in range(len(kept))]
    return DagSpec(nodes=nodes, edges=edges)


def classify_nodes(dag: DagSpec) -> DagSpec:
    """Assign roles: in-degree 0 -> root, out-degree 0 -> target, else feature."""
    parents = dag.parent_map()
    children = dag.child_map()
    for node in dag.nodes:
        if not parents[node.index]:
            node.role = ROLE_ROOT
        elif not children[node.index]:
            node.role = ROLE_TARGET
        else:
            node.role = ROLE_FEATURE
    return dag


def sample_root_distribution(cfg: GenerationConfig, rng: np.random.Generator) -> RootDistribution:
    rd = cfg.root_distributions
    families = sorted(rd.family_weights)
    weights = np.array([rd.family_weights[f] for f in families], dtype=float)
    kind = families[int(rng.choice(len(families), p=weights / weights.sum()))]
    if kind == "normal":
        params = {
            "mean": float(rng.uniform(*rd.normal_mean)),
            "std": float(rng.uniform(*rd.normal_std)),
        }
    elif kind == "gamma":
        params = {
            "shape": float(rng.uniform(*rd.gamma_shape)),
            "scale": float(rng.uniform(*rd.gamma_scale)),
        }
    else:
        params = {
            "p": float(rd.mixture_p),
            "exp_scale": float(rng.uniform(*rd.mixture_exp_scale)),
        }
    return RootDistribution(kind=kind, params=params)


def sample_category_count(mean: float, std: float, rng: np.random.Generator) -> int:
    return max(2, int(np.rint(rng.normal(mean, std))))


def assign_node_configs(
    dag: DagSpec, cfg: GenerationConfig, rng: np.random.Generator
) -> DagSpec:
    """Fill in distributions, activations, weights, and pooling for every node."""
    if not cfg.activations:
        raise InvalidConfigError("activation set must not be empty")
    if not cfg.numeric_poolings:
        raise InvalidConfigError("pooling set must not be empty")
    parents = dag.parent_map()
    dag.hidden_dim = cfg.hidden_dim
    for node in dag.nodes:
        pc = len(parents[node.index])
        if pc == 0:
            node.root_dist = sample_root_distribution(cfg, rng)
            node.activation = None
            node.weights = None
        else:
            node.activation = cfg.activations[int(rng.integers(len(cfg.activations)))]
            node.weights = init_propagation_fn(pc, cfg.hidden_dim, node.activation, rng).weights
        if rng.random() < cfg.categorical_probability:
            node.pooling = "categorical"
            node.category_count = sample_category_count(*cfg.category_count, rng)
        else:
            node.pooling = cfg.numeric_poolings[int(rng.integers(len(cfg.numeric_poolings)))]
            node.category_count = None
    return dag


def validate_dag(dag: DagSpec) -> None:
    """Raise if any structural invariant is broken."""
    indices = [n.index for n in dag.nodes]
    if indices != list(range(len(dag.nodes))):
        raise DegenerateGraphError("node indices must be contiguous from 0")
    for a, b in dag.edges:
        if not (0 <= a < b < len(dag.nodes)):
            raise DegenerateGraphError(f"edge ({a},{b}) breaks the index-order topology")
    parents = dag.parent_map()
    children = dag.child_map()
    for node in dag.nodes:
        if not parents[node.index] and not children[node.index]:
            raise DegenerateGraphError(f"node {node.index} is isolated")
        if node.role:
            expect_root = not parents[node.index]
            expect_target = bool(parents[node.index]) and not children[node.index]
            if expect_root != (node.role == ROLE_ROOT) or expect_target != (node.role == ROLE_TARGET):
                raise DegenerateGraphError(f"node {node.index} role {node.role!r} contradicts degrees")


def sample_dag(
    cfg: GenerationConfig,
    graph_key: str,
    seed: int,
    run_tag: str,
    name_prefix: str = "N",
    max_attempts: int = 16,
) -> DagSpec:
    """Sample, orient, classify, and annotate a graph; resample degenerate draws.

    ``graph_key`` selects cfg.main_graph or cfg.add_graph. Each attempt uses
    the sub-stream (seed, run_tag, attempt).
    """
    gcfg = getattr(cfg, f"{graph_key}_graph")
    lo, hi = gcfg.num_nodes
    for attempt in range(max_attempts):
        rng = substream(seed, run_tag, attempt)
        num_nodes = int(rng.integers(lo, hi + 1))
        if gcfg.attach_m >= num_nodes:
            continue
        try:
            dag = orient_and_prune(sample_ba_graph(num_nodes, gcfg.attach_m, rng), name_prefix)
        except DegenerateGraphError:
            continue
        classify_nodes(dag)
        parents = dag.parent_map()
        has_fed_sink = any(parents[i] for i in dag.sinks())
        if len(dag.nodes) < 3 or not has_fed_sink:
            continue
        assign_node_configs(dag, cfg, rng)
        return dag
    raise DegenerateGraphError(
        f"no usable graph for {graph_key!r} after {max_attempts} attempts (seed {seed})"
    )


def copy_dag(dag: DagSpec) -> DagSpec:
    """Deep copy; weight arrays are copied so callers may re-initialize freely."""
    nodes = [
        replace(n, weights=None if n.weights is None else n.weights.copy())
        for n in dag.nodes
    ]
    return DagSpec(nodes=nodes, edges=set(dag.edges), hidden_dim=dag.hidden_dim)
