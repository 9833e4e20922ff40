"""Coupling two graphs into a linked pair of tables.

A main graph and an additional graph are merged through a high-cardinality
categorical coupling node C (fed by a sink of the additional graph, feeding a
feature of the main graph) plus a configurable number of latent edges running
from additional-graph features straight into main-graph targets. The merged
graph is sampled once for the main table and the additional subgraph (with C)
once more for the additional table, sharing one pre-run so category ids match
across tables.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .config import GenerationConfig
from .engine import NoiseConfig, init_propagation_fn
from .errors import ContractViolationError, DegenerateGraphError, InvalidConfigError
from .graphs import (
    ROLE_ROOT,
    ROLE_TARGET,
    DagSpec,
    NodeSpec,
    classify_nodes,
    copy_dag,
    sample_category_count,
    sample_dag,
    validate_dag,
)
from .prerun import PrerunStats, build_prerun_stats, prerun
from .seeding import substream
from .tables import Table, generate_table


@dataclass
class RelationalSchema:
    """Merged graph plus the bookkeeping of which table each node feeds."""

    merged: DagSpec
    main_indices: list[int]  # merged indices of main-graph nodes
    add_indices: list[int]  # merged indices of additional-graph nodes
    coupling_index: int
    latent_edges: set  # of (add feature, main target) merged-index pairs

    def main_targets(self) -> list[int]:
        return [i for i in self.main_indices if self.merged.node(i).role == ROLE_TARGET]


@dataclass
class RelationalDataset:
    main_table: Table
    add_table: Table
    schema: RelationalSchema  # effective schema (post pre-run demotions)
    stats: PrerunStats
    seed: int
    noise: NoiseConfig
    num_presamples: int


def compose(
    g_main: DagSpec,
    g_add: DagSpec,
    latent_count: int,
    coupling_cat_cfg: tuple[float, float],
    rng: np.random.Generator,
    activations: tuple[str, ...],
) -> RelationalSchema:
    """Merge two annotated graphs via coupling node C and latent edges.

    Merged indices place every additional-graph node before C and C before
    every main-graph node, so index order stays topological. Nodes whose
    parent set grows (C itself, C's child, latent-edge targets) get freshly
    initialized weights matching the enlarged input.
    """
    if g_main.hidden_dim != g_add.hidden_dim or g_main.hidden_dim < 1:
        raise ContractViolationError("both graphs must be annotated with the same hidden_dim")
    n = g_main.hidden_dim
    add_sinks = g_add.sinks()
    main_nonsinks = [i for i in range(len(g_main.nodes)) if i not in set(g_main.sinks())]
    main_sinks = g_main.sinks()
    if not add_sinks or not main_nonsinks or not main_sinks:
        raise DegenerateGraphError("coupling needs an additional-graph sink and a main-graph feature and sink")

    offset_c = len(g_add.nodes)
    offset_main = offset_c + 1

    merged_nodes: list[NodeSpec] = list(copy_dag(g_add).nodes)
    coupling = NodeSpec(index=offset_c, name="C", pooling="categorical")
    merged_nodes.append(coupling)
    for node in copy_dag(g_main).nodes:
        node.index = node.index + offset_main
        merged_nodes.append(node)

    edges = set(g_add.edges)
    edges |= {(a + offset_main, b + offset_main) for a, b in g_main.edges}

    coupling.category_count = sample_category_count(*coupling_cat_cfg, rng)
    c_parent = add_sinks[int(rng.integers(len(add_sinks)))]
    c_child = main_nonsinks[int(rng.integers(len(main_nonsinks)))] + offset_main
    coupling.activation = activations[int(rng.integers(len(activations)))]
    edges.add((c_parent, offset_c))
    edges.add((offset_c, c_child))

    add_features = sorted(set(range(len(g_add.nodes))) - set(add_sinks))
    pairs = [(f, t + offset_main) for f in add_features for t in main_sinks]
    if latent_count > len(pairs):
        raise InvalidConfigError(
            f"latent_count {latent_count} exceeds the {len(pairs)} available feature-target pairs"
        )
    latent: set = set()
    if latent_count:
        chosen = rng.choice(len(pairs), size=latent_count, replace=False)
        latent = {pairs[int(i)] for i in chosen}
        edges |= latent

    merged = DagSpec(nodes=merged_nodes, edges=edges, hidden_dim=n)
    parent_map = merged.parent_map()

    child_node = merged.node(c_child)
    if child_node.role == ROLE_ROOT:
        # the chosen feature was a root; it now has a parent and propagates
        child_node.root_dist = None
        child_node.activation = activations[int(rng.integers(len(activations)))]

    grown = {offset_c, c_child} | {t for _, t in latent}
    for idx in sorted(grown):
        node = merged.node(idx)
        node.weights = init_propagation_fn(
            len(parent_map[idx]), n, node.activation, rng
        ).weights

    classify_nodes(merged)
    validate_dag(merged)
    return RelationalSchema(
        merged=merged,
        main_indices=list(range(offset_main, offset_main + len(g_main.nodes))),
        add_indices=list(range(len(g_add.nodes))),
        coupling_index=offset_c,
        latent_edges=latent,
    )


def copy_schema(schema: RelationalSchema) -> RelationalSchema:
    return RelationalSchema(
        merged=copy_dag(schema.merged),
        main_indices=list(schema.main_indices),
        add_indices=list(schema.add_indices),
        coupling_index=schema.coupling_index,
        latent_edges=set(schema.latent_edges),
    )


def add_subgraph(schema: RelationalSchema) -> tuple[DagSpec, dict[int, int]]:
    """Restrict the merged graph to the additional nodes plus C, re-indexed.

    Returns the subgraph and the merged->subgraph index map. Node specs are
    copied; roles keep their merged-graph meaning (C stays a feature).
    """
    keep = list(schema.add_indices) + [schema.coupling_index]
    index_map = {old: new for new, old in enumerate(keep)}
    sub = copy_dag(schema.merged)
    nodes = []
    for old in keep:
        node = sub.nodes[old]
        node.index = index_map[old]
        nodes.append(node)
    edges = {
        (index_map[a], index_map[b])
        for a, b in schema.merged.edges
        if a in index_map and b in index_map
    }
    return DagSpec(nodes=nodes, edges=edges, hidden_dim=schema.merged.hidden_dim), index_map


def latently_affected_targets(schema: RelationalSchema) -> dict[int, bool]:
    """Per main-target flag: reachable from the additional graph avoiding C?"""
    children = schema.merged.child_map()
    blocked = schema.coupling_index
    seen = set()
    frontier = [i for i in schema.add_indices]
    while frontier:
        i = frontier.pop()
        if i in seen or i == blocked:
            continue
        seen.add(i)
        frontier.extend(c for c in children[i] if c != blocked and c not in seen)
    return {t: (t in seen) for t in schema.main_targets()}


def coupling_codebook_sha(stats: PrerunStats, coupling_index: int) -> str:
    codebook = stats.codebooks.get(coupling_index)
    if codebook is None:
        raise ContractViolationError("coupling node has no fitted codebook")
    return hashlib.sha256(np.ascontiguousarray(codebook.centroids).tobytes()).hexdigest()


def generate_relational(
    schema: RelationalSchema,
    rows_main: int,
    rows_add: int,
    noise: NoiseConfig,
    num_presamples: int,
    seed: int,
    threads: int = 1,
) -> RelationalDataset:
    """One shared pre-run, then the main-table and additional-table runs.

    The main run covers the merged graph and is projected down to the main
    columns plus C; the additional run covers the additional subgraph with C,
    reusing the same weights, quantiles, and codebooks.
    """
    working = copy_schema(schema)
    matrices = prerun(working.merged, num_presamples, seed, threads=threads)
    stats = build_prerun_stats(working.merged, matrices, seed)
    key_sha = coupling_codebook_sha(stats, working.coupling_index)

    merged_table = generate_table(
        working.merged, stats, rows_main, noise, seed, run_tag="main", threads=threads
    )
    keep = list(working.main_indices) + [working.coupling_index]
    main_table = Table(
        columns=[merged_table.columns[i] for i in keep],
        provenance=dict(merged_table.provenance),
    )

    sub, index_map = add_subgraph(working)
    sub_stats = PrerunStats(
        quantiles={index_map[i]: q for i, q in stats.quantiles.items() if i in index_map},
        codebooks={index_map[i]: c for i, c in stats.codebooks.items() if i in index_map},
        num_presamples=stats.num_presamples,
    )
    add_table = generate_table(sub, sub_stats, rows_add, noise, seed, run_tag="add", threads=threads)

    for table in (main_table, add_table):
        table.provenance["coupling_codebook_sha"] = key_sha
        table.provenance["master_seed"] = seed
    return RelationalDataset(
        main_table=main_table,
        add_table=add_table,
        schema=working,
        stats=stats,
        seed=seed,
        noise=noise,
        num_presamples=num_presamples,
    )


def build_schema(cfg: GenerationConfig) -> RelationalSchema:
    """Sample both graphs and couple them, all from the config's master seed."""
    g_main = sample_dag(cfg, "main", cfg.master_seed, "structure-main", name_prefix="M")
    g_add = sample_dag(cfg, "add", cfg.master_seed, "structure-add", name_prefix="A")
    return compose(
        g_main,
        g_add,
        cfg.latent_count,
        cfg.coupling_categories,
        substream(cfg.master_seed, "compose"),
        cfg.activations,
    )


def run_generation(cfg: GenerationConfig) -> RelationalDataset:
    """Full pipeline: structure, composition, pre-run, both table runs."""
    schema = build_schema(cfg)
    return generate_relational(
        schema,
        cfg.rows_main,
        cfg.rows_add,
        cfg.noise,
        cfg.num_presamples,
        cfg.master_seed,
        threads=cfg.threads,
    )
