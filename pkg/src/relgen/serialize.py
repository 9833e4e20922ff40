"""On-disk formats: schema JSON, CSV tables, DOT graphs, and the manifest.

Everything random about a dataset (graph structure, weights, distributions,
quantiles, codebooks, seeds) lands in schema.json, so a dataset can be
re-generated byte-for-byte from schema.json + manifest.json alone. Numeric
CSV cells use the shortest round-trip representation of the 64-bit value.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .config import GenerationConfig, config_from_dict, config_to_dict
from .engine import NoiseConfig, QuantilePair, RootDistribution
from .errors import InvalidConfigError
from .graphs import DagSpec, NodeSpec
from .prerun import Codebook, PrerunStats
from .relational import RelationalDataset, RelationalSchema
from .seeding import SEED_DERIVATION_NOTE
from .tables import KIND_CATEGORICAL, Column, Table

TOOL_VERSION = "0.1.0"

MAIN_CSV = "main.csv"
ADD_CSV = "additional.csv"
SCHEMA_JSON = "schema.json"
SCHEMA_DOT = "schema.dot"
MANIFEST_JSON = "manifest.json"


# --- graph / stats <-> dict ------------------------------------------------

def _node_to_dict(node: NodeSpec) -> dict:
    return {
        "index": node.index,
        "name": node.name,
        "role": node.role,
        "root_dist": None
        if node.root_dist is None
        else {"kind": node.root_dist.kind, "params": dict(node.root_dist.params)},
        "activation": node.activation,
        "weights": None if node.weights is None else node.weights.tolist(),
        "pooling": node.pooling,
        "category_count": node.category_count,
    }


def _node_from_dict(data: dict) -> NodeSpec:
    dist = data["root_dist"]
    return NodeSpec(
        index=data["index"],
        name=data["name"],
        role=data["role"],
        root_dist=None if dist is None else RootDistribution(dist["kind"], dist["params"]),
        activation=data["activation"],
        weights=None if data["weights"] is None else np.array(data["weights"], dtype=float),
        pooling=data["pooling"],
        category_count=data["category_count"],
    )


def dag_to_dict(dag: DagSpec) -> dict:
    return {
        "hidden_dim": dag.hidden_dim,
        "nodes": [_node_to_dict(n) for n in dag.nodes],
        "edges": sorted(list(e) for e in dag.edges),
    }


def dag_from_dict(data: dict) -> DagSpec:
    return DagSpec(
        nodes=[_node_from_dict(n) for n in data["nodes"]],
        edges={tuple(e) for e in data["edges"]},
        hidden_dim=data["hidden_dim"],
    )


def stats_to_dict(stats: PrerunStats) -> dict:
    return {
        "num_presamples": stats.num_presamples,
        "quantiles": {
            str(i): {"q10": q.q10.tolist(), "q90": q.q90.tolist()}
            for i, q in sorted(stats.quantiles.items())
        },
        "codebooks": {
            str(i): {
                "centroids": c.centroids.tolist(),
                "fitted_on": c.fitted_on,
                "requested_k": c.requested_k,
            }
            for i, c in sorted(stats.codebooks.items())
        },
        "warnings": list(stats.warnings),
        "conventions": {
            "quantile": "linear interpolation at p*(m-1)",
            "variance_pooling": "population (divide by n)",
            "median_pooling": "even lengths average the middle pair",
        },
    }


def stats_from_dict(data: dict) -> PrerunStats:
    return PrerunStats(
        quantiles={
            int(i): QuantilePair(np.array(q["q10"]), np.array(q["q90"]))
            for i, q in data["quantiles"].items()
        },
        codebooks={
            int(i): Codebook(
                centroids=np.array(c["centroids"], dtype=float),
                fitted_on=c["fitted_on"],
                requested_k=c["requested_k"],
            )
            for i, c in data["codebooks"].items()
        },
        num_presamples=data["num_presamples"],
        warnings=list(data.get("warnings", [])),
    )


def schema_to_dict(schema: RelationalSchema, stats: PrerunStats | None = None, seeds: dict | None = None) -> dict:
    out = {
        "merged": dag_to_dict(schema.merged),
        "main_indices": list(schema.main_indices),
        "add_indices": list(schema.add_indices),
        "coupling_index": schema.coupling_index,
        "latent_edges": sorted(list(e) for e in schema.latent_edges),
    }
    if stats is not None:
        out["prerun_stats"] = stats_to_dict(stats)
    if seeds is not None:
        out["seeds"] = seeds
    return out


def schema_from_dict(data: dict) -> tuple[RelationalSchema, PrerunStats | None]:
    schema = RelationalSchema(
        merged=dag_from_dict(data["merged"]),
        main_indices=list(data["main_indices"]),
        add_indices=list(data["add_indices"]),
        coupling_index=data["coupling_index"],
        latent_edges={tuple(e) for e in data["latent_edges"]},
    )
    stats = stats_from_dict(data["prerun_stats"]) if "prerun_stats" in data else None
    return schema, stats


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def schema_fingerprint(schema_dict: dict) -> str:
    payload = {k: v for k, v in schema_dict.items() if k != "fingerprint"}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


# --- CSV -------------------------------------------------------------------

def _format_cell(value, kind: str) -> str:
    if kind == KIND_CATEGORICAL:
        return str(int(value))
    return repr(float(value))


def write_csv(table: Table, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        kinds = [c.kind for c in table.columns]
        columns = [c.values for c in table.columns]
        for r in range(table.row_count):
            writer.writerow(
                _format_cell(columns[j][r], kinds[j]) for j in range(len(columns))
            )


def read_csv_table(path: Path, column_info: list[tuple[str, str, str]]) -> Table:
    """Load a CSV written by write_csv; column_info is (name, kind, role) per column."""
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = [name for name, _, _ in column_info]
        if header != expected:
            raise InvalidConfigError(f"{path}: header {header} does not match schema {expected}")
        raw = list(reader)
    columns = []
    for j, (name, kind, role) in enumerate(column_info):
        if kind == KIND_CATEGORICAL:
            values = np.array([int(row[j]) for row in raw], dtype=np.int64)
        else:
            values = np.array([float(row[j]) for row in raw], dtype=float)
        columns.append(Column(name=name, kind=kind, role=role, values=values))
    return Table(columns=columns)


# --- DOT -------------------------------------------------------------------

def dag_to_dot(dag: DagSpec, latent_edges: set | None = None) -> str:
    """Graphviz rendering: targets green, features blue, latent edges dashed."""
    latent = latent_edges or set()
    lines = ["digraph dataset {", "  rankdir=LR;", '  node [style=filled, fontname="Helvetica"];']
    for node in dag.nodes:
        color = "#a1d99b" if node.role == "target" else "#9ecae1"
        pooling = node.pooling or "?"
        if node.pooling == "categorical" and node.category_count:
            pooling = f"cat({node.category_count})"
        lines.append(f'  "{node.name}" [label="{node.name}\\n{pooling}", fillcolor="{color}"];')
    for a, b in sorted(dag.edges):
        label = dag.node(b).activation or ""
        style = ', style=dashed, color="#e6a817"' if (a, b) in latent else ""
        lines.append(f'  "{dag.node(a).name}" -> "{dag.node(b).name}" [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def schema_to_dot(schema: RelationalSchema) -> str:
    return dag_to_dot(schema.merged, schema.latent_edges)


# --- dataset directory + manifest -------------------------------------------

def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_dataset(dataset: RelationalDataset, cfg: GenerationConfig, out_dir: str | Path) -> dict:
    """Write main.csv, additional.csv, schema.json, schema.dot, manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    seeds = {
        "master_seed": cfg.master_seed,
        "run_tags": ["structure-main", "structure-add", "compose", "prerun", "kmeans", "main", "add"],
        "derivation": SEED_DERIVATION_NOTE,
    }
    schema_dict = schema_to_dict(dataset.schema, dataset.stats, seeds)
    schema_dict["fingerprint"] = schema_fingerprint(schema_dict)
    for table in (dataset.main_table, dataset.add_table):
        table.provenance["schema_fingerprint"] = schema_dict["fingerprint"]
    (out / SCHEMA_JSON).write_text(json.dumps(schema_dict, indent=1), encoding="utf-8")
    (out / SCHEMA_DOT).write_text(schema_to_dot(dataset.schema), encoding="utf-8")
    write_csv(dataset.main_table, out / MAIN_CSV)
    write_csv(dataset.add_table, out / ADD_CSV)

    files = {name: file_sha256(out / name) for name in (MAIN_CSV, ADD_CSV, SCHEMA_JSON, SCHEMA_DOT)}
    manifest = {
        "tool": "relgen",
        "tool_version": TOOL_VERSION,
        "config": config_to_dict(cfg),
        "schema_fingerprint": schema_dict["fingerprint"],
        "files": files,
        "seed_derivation": SEED_DERIVATION_NOTE,
        "prerun_warnings": list(dataset.stats.warnings),
    }
    (out / MANIFEST_JSON).write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return manifest


def load_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def report_to_dict(report) -> dict:
    return {
        "k": report.k,
        "test_fraction": report.test_fraction,
        "rows_main": report.rows_main,
        "rows_add": report.rows_add,
        "generation_seed": report.generation_seed,
        "eval_seed": report.eval_seed,
        "schema_fingerprint": report.schema_fingerprint,
        "feature_widths": dict(report.feature_widths),
        "targets": [
            {
                "column": t.column,
                "task": t.task,
                "metric": t.metric,
                "main_only": t.main_only,
                "joined": t.joined,
                "latently_affected": t.latently_affected,
            }
            for t in report.targets
        ],
    }


def write_eval_report(report, out_dir: str | Path) -> None:
    """eval_report.json plus a flat metrics.csv (one row per target x condition)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(
        json.dumps(report_to_dict(report), indent=1), encoding="utf-8"
    )
    with (out / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["target", "task", "metric", "condition", "value", "latently_affected"])
        for t in report.targets:
            for condition, value in (("main_only", t.main_only), ("joined", t.joined)):
                writer.writerow([t.column, t.task, t.metric, condition, repr(value), t.latently_affected])


def load_dataset(dataset_dir: str | Path) -> RelationalDataset:
    """Rebuild an in-memory dataset from a generated directory."""
    from .relational import coupling_codebook_sha  # local to avoid cycles at import time

    root = Path(dataset_dir)
    schema_dict = json.loads((root / SCHEMA_JSON).read_text(encoding="utf-8"))
    schema, stats = schema_from_dict(schema_dict)
    if stats is None:
        raise InvalidConfigError(f"{root / SCHEMA_JSON} lacks prerun_stats")
    merged = schema.merged

    def info(indices: list[int]) -> list[tuple[str, str, str]]:
        out = []
        for i in indices:
            node = merged.node(i)
            kind = KIND_CATEGORICAL if node.pooling == "categorical" else "numeric"
            role = "target" if node.role == "target" else "feature"
            out.append((node.name, kind, role))
        return out

    main_info = info(list(schema.main_indices) + [schema.coupling_index])
    add_info = info(list(schema.add_indices) + [schema.coupling_index])
    main_table = read_csv_table(root / MAIN_CSV, main_info)
    add_table = read_csv_table(root / ADD_CSV, add_info)

    key_sha = coupling_codebook_sha(stats, schema.coupling_index)
    seeds = schema_dict.get("seeds", {})
    for table in (main_table, add_table):
        table.provenance["coupling_codebook_sha"] = key_sha
        table.provenance["master_seed"] = seeds.get("master_seed")
        table.provenance["schema_fingerprint"] = schema_dict.get("fingerprint")

    noise_cfg = config_from_dict(load_manifest(root / MANIFEST_JSON)["config"]).noise if (root / MANIFEST_JSON).exists() else NoiseConfig()
    return RelationalDataset(
        main_table=main_table,
        add_table=add_table,
        schema=schema,
        stats=stats,
        seed=seeds.get("master_seed", 0),
        noise=noise_cfg,
        num_presamples=stats.num_presamples,
    )
