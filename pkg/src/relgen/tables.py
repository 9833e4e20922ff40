"""Main sampling run: pooling node vectors to scalars and assembling tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import NoiseConfig, propagate_rows
from .errors import ContractViolationError, InvalidParameterError
from .graphs import ROLE_TARGET, DagSpec
from .prerun import Codebook, PrerunStats

KIND_NUMERIC = "numeric"
KIND_CATEGORICAL = "categorical"

_CAT_CHUNK = 8192


@dataclass
class Column:
    name: str
    kind: str  # numeric | categorical
    role: str  # feature | target
    values: np.ndarray  # float64 or int64


@dataclass
class Table:
    columns: list[Column]
    provenance: dict = field(default_factory=dict)

    @property
    def row_count(self) -> int:
        return int(len(self.columns[0].values)) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)

    def slice(self, start: int, stop: int) -> "Table":
        cols = [Column(c.name, c.kind, c.role, c.values[start:stop]) for c in self.columns]
        return Table(columns=cols, provenance=dict(self.provenance))


def pool(x: np.ndarray, pooling: str, codebook: Codebook | None = None):
    """Reduce one node vector to a scalar readout.

    Numeric kinds: Euclidean norm, arithmetic mean, component median (even
    lengths average the middle pair), or population variance. Categorical:
    index of the nearest centroid, ties to the lowest index.
    """
    if pooling == "categorical":
        if codebook is None:
            raise ContractViolationError("categorical pooling requires a fitted codebook")
        d2 = ((codebook.centroids - x) ** 2).sum(axis=1)
        return int(np.argmin(d2))
    if codebook is not None:
        raise ContractViolationError(f"codebook passed for {pooling} pooling")
    if pooling == "norm":
        return float(np.sqrt((x * x).sum()))
    if pooling == "mean":
        return float(np.mean(x))
    if pooling == "median":
        return float(np.median(x))
    if pooling == "variance":
        return float(np.var(x))
    raise InvalidParameterError(f"unknown pooling kind {pooling!r}")


def pool_batch(matrix: np.ndarray, pooling: str, codebook: Codebook | None = None) -> np.ndarray:
    """Vectorized pooling of a (rows, n) matrix."""
    if pooling == "categorical":
        if codebook is None:
            raise ContractViolationError("categorical pooling requires a fitted codebook")
        out = np.empty(len(matrix), dtype=np.int64)
        for start in range(0, len(matrix), _CAT_CHUNK):
            block = matrix[start : start + _CAT_CHUNK]
            d2 = ((block[:, None, :] - codebook.centroids[None, :, :]) ** 2).sum(axis=2)
            out[start : start + _CAT_CHUNK] = np.argmin(d2, axis=1)
        return out
    if pooling == "norm":
        return np.sqrt((matrix * matrix).sum(axis=1))
    if pooling == "mean":
        return matrix.mean(axis=1)
    if pooling == "median":
        return np.median(matrix, axis=1)
    if pooling == "variance":
        return matrix.var(axis=1)
    raise InvalidParameterError(f"unknown pooling kind {pooling!r}")


def generate_table(
    dag: DagSpec,
    stats: PrerunStats,
    num_rows: int,
    noise: NoiseConfig,
    seed: int,
    run_tag: str = "main",
    threads: int = 1,
) -> Table:
    """Sample ``num_rows`` rows over the annotated graph and pool every node.

    Columns follow node-index order. Row r draws all of its randomness from
    the sub-stream (seed, run_tag, r), so output is independent of threading.
    """
    if not stats.covers(dag):
        raise ContractViolationError("pre-run stats do not cover the graph")
    matrices = propagate_rows(
        dag, num_rows, seed, run_tag, noise=noise, quantiles=stats.quantiles, threads=threads
    )
    columns = []
    for node in dag.nodes:
        values = pool_batch(matrices[node.index], node.pooling, stats.codebooks.get(node.index))
        kind = KIND_CATEGORICAL if node.pooling == "categorical" else KIND_NUMERIC
        role = ROLE_TARGET if node.role == ROLE_TARGET else "feature"
        columns.append(Column(name=node.name, kind=kind, role=role, values=values))
    provenance = {"seed": seed, "run_tag": run_tag, "rows": num_rows}
    return Table(columns=columns, provenance=provenance)
