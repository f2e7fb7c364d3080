"""Signed directed weighted graphs.

Edges are stored as influence edges ``source -> target`` with a nonzero real
weight: a positive weight means ``target`` copies ``source``, a negative weight
means ``target`` adopts the opposite opinion. Everything downstream aggregates
*incoming* influence, so the sparse views are row-oriented over targets.
"""
from __future__ import annotations

import csv
import gzip
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

TRANSFORM_MODES = ("identity", "mirror_positive", "drop_negative")


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Immutable signed graph on nodes ``0..n-1``.

    ``labels[i]`` is the external id of node ``i`` (defaults to ``i``).
    ``meta`` carries free-form provenance, e.g. merge statistics.
    """

    n: int
    source: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    labels: tuple = ()
    directed: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        src = np.asarray(self.source, dtype=np.int64)
        dst = np.asarray(self.target, dtype=np.int64)
        w = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == w.shape) or src.ndim != 1:
            raise GraphError("source, target and weight must be 1-d arrays of equal length")
        if self.n < 0:
            raise GraphError("negative node count")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n):
            raise GraphError("edge endpoint out of range")
        if np.any(src == dst):
            raise GraphError("self-loops are not allowed")
        if np.any(w == 0) or not np.all(np.isfinite(w)):
            raise GraphError("edge weights must be finite and nonzero")
        # canonical order: by target, then source (row-oriented over incoming edges)
        order = np.lexsort((src, dst))
        src, dst, w = src[order], dst[order], w[order]
        if len(src) > 1:
            dup = (np.diff(dst) == 0) & (np.diff(src) == 0)
            if np.any(dup):
                raise GraphError("duplicate ordered (source, target) pair")
        for arr in (src, dst, w):
            arr.setflags(write=False)
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", dst)
        object.__setattr__(self, "weight", w)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(self.n)))
        elif len(self.labels) != self.n:
            raise GraphError("labels must have one entry per node")

    @property
    def num_edges(self) -> int:
        return len(self.weight)

    @cached_property
    def pos_in_strength(self) -> np.ndarray:
        w = np.where(self.weight > 0, self.weight, 0.0)
        out = np.bincount(self.target, weights=w, minlength=self.n)
        out.setflags(write=False)
        return out

    @cached_property
    def neg_in_strength(self) -> np.ndarray:
        w = np.where(self.weight < 0, -self.weight, 0.0)
        out = np.bincount(self.target, weights=w, minlength=self.n)
        out.setflags(write=False)
        return out

    @cached_property
    def in_matrix(self) -> sp.csr_matrix:
        """``W_in[i, j] = w_ji``: row ``i`` lists the influence received by ``i``."""
        return sp.csr_matrix((self.weight, (self.target, self.source)), shape=(self.n, self.n))

    @cached_property
    def symmetric(self) -> bool:
        """True when every edge has a mirror of equal weight (an undirected graph)."""
        if not self.directed:
            return True
        W = self.in_matrix
        return (W != W.T).nnz == 0

    @cached_property
    def has_negative(self) -> np.ndarray:
        """Boolean mask of nodes receiving at least one negative edge."""
        out = self.neg_in_strength > 0
        out.setflags(write=False)
        return out

    @property
    def negative_fraction(self) -> float:
        if self.num_edges == 0:
            return 0.0
        return float(np.count_nonzero(self.weight < 0) / self.num_edges)

    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.source.tolist(), self.target.tolist(), self.weight.tolist()))

    def __eq__(self, other):
        if not isinstance(other, SignedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and tuple(self.labels) == tuple(other.labels)
            and np.array_equal(self.source, other.source)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"SignedGraph(n={self.n}, edges={self.num_edges}, "
            f"negative={np.count_nonzero(self.weight < 0)}, directed={self.directed})"
        )


def from_arrays(n, source, target, weight, *, directed=True, labels=(), meta=None) -> SignedGraph:
    return SignedGraph(n, source, target, weight, labels=tuple(labels), directed=directed, meta=dict(meta or {}))


def undirected(n, pairs, weight=1.0, **kw) -> SignedGraph:
    """Build a symmetric graph from unordered pairs (each becomes two directed edges)."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    w = np.broadcast_to(np.asarray(weight, dtype=float), (len(pairs),))
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return SignedGraph(n, src, dst, np.concatenate([w, w]), directed=False, **kw)


def _compact_ids(tokens: Sequence[Hashable]) -> tuple[list, dict]:
    uniq = list(dict.fromkeys(tokens))
    try:
        uniq = sorted(uniq)
    except TypeError:
        pass
    return uniq, {tok: i for i, tok in enumerate(uniq)}


def from_edge_list(rows: Iterable[Sequence], directed: bool = True) -> SignedGraph:
    """Build an influence graph from ``(rater, ratee, rating)`` rows.

    A rating of ``ratee`` by ``rater`` means the rater follows the ratee, so it
    becomes the influence edge ``ratee -> rater`` with the rating as weight.
    Repeated ``(rater, ratee)`` pairs keep the last rating. With
    ``directed=False`` every edge is mirrored (the last rating of either
    orientation wins for the pair).
    """
    latest: dict[tuple, float] = {}
    count = changed = 0
    for lineno, row in enumerate(rows, start=1):
        rater, ratee, rating = row[0], row[1], float(row[2])
        if rating == 0:
            raise GraphError(f"zero rating in row {lineno}: {tuple(row)!r}")
        if rater == ratee:
            raise GraphError(f"self-rating in row {lineno}: {tuple(row)!r}")
        key = (rater, ratee) if directed else tuple(sorted((rater, ratee), key=repr))
        if key in latest:
            changed += latest.pop(key) != rating  # re-insert so dict order reflects the last occurrence
        latest[key] = rating
        count += 1
    if count == 0:
        raise GraphError("empty edge list")
    if changed:
        log.warning("%d duplicate rating rows superseded by later rows with a different rating", changed)

    tokens = [t for pair in latest for t in pair]
    labels, index = _compact_ids(tokens)
    raters = np.fromiter((index[a] for a, _ in latest), dtype=np.int64, count=len(latest))
    ratees = np.fromiter((index[b] for _, b in latest), dtype=np.int64, count=len(latest))
    w = np.fromiter(latest.values(), dtype=np.float64, count=len(latest))
    if directed:
        src, dst = ratees, raters
    else:
        src, dst, w = np.concatenate([ratees, raters]), np.concatenate([raters, ratees]), np.concatenate([w, w])
    return SignedGraph(len(labels), src, dst, w, labels=tuple(labels), directed=directed)


def _parse_token(tok: str):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        return tok


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_edge_csv(path: str | Path, directed: bool = True) -> SignedGraph:
    """Read ``SOURCE,TARGET,RATING[,TIMESTAMP]`` rows (optionally gzipped).

    A first line whose rating column is not numeric is treated as a header.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", newline="") as fh:
        return from_edge_list(_iter_csv_rows(fh), directed=directed)


def _iter_csv_rows(fh):
    reader = csv.reader(fh)
    first = True
    for row in reader:
        if not row or not "".join(row).strip():
            continue
        if len(row) < 3:
            raise GraphError(f"expected at least 3 columns, got {row!r}")
        if first:
            first = False
            if not _is_number(row[2]):
                continue
        yield _parse_token(row[0]), _parse_token(row[1]), float(row[2])


def to_edge_rows(g: SignedGraph) -> list[tuple]:
    """Rating rows ``(rater, ratee, rating)`` sorted by internal ``(rater, ratee)``."""
    order = np.lexsort((g.source, g.target))  # rater = target, ratee = source
    labels = g.labels
    return [
        (labels[g.target[k]], labels[g.source[k]], g.weight[k])
        for k in order
    ]


def _fmt_weight(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else repr(float(w))


def write_edge_csv(g: SignedGraph, path: str | Path | io.TextIOBase, header: bool = True) -> None:
    """Write ``g`` in the same dialect :func:`read_edge_csv` accepts."""
    close = False
    if isinstance(path, (str, Path)):
        fh = open(path, "w", newline="")
        close = True
    else:
        fh = path
    try:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(["SOURCE", "TARGET", "RATING"])
        for rater, ratee, w in to_edge_rows(g):
            writer.writerow([rater, ratee, _fmt_weight(w)])
    finally:
        if close:
            fh.close()


def write_node_map(g: SignedGraph, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "label"])
        for i, lab in enumerate(g.labels):
            writer.writerow([i, lab])


def laplacian(g: SignedGraph) -> sp.csr_matrix:
    """Signed Laplacian ``L = diag(k_a + k_b) - W_in``.

    Diagonal: total absolute incoming strength. Off-diagonal ``L_ij = -w_ji``.
    """
    diag = sp.diags(g.pos_in_strength + g.neg_in_strength, format="csr")
    return (diag - g.in_matrix).tocsr()


def transform(g: SignedGraph, mode: str) -> SignedGraph:
    """World-view transforms: ``mirror_positive`` (|w|), ``drop_negative`` (max(0, w))."""
    if mode == "identity":
        src, dst, w = g.source, g.target, g.weight
    elif mode == "mirror_positive":
        src, dst, w = g.source, g.target, np.abs(g.weight)
    elif mode == "drop_negative":
        keep = g.weight > 0
        src, dst, w = g.source[keep], g.target[keep], g.weight[keep]
    else:
        raise GraphError(f"unknown transform mode {mode!r}; expected one of {TRANSFORM_MODES}")
    return SignedGraph(g.n, src.copy(), dst.copy(), w.copy(), labels=g.labels, directed=g.directed, meta=dict(g.meta))


def subgraph(g: SignedGraph, nodes: Sequence[int]) -> SignedGraph:
    """Induced subgraph on ``nodes`` (kept in ascending order), ids compacted."""
    nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    keep = (remap[g.source] >= 0) & (remap[g.target] >= 0)
    labels = tuple(g.labels[i] for i in nodes)
    return SignedGraph(
        len(nodes), remap[g.source[keep]], remap[g.target[keep]], g.weight[keep].copy(),
        labels=labels, directed=g.directed, meta=dict(g.meta),
    )


def weak_components(g: SignedGraph) -> np.ndarray:
    if g.n == 0:
        return np.zeros(0, dtype=np.int64)
    adj = sp.csr_matrix((np.ones(g.num_edges), (g.source, g.target)), shape=(g.n, g.n))
    _, comp = connected_components(adj, directed=True, connection="weak")
    return comp


def largest_connected_component(g: SignedGraph) -> SignedGraph:
    """Largest weakly connected component; ties go to the one holding the lowest node id."""
    if g.n == 0:
        raise GraphError("empty graph")
    comp = weak_components(g)
    sizes = np.bincount(comp)
    best = int(np.argmax(sizes))  # labels are assigned in order of lowest node, so ties resolve to it
    return subgraph(g, np.flatnonzero(comp == best))


def degree_profile(g: SignedGraph) -> list[tuple[float, float]]:
    return list(zip(g.pos_in_strength.tolist(), g.neg_in_strength.tolist()))
