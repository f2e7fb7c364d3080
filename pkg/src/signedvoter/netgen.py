"""Synthetic signed networks built by merging a positive and a negative graph.

The positive component spans all ``n`` nodes; the negative component lives on
``round(p * n)`` nodes that are mapped onto positive-component nodes chosen by
a placement rule. All synthetic graphs are undirected with unit weights.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .graph import GraphError, SignedGraph, undirected

log = logging.getLogger(__name__)

KINDS = ("regular", "core_periphery", "erdos_renyi", "scale_free")
PLACEMENTS = ("random", "high_degree", "low_degree")


class GenerationError(GraphError):
    pass


@dataclass(frozen=True)
class ComponentSpec:
    """``params`` by kind: regular ``(k,)``; core_periphery ``(k_high, k_low, fraction_high)``;
    erdos_renyi ``(mean_degree,)``; scale_free ``(m,)`` attachment count."""

    kind: str
    n: int
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GenerationError(f"unknown component kind {self.kind!r}")
        if self.n < 1:
            raise GenerationError("component needs at least one node")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))

    @property
    def mean_degree(self) -> float:
        if self.kind == "core_periphery":
            hi, lo, frac = self.params
            return frac * hi + (1 - frac) * lo
        if self.kind == "scale_free":
            return 2 * self.params[0]
        return self.params[0]


@dataclass(frozen=True)
class MergePlan:
    p: float
    placement: str = "random"
    mean_negative_degree: float | None = None

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise GenerationError("p must lie in (0, 1]")
        if self.placement not in PLACEMENTS:
            raise GenerationError(f"unknown placement {self.placement!r}")

    def size(self, n: int) -> int:
        return max(1, int(math.floor(self.p * n + 0.5)))


@dataclass
class GenerationStats:
    conflicts: int = 0
    negative_nodes_requested: int = 0
    extra: dict = field(default_factory=dict)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def pseudo_regular_degrees(n: int, k: float, rng: np.random.Generator) -> np.ndarray:
    """Degrees ``floor(k)`` or ``floor(k)+1`` with mean within ``1/n`` of ``k`` and even sum."""
    base = int(math.floor(k))
    target = (k - base) * n
    extra = int(math.floor(target + 0.5))
    if (base * n + extra) % 2:
        # move to whichever neighbouring count is closer to the target
        extra = extra + 1 if (extra + 1 - target) <= (target - (extra - 1)) and extra + 1 <= n else extra - 1
    if extra < 0 or extra > n or (base * n + extra) % 2:
        raise GenerationError(f"cannot realise mean degree {k} on {n} nodes with even degree sum")
    deg = np.full(n, base, dtype=np.int64)
    deg[rng.choice(n, size=extra, replace=False)] += 1
    return deg


def configuration_model(degrees, rng=None) -> np.ndarray:
    """Simple graph with the exact degree sequence via stub matching plus rewiring.

    Self-loops and multi-edges left by the random matching are removed with
    degree-preserving double-edge swaps; at most ``100 * |E|`` swaps are tried.
    Returns an ``(m, 2)`` array of unordered pairs.
    """
    rng = _rng(rng)
    deg = np.asarray(degrees, dtype=np.int64)
    n = len(deg)
    if np.any(deg < 0) or (len(deg) and deg.max() >= n):
        raise GenerationError("every degree must lie in [0, n)")
    if deg.sum() % 2:
        raise GenerationError("degree sum must be even")
    stubs = np.repeat(np.arange(n), deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    pairs.sort(axis=1)
    m = len(pairs)
    if m == 0:
        return pairs

    edges = [tuple(e) for e in pairs.tolist()]
    count: dict[tuple, int] = {}
    for e in edges:
        count[e] = count.get(e, 0) + 1
    bad = [i for i, e in enumerate(edges) if e[0] == e[1] or count[e] > 1]
    # only one copy of a multi-edge needs rewiring
    seen = set()
    pending = []
    for i in bad:
        e = edges[i]
        if e[0] != e[1] and e not in seen:
            seen.add(e)
            continue
        pending.append(i)

    budget = 100 * m
    tries = 0
    while pending:
        if tries >= budget:
            raise GenerationError(f"rewiring did not produce a simple graph within {budget} swaps")
        tries += 1
        i = pending[-1]
        j = int(rng.integers(m))
        if j == i:
            continue
        a, b = edges[i]
        c, d = edges[j]
        if rng.random() < 0.5:
            c, d = d, c
        e1 = (min(a, c), max(a, c))
        e2 = (min(b, d), max(b, d))
        if e1[0] == e1[1] or e2[0] == e2[1] or e1 == e2:
            continue
        if count.get(e1, 0) or count.get(e2, 0):
            continue
        j_was_bad = edges[j][0] == edges[j][1] or count[edges[j]] > 1
        for e in (edges[i], edges[j]):
            count[e] -= 1
            if count[e] == 0:
                del count[e]
        edges[i], edges[j] = e1, e2
        count[e1] = 1
        count[e2] = 1
        pending.pop()
        if j_was_bad and j in pending:
            pending.remove(j)
    out = np.array(edges, dtype=np.int64)
    return out[np.lexsort((out[:, 1], out[:, 0]))]


def _pairs_from_nx(G) -> np.ndarray:
    pairs = np.array(sorted((min(u, v), max(u, v)) for u, v in G.edges()), dtype=np.int64)
    return pairs.reshape(-1, 2)


def generate_component(spec: ComponentSpec, rng_seed=None) -> SignedGraph:
    """All-positive undirected unit-weight graph for ``spec``."""
    rng = _rng(rng_seed)
    n = spec.n
    if spec.kind == "regular":
        (k,) = spec.params
        if k >= n or k < 0:
            raise GenerationError(f"regular degree {k} infeasible on {n} nodes")
        if float(k).is_integer():
            if (int(k) * n) % 2:
                raise GenerationError(f"n*k = {n}*{int(k)} is odd; no simple {int(k)}-regular graph exists")
            deg = np.full(n, int(k), dtype=np.int64)
        else:
            if math.floor(k) + 1 >= n:
                raise GenerationError(f"pseudo-regular degree {k} infeasible on {n} nodes")
            deg = pseudo_regular_degrees(n, k, rng)
        pairs = configuration_model(deg, rng)
    elif spec.kind == "core_periphery":
        k_high, k_low, frac = spec.params
        n_high = int(math.floor(frac * n + 0.5))
        if not 0 < n_high <= n:
            raise GenerationError("core fraction leaves the core empty")
        if max(k_high, k_low) >= n:
            raise GenerationError("core-periphery degree infeasible")
        deg = np.empty(n, dtype=np.int64)
        # non-integer class degrees become a floor/ceil mix within that class
        deg[:n_high] = _class_degrees(n_high, k_high, rng)
        deg[n_high:] = _class_degrees(n - n_high, k_low, rng)
        if deg.sum() % 2:
            fixable = np.flatnonzero(deg[n_high:] == math.floor(k_low)) + n_high if not float(k_low).is_integer() else np.array([], dtype=np.int64)
            if len(fixable) == 0 and not float(k_high).is_integer():
                fixable = np.flatnonzero(deg[:n_high] == math.floor(k_high))
            if len(fixable) == 0:
                raise GenerationError("core-periphery degree sum is odd and cannot be fixed")
            deg[rng.choice(fixable)] += 1
        pairs = configuration_model(deg, rng)
    elif spec.kind == "erdos_renyi":
        (k,) = spec.params
        m = int(math.floor(n * k / 2 + 0.5))
        if m > n * (n - 1) // 2:
            raise GenerationError("too many edges requested for G(n, m)")
        G = nx.gnm_random_graph(n, m, seed=int(rng.integers(2**32)))
        pairs = _pairs_from_nx(G)
    else:
        (m,) = spec.params
        m = int(m)
        if not 1 <= m < n:
            raise GenerationError(f"attachment count {m} infeasible on {n} nodes")
        G = nx.barabasi_albert_graph(n, m, seed=int(rng.integers(2**32)))
        pairs = _pairs_from_nx(G)
    return undirected(n, pairs, 1.0, meta={"component": spec.kind, "params": spec.params})


def _class_degrees(size: int, k: float, rng) -> np.ndarray:
    if float(k).is_integer():
        return np.full(size, int(k), dtype=np.int64)
    base = int(math.floor(k))
    extra = int(math.floor((k - base) * size + 0.5))
    deg = np.full(size, base, dtype=np.int64)
    deg[rng.choice(size, size=extra, replace=False)] += 1
    return deg


def _undirected_pairs(g: SignedGraph) -> np.ndarray:
    keep = g.source < g.target
    return np.stack([g.source[keep], g.target[keep]], axis=1)


def choose_negative_hosts(positive: SignedGraph, size: int, placement: str, rng) -> np.ndarray:
    """Pick ``size`` positive-component nodes to host negative-component nodes.

    ``high_degree``/``low_degree`` take nodes by positive degree with random tie
    breaking, so once a degree class is exhausted the remainder spills over to
    randomly chosen nodes of the next class.
    """
    n = positive.n
    if size > n:
        raise GenerationError("negative component larger than positive component")
    if placement == "random":
        return rng.choice(n, size=size, replace=False)
    deg = positive.pos_in_strength
    tiebreak = rng.random(n)
    if placement == "high_degree":
        order = np.lexsort((tiebreak, -deg))
    elif placement == "low_degree":
        order = np.lexsort((tiebreak, deg))
    else:
        raise GenerationError(f"unknown placement {placement!r}")
    return order[:size]


def merge_signed(positive: SignedGraph, negative: SignedGraph, plan: MergePlan, rng_seed=None) -> SignedGraph:
    """Superimpose ``negative`` (weight -1) onto ``positive``.

    A pair joined by both a positive and a negative edge keeps the positive
    one; the number of dropped negative ties is recorded in ``meta``.
    """
    rng = _rng(rng_seed)
    size = plan.size(positive.n)
    if negative.n != size:
        raise GenerationError(f"negative component has {negative.n} nodes, plan needs {size}")
    hosts = choose_negative_hosts(positive, size, plan.placement, rng)
    hosts = hosts[rng.permutation(size)]

    pos_pairs = _undirected_pairs(positive)
    neg_pairs = hosts[_undirected_pairs(negative)]
    neg_pairs.sort(axis=1)
    key = lambda pr: pr[:, 0] * positive.n + pr[:, 1]
    clash = np.isin(key(neg_pairs), key(pos_pairs))
    conflicts = int(np.count_nonzero(clash))
    if conflicts:
        log.info("dropped %d negative ties overlapping positive edges", conflicts)
    neg_pairs = neg_pairs[~clash]

    pairs = np.concatenate([pos_pairs, neg_pairs])
    w = np.concatenate([np.ones(len(pos_pairs)), -np.ones(len(neg_pairs))])
    meta = {
        "conflicts": conflicts,
        "negative_nodes_requested": size,
        "placement": plan.placement,
        "p": plan.p,
        "hosts": np.sort(hosts),
    }
    g = undirected(positive.n, pairs, w, meta=meta)
    meta["negative_nodes_realised"] = int(np.count_nonzero(g.has_negative))
    meta["negative_edge_fraction"] = g.negative_fraction
    return g


# ---------------------------------------------------------------------------
# named topologies used throughout the experiments

TOPOLOGIES = (
    "reg-reg", "cp-reg-high", "cp-reg-low", "cp-reg-rand", "reg-cp",
    "reg-er", "reg-sf", "sf-reg",
)


def negative_component_spec(topology: str, size: int, p: float, kb: float) -> ComponentSpec:
    k_neg = kb / p
    if topology in ("reg-reg", "cp-reg-high", "cp-reg-low", "cp-reg-rand", "sf-reg"):
        return ComponentSpec("regular", size, (k_neg,))
    if topology == "reg-cp":
        return ComponentSpec("core_periphery", size, (2 * (k_neg - 1), 2, 0.5))
    if topology == "reg-er":
        return ComponentSpec("erdos_renyi", size, (k_neg,))
    if topology == "reg-sf":
        return ComponentSpec("scale_free", size, (max(1, int(math.floor(k_neg / 2 + 0.5))),))
    raise GenerationError(f"unknown topology {topology!r}")


def positive_component_spec(topology: str, n: int, ka: float, cp_high: float = 30, cp_low: float = 2) -> ComponentSpec:
    if topology.startswith("cp-"):
        return ComponentSpec("core_periphery", n, (cp_high, cp_low, 0.5))
    if topology == "sf-reg":
        return ComponentSpec("scale_free", n, (max(1, int(math.floor(ka / 2 + 0.5))),))
    if topology in TOPOLOGIES:
        return ComponentSpec("regular", n, (ka,))
    raise GenerationError(f"unknown topology {topology!r}")


def placement_for(topology: str) -> str:
    return {"cp-reg-high": "high_degree", "cp-reg-low": "low_degree"}.get(topology, "random")


def make_topology(topology: str, n: int = 1000, p: float = 0.5, ka: float = 16, kb: float = 4,
                  seed=None) -> SignedGraph:
    """Generate one of the named signed topologies, e.g. ``cp-reg-high``."""
    topology = topology.lower()
    plan = MergePlan(p, placement_for(topology), kb)
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    s_pos, s_neg, s_merge = (np.random.default_rng(s) for s in ss.spawn(3))
    positive = generate_component(positive_component_spec(topology, n, ka), s_pos)
    size = plan.size(n)
    negative = generate_component(negative_component_spec(topology, size, p, kb), s_neg)
    g = merge_signed(positive, negative, plan, s_merge)
    g.meta["topology"] = topology
    return g


def parse_component(text: str, n: int) -> ComponentSpec:
    """Parse ``kind:param,param`` (e.g. ``regular:16``, ``core_periphery:30,2,0.5``)."""
    kind, _, rest = text.partition(":")
    aliases = {"reg": "regular", "cp": "core_periphery", "er": "erdos_renyi", "sf": "scale_free", "ba": "scale_free"}
    kind = aliases.get(kind.strip().lower(), kind.strip().lower())
    params = tuple(float(v) for v in rest.split(",") if v.strip())
    return ComponentSpec(kind, n, params)
