"""Immutable CSR graph container, split masks, and the neighbor partition.

Neighbors of each center node are split into three groups using training
labels only: known-fraud, known-benign, and unknown. At evaluation time
every neighbor is forced into the unknown group so that validation and
test labels can never influence a score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRAIN = "train"
EVAL = "eval"


class GraphError(ValueError):
    """A graph invariant does not hold."""


class SplitError(ValueError):
    """A split cannot be constructed with the requested fractions."""


@dataclass(frozen=True, eq=False)
class Graph:
    num_nodes: int
    csr_offsets: np.ndarray
    csr_neighbors: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_edge_slots(self) -> int:
        """Directed adjacency entries (twice the undirected edge count)."""
        return int(self.csr_neighbors.shape[0])

    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    def neighbors(self, i: int) -> np.ndarray:
        return self.csr_neighbors[self.csr_offsets[i]:self.csr_offsets[i + 1]]


@dataclass(frozen=True, eq=False)
class Split:
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Per-center-node neighbor index sets in CSR layout, one per group."""

    fr_idx: np.ndarray
    fr_offsets: np.ndarray
    be_idx: np.ndarray
    be_offsets: np.ndarray
    un_idx: np.ndarray
    un_offsets: np.ndarray


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def build_graph(edges, features, labels) -> Graph:
    """Build a validated symmetric CSR graph from an undirected edge list.

    Duplicate edges collapse, self-loops are dropped, and both directions
    are inserted so adjacency is symmetric by construction.
    """
    features = np.array(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise GraphError("features must be a non-empty 2-D matrix")
    if not np.isfinite(features).all():
        raise GraphError("features contain NaN or Inf")
    n = features.shape[0]

    labels = np.array(labels, dtype=np.uint8).reshape(-1)
    if labels.shape[0] != n:
        raise GraphError(f"labels length {labels.shape[0]} != num_nodes {n}")
    if labels.size and labels.max() > 1:
        raise GraphError("labels must be binary")

    edges = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64).reshape(-1, 2)
    if edges.size:
        if edges.min() < 0 or edges.max() >= n:
            raise GraphError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
    if edges.size:
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        keys = np.unique(both[:, 0] * n + both[:, 1])
        src = keys // n
        dst = keys % n
    else:
        src = np.zeros(0, dtype=np.int64)
        dst = np.zeros(0, dtype=np.int64)

    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    g = Graph(
        num_nodes=n,
        csr_offsets=_freeze(offsets),
        csr_neighbors=_freeze(dst),
        features=_freeze(features),
        labels=_freeze(labels),
    )
    validate_graph(g)
    return g


def validate_graph(g: Graph) -> None:
    """Check every Graph invariant; raise GraphError on the first failure."""
    off, nbr = g.csr_offsets, g.csr_neighbors
    n = g.num_nodes
    if n <= 0:
        raise GraphError("graph has zero nodes")
    if off.shape != (n + 1,) or off[0] != 0 or off[-1] != nbr.shape[0]:
        raise GraphError("csr_offsets inconsistent with csr_neighbors")
    if (np.diff(off) < 0).any():
        raise GraphError("csr_offsets not nondecreasing")
    if nbr.size:
        if nbr.min() < 0 or nbr.max() >= n:
            raise GraphError("neighbor index out of range")
        rows = np.repeat(np.arange(n), np.diff(off))
        if (nbr == rows).any():
            raise GraphError("self-loop present")
        # sorted rows make duplicates adjacent
        same_row = rows[1:] == rows[:-1]
        if (np.diff(nbr) <= 0)[same_row].any():
            raise GraphError("row not strictly sorted (duplicate or unsorted neighbor)")
        keys = rows * n + nbr
        rkeys = np.sort(nbr * n + rows)
        if not np.array_equal(keys, rkeys):
            raise GraphError("adjacency not symmetric")
    if g.features.shape[0] != n:
        raise GraphError("feature row count != num_nodes")
    if not np.isfinite(g.features).all():
        raise GraphError("features contain NaN or Inf")
    if g.labels.shape != (n,):
        raise GraphError("labels length != num_nodes")
    if g.labels.size and g.labels.max() > 1:
        raise GraphError("labels must be binary")


def edge_list(g: Graph) -> np.ndarray:
    """Undirected edge pairs (i < j), one row per edge."""
    rows = np.repeat(np.arange(g.num_nodes), g.degrees())
    keep = rows < g.csr_neighbors
    return np.stack([rows[keep], g.csr_neighbors[keep]], axis=1)


def with_features(g: Graph, features: np.ndarray) -> Graph:
    """Same topology and labels, different feature matrix."""
    features = np.array(features, dtype=g.features.dtype)
    if features.shape != g.features.shape:
        raise GraphError("replacement features must keep the same shape")
    return Graph(g.num_nodes, g.csr_offsets, g.csr_neighbors, _freeze(features), g.labels)


def with_labels(g: Graph, labels: np.ndarray) -> Graph:
    """Same topology and features, different binary labels."""
    labels = np.array(labels, dtype=np.uint8).reshape(-1)
    if labels.shape != g.labels.shape or (labels.size and labels.max() > 1):
        raise GraphError("replacement labels must be binary and the same length")
    return Graph(g.num_nodes, g.csr_offsets, g.csr_neighbors, g.features, _freeze(labels))


def make_split(g: Graph, fractions, seed: int) -> Split:
    """Deterministic stratified split; each mask keeps both classes.

    Each class is permuted by a seeded generator and sliced by the
    cumulative fractions, so identical (g, fractions, seed) gives
    bit-identical masks. Fractions may sum to less than 1; the remainder
    is left out of every mask.
    """
    f_tr, f_va, f_te = (float(f) for f in fractions)
    if min(f_tr, f_va, f_te) < 0 or f_tr + f_va + f_te > 1 + 1e-12:
        raise SplitError("fractions must be nonnegative and sum to at most 1")
    rng = np.random.default_rng(seed)
    masks = [np.zeros(g.num_nodes, dtype=bool) for _ in range(3)]
    cuts = np.array([f_tr, f_tr + f_va, f_tr + f_va + f_te])
    for c in (0, 1):
        members = np.flatnonzero(g.labels == c)
        perm = rng.permutation(members)
        b = np.rint(cuts * members.size).astype(int)
        pieces = (perm[:b[0]], perm[b[0]:b[1]], perm[b[1]:b[2]])
        for mask, piece in zip(masks, pieces):
            mask[piece] = True
    for name, mask in zip(("train", "val", "test"), masks):
        for c in (0, 1):
            if not (mask & (g.labels == c)).any():
                raise SplitError(f"{name} mask has no nodes of class {c}")
    return Split(*(_freeze(m) for m in masks))


def _empty_partition_row(n: int):
    return np.zeros(0, dtype=np.int64), np.zeros(n + 1, dtype=np.int64)


def partition_neighbors(g: Graph, split: Split, mode: str) -> GroupPartition:
    """Group each node's neighbors by training label, or force all unknown.

    Train mode: neighbor j lands in the fraud group when it is a training
    node with label 1, in the benign group when a training node with
    label 0, and in the unknown group otherwise. Eval mode ignores labels
    entirely and puts every neighbor in the unknown group.
    """
    if mode not in (TRAIN, EVAL):
        raise ValueError(f"mode must be {TRAIN!r} or {EVAL!r}, got {mode!r}")
    n = g.num_nodes
    if mode == EVAL:
        fr_idx, fr_off = _empty_partition_row(n)
        be_idx, be_off = _empty_partition_row(n)
        return GroupPartition(
            _freeze(fr_idx), _freeze(fr_off),
            _freeze(be_idx), _freeze(be_off),
            g.csr_neighbors, g.csr_offsets,
        )
    nbr = g.csr_neighbors
    rows = np.repeat(np.arange(n), g.degrees())
    in_train = split.train_mask[nbr]
    is_fraud = g.labels[nbr] == 1
    parts = []
    for sel in (in_train & is_fraud, in_train & ~is_fraud, ~in_train):
        idx = nbr[sel]
        off = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows[sel], minlength=n), out=off[1:])
        parts.extend([_freeze(idx), _freeze(off)])
    return GroupPartition(*parts)
