"""Sparse undirected graphs, learnable edge masks, and normalized operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, logit


class GraphError(ValueError):
    """Raised for malformed graph inputs."""


@dataclass(frozen=True)
class SparseGraph:
    """Immutable undirected graph with node features and binary labels.

    Edges are stored once each in canonical order (i < j, lexicographically
    sorted). Labels are +1/-1 and are meant for evaluation and synthetic-data
    bookkeeping; training code only reads them through metrics.
    """

    n: int
    edges: np.ndarray     # (m, 2) int64, i < j per row
    features: np.ndarray  # (n, D) float64
    labels: np.ndarray    # (n,) int64 in {+1, -1}

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        if self.m:
            np.add.at(d, self.edges[:, 0], 1)
            np.add.at(d, self.edges[:, 1], 1)
        return d


def build_graph(n, edges, features, labels) -> SparseGraph:
    """Validate and canonicalize raw inputs into a SparseGraph.

    Symmetric duplicates collapse to one stored edge. Self-loops and
    out-of-range endpoints are rejected, naming the offending pair.
    """
    if n <= 0:
        raise GraphError("node count must be positive")
    canon = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise GraphError(f"edge ({i}, {j}): self-loop")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}): index out of range for n={n}")
        canon.add((i, j) if i < j else (j, i))
    edge_arr = np.array(sorted(canon), dtype=np.int64).reshape(-1, 2)

    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != n:
        raise GraphError(
            f"feature matrix has {features.shape[0] if features.ndim == 2 else '?'} rows, expected {n}"
        )
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise GraphError(f"label vector has shape {labels.shape}, expected ({n},)")
    bad = np.flatnonzero((labels != 1) & (labels != -1))
    if bad.size:
        raise GraphError(f"label row {bad[0]}: value {labels[bad[0]]} not in {{+1, -1}}")
    return SparseGraph(n=n, edges=edge_arr, features=features, labels=labels)


@dataclass
class EdgeMask:
    """Learnable per-edge weights, one raw parameter per undirected edge.

    weight(e) = sigmoid(theta_e), so weights stay in (0, 1) and the edge
    stays symmetric by construction (a single parameter serves both
    directions). Aligned with SparseGraph.edges row order.
    """

    theta: np.ndarray  # (m,) float64

    def weights(self) -> np.ndarray:
        return expit(self.theta)

    def copy(self) -> "EdgeMask":
        return EdgeMask(self.theta.copy())


def init_mask(g: SparseGraph, w0: float = 0.95) -> EdgeMask:
    """Mask starting near the unmasked graph (all weights = w0)."""
    if not 0.0 < w0 < 1.0:
        raise GraphError("initial weight must lie in (0, 1)")
    return EdgeMask(np.full(g.m, logit(w0), dtype=np.float64))


def _masked_adjacency(g: SparseGraph, mask: EdgeMask | None) -> sp.csr_matrix:
    w = np.ones(g.m) if mask is None else mask.weights()
    if g.m == 0:
        return sp.csr_matrix((g.n, g.n))
    i, j = g.edges[:, 0], g.edges[:, 1]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    data = np.concatenate([w, w])
    return sp.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))


def propagation_operator(g: SparseGraph, mask: EdgeMask | None = None) -> sp.csr_matrix:
    """Row-stochastic diffusion operator of the masked graph.

    Entry (i, j) = weight(i, j) / sum_k weight(i, k). Isolated nodes get an
    identity row so they keep their own belief. mask=None means unit weights.
    Recomputed from the mask on every call; never cache across mask updates.
    """
    W = _masked_adjacency(g, mask)
    d = np.asarray(W.sum(axis=1)).ravel()
    iso = d == 0
    inv = np.zeros_like(d)
    inv[~iso] = 1.0 / d[~iso]
    P = sp.diags(inv) @ W
    if iso.any():
        P = P + sp.diags(iso.astype(np.float64))
    return P.tocsr()


def gcn_operator(g: SparseGraph, mask: EdgeMask | None = None) -> sp.csr_matrix:
    """Symmetric normalization of the masked graph plus self-loops.

    S = Dt^(-1/2) (M*A + I) Dt^(-1/2) with Dt the row sums of (M*A + I).
    Isolated nodes reduce to an identity row through their self-loop.
    """
    W = _masked_adjacency(g, mask) + sp.eye(g.n, format="csr")
    d = np.asarray(W.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(d)
    D = sp.diags(dinv)
    return (D @ W @ D).tocsr()


def heterophily_ratio(g: SparseGraph) -> float:
    """Fraction of edges whose endpoints carry different labels."""
    if g.m == 0:
        raise GraphError("no edges")
    li = g.labels[g.edges[:, 0]]
    lj = g.labels[g.edges[:, 1]]
    return float(np.mean(li != lj))


def _pair_from_index(idx: int, ids: np.ndarray) -> tuple[int, int]:
    # decode the idx-th pair of the upper triangle over len(ids) items
    k = len(ids)
    i = int((2 * k - 1 - np.sqrt((2 * k - 1) ** 2 - 8 * idx)) // 2)
    j = idx - i * (2 * k - i - 1) // 2 + i + 1
    a, b = int(ids[i]), int(ids[int(j)])
    return (a, b) if a < b else (b, a)


def rewire_to_heterophily(g: SparseGraph, target_h: float, seed: int) -> SparseGraph:
    """Swap edges until the heterophily ratio is within 0.02 of target_h.

    Each move removes a uniformly random edge of the over-represented type
    and adds a uniformly random absent pair of the under-represented type,
    so the edge count is preserved exactly. Deterministic per seed.
    """
    if not 0.0 <= target_h <= 1.0:
        raise GraphError("target heterophily must lie in [0, 1]")
    if g.m == 0:
        raise GraphError("no edges")
    m = g.m
    pos = np.flatnonzero(g.labels == 1)
    neg = np.flatnonzero(g.labels == -1)
    max_cross = len(pos) * len(neg)
    max_within = len(pos) * (len(pos) - 1) // 2 + len(neg) * (len(neg) - 1) // 2
    lo_cross = max(0, m - max_within)
    hi_cross = min(m, max_cross)
    target_cross = int(round(target_h * m))
    target_cross = min(max(target_cross, lo_cross), hi_cross)
    if abs(target_cross / m - target_h) > 0.02:
        raise GraphError(
            f"target heterophily {target_h:.3f} unreachable with {m} edges: "
            f"achievable range [{lo_cross / m:.3f}, {hi_cross / m:.3f}] "
            f"at granularity {1.0 / m:.3f}"
        )

    edge_set = {(int(i), int(j)) for i, j in g.edges}
    is_cross = lambda e: g.labels[e[0]] != g.labels[e[1]]
    cross = [e for e in edge_set if is_cross(e)]
    within = [e for e in edge_set if not is_cross(e)]
    if len(cross) == target_cross:
        return g

    rng = np.random.default_rng(seed)

    def sample_absent_cross():
        while True:
            a = int(pos[rng.integers(len(pos))])
            b = int(neg[rng.integers(len(neg))])
            e = (a, b) if a < b else (b, a)
            if e not in edge_set:
                return e

    n_pp = len(pos) * (len(pos) - 1) // 2
    n_pairs_within = n_pp + len(neg) * (len(neg) - 1) // 2

    def sample_absent_within():
        while True:
            idx = int(rng.integers(n_pairs_within))
            if idx < n_pp:
                e = _pair_from_index(idx, pos)
            else:
                e = _pair_from_index(idx - n_pp, neg)
            if e not in edge_set:
                return e

    while len(cross) != target_cross:
        if len(cross) < target_cross:
            k = int(rng.integers(len(within)))
            removed = within.pop(k)
            added = sample_absent_cross()
            cross.append(added)
        else:
            k = int(rng.integers(len(cross)))
            removed = cross.pop(k)
            added = sample_absent_within()
            within.append(added)
        edge_set.discard(removed)
        edge_set.add(added)

    new_edges = np.array(sorted(edge_set), dtype=np.int64)
    return SparseGraph(n=g.n, edges=new_edges, features=g.features, labels=g.labels)
