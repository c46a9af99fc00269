"""CART binary-classification trees carrying inbag and out-of-bag node counts.

A :class:`Tree` is a struct of arrays indexed by node id (root is 0).  Leaves
have ``feature == -1``.  Continuous splits send a row left iff
``value <= threshold``; categorical splits send it left iff its level is in
``left_mask``.  A categorical level that was not present inbag at the split
node (``observed_mask``) always goes right.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .dataset import Dataset
from .seeding import make_rng


def gini(p):
    """Binary Gini impurity ``2 p (1 - p)``; works elementwise on arrays."""
    return 2.0 * p * (1.0 - p)


class NodeStats(NamedTuple):
    n_in: int
    n_in_pos: int
    n_oob: int = 0
    n_oob_pos: int = 0

    @property
    def p_in(self) -> float:
        return self.n_in_pos / self.n_in

    @property
    def p_oob(self) -> float:
        if self.n_oob == 0:
            raise ZeroDivisionError("node has no out-of-bag rows")
        return self.n_oob_pos / self.n_oob


class SplitRule(NamedTuple):
    feature: int
    threshold: float | None = None
    left_levels: frozenset | None = None


@dataclass(frozen=True)
class TreeParams:
    mtry: int
    min_node_size: int = 1
    max_depth: int | None = None
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left_mask: np.ndarray
    observed_mask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    n_in: np.ndarray
    n_in_pos: np.ndarray
    n_oob: np.ndarray
    n_oob_pos: np.ndarray
    level_counts: np.ndarray
    unseen_levels: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def internal(self) -> np.ndarray:
        return np.flatnonzero(self.feature >= 0)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def stats(self, node: int) -> NodeStats:
        return NodeStats(
            int(self.n_in[node]), int(self.n_in_pos[node]),
            int(self.n_oob[node]), int(self.n_oob_pos[node]),
        )

    def rule(self, node: int) -> SplitRule | None:
        f = int(self.feature[node])
        if f < 0:
            return None
        if self.level_counts[f] > 0:
            m = int(self.left_mask[node])
            return SplitRule(f, left_levels=frozenset(c for c in range(64) if m >> c & 1))
        return SplitRule(f, threshold=float(self.threshold[node]))

    def _arrays(self):
        return (self.feature, self.threshold, self.left_mask, self.observed_mask,
                self.left, self.right, self.level_counts)

    def apply(self, Xt: np.ndarray) -> np.ndarray:
        """Leaf id per row for a transposed design matrix ``(n_features, n_rows)``."""
        return _kernels.apply_kernel(*self._arrays(), np.ascontiguousarray(Xt, dtype=np.float64))

    def leaf_proba(self) -> np.ndarray:
        """Inbag positive proportion at every node."""
        return self.n_in_pos / self.n_in

    def structure_equal(self, other: "Tree") -> bool:
        fields = ("feature", "threshold", "left_mask", "observed_mask", "left", "right",
                  "n_in", "n_in_pos", "n_oob", "n_oob_pos")
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in fields)

    def to_dict(self) -> dict:
        nodes = []
        for k in range(self.n_nodes):
            node = {
                "id": k,
                "depth": int(self.depth[k]),
                "n_in": int(self.n_in[k]),
                "n_in_pos": int(self.n_in_pos[k]),
                "n_oob": int(self.n_oob[k]),
                "n_oob_pos": int(self.n_oob_pos[k]),
            }
            f = int(self.feature[k])
            if f >= 0:
                node["feature"] = f
                if self.level_counts[f] > 0:
                    node["left_mask"] = str(int(self.left_mask[k]))
                    node["observed_mask"] = str(int(self.observed_mask[k]))
                else:
                    node["threshold"] = float(self.threshold[k])
                node["left"] = int(self.left[k])
                node["right"] = int(self.right[k])
            nodes.append(node)
        return {"unseen_levels": int(self.unseen_levels), "nodes": nodes}

    @classmethod
    def from_dict(cls, data: dict, level_counts: Sequence[int]) -> "Tree":
        nodes = data["nodes"]
        k = len(nodes)
        feature = np.full(k, -1, dtype=np.int64)
        threshold = np.zeros(k)
        lmask = np.zeros(k, dtype=np.uint64)
        omask = np.zeros(k, dtype=np.uint64)
        left = np.full(k, -1, dtype=np.int64)
        right = np.full(k, -1, dtype=np.int64)
        cols = {c: np.zeros(k, dtype=np.int64) for c in ("depth", "n_in", "n_in_pos", "n_oob", "n_oob_pos")}
        for i, nd in enumerate(nodes):
            for c in cols:
                cols[c][i] = nd[c]
            if "feature" in nd:
                feature[i] = nd["feature"]
                threshold[i] = nd.get("threshold", 0.0)
                lmask[i] = np.uint64(int(nd.get("left_mask", 0)))
                omask[i] = np.uint64(int(nd.get("observed_mask", 0)))
                left[i] = nd["left"]
                right[i] = nd["right"]
        return cls(feature, threshold, lmask, omask, left, right, cols["depth"],
                   cols["n_in"], cols["n_in_pos"], cols["n_oob"], cols["n_oob_pos"],
                   np.asarray(level_counts, dtype=np.int64), int(data.get("unseen_levels", 0)))


def _as_rows(candidate_rows, n):
    if candidate_rows is None:
        return np.arange(n, dtype=np.int64)
    return np.asarray(candidate_rows, dtype=np.int64)


def best_split_continuous(values, labels, candidate_rows=None, weights=None):
    """Best ``(threshold, gain)`` over midpoints of distinct values, or ``None``."""
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    w = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=np.float64)
    found, thr, gain = _kernels.split_continuous(values, labels, w, _as_rows(candidate_rows, len(values)))
    return (thr, gain) if found else None


def best_split_categorical(codes, labels, candidate_rows=None, weights=None, n_levels=None):
    """Best ``(left_mask, gain)`` binary partition of the observed levels, or ``None``."""
    codes = np.asarray(codes, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    w = np.ones(len(codes)) if weights is None else np.asarray(weights, dtype=np.float64)
    if n_levels is None:
        n_levels = int(codes.max()) + 1 if len(codes) else 1
    found, mask, gain, _ = _kernels.split_categorical(
        codes, labels, w, _as_rows(candidate_rows, len(codes)), int(n_levels)
    )
    return (int(mask), gain) if found else None


def grow(d: Dataset, inbag: np.ndarray, params: TreeParams) -> Tree:
    """Grow a tree on the rows with positive multiplicity in ``inbag``.

    OOB counts on the returned tree are zero until :func:`route_oob` is run.
    """
    w = np.asarray(inbag, dtype=np.int64)
    if w.shape != (d.n,):
        raise ValueError(f"inbag has shape {w.shape}, expected ({d.n},)")
    if (w < 0).any() or not w.any():
        raise ValueError("inbag multiplicities must be nonnegative and not all zero")
    p = d.n_features
    if not 1 <= params.mtry <= p:
        raise ValueError(f"mtry must be in [1, {p}], got {params.mtry}")
    m = int(np.count_nonzero(w))
    keys = make_rng(params.seed).random((max(2 * m - 1, 1), p))
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    (feature, threshold, lmask, omask, left, right, depth, n_in, n_in_pos) = _kernels.grow_kernel(
        d.matrix_t, d.response, w, d.level_counts, int(params.mtry),
        int(params.min_node_size), max_depth, keys,
    )
    zeros = np.zeros(len(feature), dtype=np.int64)
    return Tree(feature, threshold, lmask, omask, left, right, depth, n_in, n_in_pos,
                zeros, zeros.copy(), d.level_counts)


def route_oob(t: Tree, d: Dataset, oob_rows) -> Tree:
    """Return a copy of ``t`` whose OOB counts come from routing ``oob_rows``."""
    rows = np.asarray(oob_rows, dtype=np.int64)
    n_oob, n_pos, unseen = _kernels.route_kernel(
        t.feature, t.threshold, t.left_mask, t.observed_mask, t.left, t.right,
        t.level_counts, d.matrix_t, d.response, rows,
    )
    return replace(t, n_oob=n_oob, n_oob_pos=n_pos, unseen_levels=int(unseen))

