"""Bootstrap-bagged forests with an explicit inbag multiplicity matrix."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .dataset import Dataset
from .errors import DomainError
from .seeding import derive_seed, make_rng
from .tree import Tree, TreeParams, grow, route_oob


def default_mtry(n_features: int) -> int:
    return max(1, int(math.isqrt(n_features)))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``OOBGINI_THREADS``, else CPU count."""
    if threads is None:
        env = os.environ.get("OOBGINI_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class ForestParams:
    ntree: int = 100
    mtry: int | None = None
    min_node_size: int = 1
    max_depth: int | None = None
    seed: int = 0

    def resolved(self, n_features: int) -> "ForestParams":
        mtry = default_mtry(n_features) if self.mtry is None else self.mtry
        if self.ntree < 1:
            raise ValueError(f"ntree must be positive, got {self.ntree}")
        if not 1 <= mtry <= n_features:
            raise ValueError(f"mtry must be in [1, {n_features}], got {mtry}")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        return ForestParams(self.ntree, mtry, self.min_node_size, self.max_depth, self.seed)


def tree_seed(master: int, t: int) -> int:
    return derive_seed(master, t)


def bootstrap(n: int, seed: int) -> np.ndarray:
    """Per-row counts of ``n`` uniform draws with replacement."""
    if n < 1:
        raise ValueError("n must be >= 1")
    draws = make_rng(seed).integers(0, n, size=n)
    return np.bincount(draws, minlength=n).astype(np.int32)


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    inbag: np.ndarray  # (ntree, n) multiplicities
    params: ForestParams
    feature_names: tuple[str, ...]

    @property
    def ntree(self) -> int:
        return len(self.trees)

    @property
    def n(self) -> int:
        return self.inbag.shape[1]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def oob_rows(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.inbag[t] == 0)

    @cached_property
    def flat(self) -> dict[str, np.ndarray]:
        """All trees' node arrays concatenated, child ids offset to global ids.

        Adds ``tree`` (owning tree) and ``root_n_in`` (inbag total of the owning
        tree) per node.  Used by the vectorised importance walks.
        """
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
        out = {k: cat(k) for k in ("feature", "n_in", "n_in_pos", "n_oob", "n_oob_pos")}
        for side in ("left", "right"):
            out[side] = np.concatenate([
                np.where(t.left >= 0, getattr(t, side) + o, -1) for t, o in zip(self.trees, offs)
            ])
        sizes = np.diff(offs)
        out["tree"] = np.repeat(np.arange(self.ntree), sizes)
        out["root_n_in"] = np.repeat([t.n_in[0] for t in self.trees], sizes)
        return out

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "seed": self.params.seed,
            "feature_names": list(self.feature_names),
            "level_counts": [int(c) for c in self.trees[0].level_counts],
            "inbag": [_rle_encode(row) for row in self.inbag],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        lc = data["level_counts"]
        trees = tuple(Tree.from_dict(t, lc) for t in data["trees"])
        inbag = np.array([_rle_decode(r) for r in data["inbag"]], dtype=np.int32)
        return cls(trees, inbag, ForestParams(**data["params"]), tuple(data["feature_names"]))


def _rle_encode(row) -> list[list[int]]:
    out: list[list[int]] = []
    for v in row.tolist():
        if out and out[-1][0] == v:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def _rle_decode(runs) -> list[int]:
    return [v for v, k in runs for _ in range(k)]


def _build_tree(d: Dataset, params: ForestParams, t: int) -> tuple[np.ndarray, Tree]:
    s = tree_seed(params.seed, t)
    w = bootstrap(d.n, derive_seed(s, 0))
    tree = grow(d, w, TreeParams(params.mtry, params.min_node_size, params.max_depth, derive_seed(s, 1)))
    return w, route_oob(tree, d, np.flatnonzero(w == 0))


def fit(d: Dataset, params: ForestParams, threads: int | None = None) -> Forest:
    """Grow ``params.ntree`` trees on independent bootstraps and route their OOB rows.

    Tree ``t`` depends only on ``(d, params, t)``, so the result is identical
    for any ``threads``.
    """
    if d.n < 2:
        raise DomainError("need at least 2 rows")
    n_pos = int(d.response.sum())
    if n_pos == 0 or n_pos == d.n:
        raise DomainError("response has a single class")
    params = params.resolved(d.n_features)
    threads = min(resolve_threads(threads), params.ntree)
    if threads == 1:
        built = [_build_tree(d, params, t) for t in range(params.ntree)]
    else:
        with ThreadPoolExecutor(threads) as ex:
            built = list(ex.map(lambda t: _build_tree(d, params, t), range(params.ntree)))
    inbag = np.stack([w for w, _ in built])
    return Forest(tuple(tr for _, tr in built), inbag, params, d.feature_names)


def _tree_votes(tree: Tree, Xt: np.ndarray) -> np.ndarray:
    """Class vote per row: 1, 0, or 0.5 for a leaf with a tied inbag majority."""
    p = tree.leaf_proba()[tree.apply(Xt)]
    return np.where(p > 0.5, 1.0, np.where(p < 0.5, 0.0, 0.5))


def oob_predict(f: Forest, d: Dataset) -> np.ndarray:
    """OOB majority-vote probability per row; NaN where no tree leaves the row out."""
    votes = np.zeros(d.n)
    counts = np.zeros(d.n, dtype=np.int64)
    for t, tree in enumerate(f.trees):
        rows = f.oob_rows(t)
        if rows.size == 0:
            continue
        votes[rows] += _tree_votes(tree, d.matrix_t[:, rows])
        counts[rows] += 1
    out = np.full(d.n, np.nan)
    has = counts > 0
    out[has] = votes[has] / counts[has]
    return out


def oob_error(f: Forest, d: Dataset) -> float:
    """Misclassification rate of the OOB vote over rows with a prediction (ties count half)."""
    p = oob_predict(f, d)
    has = ~np.isnan(p)
    pred = np.where(p[has] > 0.5, 1.0, np.where(p[has] < 0.5, 0.0, 0.5))
    return float(np.mean(np.abs(pred - d.response[has])))
