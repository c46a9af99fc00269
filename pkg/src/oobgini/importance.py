"""Variable importance: MDI, out-of-bag penalized Gini family, permutation (MDA).

The penalized Gini impurity of a node is

    alpha * I(p_oob) + (1 - alpha) * I(p_in) + lambda * (p_oob - p_in)^2

with ``I(p) = 2 p (1 - p)``.  With ``bias_corrected`` the OOB term is scaled by
``n_oob / (n_oob - 1)``, turning it into the unbiased Bernoulli sample
variance (doubled).  MDI is the member ``alpha = lambda = 0``, which uses
inbag counts only.

Every measure walks the same nodes: a split node ``m`` of a tree contributes
``(N_m / N) * [PG(m) - (N_l PG(l) + N_r PG(r)) / N_m]`` to its split feature,
where ``N`` are *inbag* counts, and per-feature sums are averaged over trees.
A node whose parent or children lack the OOB rows a measure needs is skipped
and counted in ``nodes_skipped``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import InsufficientOobSupport
from .forest import Forest, _tree_votes
from .seeding import derive_seed, make_rng
from .tree import NodeStats, gini


@dataclass(frozen=True)
class PenaltySpec:
    alpha: float
    lam: float
    bias_corrected: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    @property
    def uses_oob(self) -> bool:
        return self.alpha > 0 or self.lam > 0

    @property
    def min_oob(self) -> int:
        """OOB rows a node needs before this impurity is defined."""
        if not self.uses_oob:
            return 0
        return 2 if (self.bias_corrected and self.alpha > 0) else 1

    @property
    def name(self) -> str:
        for k, v in PRESETS.items():
            if v == self:
                return k
        tail = ",hat" if self.bias_corrected else ""
        return f"pg(alpha={self.alpha:g},lambda={self.lam:g}{tail})"


PRESETS = {
    "pg0": PenaltySpec(1.0, 0.0),
    "pg1": PenaltySpec(1.0, 1.0),
    "pg2": PenaltySpec(0.5, 1.0),
    "pg3": PenaltySpec(0.5, 0.5),
    "pg0hat": PenaltySpec(1.0, 0.0, True),
    "pg1hat": PenaltySpec(1.0, 1.0, True),
    "pg2hat": PenaltySpec(0.5, 1.0, True),
    "pg3hat": PenaltySpec(0.5, 0.5, True),
}
MDI_SPEC = PenaltySpec(0.0, 0.0)
MEASURES = ("mdi", "mda") + tuple(PRESETS)


def penalized_impurity(p_oob, p_in, n_oob, spec: PenaltySpec):
    """Penalized Gini impurity; scalars in, float out, or elementwise on arrays.

    ``n_oob`` is only consulted when ``spec`` needs OOB rows.  Raises
    :class:`InsufficientOobSupport` if any ``n_oob`` is below ``spec.min_oob``.
    """
    scalar = np.ndim(p_oob) == 0 and np.ndim(p_in) == 0
    p_oob = np.asarray(p_oob, dtype=np.float64)
    p_in = np.asarray(p_in, dtype=np.float64)
    oob_term = gini(p_oob)
    if spec.min_oob:
        n = np.asarray(n_oob, dtype=np.float64)
        if np.any(n < spec.min_oob):
            raise InsufficientOobSupport(f"{spec.name} needs at least {spec.min_oob} OOB rows per node")
        if spec.bias_corrected and spec.alpha > 0:
            oob_term = oob_term * n / (n - 1.0)
    val = spec.alpha * oob_term + (1.0 - spec.alpha) * gini(p_in) + spec.lam * (p_oob - p_in) ** 2
    return float(val) if scalar else val


def _impurity_of(n_in, n_in_pos, n_oob, n_oob_pos, spec):
    p_in = n_in_pos / n_in
    if spec.uses_oob:
        p_oob = n_oob_pos / n_oob
    else:
        p_oob = np.zeros_like(p_in)
    return penalized_impurity(p_oob, p_in, n_oob, spec)


def decrease_arrays(parent, left, right, spec: PenaltySpec):
    """Vectorised node decrease.

    ``parent``, ``left`` and ``right`` are 4-tuples of arrays
    ``(n_in, n_in_pos, n_oob, n_oob_pos)``.  Returns ``(delta, ok)`` where
    ``delta`` is 0 wherever ``ok`` is False (insufficient OOB support).
    """
    parent, left, right = (tuple(np.asarray(a) for a in s) for s in (parent, left, right))
    k = spec.min_oob
    ok = (parent[2] >= k) & (left[2] >= k) & (right[2] >= k)
    delta = np.zeros(ok.shape)
    if ok.any():
        sel = lambda s: tuple(a[ok] for a in s)
        P, L, R = sel(parent), sel(left), sel(right)
        n = P[0].astype(np.float64)
        delta[ok] = _impurity_of(*P, spec) - (
            L[0] * _impurity_of(*L, spec) + R[0] * _impurity_of(*R, spec)
        ) / n
    return delta, ok


def node_decrease(parent: NodeStats, left: NodeStats, right: NodeStats, spec: PenaltySpec) -> float | None:
    """Impurity decrease at one split, inbag-weighted; ``None`` means skip."""
    delta, ok = decrease_arrays(
        tuple(np.array([v]) for v in parent),
        tuple(np.array([v]) for v in left),
        tuple(np.array([v]) for v in right),
        spec,
    )
    return float(delta[0]) if ok[0] else None


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    measure: str
    feature_names: tuple[str, ...]
    scores: np.ndarray
    nodes_used: np.ndarray | None = None
    nodes_skipped: np.ndarray | None = None
    truncated_at_zero: bool = False

    def score(self, feature: str) -> float:
        return float(self.scores[self.feature_names.index(feature)])

    def ranking(self) -> list[str]:
        """Feature names by decreasing score (stable for ties)."""
        order = np.argsort(-self.scores, kind="stable")
        return [self.feature_names[i] for i in order]

    def rows(self) -> list[dict]:
        out = []
        for j, name in enumerate(self.feature_names):
            out.append({
                "feature": name,
                "measure": self.measure,
                "score": float(self.scores[j]),
                "nodesUsed": None if self.nodes_used is None else int(self.nodes_used[j]),
                "nodesSkipped": None if self.nodes_skipped is None else int(self.nodes_skipped[j]),
            })
        return out

    def to_dict(self) -> dict:
        return {"measure": self.measure, "truncatedAtZero": self.truncated_at_zero, "features": self.rows()}


def _walk(f: Forest, spec: PenaltySpec):
    fl = f.flat
    idx = np.flatnonzero(fl["feature"] >= 0)
    cols = ("n_in", "n_in_pos", "n_oob", "n_oob_pos")
    node = lambda at: tuple(fl[c][at] for c in cols)
    delta, ok = decrease_arrays(node(idx), node(fl["left"][idx]), node(fl["right"][idx]), spec)
    contrib = fl["n_in"][idx] / fl["root_n_in"][idx] * delta
    feat = fl["feature"][idx]
    p = f.n_features
    scores = np.bincount(feat, weights=contrib, minlength=p) / f.ntree
    used = np.bincount(feat[ok], minlength=p)
    skipped = np.bincount(feat[~ok], minlength=p)
    return scores, used, skipped


def pg_importance(f: Forest, spec: PenaltySpec, truncate_negative: bool = False,
                  name: str | None = None) -> ImportanceReport:
    """Mean decrease of the penalized impurity ``spec`` over the forest."""
    scores, used, skipped = _walk(f, spec)
    if truncate_negative:
        scores = np.maximum(scores, 0.0)
    return ImportanceReport(name or spec.name, f.feature_names, scores, used, skipped, truncate_negative)


def mdi(f: Forest) -> ImportanceReport:
    """Classic inbag Gini importance (mean decrease in impurity)."""
    scores, used, skipped = _walk(f, MDI_SPEC)
    return ImportanceReport("mdi", f.feature_names, scores, used, skipped, False)


def _accuracy(tree, Xt, y) -> float:
    return float(np.mean(1.0 - np.abs(_tree_votes(tree, Xt) - y)))


def mda(f: Forest, d: Dataset, n_repeats: int = 1, seed: int = 0) -> ImportanceReport:
    """Permutation importance: mean drop in per-tree OOB accuracy.

    For each tree with OOB rows, feature ``j`` is permuted among that tree's
    OOB rows ``n_repeats`` times.  Leaves with a tied inbag majority count as
    half right.  Scores are raw means over trees and repeats.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be positive")
    p = d.n_features
    total = np.zeros(p)
    n_trees = 0
    y = d.response.astype(np.float64)
    for t, tree in enumerate(f.trees):
        rows = f.oob_rows(t)
        if rows.size == 0:
            continue
        n_trees += 1
        Xo = np.ascontiguousarray(d.matrix_t[:, rows])
        yo = y[rows]
        base = _accuracy(tree, Xo, yo)
        used = set(int(j) for j in tree.feature[tree.feature >= 0])
        for j in sorted(used):
            rng = make_rng(derive_seed(seed, t, j))
            for _ in range(n_repeats):
                Xp = Xo.copy()
                Xp[j] = Xo[j][rng.permutation(rows.size)]
                total[j] += base - _accuracy(tree, Xp, yo)
    scores = total / (max(n_trees, 1) * n_repeats)
    return ImportanceReport("mda", f.feature_names, scores)


def resolve_measure(name: str) -> str | PenaltySpec:
    key = name.strip().lower()
    if key in ("mdi", "mda"):
        return key
    if key in PRESETS:
        return PRESETS[key]
    raise ValueError(f"unknown measure {name!r}; choose from {', '.join(MEASURES)}")


def compute(measure: str | PenaltySpec, f: Forest, d: Dataset, *, seed: int = 0, n_repeats: int = 1,
            truncate_negative: bool = False) -> ImportanceReport:
    """Dispatch one measure by name or spec."""
    m = resolve_measure(measure) if isinstance(measure, str) else measure
    if m == "mdi":
        return mdi(f)
    if m == "mda":
        return mda(f, d, n_repeats, seed)
    return pg_importance(f, m, truncate_negative)


def compute_many(measures: Sequence[str | PenaltySpec], f: Forest, d: Dataset, **kw) -> list[ImportanceReport]:
    return [compute(m, f, d, **kw) for m in measures]
