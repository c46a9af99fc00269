"""Simulation studies for cardinality bias and node-level expectation checks.

Two data designs share five independent predictors: ``X1`` standard normal and
``X2..X5`` uniform categorical with 2, 4, 10 and 20 levels.  In the null case
``y ~ Bernoulli(0.5)`` independently of everything; in the power case
``P(y=1) = 0.35`` when ``X2`` is its first level and ``0.65`` when it is its
second.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import Categorical, Continuous, Dataset
from .forest import ForestParams, fit, resolve_threads
from .importance import PRESETS, PenaltySpec, compute, decrease_arrays, resolve_measure
from .seeding import derive_seed, make_rng

CASES = ("null", "power")
LEVELS = (2, 4, 10, 20)
FEATURES = ("X1", "X2", "X3", "X4", "X5")
POWER_PROBS = (0.35, 0.65)


def _measure_name(m) -> str:
    return m if isinstance(m, str) else m.name


@dataclass(frozen=True)
class SimDesign:
    case: str = "null"
    n: int = 120
    replications: int = 100
    forest: ForestParams = field(default_factory=lambda: ForestParams(ntree=100, mtry=3, min_node_size=1))
    measures: tuple = ("mdi", "pg1", "pg2", "pg0hat", "pg2hat")
    mda_repeats: int = 1

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}, got {self.case!r}")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        ms = tuple(m.strip().lower() if isinstance(m, str) else m for m in self.measures)
        for m in ms:
            if isinstance(m, str):
                resolve_measure(m)
        object.__setattr__(self, "measures", ms)

    @property
    def measure_names(self) -> tuple[str, ...]:
        return tuple(_measure_name(m) for m in self.measures)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "n": self.n,
            "replications": self.replications,
            "forest": asdict(self.forest),
            "measures": list(self.measure_names),
            "mda_repeats": self.mda_repeats,
        }


def gen_case(design: SimDesign, seed: int) -> Dataset:
    rng = make_rng(seed)
    n = design.n
    cols = [rng.standard_normal(n)] + [rng.integers(0, k, size=n) for k in LEVELS]
    if design.case == "null":
        p = np.full(n, 0.5)
    else:
        p = np.where(cols[1] == 0, POWER_PROBS[0], POWER_PROBS[1])
    y = (rng.random(n) < p).astype(np.int8)
    kinds = (Continuous(),) + tuple(Categorical(k) for k in LEVELS)
    return Dataset(FEATURES, kinds, tuple(cols), y)


@dataclass(frozen=True, eq=False)
class SimResult:
    design: SimDesign
    master_seed: int
    replication_seeds: tuple[int, ...]
    feature_names: tuple[str, ...]
    measure_names: tuple[str, ...]
    scores: np.ndarray  # (replications, features, measures)

    def _m(self, measure: str) -> int:
        return self.measure_names.index(measure)

    def scores_for(self, measure: str) -> np.ndarray:
        """(replications, features) score matrix for one measure."""
        return self.scores[:, :, self._m(measure)]

    def mean(self, measure: str) -> np.ndarray:
        return self.scores_for(measure).mean(axis=0)

    def stderr(self, measure: str) -> np.ndarray:
        s = self.scores_for(measure)
        if s.shape[0] < 2:
            return np.full(s.shape[1], np.nan)
        return s.std(axis=0, ddof=1) / math.sqrt(s.shape[0])

    def summary(self) -> dict:
        out = {}
        for m in self.measure_names:
            s = self.scores_for(m)
            q1, med, q3 = np.percentile(s, [25, 50, 75], axis=0)
            se = self.stderr(m)
            out[m] = {
                f: {
                    "mean": float(s[:, j].mean()),
                    "stderr": None if np.isnan(se[j]) else float(se[j]),
                    "q1": float(q1[j]),
                    "median": float(med[j]),
                    "q3": float(q3[j]),
                    "min": float(s[:, j].min()),
                    "max": float(s[:, j].max()),
                }
                for j, f in enumerate(self.feature_names)
            }
        return out

    def config(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "seed": self.master_seed,
            "replication_seeds": list(self.replication_seeds),
        }

    def long_rows(self):
        for r in range(self.scores.shape[0]):
            for j, f in enumerate(self.feature_names):
                for k, m in enumerate(self.measure_names):
                    yield r, f, m, float(self.scores[r, j, k])

    def to_long_csv(self, header_comment: bool = True) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write("# config: " + json.dumps(self.config(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "feature", "measure", "score"])
        for r, f, m, s in self.long_rows():
            w.writerow([r, f, m, repr(s)])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"config": self.config(), "summary": self.summary()}, indent=2, sort_keys=True) + "\n"


def _replicate(design: SimDesign, seed: int) -> np.ndarray:
    data = gen_case(design, derive_seed(seed, 0))
    forest = fit(data, replace(design.forest, seed=derive_seed(seed, 1)), threads=1)
    out = np.empty((data.n_features, len(design.measures)))
    for k, m in enumerate(design.measures):
        rep = compute(m, forest, data, seed=derive_seed(seed, 2), n_repeats=design.mda_repeats)
        out[:, k] = rep.scores
    return out


def run_study(design: SimDesign, master_seed: int, threads: int | None = None) -> SimResult:
    """Generate, fit and score ``design.replications`` independent datasets.

    Replication ``r`` uses seed ``derive_seed(master_seed, r)`` and is
    independent of scheduling, so results do not depend on ``threads``.
    """
    seeds = tuple(derive_seed(master_seed, r) for r in range(design.replications))
    threads = min(resolve_threads(threads), len(seeds))
    if threads == 1:
        mats = [_replicate(design, s) for s in seeds]
    else:
        with ThreadPoolExecutor(threads) as ex:
            mats = list(ex.map(lambda s: _replicate(design, s), seeds))
    return SimResult(design, master_seed, seeds, FEATURES, design.measure_names, np.stack(mats))


# -- node-level expectation experiment -------------------------------------

EXPECTATION_MEASURES = {"goob": PRESETS["pg0"], **PRESETS}


@dataclass(frozen=True)
class ExpectationResult:
    measure: str
    node_size: int
    p_oob: float
    split_fraction: float
    trials: int
    empirical_mean: float
    theoretical_mean: float
    std_error: float
    redrawn: int

    @property
    def z(self) -> float:
        diff = self.empirical_mean - self.theoretical_mean
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / self.std_error

    def within(self, k: float = 4.0) -> bool:
        return abs(self.z) <= k


def theoretical_decrease(spec: PenaltySpec, node_size: int, p: float) -> float:
    """Expected decrease at an uninformative split, in un-doubled Gini units.

    Children are Bernoulli(p) samples and inbag/OOB children have equal sizes,
    so each uncorrected Gini term contributes ``sigma^2/N``, a corrected OOB
    term contributes 0 and the squared-difference term ``-sigma^2/N``.
    """
    s2 = p * (1.0 - p)
    oob = 0.0 if spec.bias_corrected else spec.alpha
    return s2 / node_size * (oob + (1.0 - spec.alpha) - spec.lam)


def expectation_test(node_size: int, p_oob: float, split_fraction: float = 0.5, trials: int = 100_000,
                     seed: int = 0, measure: str | PenaltySpec = "goob") -> ExpectationResult:
    """Monte-Carlo mean of one node's decrease at an uninformative split.

    The node holds ``node_size`` OOB labels and, independently, ``node_size``
    inbag labels, all Bernoulli(``p_oob``).  Each OOB row goes left with
    probability ``split_fraction``; the inbag rows are split into children of
    the same sizes.  Draws where a child has fewer rows than the measure needs
    (1, or 2 under bias correction) are redrawn and counted.  Decreases are
    reported halved, i.e. for ``p (1 - p)`` rather than ``2 p (1 - p)``.
    """
    if node_size < 4:
        raise ValueError("node_size must be >= 4")
    if trials < 10_000:
        raise ValueError("trials must be >= 10000")
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must be in (0, 1)")
    if isinstance(measure, str):
        key = measure.strip().lower()
        if key not in EXPECTATION_MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        spec, name = EXPECTATION_MEASURES[key], key
    else:
        spec, name = measure, measure.name

    rng = make_rng(seed)
    need = max(spec.min_oob, 1)
    N = int(node_size)
    nl = rng.binomial(N, split_fraction, size=trials)
    redrawn = 0
    bad = (nl < need) | (N - nl < need)
    while bad.any():
        k = int(bad.sum())
        redrawn += k
        nl[bad] = rng.binomial(N, split_fraction, size=k)
        bad = (nl < need) | (N - nl < need)
    nr = N - nl
    oob_l = rng.binomial(nl, p_oob)
    oob_r = rng.binomial(nr, p_oob)
    in_l = rng.binomial(nl, p_oob)
    in_r = rng.binomial(nr, p_oob)

    full = np.full(trials, N)
    delta, ok = decrease_arrays(
        (full, in_l + in_r, full, oob_l + oob_r),
        (nl, in_l, nl, oob_l),
        (nr, in_r, nr, oob_r),
        spec,
    )
    assert ok.all()
    vals = 0.5 * delta
    return ExpectationResult(
        measure=name,
        node_size=N,
        p_oob=float(p_oob),
        split_fraction=float(split_fraction),
        trials=int(trials),
        empirical_mean=float(vals.mean()),
        theoretical_mean=theoretical_decrease(spec, N, p_oob),
        std_error=float(vals.std(ddof=1) / math.sqrt(trials)),
        redrawn=redrawn,
    )


def expectation_grid(measures: Sequence[str], node_sizes=(5, 10, 20, 50), p_values=(0.1, 0.3, 0.5),
                     fractions=(0.5,), trials: int = 100_000, seed: int = 0) -> list[ExpectationResult]:
    """Run :func:`expectation_test` over a grid, one derived seed per cell."""
    out = []
    for a, m in enumerate(measures):
        for b, N in enumerate(node_sizes):
            for c, p in enumerate(p_values):
                for e, fr in enumerate(fractions):
                    out.append(expectation_test(N, p, fr, trials, derive_seed(seed, a, b, c, e), m))
    return out
