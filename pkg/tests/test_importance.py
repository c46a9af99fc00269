import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oobgini import (MDI_SPEC, PRESETS, Categorical, Continuous, Dataset, Forest, ForestParams,
                     InsufficientOobSupport, NodeStats, PenaltySpec, TreeParams, fit, grow, mda, mdi,
                     node_decrease, penalized_impurity, pg_importance, shuffle_feature)
from oobgini.importance import compute, compute_many, resolve_measure
from oracles import mdi_node_walk, pg2_identity_walk

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_preset_values():
    assert PRESETS["pg0"] == PenaltySpec(1, 0)
    assert PRESETS["pg1"] == PenaltySpec(1, 1)
    assert PRESETS["pg2"] == PenaltySpec(0.5, 1)
    assert PRESETS["pg3"] == PenaltySpec(0.5, 0.5)
    assert PRESETS["pg2hat"].bias_corrected and not PRESETS["pg2"].bias_corrected


def test_spec_validation_and_support():
    with pytest.raises(ValueError):
        PenaltySpec(1.5, 0)
    with pytest.raises(ValueError):
        PenaltySpec(0.5, -1)
    assert MDI_SPEC.min_oob == 0
    assert PRESETS["pg1"].min_oob == 1
    assert PRESETS["pg0hat"].min_oob == 2
    assert PRESETS["pg2"].name == "pg2"
    assert "alpha=0.3" in PenaltySpec(0.3, 0.2).name


@pytest.mark.parametrize("spec,po,pi,n,expected", [
    ("pg1", 0.5, 0.5, 10, 0.5),
    ("pg1", 1.0, 0.0, 10, 1.0),
    ("pg3", 0.0, 1.0, 10, 0.5),
    ("pg0hat", 0.5, 0.3, 4, 2 / 3),
])
def test_impurity_examples(spec, po, pi, n, expected):
    assert penalized_impurity(po, pi, n, PRESETS[spec]) == pytest.approx(expected, abs=1e-15)


def test_bias_correction_leaves_inbag_and_penalty():
    plain = penalized_impurity(0.25, 0.6, 5, PRESETS["pg2"])
    hat = penalized_impurity(0.25, 0.6, 5, PRESETS["pg2hat"])
    assert hat - plain == pytest.approx(0.5 * 2 * 0.25 * 0.75 * (5 / 4 - 1), abs=1e-15)


def test_insufficient_support():
    with pytest.raises(InsufficientOobSupport):
        penalized_impurity(0.5, 0.5, 1, PRESETS["pg0hat"])
    with pytest.raises(InsufficientOobSupport):
        penalized_impurity(0.5, 0.5, 0, PRESETS["pg1"])
    # inbag-only impurity never looks at n_oob
    assert penalized_impurity(0.0, 0.5, 0, MDI_SPEC) == 0.5


def test_impurity_vectorised_matches_scalar():
    po = np.linspace(0, 1, 7)
    pi = po[::-1]
    vec = penalized_impurity(po, pi, np.full(7, 3), PRESETS["pg3hat"])
    assert np.allclose(vec, [penalized_impurity(a, b, 3, PRESETS["pg3hat"]) for a, b in zip(po, pi)],
                       rtol=0, atol=1e-15)


@given(unit, unit)
def test_pg2_identity(po, pi):
    assert penalized_impurity(po, pi, 1, PRESETS["pg2"]) == pytest.approx(po + pi - 2 * po * pi, abs=1e-12)


@given(unit, unit)
def test_bounds(po, pi):
    assert penalized_impurity(po, pi, 1, PRESETS["pg1"]) <= 1 + 1e-12
    assert penalized_impurity(po, pi, 1, PRESETS["pg2"]) <= 1 + 1e-12
    assert penalized_impurity(po, pi, 1, PRESETS["pg3"]) <= 0.5 + 1e-12
    for name in ("pg0", "pg1", "pg2", "pg3"):
        assert penalized_impurity(po, pi, 1, PRESETS[name]) >= 0


@given(unit)
def test_agreement_reduces_to_gini(p):
    for name in ("pg0", "pg1", "pg2", "pg3"):
        assert penalized_impurity(p, p, 1, PRESETS[name]) == pytest.approx(2 * p * (1 - p), abs=1e-12)


def test_decrease_perfect_split_mdi():
    d = node_decrease(NodeStats(4, 2), NodeStats(2, 0), NodeStats(2, 2), MDI_SPEC)
    assert d == pytest.approx(0.5)


# the corrected OOB term scales with 1/(n-1), so only the uncorrected family is flat here
@pytest.mark.parametrize("name", ["pg0", "pg1", "pg2", "pg3"])
def test_decrease_matching_children_is_zero(name):
    par, left, right = NodeStats(8, 4, 8, 4), NodeStats(4, 2, 4, 2), NodeStats(4, 2, 4, 2)
    assert node_decrease(par, left, right, PRESETS[name]) == pytest.approx(0.0, abs=1e-15)


def test_decrease_skips_without_oob():
    par, left, right = NodeStats(6, 3, 3, 1), NodeStats(3, 0, 0, 0), NodeStats(3, 3, 3, 1)
    assert node_decrease(par, left, right, PRESETS["pg1"]) is None
    assert node_decrease(par, left, right, MDI_SPEC) == pytest.approx(0.5)
    par, left, right = NodeStats(6, 3, 3, 1), NodeStats(3, 0, 1, 0), NodeStats(3, 3, 2, 1)
    assert node_decrease(par, left, right, PRESETS["pg1"]) is not None
    assert node_decrease(par, left, right, PRESETS["pg0hat"]) is None


def _pg2(po, pi):
    return po + pi - 2 * po * pi


@settings(max_examples=200)
@given(st.data())
def test_decrease_pg2_by_identity(data):
    ni_l = data.draw(st.integers(1, 20))
    ni_r = data.draw(st.integers(1, 20))
    no_l = data.draw(st.integers(1, 20))
    no_r = data.draw(st.integers(1, 20))
    pi_l = data.draw(st.integers(0, ni_l))
    pi_r = data.draw(st.integers(0, ni_r))
    po_l = data.draw(st.integers(0, no_l))
    po_r = data.draw(st.integers(0, no_r))
    par = NodeStats(ni_l + ni_r, pi_l + pi_r, no_l + no_r, po_l + po_r)
    got = node_decrease(par, NodeStats(ni_l, pi_l, no_l, po_l), NodeStats(ni_r, pi_r, no_r, po_r), PRESETS["pg2"])
    n = ni_l + ni_r
    exp = _pg2(par.p_oob, par.p_in) - (ni_l * _pg2(po_l / no_l, pi_l / ni_l) + ni_r * _pg2(po_r / no_r, pi_r / ni_r)) / n
    assert got == pytest.approx(exp, abs=1e-12)


def test_mdi_never_split_feature_is_zero():
    x = np.arange(8.0)
    noise = np.zeros(8)
    d = Dataset(("x", "flat"), (Continuous(), Continuous()), (x, noise), (x >= 4).astype(int))
    f = fit(d, ForestParams(ntree=10, mtry=2, seed=1), threads=1)
    rep = mdi(f)
    assert rep.score("flat") == 0.0
    assert rep.score("x") > 0


def test_mdi_single_perfect_split():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    other = np.array([0.0, 1.0, 0.0, 1.0])
    d = Dataset(("x", "z"), (Continuous(), Continuous()), (x, other), np.array([0, 0, 1, 1]))
    # every row inbag once, so the root is the balanced 4-row node
    tree = grow(d, np.ones(4, int), TreeParams(mtry=2))
    f = Forest((tree,), np.ones((1, 4), np.int32), ForestParams(ntree=1, mtry=2), d.feature_names)
    assert tree.n_nodes == 3
    rep = mdi(f)
    assert rep.score("x") == pytest.approx(0.5)
    assert rep.score("z") == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_mdi_matches_node_walk(random_data, seed):
    d = random_data(40, seed=seed, levels=(3, 8))
    f = fit(d, ForestParams(ntree=7, seed=seed), threads=1)
    assert np.allclose(mdi(f).scores, mdi_node_walk(f, d), rtol=0, atol=1e-12)
    assert (mdi(f).scores >= 0).all()


@pytest.mark.parametrize("seed", range(4))
def test_pg2_matches_identity_walk(random_data, seed):
    d = random_data(40, seed=seed)
    f = fit(d, ForestParams(ntree=9, seed=seed), threads=1)
    assert np.allclose(pg_importance(f, PRESETS["pg2"]).scores, pg2_identity_walk(f), rtol=0, atol=1e-12)


def test_pg1_equals_mdi_when_oob_mirrors_inbag(random_data):
    d = random_data(50, seed=3)
    f = fit(d, ForestParams(ntree=6, seed=2), threads=1)
    mirrored = tuple(dataclasses.replace(t, n_oob=t.n_in.copy(), n_oob_pos=t.n_in_pos.copy()) for t in f.trees)
    g = Forest(mirrored, f.inbag, f.params, f.feature_names)
    a = pg_importance(g, PRESETS["pg1"])
    assert np.allclose(a.scores, mdi(g).scores, rtol=0, atol=1e-12)
    assert not a.nodes_skipped.any()


def test_diagnostics_census(random_data):
    d = random_data(60, seed=5)
    f = fit(d, ForestParams(ntree=10, seed=5), threads=1)
    census = np.zeros(d.n_features, int)
    for t in f.trees:
        census += np.bincount(t.feature[t.feature >= 0], minlength=d.n_features)
    for name in ("pg1", "pg0hat"):
        rep = pg_importance(f, PRESETS[name])
        assert np.array_equal(rep.nodes_used + rep.nodes_skipped, census)
    assert np.array_equal(mdi(f).nodes_used, census)
    # stricter support can only skip more
    assert (pg_importance(f, PRESETS["pg0hat"]).nodes_skipped >= pg_importance(f, PRESETS["pg1"]).nodes_skipped).all()


def test_truncation(random_data):
    d = random_data(60, seed=6, levels=(10, 20))
    f = fit(d, ForestParams(ntree=20, seed=1), threads=1)
    raw = pg_importance(f, PRESETS["pg1"])
    cut = pg_importance(f, PRESETS["pg1"], truncate_negative=True)
    assert (raw.scores < 0).any()
    assert np.array_equal(cut.scores, np.maximum(raw.scores, 0))
    assert cut.truncated_at_zero and not raw.truncated_at_zero


def id_like_data(seed, n=300):
    rng = np.random.default_rng(seed)
    sex = rng.integers(0, 2, n)
    age = rng.normal(30, 10, n)
    cls = rng.integers(0, 3, n)
    y = (rng.random(n) < np.where(sex == 1, 0.75, 0.2) - 0.1 * (cls - 1)).astype(int)
    d = Dataset(("id", "age", "sex", "cls"), (Continuous(), Continuous(), Categorical(2), Categorical(3)),
                (np.arange(n, dtype=float), age, sex, cls), y)
    return shuffle_feature(d, "cls", seed)


@pytest.mark.parametrize("seed", range(3))
def test_id_feature_penalized(seed):
    d = id_like_data(seed)
    f = fit(d, ForestParams(ntree=200, seed=seed))
    m = mdi(f)
    assert "id" in m.ranking()[:3]
    pg1 = pg_importance(f, PRESETS["pg1"])
    assert pg1.score("id") < 0
    assert pg1.score("cls_shuffled") <= 0.05 * pg1.scores.max()
    pg2 = pg_importance(f, PRESETS["pg2"])
    # PG2 is unbiased only on average; its share of the top score collapses relative to MDI's
    assert pg2.score("id") / pg2.scores.max() < 0.2 * m.score("id") / m.scores.max()


def test_mda_unused_feature_zero_and_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=80)
    d = Dataset(("x", "flat"), (Continuous(), Continuous()), (x, np.ones(80)), (x > 0).astype(int))
    f = fit(d, ForestParams(ntree=15, mtry=2, seed=3), threads=1)
    a = mda(f, d, n_repeats=2, seed=9)
    b = mda(f, d, n_repeats=2, seed=9)
    assert a.score("flat") == 0.0
    assert a.score("x") > 0.2
    assert np.array_equal(a.scores, b.scores)
    with pytest.raises(ValueError):
        mda(f, d, n_repeats=0)


def test_report_rows_and_ranking(random_data):
    d = random_data(40, seed=1)
    f = fit(d, ForestParams(ntree=5, seed=1), threads=1)
    rep = compute("pg2", f, d)
    rows = rep.rows()
    assert [r["feature"] for r in rows] == list(d.feature_names)
    assert set(rows[0]) == {"feature", "measure", "score", "nodesUsed", "nodesSkipped"}
    assert rep.ranking()[0] == d.feature_names[int(np.argmax(rep.scores))]
    assert rep.to_dict()["measure"] == "pg2"
    assert [r.measure for r in compute_many(["mdi", "mda", "pg0hat"], f, d)] == ["mdi", "mda", "pg0hat"]


def test_resolve_measure():
    assert resolve_measure(" PG1 ") == PRESETS["pg1"]
    assert resolve_measure("mda") == "mda"
    with pytest.raises(ValueError):
        resolve_measure("gain")
