import json
import math

import numpy as np
import pytest

from tabukit.search import (
    BestList, EvaluationError, SearchConfig, TabuList, diversify, explore,
    intensify, pattern_move, reduce_steps, search,
)
from tabukit.space import SearchSpace

from oracles import two_basin

BOWL_SPACE = SearchSpace(lower=(-5.0, -5.0), upper=(5.0, 5.0), step=(0.1, 0.1))


def bowl(v):
    return float(np.sum(np.asarray(v) ** 2))


def test_bowl_converges_to_origin_cell():
    r = search(bowl, BOWL_SPACE, SearchConfig(budget=10_000, seed=3))
    np.testing.assert_allclose(r.best, [0.0, 0.0], atol=1e-12)
    assert r.best_value == 0.0
    assert r.termination == "converged"
    assert r.n_evaluations < 2000  # small fraction of the budget


def test_constant_objective_stops_on_budget():
    r = search(lambda v: 7.0, BOWL_SPACE, SearchConfig(budget=50, seed=0))
    assert r.best_value == 7.0
    assert r.n_evaluations == 50
    assert r.termination == "budget"


def test_two_basin_escape_single_seed():
    space = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(0.1, 0.1))
    r = search(two_basin, space, SearchConfig(
        budget=5000, seed=0, initial_point=(2.0, 2.0)))
    assert np.max(np.abs(r.best - np.array([8.0, 8.0]))) <= 0.1 + 1e-12


def test_plain_pattern_search_stays_in_local_basin():
    space = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(0.1, 0.1))
    r = search(two_basin, space, SearchConfig(
        budget=5000, seed=0, initial_point=(2.0, 2.0), use_tabu=False))
    np.testing.assert_allclose(r.best, [2.0, 2.0], atol=1e-12)
    assert r.termination == "converged"
    # without memory every accepted move must improve
    values = [m.value for m in r.moves]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_same_seed_reproduces_run_exactly():
    cfg = SearchConfig(budget=400, seed=11)
    a = search(two_basin, SearchSpace((0, 0), (10, 10), (0.1, 0.1)), cfg)
    b = search(two_basin, SearchSpace((0, 0), (10, 10), (0.1, 0.1)), cfg)
    assert a.history == b.history
    assert a.moves == b.moves
    assert np.array_equal(a.best, b.best)


def test_history_is_strictly_improving_and_closed():
    r = search(two_basin, SearchSpace((0, 0), (10, 10), (0.1, 0.1)),
               SearchConfig(budget=600, seed=2))
    idx = [i for i, _ in r.history]
    vals = [v for _, v in r.history]
    assert idx == sorted(idx)
    assert all(b < a for a, b in zip(vals[:-1], vals[1:-1]))
    assert r.history[-1] == (r.n_evaluations, r.best_value)


def test_reduction_rebases_on_the_incumbent():
    r = search(two_basin, SearchSpace((0, 0), (10, 10), (0.1, 0.1)),
               SearchConfig(budget=3000, seed=4))
    reduces = [m for m in r.moves if m.kind == "reduce"]
    assert reduces, "run never reduced its steps"
    for m in reduces:
        # a reduction restarts from the best point known at that moment
        assert m.value == m.best_before
        prior = [v for i, v in r.history if i <= m.eval_count]
        assert m.value == min(prior)


def test_feasibility_flag_follows_the_best_point():
    def flagged(v):
        return bowl(v), bool(abs(v[0]) < 1.0)

    r = search(flagged, BOWL_SPACE, SearchConfig(budget=2000, seed=1))
    assert r.best_value == 0.0
    assert r.best_feasible is True

    r = search(lambda v: (bowl(v), False), BOWL_SPACE,
               SearchConfig(budget=200, seed=1))
    assert r.best_feasible is False


def test_objective_failures_abort_with_diagnostics():
    def nan_at_origin(v):
        return math.nan if abs(v[0]) < 0.05 and abs(v[1]) < 0.05 else bowl(v)

    with pytest.raises(EvaluationError):
        search(nan_at_origin, BOWL_SPACE, SearchConfig(budget=5000, seed=3))

    def raises(v):
        raise RuntimeError("broken model")

    with pytest.raises(EvaluationError, match="broken model"):
        search(raises, BOWL_SPACE, SearchConfig(budget=10, seed=0))


def test_budget_of_one_still_reports_the_start():
    r = search(bowl, BOWL_SPACE, SearchConfig(budget=1, seed=9))
    assert r.n_evaluations == 1
    assert r.moves[0].kind == "initial"
    assert BOWL_SPACE.is_aligned(r.best)


def test_initial_point_and_steps_are_honored():
    r = search(bowl, BOWL_SPACE, SearchConfig(
        budget=50, seed=0, initial_point=(2.0, -3.0), initial_steps=(0.5, 0.5)))
    assert r.moves[0].cell == BOWL_SPACE.to_index((2.0, -3.0))


def test_config_validation_rejects_bad_values():
    space = BOWL_SPACE
    with pytest.raises(ValueError):
        SearchConfig(budget=0).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(tenure=0).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(intensify_after=15, diversify_after=10).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(reduce_multiple=0).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(initial_steps=(0.15, 0.1)).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(initial_point=(0.05, 0.0)).validate(space)
    with pytest.raises(ValueError):
        SearchConfig(pattern_factor=-1.0).validate(space)
    # thresholds are free when the memory layers are off
    SearchConfig(use_tabu=False, tenure=0, intensify_after=5,
                 diversify_after=5, reduce_after=5).validate(space)


def test_explore_respects_tabu_and_aspiration():
    space = SearchSpace(lower=(0.0,), upper=(4.0,), step=(1.0,))
    table = {0: 5.0, 1: 3.0, 2: 4.0, 3: 2.0, 4: 9.0}

    def f(v):
        return table[int(round(v[0]))]

    tabu = TabuList(tenure=4)
    tabu.add((0,))
    tabu.add((2,))
    # both neighbors tabu and neither beats the reference: nowhere to go
    assert explore(f, space, (1.0,), tabu=tabu, best_value=3.5) is None
    # aspiration: the better neighbor beats the reference, so it is taken
    out = explore(f, space, (1.0,), tabu=tabu, best_value=4.5)
    assert out is not None and out[0][0] == 2.0 and out[1] == 4.0


def test_explore_folds_improvements_cumulatively():
    space = SearchSpace(lower=(0.0, 0.0), upper=(4.0, 4.0), step=(1.0, 1.0))
    out = explore(bowl, space, (2.0, 2.0), steps=(1.0, 1.0))
    np.testing.assert_allclose(out[0], [1.0, 1.0])
    assert out[1] == 2.0


def test_pattern_move_extrapolates_on_grid():
    space = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(1.0, 1.0))
    np.testing.assert_allclose(
        pattern_move((2.0, 2.0), (4.0, 3.0), 1.0, space), [6.0, 4.0])
    # clamped at the box edge
    np.testing.assert_allclose(
        pattern_move((8.0, 0.0), (10.0, 0.0), 2.0, space), [10.0, 0.0])
    # fractional factors round half away from zero
    np.testing.assert_allclose(
        pattern_move((0.0, 0.0), (1.0, 0.0), 0.5, space), [2.0, 0.0])


def test_reduce_steps_floors_at_one_cell():
    space = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(0.1, 0.5))
    np.testing.assert_allclose(reduce_steps((0.5, 2.0), space, multiple=3),
                               [0.2, 0.5])
    np.testing.assert_allclose(reduce_steps((0.1, 0.5), space, multiple=2),
                               [0.1, 0.5])


def test_intensify_consensus_rules():
    space = SearchSpace(lower=(0.0, 0.0), upper=(10.0, 10.0), step=(1.0, 1.0))
    b = BestList(capacity=3)
    # dim 0 agrees within one cell (keeps the best entry's coordinate);
    # dim 1 is spread (rounded mean)
    b.consider((5, 0), 1.0)
    b.consider((6, 10), 2.0)
    b.consider((5, 3), 3.0)
    np.testing.assert_allclose(intensify(b, space), [5.0, 4.0])
    empty = BestList(capacity=2)
    with pytest.raises(ValueError):
        intensify(empty, space)


def test_diversify_draws_uniform_seeded_points():
    space = SearchSpace(lower=(0.0,), upper=(100.0,), step=(1.0,))
    a = diversify(space, np.random.default_rng(1))
    b = diversify(space, np.random.default_rng(1))
    assert np.array_equal(a, b)
    assert space.is_aligned(a)


def test_result_writers_round_trip(tmp_path):
    r = search(bowl, BOWL_SPACE, SearchConfig(budget=300, seed=6))
    conv = tmp_path / "conv.csv"
    r.write_convergence_csv(conv)
    lines = conv.read_text().splitlines()
    assert lines[0] == "eval_index,best_obfn"
    assert len(lines) == len(r.history) + 1
    last_idx, last_val = lines[-1].split(",")
    assert int(last_idx) == r.n_evaluations
    assert float(last_val) == pytest.approx(r.best_value)

    summary = tmp_path / "summary.json"
    r.write_summary_json(summary)
    doc = json.loads(summary.read_text())
    assert doc["termination"] == r.termination
    assert doc["n_evaluations"] == r.n_evaluations
    assert doc["best_feasible"] is True
    np.testing.assert_allclose(doc["best"], r.best)
