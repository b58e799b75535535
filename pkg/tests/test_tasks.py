"""Task files, run metrics, and the training matrix."""
import itertools
import json

import pytest

from ecrl.dfa import compile_text
from ecrl.envs import DiscreteActions, Gridworld, Waterworld
from ecrl.ltlf import evaluate, parse
from ecrl.replay import ClassifiedReplayBuffer
from ecrl.tasks import (DEFAULT_HORIZONS, TaskDefinition, aggregate_rows,
                        build_base_env, build_dfa, build_env, build_rank_table,
                        censored_median, curve_rows, final_success_rate,
                        load_task, make_train_config, ordered_region_formula,
                        ordered_touch_formula, read_rows, reward_curve_area,
                        rewards_per_step, run_alpha_sweep, run_csv_name,
                        run_matrix, run_one, save_task, steps_to_first_success,
                        steps_to_success_rate, write_rows)
from ecrl.training import ConfigError, MetricsLog

from helpers import all_traces

SEQ_RG = "(!r & !g) U ((r & !g) & X ((!r & !g) U (g & !r)))"


def tiny_task(**over):
    base = dict(
        name="tiny",
        formula=ordered_touch_formula(("r", "g"), ("r", "g")),
        atoms=("r", "g"),
        env_kind="gridworld",
        env_config={"width": 4, "height": 4,
                    "cells": [[3, 0, "r"], [3, 3, "g"]],
                    "start": [0, 0], "slip": 0.0},
        n_categories=4,
        strategies=("EC", "BASE"),
        seeds=(0,),
        total_steps=400,
        horizon=30)
    base.update(over)
    return TaskDefinition(**base)


# --- formula builders -------------------------------------------------------

def test_two_stage_touch_formula_matches_reference_language():
    built = parse(ordered_touch_formula(("r", "g"), ("r", "g")), ("r", "g"))
    reference = parse(SEQ_RG, ("r", "g"))
    for trace in all_traces(("r", "g"), 5):
        assert evaluate(trace, 0, built) == evaluate(trace, 0, reference)


def test_region_formula_shape():
    text = ordered_region_formula(("g1", "g2", "g3"))
    assert text == "F (g1 & X F (g2 & X F g3))"
    parse(text, ("g1", "g2", "g3"))


# --- task schema ------------------------------------------------------------

def test_round_trip_through_json():
    task = tiny_task(full_total_steps=5000, learner="tabular",
                     training_overrides=(("batch_size", 4),))
    assert TaskDefinition.from_json(task.to_json()) == task


def test_optional_keys_stay_out_of_the_document():
    doc = tiny_task().to_json()
    assert doc["horizon"] == 30
    for key in ("fullTotalSteps", "learner", "encoding", "training"):
        assert key not in doc


def test_camel_case_training_block():
    doc = tiny_task().to_json()
    doc["training"] = {"learningRate": 0.5, "hidden": [32, 32]}
    task = TaskDefinition.from_json(doc)
    assert ("learning_rate", 0.5) in task.training_overrides
    assert ("hidden", (32, 32)) in task.training_overrides


def test_unknown_training_key_rejected():
    doc = tiny_task().to_json()
    doc["training"] = {"momentum": 0.9}
    with pytest.raises(ConfigError):
        TaskDefinition.from_json(doc)


def test_missing_required_key_rejected():
    doc = tiny_task().to_json()
    del doc["formula"]
    with pytest.raises(ConfigError):
        TaskDefinition.from_json(doc)


@pytest.mark.parametrize("bad", [
    dict(name="no/slashes"),
    dict(name=""),
    dict(env_kind="mazeworld"),
    dict(total_steps=0),
    dict(strategies=("EC", "SHINY")),
    dict(seeds=()),
    dict(formula="r U"),
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        tiny_task(**bad)


def test_episode_horizon_falls_back_per_kind():
    assert tiny_task(horizon=None).episode_horizon == DEFAULT_HORIZONS["gridworld"]
    assert tiny_task(horizon=77).episode_horizon == 77


def test_save_and_load(tmp_path):
    task = tiny_task()
    path = tmp_path / "tiny.json"
    save_task(task, path)
    assert load_task(path) == task


def test_load_rejects_env_missing_an_atom(tmp_path):
    task = tiny_task(env_config={"width": 4, "height": 4,
                                 "cells": [[3, 0, "r"]],
                                 "start": [0, 0], "slip": 0.0})
    path = tmp_path / "broken.json"
    save_task(task, path)
    with pytest.raises(ConfigError, match="never emits"):
        load_task(path)


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_task(path)


# --- builders ---------------------------------------------------------------

def test_rank_table_category_count_is_clamped():
    task = tiny_task(n_categories=99)
    dfa = build_dfa(task)
    assert len(build_rank_table(task, dfa).priorities) == dfa.n_states
    task = tiny_task(n_categories=2)
    assert len(build_rank_table(task, dfa).priorities) == 3


def test_base_env_dispatch_and_dqn_wrapping():
    assert isinstance(build_base_env(tiny_task()), Gridworld)
    water = {"boundary": 10.0, "dt": 1.0, "balls": [
        {"position": [2.0, 2.0], "velocity": [0.0, 0.0], "color": "r"},
        {"position": [8.0, 8.0], "velocity": [0.0, 0.0], "color": "g"}]}
    task = tiny_task(env_kind="waterworld", env_config=water)
    assert isinstance(build_base_env(task), Waterworld)
    task = tiny_task(env_kind="waterworld", env_config=water, learner="dqn")
    wrapped = build_base_env(task)
    assert isinstance(wrapped, DiscreteActions) and wrapped.n_actions == 9


def test_build_env_attaches_rank_table_only_when_shaped():
    task = tiny_task()
    assert build_env(task, "EC").rank_table is not None
    assert build_env(task, "RS").rank_table is not None
    assert build_env(task, "BASE").rank_table is None
    assert build_env(task, "PER").rank_table is None


def test_train_config_applies_tabular_defaults_then_overrides():
    task = tiny_task(training_overrides=(("batch_size", 4),))
    cfg = make_train_config(task, "EC", seed=3)
    assert cfg.learning_rate == 0.2
    assert cfg.batch_size == 4
    assert cfg.seed == 3
    assert cfg.total_steps == task.total_steps
    cfg = make_train_config(task, "EC", seed=0, total_steps=99, alpha=0.0)
    assert cfg.total_steps == 99 and cfg.alpha == 0.0


# --- metrics ----------------------------------------------------------------

def synthetic_log(successes, ep_length=10, reward=100.0):
    log = MetricsLog()
    steps = 0
    for episode, hit in enumerate(successes, start=1):
        steps += ep_length
        log.add(episode=episode, steps=steps,
                raw_return=reward if hit else 0.0,
                shaped_return=reward if hit else 0.0, success=hit,
                ep_length=ep_length, buffer_sizes=[steps], probs=[],
                shaping=False, classified=False)
    return log


def test_steps_to_first_success():
    assert steps_to_first_success(synthetic_log([False, False, True])) == 30
    assert steps_to_first_success(synthetic_log([False] * 5)) is None


def test_steps_to_success_rate_uses_trailing_window():
    log = synthetic_log([False] * 4 + [True] * 4)
    # At episode 7 the trailing four episodes hold three successes.
    assert steps_to_success_rate(log, threshold=0.75, window=4) == 70
    assert steps_to_success_rate(log, threshold=1.0, window=4) == 80
    assert steps_to_success_rate(log, threshold=1.0, window=8) is None


def test_reward_curve_area_weights_early_successes():
    early = synthetic_log([True, False, False, False])
    late = synthetic_log([False, False, False, True])
    budget = 40
    assert reward_curve_area(early, budget) == 100.0 * 30
    assert reward_curve_area(late, budget) == 0.0
    assert reward_curve_area(early, budget) > reward_curve_area(late, budget)


def test_rewards_per_step_and_final_rate():
    log = synthetic_log([True, True, False, False])
    assert rewards_per_step(log) == pytest.approx(200.0 / 40.0)
    assert final_success_rate(log, window=2) == 0.0
    assert final_success_rate(log, window=4) == 0.5


def test_censored_median():
    assert censored_median([3, None, 1]) == 3
    assert censored_median([None, None, 4]) is None
    assert censored_median([5, 7]) == 6


# --- aggregation ------------------------------------------------------------

def fake_row(strategy, seed, rps, area, first=None, threshold=None, final=0.0):
    return {"task": "t", "strategy": strategy, "seed": seed, "steps": 100,
            "episodes": 10, "wall_seconds": 0.1,
            "steps_to_first_success": first,
            "steps_to_success_threshold": threshold,
            "reward_curve_area": area, "rewards_per_step": rps,
            "final_success_rate": final}


def test_aggregate_improvement_vs_baseline():
    rows = [fake_row("BASE", 0, 1.0, 10.0), fake_row("BASE", 1, 1.0, 12.0),
            fake_row("EC", 0, 1.5, 20.0, first=40), fake_row("EC", 1, 2.5, 30.0, first=60)]
    summary = {s["strategy"]: s for s in aggregate_rows(rows)}
    assert summary["EC"]["pct_improvement_vs_baseline"] == pytest.approx(100.0)
    assert summary["BASE"]["pct_improvement_vs_baseline"] == pytest.approx(0.0)
    assert summary["EC"]["median_steps_to_first_success"] == 50
    assert summary["EC"]["success_reached_fraction"] == 1.0
    assert summary["BASE"]["success_reached_fraction"] == 0.0
    assert summary["BASE"]["median_steps_to_first_success"] is None


def test_aggregate_without_baseline_leaves_improvement_blank():
    rows = [fake_row("EC", 0, 1.0, 10.0)]
    (summary,) = aggregate_rows(rows)
    assert summary["pct_improvement_vs_baseline"] is None


def test_write_rows_blanks_none(tmp_path):
    path = tmp_path / "rows.csv"
    write_rows(path, ("a", "b"), [{"a": 1, "b": None}])
    (row,) = read_rows(path)
    assert row == {"a": "1", "b": ""}


# --- running ----------------------------------------------------------------

def test_run_one_writes_deterministic_csv(tmp_path):
    task = tiny_task()
    row = run_one(task, "EC", 0, tmp_path / "a")
    again = run_one(task, "EC", 0, tmp_path / "b")
    csv_a = (tmp_path / "a" / run_csv_name("EC", 0)).read_text()
    csv_b = (tmp_path / "b" / run_csv_name("EC", 0)).read_text()
    assert csv_a == csv_b
    assert row["task"] == "tiny" and row["strategy"] == "EC"
    assert row["steps"] >= task.total_steps
    assert row["wall_seconds"] > 0
    for key, value in row.items():
        if key != "wall_seconds":
            assert value == again[key], key


def test_run_matrix_outputs(tmp_path):
    task = tiny_task()
    rows = run_matrix(task, tmp_path)
    task_dir = tmp_path / "tiny"
    assert len(rows) == 2
    assert {r["strategy"] for r in rows} == {"EC", "BASE"}
    for name in ("runs.csv", "summary.csv", "curves.csv",
                 run_csv_name("EC", 0), run_csv_name("BASE", 0)):
        assert (task_dir / name).exists()
    summary = read_rows(task_dir / "summary.csv")
    assert {r["strategy"] for r in summary} == {"EC", "BASE"}
    curves = read_rows(task_dir / "curves.csv")
    assert curves and set(curves[0]) == {
        "strategy", "episode", "mean_steps", "mean_raw_return",
        "mean_shaped_return", "mean_success", "mean_reward_per_step"}


def test_curves_recomputable_from_run_csvs_alone(tmp_path):
    task = tiny_task()
    run_matrix(task, tmp_path)
    recomputed = curve_rows(tmp_path / "tiny", ("EC", "BASE"), (0,))
    stored = read_rows(tmp_path / "tiny" / "curves.csv")
    assert len(recomputed) == len(stored)
    first = recomputed[0]
    assert first["mean_steps"] == float(stored[0]["mean_steps"])


def test_alpha_sweep_layout(tmp_path):
    task = tiny_task(seeds=(0, 1), total_steps=200)
    rows = run_alpha_sweep(task, tmp_path, alphas=(0.0, 0.75))
    task_dir = tmp_path / "tiny"
    assert len(rows) == 4
    assert all(r["strategy"] == "EC" for r in rows)
    for a in ("alpha_0", "alpha_0.75"):
        assert (task_dir / a / run_csv_name("EC", 0)).exists()
    summary = read_rows(task_dir / "alpha_summary.csv")
    assert [float(r["alpha"]) for r in summary] == [0.0, 0.75]
    assert all(int(r["runs"]) == 2 for r in summary)
