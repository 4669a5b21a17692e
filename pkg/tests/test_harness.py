import json

import numpy as np
import pytest

from qroute.cli import main as cli_main
from qroute.config import RunConfig, config_from_dict, load_config
from qroute.core import TaskCategory
from qroute.environment import Environment
from qroute.errors import ConfigError, LogParseError
from qroute.evaluate import baseline_single_expert, build_report, evaluate, render_report
from qroute.logs import EpisodeRecord, read_episode_log, write_episode_log
from qroute.policies import GreedyPolicy, OraclePolicy, RandomPolicy, SingleExpertPolicy, run_episode
from qroute.simworld import generate_corpus, write_prompts
from qroute.train import train

from conftest import atom, make_prompt

_C = TaskCategory


def uniform_profiles(mean=8.0, sigma=0.0, failure=0.0):
    profiles = []
    for i in range(12):
        profiles.append(
            {
                "index": i,
                "name": f"e{i}",
                "modality": "t2i" if i < 7 else "i2i",
                "means": {c.value: mean for c in TaskCategory},
                "sigma": sigma,
                "failure": {c.value: failure for c in TaskCategory},
            }
        )
    return profiles


# ---------------------------------------------------------------- config


def test_config_round_trip(tmp_path):
    cfg = RunConfig(seed=3, total_steps=10)
    path = tmp_path / "config.json"
    path.write_text(cfg.to_json())
    loaded = load_config(path)
    assert loaded == cfg


def test_config_unknown_key():
    with pytest.raises(ConfigError):
        config_from_dict({"learning_rate": 1e-3})


@pytest.mark.parametrize(
    "patch",
    [
        {"gamma": 1.4},
        {"total_steps": -1},
        {"batch_size": 0},
        {"learning_starts": 900},
        {"exploration_fraction": 0.0},
        {"taxonomy": ["add_object", "add_object"]},
        {"taxonomy": ["not_a_category"]},
        {"difficulty_min": 5, "difficulty_max": 2},
    ],
)
def test_config_validation_errors(patch):
    data = {**patch}
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_config_profiles_must_cover_taxonomy():
    profiles = uniform_profiles()
    del profiles[0]["means"]["add_text"]
    with pytest.raises(ConfigError):
        config_from_dict({"expert_profiles": profiles})


# ---------------------------------------------------------------- logs


def test_episode_log_round_trip(tmp_path, env):
    prompts = generate_corpus(2, 6, 1, 6)
    episodes = [run_episode(env, RandomPolicy(), p, seed=i, episode_id=i) for i, p in enumerate(prompts)]
    path = tmp_path / "episodes.jsonl"
    write_episode_log(path, episodes)
    loaded = read_episode_log(path)
    assert loaded == episodes
    # writing what was read reproduces the bytes
    again = tmp_path / "again.jsonl"
    write_episode_log(again, loaded)
    assert again.read_bytes() == path.read_bytes()


def test_episode_log_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind": "bogus"}\n')
    with pytest.raises(LogParseError) as err:
        read_episode_log(path)
    assert err.value.line_number == 1


def test_empty_log_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_episode_log(path, [])
    assert read_episode_log(path) == []


# ---------------------------------------------------------------- policies


def test_single_expert_policy_t2i_stops_after_opening(env):
    prompt = make_prompt([atom("add_object", "dog"), atom("add_text", "sign")])
    rec = run_episode(env, SingleExpertPolicy(index=0, registry=env.registry), prompt, seed=3)
    if not rec.steps[0].completed:
        assert rec.truncated_by == "policy"
        assert rec.length == 1


def test_single_expert_policy_i2i_uses_default_opener(env):
    prompt = make_prompt([atom("add_object", "dog")])
    rec = run_episode(env, SingleExpertPolicy(index=8, registry=env.registry, default_t2i=4), prompt, seed=5)
    assert rec.steps[0].expert == 4
    for s in rec.steps[1:]:
        assert s.expert == 8


def test_single_expert_policy_uses_counterpart(env):
    prompt = make_prompt([atom("add_object", "dog"), atom("color_change", "wall")])
    rec = run_episode(env, SingleExpertPolicy(index=4, registry=env.registry), prompt, seed=11)
    assert rec.steps[0].expert == 4
    for s in rec.steps[1:]:
        assert s.expert == 10  # same-name editing counterpart


def test_oracle_policy_routes_by_category(env):
    prompt = make_prompt([atom("add_text", "sign"), atom("spatial_rearrange", "row")], editing=True)
    rec = run_episode(env, OraclePolicy(env.registry), prompt, seed=2)
    from qroute.simworld import best_expert

    for s in rec.steps[1:]:
        assert s.expert == best_expert(env.registry, _C(s.category))


# ---------------------------------------------------------------- evaluate


def test_evaluate_empty_prompt_set(env):
    result = evaluate(env, RandomPolicy(), [], episodes_per_prompt=1, seed=0, name="empty")
    assert result.episodes == []
    assert result.mean_return == 0.0
    assert result.routing_accuracy is None


def test_hand_computable_report_with_deterministic_profiles():
    cfg = config_from_dict({"expert_profiles": uniform_profiles(mean=8.0, sigma=0.0, failure=0.0)})
    env = Environment(cfg.build_registry())
    prompt = make_prompt([atom("add_object", "dog")])
    result = evaluate(env, SingleExpertPolicy(index=0, registry=env.registry), [prompt], 1, seed=0, name="det")
    # one step: everything satisfied, quality exactly 8 -> raw (10+10+8+10)/4 = 9.5
    expected_return = 9.5 / 10 - 0.05
    assert result.mean_return == pytest.approx(expected_return, abs=1e-12)
    assert result.stderr_return == 0.0
    assert result.mean_oracle == pytest.approx(1.0)
    assert result.mean_length == 1.0


def test_always_failing_expert_scores_zero_oracle():
    cfg = config_from_dict({"expert_profiles": uniform_profiles(mean=8.0, sigma=0.0, failure=1.0)})
    env = Environment(cfg.build_registry())
    prompts = generate_corpus(9, 10, 1, 6)
    result = baseline_single_expert(env, 7, prompts, 1, seed=0)
    assert result.mean_oracle == 0.0


def test_oracle_policy_dominates_single_expert_baselines(env):
    prompts = generate_corpus(41, 120, 1, 6)
    oracle = evaluate(env, OraclePolicy(env.registry), prompts, 1, seed=77, name="oracle")
    for spec in env.registry.list():
        base = baseline_single_expert(env, spec.index, prompts, 1, seed=77)
        assert oracle.mean_oracle >= base.mean_oracle - 1e-12


def test_report_rendering_and_payload(env):
    prompts = generate_corpus(1, 8, 1, 6)
    main_eval = evaluate(env, RandomPolicy(), prompts, 1, seed=1, name="main")
    base = baseline_single_expert(env, 4, prompts, 1, seed=1)
    report = build_report(main_eval, [base])
    text = render_report(report)
    assert "main" in text and base.name in text
    payload = json.loads(report.to_json())
    assert {p["name"] for p in payload["policies"]} == {"main", base.name}
    assert base.name in payload["wilcoxon_vs_baselines"]


# ---------------------------------------------------------------- train


def test_train_zero_budget(tmp_path):
    cfg = RunConfig(seed=0, total_steps=0)
    result = train(cfg, out_dir=tmp_path / "run")
    assert result.episodes == []
    assert result.metrics == []
    assert (tmp_path / "run/checkpoint.ckpt").exists()
    assert (tmp_path / "run/episodes.jsonl").read_text() == ""
    from qroute.checkpoint import load_checkpoint

    net, adam, step = load_checkpoint(tmp_path / "run/checkpoint.ckpt")
    assert step == 0
    fresh = RunConfig(seed=0).build_registry()
    assert net.layer_sizes == (1536, 64, 64, fresh.size)


def test_train_consumes_exact_budget():
    cfg = RunConfig(seed=2, total_steps=57)
    result = train(cfg)
    assert len(result.metrics) == 57
    assert sum(e.length for e in result.episodes) == 57


def test_train_deterministic_reward_trace():
    cfg = RunConfig(seed=5, total_steps=120)
    a = train(cfg)
    b = train(cfg)
    assert a.rewards == b.rewards
    assert a.losses == b.losses


def test_train_artifacts_byte_identical(tmp_path):
    cfg = RunConfig(seed=8, total_steps=150)
    train(cfg, out_dir=tmp_path / "a")
    train(cfg, out_dir=tmp_path / "b")
    for name in ("checkpoint.ckpt", "episodes.jsonl", "metrics.jsonl", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# ---------------------------------------------------------------- cli


def test_cli_prompts_and_eval_round_trip(tmp_path, capsys):
    assert cli_main(["prompts", "--count", "6", "--seed", "2", "--out", str(tmp_path / "p.jsonl")]) == 0
    run_dir = tmp_path / "run"
    cfg = RunConfig(seed=1, total_steps=60)
    (tmp_path / "cfg.json").write_text(cfg.to_json())
    assert cli_main(["train", "--config", str(tmp_path / "cfg.json"), "--out", str(run_dir)]) == 0
    assert cli_main([
        "eval", "--checkpoint", str(run_dir / "checkpoint.ckpt"),
        "--prompts", str(tmp_path / "p.jsonl"), "--episodes", "1",
        "--out", str(tmp_path / "report.json"),
    ]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["policies"][0]["episodes"] == 6
    capsys.readouterr()


def test_cli_invalid_config_is_validation_error(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"gamma": 2.0}')
    assert cli_main(["train", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "x")]) == 2
    capsys.readouterr()


def test_cli_missing_checkpoint_is_validation_error(tmp_path, capsys):
    write_prompts(tmp_path / "p.jsonl", generate_corpus(0, 2, 1, 2))
    rc = cli_main(["eval", "--checkpoint", str(tmp_path / "none.ckpt"), "--prompts", str(tmp_path / "p.jsonl")])
    assert rc == 2
    capsys.readouterr()


def test_cli_replay_verifies_episode(tmp_path, capsys):
    run_dir = tmp_path / "run"
    cfg = RunConfig(seed=3, total_steps=40)
    (tmp_path / "cfg.json").write_text(cfg.to_json())
    assert cli_main(["train", "--config", str(tmp_path / "cfg.json"), "--out", str(run_dir)]) == 0
    assert cli_main(["replay", "--episode", str(run_dir / "episodes.jsonl"), "--index", "0"]) == 0
    out = capsys.readouterr().out
    assert "replay OK" in out


def test_cli_wilcoxon_between_logs(tmp_path, capsys, env):
    prompts = generate_corpus(6, 10, 1, 6)
    a = [run_episode(env, RandomPolicy(), p, seed=i, episode_id=i) for i, p in enumerate(prompts)]
    b = [run_episode(env, RandomPolicy(), p, seed=100 + i, episode_id=i) for i, p in enumerate(prompts)]
    write_episode_log(tmp_path / "a.jsonl", a)
    write_episode_log(tmp_path / "b.jsonl", b)
    assert cli_main(["stats", "wilcoxon", "--a", str(tmp_path / "a.jsonl"), "--b", str(tmp_path / "b.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "W=" in out and "p=" in out


def test_cli_baseline_command(tmp_path, capsys):
    write_prompts(tmp_path / "p.jsonl", generate_corpus(0, 4, 1, 6))
    assert cli_main(["baseline", "--expert", "9", "--prompts", str(tmp_path / "p.jsonl")]) == 0
    assert cli_main(["baseline", "--expert", "44", "--prompts", str(tmp_path / "p.jsonl")]) == 2
    capsys.readouterr()
