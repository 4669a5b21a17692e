"""Command line entry points.

Exit codes: 0 success, 2 validation problem (arguments, config, inputs),
3 runtime abort (numerical failure, remote failure, replay mismatch).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint
from .config import RunConfig, load_config
from .environment import Environment
from .errors import AllZeroDifferences, ConfigError, LogParseError, NumericalError, QRouteError
from .evaluate import baseline_single_expert, build_report, evaluate, render_report
from .logs import read_episode_log
from .policies import GreedyPolicy, episode_streams
from .simworld import generate_corpus, read_prompts, write_prompts
from .stats import wilcoxon_signed_rank
from .train import train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qroute")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the routing policy")
    p_train.add_argument("--config", type=Path, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", type=Path, required=True)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--prompts", type=Path, required=True)
    p_eval.add_argument("--episodes", type=int, default=1)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--baselines", action="store_true", help="also run every single-expert baseline")
    p_eval.add_argument("--out", type=Path, default=None, help="write the JSON report here")

    p_base = sub.add_parser("baseline", help="forced single-expert rollouts")
    p_base.add_argument("--expert", type=int, required=True)
    p_base.add_argument("--prompts", type=Path, required=True)
    p_base.add_argument("--episodes", type=int, default=1)
    p_base.add_argument("--seed", type=int, default=0)
    p_base.add_argument("--out", type=Path, default=None)

    p_stats = sub.add_parser("stats", help="statistics over episode logs")
    stats_sub = p_stats.add_subparsers(dest="stat", required=True)
    p_wil = stats_sub.add_parser("wilcoxon", help="paired signed-rank test over per-episode returns")
    p_wil.add_argument("--a", type=Path, required=True)
    p_wil.add_argument("--b", type=Path, required=True)

    p_replay = sub.add_parser("replay", help="re-simulate a logged episode and verify it")
    p_replay.add_argument("--episode", type=Path, required=True, help="episode log file")
    p_replay.add_argument("--index", type=int, required=True, help="episode id inside the log")
    p_replay.add_argument("--config", type=Path, default=None)

    p_prompts = sub.add_parser("prompts", help="generate a prompt corpus file")
    p_prompts.add_argument("--count", type=int, required=True)
    p_prompts.add_argument("--seed", type=int, default=0)
    p_prompts.add_argument("--difficulty-min", type=int, default=1)
    p_prompts.add_argument("--difficulty-max", type=int, default=6)
    p_prompts.add_argument("--out", type=Path, required=True)
    return parser


def _load_run_config(path: Path | None, seed: int | None) -> RunConfig:
    cfg = load_config(path) if path is not None else RunConfig()
    if seed is not None:
        cfg.seed = seed
    return cfg.validate()


def _cmd_train(args) -> int:
    cfg = _load_run_config(args.config, args.seed)
    result = train(cfg, out_dir=args.out)
    print(f"trained {cfg.total_steps} steps over {len(result.episodes)} episodes")
    print(f"artifacts in {result.out_dir}")
    return EXIT_OK


def _env_for(cfg: RunConfig) -> Environment:
    return Environment(cfg.build_registry(), t_max=cfg.t_max, step_penalty=cfg.step_penalty)


def _cmd_eval(args) -> int:
    net, _, _ = load_checkpoint(args.checkpoint)
    prompts = read_prompts(args.prompts)
    cfg = RunConfig()
    env = _env_for(cfg)
    trained = evaluate(env, GreedyPolicy(net), prompts, args.episodes, args.seed, name="trained_greedy")
    baselines = []
    if args.baselines:
        baselines = [
            baseline_single_expert(env, spec.index, prompts, args.episodes, args.seed)
            for spec in env.registry.list()
        ]
    report = build_report(trained, baselines)
    print(render_report(report))
    if args.out is not None:
        args.out.write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    cfg = RunConfig()
    env = _env_for(cfg)
    if not 0 <= args.expert < env.registry.size:
        raise ConfigError(f"expert index out of range: {args.expert}")
    prompts = read_prompts(args.prompts)
    result = baseline_single_expert(env, args.expert, prompts, args.episodes, args.seed)
    report = build_report(result, [])
    print(render_report(report))
    if args.out is not None:
        args.out.write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_wilcoxon(args) -> int:
    a = read_episode_log(args.a)
    b = read_episode_log(args.b)
    if len(a) != len(b):
        raise ConfigError(f"logs hold {len(a)} vs {len(b)} episodes; need equal counts")
    pairs = [(x.episode_return, y.episode_return) for x, y in zip(a, b)]
    res = wilcoxon_signed_rank(pairs)
    mode = "exact" if res.exact else "normal-approx"
    print(f"n={res.n_used} W={res.statistic:.1f} p={res.pvalue:.6g} ({mode})")
    return EXIT_OK


def _cmd_replay(args) -> int:
    episodes = read_episode_log(args.episode)
    matching = [e for e in episodes if e.episode_id == args.index]
    if not matching:
        raise ConfigError(f"no episode with id {args.index} in {args.episode}")
    episode = matching[0]
    cfg = _load_run_config(args.config, None)
    env = _env_for(cfg)

    _, rng = episode_streams(episode.seed)
    state = env.reset(episode.prompt)
    print(f"{'t':>2} {'expert':>6} {'category':<24} {'raw':>7} {'reward':>8} {'done':>5}")
    for logged in episode.steps:
        state, reward, done, info = env.step(state, logged.expert, rng)
        print(
            f"{info.t:>2} {info.expert:>6} {info.category:<24} {info.raw:>7.3f} "
            f"{reward:>8.4f} {str(done):>5}"
        )
        if abs(reward - logged.reward) > 1e-12 or abs(info.raw - logged.raw) > 1e-12:
            print(f"replay mismatch at t={info.t}: logged reward {logged.reward}, got {reward}")
            return EXIT_RUNTIME
    print("replay OK")
    return EXIT_OK


def _cmd_prompts(args) -> int:
    if not 1 <= args.difficulty_min <= args.difficulty_max <= 6:
        raise ConfigError("difficulty bounds must satisfy 1 <= min <= max <= 6")
    prompts = generate_corpus(args.seed, args.count, args.difficulty_min, args.difficulty_max)
    write_prompts(args.out, prompts)
    print(f"wrote {len(prompts)} prompts to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "baseline":
            return _cmd_baseline(args)
        if args.command == "stats":
            return _cmd_wilcoxon(args)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "prompts":
            return _cmd_prompts(args)
        parser.error(f"unknown command {args.command}")
        return EXIT_VALIDATION
    except (ConfigError, LogParseError, AllZeroDifferences, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, QRouteError) as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
