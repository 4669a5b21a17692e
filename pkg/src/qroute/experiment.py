"""The headline experiment: train across a seed sweep, evaluate greedily on
held-out prompts, compare against every single-expert baseline with paired
signed-rank statistics, and check the routing/convergence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .environment import Environment
from .evaluate import PolicyEval, baseline_single_expert, evaluate, routing_stats
from .policies import GreedyPolicy, OraclePolicy, RandomPolicy
from .simworld import generate_corpus
from .stats import wilcoxon_signed_rank
from .train import TrainResult, train

HELDOUT_SEED_OFFSET = 971  # held-out prompts never overlap the training stream


@dataclass
class SeedOutcome:
    seed: int
    train_result: TrainResult
    trained: PolicyEval
    baselines: list[PolicyEval]
    random: PolicyEval
    oracle: PolicyEval

    def best_baseline(self) -> PolicyEval:
        return max(self.baselines, key=lambda b: b.mean_return)

    def beats_best_baseline(self) -> bool:
        return self.trained.mean_return > self.best_baseline().mean_return


@dataclass
class ExperimentResult:
    outcomes: list[SeedOutcome]
    pooled_baseline_name: str
    pooled_wilcoxon_p: float
    pooled_wilcoxon_w: float
    seeds_beating_best: int
    routing_accuracy: Optional[float]
    loss_decile_ratios: list[float]

    @property
    def n_seeds(self) -> int:
        return len(self.outcomes)


def _loss_decile_ratio(result: TrainResult) -> float:
    """Mean loss over the last tenth of training steps relative to the first
    tenth (steps without an update contribute nothing)."""
    n = result.config.total_steps
    tenth = max(1, n // 10)
    first = [m.loss for m in result.metrics if m.step <= tenth and m.loss is not None]
    last = [m.loss for m in result.metrics if m.step > n - tenth and m.loss is not None]
    if not first or not last:
        return float("nan")
    return float(np.mean(last) / np.mean(first))


def run_seed(
    config: RunConfig,
    eval_prompt_count: int = 100,
    episodes_per_prompt: int = 1,
    eval_seed: Optional[int] = None,
) -> SeedOutcome:
    result = train(config)
    registry = config.build_registry()
    env = Environment(registry, t_max=config.t_max, step_penalty=config.step_penalty)

    heldout = generate_corpus(
        config.seed + HELDOUT_SEED_OFFSET,
        eval_prompt_count,
        config.difficulty_min,
        config.difficulty_max,
        id_start=10_000,
    )
    es = eval_seed if eval_seed is not None else config.seed + 1

    trained = evaluate(
        env, GreedyPolicy(result.net), heldout, episodes_per_prompt, es, name="trained_greedy"
    )
    baselines = [
        baseline_single_expert(env, spec.index, heldout, episodes_per_prompt, es)
        for spec in registry.list()
    ]
    rand = evaluate(env, RandomPolicy(), heldout, episodes_per_prompt, es, name="random")
    oracle = evaluate(env, OraclePolicy(registry), heldout, episodes_per_prompt, es, name="oracle")
    return SeedOutcome(
        seed=config.seed,
        train_result=result,
        trained=trained,
        baselines=baselines,
        random=rand,
        oracle=oracle,
    )


def run_learning_experiment(
    base_config: Optional[RunConfig] = None,
    seeds: Sequence[int] = (1, 2, 3, 4, 5),
    eval_prompt_count: int = 100,
    episodes_per_prompt: int = 1,
) -> ExperimentResult:
    base = base_config if base_config is not None else RunConfig()
    outcomes = []
    for seed in seeds:
        cfg = RunConfig(**{**base.__dict__, "seed": seed})
        outcomes.append(run_seed(cfg, eval_prompt_count, episodes_per_prompt))

    # pooled comparison target: the baseline with the best pooled mean return
    pooled_means: dict[str, list[float]] = {}
    for oc in outcomes:
        for b in oc.baselines:
            pooled_means.setdefault(b.name, []).extend(
                ep.episode_return for ep in b.episodes
            )
    best_name = max(pooled_means, key=lambda k: float(np.mean(pooled_means[k])))

    pairs: list[tuple[float, float]] = []
    for oc in outcomes:
        trained_returns = oc.trained.returns_by_prompt()
        baseline = next(b for b in oc.baselines if b.name == best_name)
        base_returns = baseline.returns_by_prompt()
        for key in sorted(set(trained_returns) & set(base_returns)):
            pairs.append((trained_returns[key], base_returns[key]))
    res = wilcoxon_signed_rank(pairs)

    i2i_hits = 0
    i2i_total = 0
    for oc in outcomes:
        registry = oc.train_result.config.build_registry()
        hits, total = routing_stats(oc.trained.episodes, registry)
        i2i_hits += hits
        i2i_total += total
    routing = i2i_hits / i2i_total if i2i_total else None

    return ExperimentResult(
        outcomes=outcomes,
        pooled_baseline_name=best_name,
        pooled_wilcoxon_p=res.pvalue,
        pooled_wilcoxon_w=res.statistic,
        seeds_beating_best=sum(1 for oc in outcomes if oc.beats_best_baseline()),
        routing_accuracy=routing,
        loss_decile_ratios=[_loss_decile_ratio(oc.train_result) for oc in outcomes],
    )


def render_experiment(result: ExperimentResult) -> str:
    lines = []
    lines.append(
        f"seeds beating best single expert: {result.seeds_beating_best}/{result.n_seeds}"
    )
    lines.append(
        f"pooled signed-rank vs {result.pooled_baseline_name}: "
        f"W={result.pooled_wilcoxon_w:.1f} p={result.pooled_wilcoxon_p:.3e}"
    )
    if result.routing_accuracy is not None:
        lines.append(f"routing accuracy on editing steps: {100 * result.routing_accuracy:.1f}%")
    ratios = ", ".join(f"{r:.3f}" for r in result.loss_decile_ratios)
    lines.append(f"final/first loss decile ratios: {ratios}")
    lines.append("")
    lines.append(f"{'seed':>5} {'trained':>10} {'oracle':>10} {'random':>10}  best baseline")
    for oc in result.outcomes:
        best = oc.best_baseline()
        lines.append(
            f"{oc.seed:>5} {oc.trained.mean_return:>10.4f} "
            f"{oc.oracle.mean_return:>10.4f} {oc.random.mean_return:>10.4f}  "
            f"{best.mean_return:.4f} ({best.name})"
        )
    return "\n".join(lines)
