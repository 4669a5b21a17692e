"""Greedy evaluation, single-expert baselines, and comparison reports.

A report aggregates per-policy rollout statistics (return, oracle
fraction, length, the category-by-expert choice matrix) and, for the
trained policy, paired signed-rank p-values and win rates against each
baseline on the same prompts with the same per-prompt seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import TAXONOMY, Prompt, TaskCategory
from .environment import Environment
from .experts import ExpertRegistry, Modality
from .logs import EpisodeRecord
from .policies import Policy, SingleExpertPolicy, episode_seed, run_episode
from .simworld import best_expert
from .stats import mean_stderr, win_rate, wilcoxon_signed_rank

CATEGORY_NAMES = tuple(c.value for c in TAXONOMY)


@dataclass
class PolicyEval:
    name: str
    episodes: list[EpisodeRecord]
    mean_return: float
    stderr_return: float
    mean_oracle: float
    mean_length: float
    choice_matrix: np.ndarray  # categories x experts, step counts
    per_expert_mean_raw: dict[int, float]
    routing_accuracy: Optional[float]

    def returns_by_prompt(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        reps: dict[int, int] = {}
        for ep in self.episodes:
            rep = reps.get(ep.prompt.id, 0)
            reps[ep.prompt.id] = rep + 1
            out[(ep.prompt.id, rep)] = ep.episode_return
        return out


def routing_stats(
    episodes: Sequence[EpisodeRecord], registry: ExpertRegistry
) -> tuple[int, int]:
    """(hits, total) over editing steps: a hit is an action equal to the
    ground-truth best expert for the step's command category."""
    i2i = registry.indices(Modality.I2I)
    hits = 0
    total = 0
    best_cache: dict[str, int] = {}
    for ep in episodes:
        for s in ep.steps:
            legal = {i for i, m in enumerate(s.mask) if m}
            if legal != i2i:
                continue
            if s.category not in best_cache:
                best_cache[s.category] = best_expert(registry, TaskCategory(s.category))
            total += 1
            if s.expert == best_cache[s.category]:
                hits += 1
    return hits, total


def _routing_accuracy(
    episodes: Sequence[EpisodeRecord], registry: ExpertRegistry
) -> Optional[float]:
    hits, total = routing_stats(episodes, registry)
    if total == 0:
        return None
    return hits / total


def summarize_policy(
    name: str, episodes: list[EpisodeRecord], registry: ExpertRegistry
) -> PolicyEval:
    n_experts = registry.size
    matrix = np.zeros((len(TAXONOMY), n_experts), dtype=np.int64)
    raw_sum = np.zeros(n_experts)
    raw_count = np.zeros(n_experts, dtype=np.int64)
    for ep in episodes:
        for s in ep.steps:
            matrix[CATEGORY_NAMES.index(s.category), s.expert] += 1
            raw_sum[s.expert] += s.raw
            raw_count[s.expert] += 1
    per_expert = {
        i: float(raw_sum[i] / raw_count[i]) for i in range(n_experts) if raw_count[i]
    }
    if episodes:
        mean_ret, se_ret = mean_stderr([ep.episode_return for ep in episodes])
        mean_oracle = float(np.mean([ep.final_oracle_fraction for ep in episodes]))
        mean_len = float(np.mean([ep.length for ep in episodes]))
    else:
        mean_ret = se_ret = mean_oracle = mean_len = 0.0
    return PolicyEval(
        name=name,
        episodes=episodes,
        mean_return=mean_ret,
        stderr_return=se_ret,
        mean_oracle=mean_oracle,
        mean_length=mean_len,
        choice_matrix=matrix,
        per_expert_mean_raw=per_expert,
        routing_accuracy=_routing_accuracy(episodes, registry),
    )


def evaluate(
    env: Environment,
    policy: Policy,
    prompts: Sequence[Prompt],
    episodes_per_prompt: int = 1,
    seed: int = 0,
    name: str = "policy",
) -> PolicyEval:
    """Greedy rollouts over a prompt set; empty prompt sets yield an empty
    (zeroed) evaluation rather than an error."""
    episodes: list[EpisodeRecord] = []
    eid = 0
    for prompt in prompts:
        for rep in range(episodes_per_prompt):
            episodes.append(
                run_episode(
                    env,
                    policy,
                    prompt,
                    seed=episode_seed(seed, prompt.id, rep),
                    episode_id=eid,
                )
            )
            eid += 1
    return summarize_policy(name, episodes, env.registry)


def baseline_single_expert(
    env: Environment,
    index: int,
    prompts: Sequence[Prompt],
    episodes_per_prompt: int = 1,
    seed: int = 0,
    default_t2i: Optional[int] = 4,
) -> PolicyEval:
    policy = SingleExpertPolicy(index=index, registry=env.registry, default_t2i=default_t2i)
    spec = env.registry.spec(index)
    return evaluate(
        env,
        policy,
        prompts,
        episodes_per_prompt,
        seed,
        name=f"expert_{index}_{spec.name}_{spec.modality.value}",
    )


@dataclass
class EvalReport:
    policies: list[PolicyEval]
    wilcoxon: dict[str, tuple[float, float]] = field(default_factory=dict)
    win_rates: dict[str, tuple[float, float]] = field(default_factory=dict)

    def policy(self, name: str) -> PolicyEval:
        for p in self.policies:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_payload(self) -> dict:
        return {
            "policies": [
                {
                    "name": p.name,
                    "episodes": len(p.episodes),
                    "mean_return": p.mean_return,
                    "stderr_return": p.stderr_return,
                    "mean_oracle_fraction": p.mean_oracle,
                    "mean_length": p.mean_length,
                    "routing_accuracy": p.routing_accuracy,
                    "per_expert_mean_raw": {str(k): v for k, v in sorted(p.per_expert_mean_raw.items())},
                    "choice_matrix": {
                        "categories": list(CATEGORY_NAMES),
                        "counts": p.choice_matrix.tolist(),
                    },
                }
                for p in self.policies
            ],
            "wilcoxon_vs_baselines": {
                k: {"W": w, "p": pv} for k, (w, pv) in sorted(self.wilcoxon.items())
            },
            "win_rates_vs_baselines": {
                k: {"rate": r, "stderr": se} for k, (r, se) in sorted(self.win_rates.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), indent=2, sort_keys=True)


def build_report(
    main: PolicyEval, baselines: Sequence[PolicyEval], extras: Sequence[PolicyEval] = ()
) -> EvalReport:
    """Attach paired statistics of the main policy against each baseline."""
    report = EvalReport(policies=[main, *baselines, *extras])
    main_returns = main.returns_by_prompt()
    for b in baselines:
        b_returns = b.returns_by_prompt()
        keys = sorted(set(main_returns) & set(b_returns))
        pairs = [(main_returns[k], b_returns[k]) for k in keys]
        if pairs:
            try:
                res = wilcoxon_signed_rank(pairs)
                report.wilcoxon[b.name] = (res.statistic, res.pvalue)
            except Exception:
                report.wilcoxon[b.name] = (float("nan"), 1.0)
            report.win_rates[b.name] = win_rate([x > y for x, y in pairs])
    return report


def render_report(report: EvalReport) -> str:
    lines: list[str] = []
    lines.append(f"{'policy':<32} {'return':>16} {'oracle':>8} {'len':>6} {'route%':>7}")
    for p in report.policies:
        route = f"{100 * p.routing_accuracy:.1f}" if p.routing_accuracy is not None else "-"
        lines.append(
            f"{p.name:<32} {p.mean_return:>9.4f} ±{p.stderr_return:<5.4f} "
            f"{p.mean_oracle:>8.3f} {p.mean_length:>6.2f} {route:>7}"
        )
    if report.wilcoxon:
        lines.append("")
        lines.append(f"{'vs baseline':<32} {'W':>10} {'p':>12} {'win rate':>18}")
        for name in sorted(report.wilcoxon):
            w, p = report.wilcoxon[name]
            rate, se = report.win_rates[name]
            lines.append(f"{name:<32} {w:>10.1f} {p:>12.3e} {rate:>10.2f} ± {se:.2f}")
    return "\n".join(lines)
