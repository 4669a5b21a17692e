"""Training driver: the outer episode loop over a sampled prompt stream,
one value-network update per environment step, periodic target refresh.

All randomness flows from the config seed through named child streams, so
two runs with the same config produce byte-identical logs, metrics and
checkpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .agent import ReplayBuffer, Transition, epsilon_at, maybe_sync, select_action, sync_target, train_batch
from .checkpoint import save_checkpoint
from .config import RunConfig
from .environment import Environment
from .logs import EpisodeRecord, StepRecord, write_episode_log
from .policies import episode_streams
from .network import AdamState, QNetwork
from .simworld import generate_corpus, oracle_fraction

CHECKPOINT_NAME = "checkpoint.ckpt"
EPISODES_NAME = "episodes.jsonl"
METRICS_NAME = "metrics.jsonl"
SUMMARY_NAME = "summary.json"


@dataclass
class StepMetric:
    step: int
    episode: int
    epsilon: float
    reward: float
    loss: Optional[float]
    synced: bool


@dataclass
class TrainResult:
    config: RunConfig
    net: QNetwork
    adam: AdamState
    episodes: list[EpisodeRecord]
    metrics: list[StepMetric]
    out_dir: Optional[Path] = None

    @property
    def losses(self) -> list[float]:
        return [m.loss for m in self.metrics if m.loss is not None]

    @property
    def rewards(self) -> list[float]:
        return [m.reward for m in self.metrics]

    def cumulative_average_reward(self) -> np.ndarray:
        r = np.asarray(self.rewards, dtype=np.float64)
        if r.size == 0:
            return r
        return np.cumsum(r) / np.arange(1, r.size + 1)


def _child_seed(base: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=base, spawn_key=(tag,)))


def train(config: RunConfig, out_dir: Optional[str | Path] = None) -> TrainResult:
    config.validate()
    registry = config.build_registry()
    env = Environment(registry, t_max=config.t_max, step_penalty=config.step_penalty)

    corpus = generate_corpus(
        config.seed,
        config.train_prompt_count,
        config.difficulty_min,
        config.difficulty_max,
    )

    net = QNetwork(layer_sizes=(1536, 64, 64, registry.size), seed=config.seed)
    target = sync_target(net)  # initialization copy (sync at step 0)
    adam = AdamState(net)
    buffer = ReplayBuffer(capacity=config.buffer_capacity, min_size=config.learning_starts)

    prompt_rng = _child_seed(config.seed, 1)  # prompt sampling, with replacement
    explore_rng = _child_seed(config.seed, 2)  # epsilon-greedy draws
    sample_rng = _child_seed(config.seed, 3)  # replay minibatch draws
    seed_rng = _child_seed(config.seed, 4)  # per-episode world seeds

    episodes: list[EpisodeRecord] = []
    metrics: list[StepMetric] = []
    global_step = 0
    episode_id = 0

    while global_step < config.total_steps:
        prompt = corpus[int(prompt_rng.integers(0, len(corpus)))]
        ep_seed = int(seed_rng.integers(0, 2**63))
        _, ep_rng = episode_streams(ep_seed)  # world stream; replayable from the log
        state = env.reset(prompt)
        steps: list[StepRecord] = []
        ep_return = 0.0

        while not state.done and global_step < config.total_steps:
            mask = env.legal_actions(state)
            eps = epsilon_at(
                global_step,
                config.total_steps,
                config.epsilon_initial,
                config.epsilon_final,
                config.exploration_fraction,
            )
            action = select_action(net, state.embedding, mask, eps, explore_rng)
            state2, reward, done, info = env.step(state, action, ep_rng)
            buffer.push(
                Transition(
                    s=state.embedding,
                    a=action,
                    r=reward,
                    s2=state2.embedding,
                    done=done,
                    next_mask=info.next_mask,
                )
            )
            global_step += 1
            loss: Optional[float] = None
            if len(buffer) >= config.learning_starts:
                batch = buffer.sample(config.batch_size, sample_rng)
                loss = train_batch(net, target, batch, adam, config.lr, config.gamma)
            synced = maybe_sync(global_step, config.target_sync_interval)
            if synced:
                target = sync_target(net)
            ep_return += reward
            metrics.append(
                StepMetric(
                    step=global_step,
                    episode=episode_id,
                    epsilon=eps,
                    reward=reward,
                    loss=loss,
                    synced=synced,
                )
            )
            steps.append(
                StepRecord(
                    t=info.t,
                    expert=info.expert,
                    category=info.category,
                    raw=info.raw,
                    subscores=info.subscores,
                    reward=info.reward,
                    completed=info.completed,
                    mask=info.mask,
                    command_id=info.command_id,
                    attempts=info.attempts,
                    abandoned_command=info.abandoned_command,
                    terminal_reason=info.terminal_reason,
                )
            )
            state = state2

        episodes.append(
            EpisodeRecord(
                episode_id=episode_id,
                seed=ep_seed,
                prompt=prompt,
                steps=tuple(steps),
                episode_return=ep_return,
                length=len(steps),
                final_oracle_fraction=oracle_fraction(state.canvas, prompt),
                truncated_by=None if state.done else "budget",
            )
        )
        episode_id += 1

    result = TrainResult(config=config, net=net, adam=adam, episodes=episodes, metrics=metrics)
    if out_dir is not None:
        result.out_dir = write_artifacts(result, Path(out_dir), global_step)
    return result


def write_artifacts(result: TrainResult, out_dir: Path, step: int) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / CHECKPOINT_NAME, result.net, result.adam, step)
    write_episode_log(out_dir / EPISODES_NAME, result.episodes)
    metric_lines = [
        json.dumps(
            {
                "step": m.step,
                "episode": m.episode,
                "epsilon": m.epsilon,
                "reward": m.reward,
                "loss": m.loss,
                "synced": m.synced,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        for m in result.metrics
    ]
    (out_dir / METRICS_NAME).write_text(
        "\n".join(metric_lines) + ("\n" if metric_lines else ""), encoding="utf-8"
    )
    losses = result.losses
    summary = {
        "total_steps": step,
        "episodes": len(result.episodes),
        "mean_reward": float(np.mean(result.rewards)) if result.metrics else None,
        "mean_episode_return": float(np.mean([e.episode_return for e in result.episodes]))
        if result.episodes
        else None,
        "mean_episode_length": float(np.mean([e.length for e in result.episodes]))
        if result.episodes
        else None,
        "loss_first": losses[0] if losses else None,
        "loss_last": losses[-1] if losses else None,
        "config": json.loads(result.config.to_json()),
    }
    (out_dir / SUMMARY_NAME).write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir
