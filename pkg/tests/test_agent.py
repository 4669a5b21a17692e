import numpy as np
import pytest

from qroute.agent import (
    ReplayBuffer,
    Transition,
    epsilon_at,
    maybe_sync,
    select_action,
    sync_target,
    td_targets,
    train_batch,
)
from qroute.errors import BufferTooSmall, DomainError, EmptyMask
from qroute.network import AdamState, QNetwork


def tr(i, done=False, r=0.1, mask=(True,) * 3, n=8):
    rng = np.random.default_rng(i)
    s = rng.normal(size=n)
    s2 = rng.normal(size=n)
    return Transition(s=s / np.linalg.norm(s), a=i % 3, r=r, s2=s2 / np.linalg.norm(s2), done=done, next_mask=mask)


def test_epsilon_schedule_anchors():
    assert epsilon_at(0, 1000) == pytest.approx(1.0)
    assert epsilon_at(500, 1000) == pytest.approx(0.1)
    assert epsilon_at(250, 1000) == pytest.approx(0.55)
    assert epsilon_at(999, 1000) == pytest.approx(0.1)


def test_epsilon_closed_form_grid():
    horizon = 2000
    for step in range(0, horizon, 2):
        expected = 0.1 if step >= 1000 else 1.0 - 0.9 * step / 1000
        assert epsilon_at(step, horizon) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("step,horizon", [(-1, 100), (0, 0), (5, -2)])
def test_epsilon_domain(step, horizon):
    with pytest.raises(DomainError):
        epsilon_at(step, horizon)


def test_select_greedy_argmax():
    net = QNetwork((4, 3, 3, 4), seed=0, dtype=np.float64)
    net.weights[-1][:] = 0
    net.biases[-1][:] = np.array([0.1, 0.9, 0.3, 0.2])
    rng = np.random.default_rng(0)
    assert select_action(net, np.zeros(4), np.array([True] * 4), 0.0, rng) == 1


def test_select_respects_mask():
    net = QNetwork((4, 3, 3, 4), seed=0, dtype=np.float64)
    net.weights[-1][:] = 0
    net.biases[-1][:] = np.array([0.1, 0.9, 0.3, 0.2])
    rng = np.random.default_rng(0)
    mask = np.array([True, False, True, True])
    assert select_action(net, np.zeros(4), mask, 0.0, rng) == 2


def test_select_empty_mask():
    net = QNetwork((4, 3, 3, 2), seed=0)
    with pytest.raises(EmptyMask):
        select_action(net, np.zeros(4), np.zeros(2, dtype=bool), 0.5, np.random.default_rng(0))


def test_select_exploration_uniform_chi_square():
    net = QNetwork((4, 3, 3, 6), seed=0)
    mask = np.array([True, False, True, True, False, True])
    legal = np.flatnonzero(mask)
    rng = np.random.default_rng(7)
    counts = np.zeros(6)
    n = 10_000
    for _ in range(n):
        counts[select_action(net, np.zeros(4), mask, 1.0, rng)] += 1
    assert counts[~mask].sum() == 0
    expected = n / legal.size
    chi2 = float(((counts[legal] - expected) ** 2 / expected).sum())
    # chi-square with 3 dof: mean 3, sd sqrt(6); 3 sigma above the mean
    assert chi2 < 3 + 3 * np.sqrt(6)


def test_td_targets_bellman_cases():
    net = QNetwork((8, 4, 4, 3), seed=0, dtype=np.float64)
    for w in net.weights:
        w[:] = 0
    net.biases[-1][:] = np.array([0.2, 1.0, 0.7])
    batch = [tr(1, done=False, r=0.5), tr(2, done=True, r=0.95)]
    y = td_targets(batch, net, gamma=0.99)
    assert y[0] == pytest.approx(0.5 + 0.99 * 1.0)  # 1.49
    assert y[1] == pytest.approx(0.95)
    y0 = td_targets(batch, net, gamma=0.0)
    assert y0 == pytest.approx([0.5, 0.95])


def test_td_targets_respect_successor_mask():
    net = QNetwork((8, 4, 4, 3), seed=0, dtype=np.float64)
    for w in net.weights:
        w[:] = 0
    net.biases[-1][:] = np.array([0.2, 1.0, 0.7])
    batch = [tr(3, done=False, r=0.0, mask=(True, False, True))]
    y = td_targets(batch, net, gamma=1.0)
    assert y[0] == pytest.approx(0.7)  # the global max (1.0) is masked out


def test_buffer_fifo_eviction():
    buf = ReplayBuffer(capacity=500, min_size=50)
    for i in range(501):
        buf.push(tr(i, r=float(i)))
    assert len(buf) == 500
    rewards = {t.r for t in buf.snapshot()}
    assert 0.0 not in rewards
    assert 500.0 in rewards


def test_buffer_refuses_below_learning_starts():
    buf = ReplayBuffer(capacity=500, min_size=50)
    for i in range(49):
        buf.push(tr(i))
    with pytest.raises(BufferTooSmall):
        buf.sample(16, np.random.default_rng(0))
    buf.push(tr(49))
    assert len(buf.sample(16, np.random.default_rng(0))) == 16


def test_buffer_sampling_uniform_chi_square():
    buf = ReplayBuffer(capacity=10, min_size=1)
    for i in range(10):
        buf.push(tr(i, r=float(i)))
    rng = np.random.default_rng(3)
    counts = np.zeros(10)
    draws = 10_000
    for t in buf.sample(draws, rng):
        counts[int(t.r)] += 1
    expected = draws / 10
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 9 + 3 * np.sqrt(18)


def test_sync_copies_and_freezes():
    net = QNetwork((8, 4, 4, 3), seed=1, dtype=np.float64)
    target = sync_target(net)
    for p, q in zip(net.parameters(), target.parameters()):
        assert np.array_equal(p, q)
    adam = AdamState(net)
    batch = [tr(i, done=True, r=0.5) for i in range(4)]
    before = [p.copy() for p in target.parameters()]
    y1 = td_targets(batch, target, 0.99)
    for _ in range(10):
        train_batch(net, target, batch, adam, lr=1e-3)
    y2 = td_targets(batch, target, 0.99)
    for p, b in zip(target.parameters(), before):
        assert np.array_equal(p, b)
    assert np.array_equal(y1, y2)  # targets are a pure function of the batch between syncs


def test_maybe_sync_schedule():
    fired = [step for step in range(300) if maybe_sync(step, 100)]
    assert fired == [0, 100, 200]
    with pytest.raises(DomainError):
        maybe_sync(10, 0)


def test_training_loop_determinism():
    def run():
        net = QNetwork((8, 4, 4, 3), seed=9, dtype=np.float64)
        target = sync_target(net)
        adam = AdamState(net)
        buf = ReplayBuffer(capacity=64, min_size=4)
        rng = np.random.default_rng(11)
        losses = []
        for i in range(120):
            buf.push(tr(i, done=(i % 3 == 0), r=float(i % 5) / 5))
            if len(buf) >= 4:
                losses.append(train_batch(net, target, buf.sample(8, rng), adam, lr=5e-4))
            if maybe_sync(i, 25):
                target = sync_target(net)
        return losses

    assert run() == run()


def test_train_batch_returns_pre_step_loss():
    net = QNetwork((8, 4, 4, 3), seed=3, dtype=np.float64)
    target = sync_target(net)
    adam = AdamState(net)
    batch = [tr(i, done=True, r=0.9) for i in range(8)]
    q = net.forward(np.stack([t.s for t in batch]))
    expected = float(np.mean((q[np.arange(8), [t.a for t in batch]] - 0.9) ** 2))
    loss = train_batch(net, target, batch, adam, lr=5e-4)
    assert loss == pytest.approx(expected)
