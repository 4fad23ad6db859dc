"""Q-network dialogue policy: epsilon-greedy action selection and minibatch
deep Q-learning against a periodically synced target network."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import nn

Q_HIDDEN_NODES = 80


@dataclass
class Experience:
    """One transition: state, agent action, reward, user response, next state."""

    s: np.ndarray
    a: int
    r: float
    a_u: int
    s_next: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Bounded FIFO of experience; oldest-first eviction, uniform sampling
    with replacement."""

    def __init__(self, capacity: int = 5000, name: str = "replay"):
        self.capacity = capacity
        self.name = name
        self._items: deque[Experience] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def append(self, exp: Experience) -> None:
        self._items.append(exp)

    def extend(self, exps) -> None:
        for exp in exps:
            self._items.append(exp)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        idx = rng.integers(len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def __iter__(self):
        return iter(self._items)


def make_q_network(input_dim: int, n_actions: int, rng: np.random.Generator,
                   hidden: int = Q_HIDDEN_NODES) -> nn.NetworkParams:
    """One tanh hidden layer, linear head over the action set."""
    return nn.init_params(
        [
            nn.LayerSpec(input_dim, hidden, "tanh"),
            nn.LayerSpec(hidden, n_actions, "linear"),
        ],
        rng,
    )


def q_values(qnet: nn.NetworkParams, s: np.ndarray) -> np.ndarray:
    return nn.forward(qnet, s)[-1]


def select_action(qnet: nn.NetworkParams, s: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties break toward the lowest action id."""
    n_actions = qnet.output_dim
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(q_values(qnet, s)))


def td_targets(
    target_net: nn.NetworkParams,
    batch: list[Experience],
    gamma: float,
    target_bound: float | None = None,
) -> np.ndarray:
    """y_i = r_i for terminal transitions, else r_i + gamma * max_a' Q'(s'_i, a').

    With `target_bound` B, targets are clamped to [-B, B]: no dialogue can
    return more than the success bonus or less than the turn-limit worst case,
    and bounding the bootstrap keeps model-generated transitions from
    inflating values past anything attainable."""
    rewards = np.array([e.r for e in batch], dtype=np.float64)
    terminal = np.array([e.terminal for e in batch], dtype=bool)
    s_next = np.stack([e.s_next for e in batch])
    next_q_max = q_values(target_net, s_next).max(axis=1)
    y = rewards + gamma * next_q_max * ~terminal
    if target_bound is not None:
        y = np.clip(y, -target_bound, target_bound)
    return y


def q_learning_step(
    qnet: nn.NetworkParams,
    target_net: nn.NetworkParams,
    buffer: ReplayBuffer,
    batch_size: int,
    gamma: float,
    lr: float,
    rng: np.random.Generator,
    target_bound: float | None = None,
) -> float | None:
    """One SGD step on the mean-squared TD loss over a sampled minibatch.

    Only the taken action's output coordinate receives gradient. Returns the
    pre-update batch loss, or None when the buffer is too small to sample.
    """
    if len(buffer) < batch_size:
        return None
    batch = buffer.sample(batch_size, rng)
    y = td_targets(target_net, batch, gamma, target_bound)
    s = np.stack([e.s for e in batch])
    actions = np.array([e.a for e in batch], dtype=np.int64)
    activations = nn.forward(qnet, s)
    q_taken = activations[-1][np.arange(batch_size), actions]
    residual = q_taken - y
    loss = float(np.mean(residual**2))
    out_grad = np.zeros_like(activations[-1])
    out_grad[np.arange(batch_size), actions] = 2.0 * residual / batch_size
    grads = nn.backward(qnet, activations, out_grad)
    nn.sgd_step(qnet, grads, lr)
    return loss


def sync_target(qnet: nn.NetworkParams, target_net: nn.NetworkParams) -> nn.NetworkParams:
    """Copy policy parameters into the target network (stays independent after)."""
    for tw, w in zip(target_net.weights, qnet.weights, strict=True):
        tw[...] = w
    for tb, b in zip(target_net.biases, qnet.biases, strict=True):
        tb[...] = b
    return target_net
