"""Learned environment model: a multi-task MLP over (state, agent action)
producing the simulated user action (softmax), reward (linear), and
termination probability (sigmoid).

Two shared tanh layers feed three task-specific heads, each with its own tanh
hidden layer. The combined training loss is cross-entropy + MSE + binary
cross-entropy with unit weights; shared layers receive the sum of the three
task gradients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .policy import Experience, ReplayBuffer

WM_HIDDEN_NODES = 80


@dataclass
class WorldModel:
    shared: nn.NetworkParams
    action_head: nn.NetworkParams
    reward_head: nn.NetworkParams
    term_head: nn.NetworkParams
    # The reward head is trained on r / reward_scale and rescaled on output,
    # keeping all three task gradients at comparable magnitudes so a single
    # SGD rate serves the multi-task loss.
    reward_scale: float = 80.0

    @property
    def input_dim(self) -> int:
        return self.shared.input_dim

    @property
    def n_user_actions(self) -> int:
        return self.action_head.output_dim

    def networks(self) -> dict[str, nn.NetworkParams]:
        return {
            "shared": self.shared,
            "action_head": self.action_head,
            "reward_head": self.reward_head,
            "term_head": self.term_head,
        }

    def param_hash(self) -> int:
        return hash(tuple(p.param_hash() for p in self.networks().values()))


@dataclass(frozen=True)
class WorldModelConfig:
    sample_user_action: bool = False
    termination_threshold: float = 0.5


def make_world_model(
    state_dim: int,
    n_agent_actions: int,
    n_user_actions: int,
    rng: np.random.Generator,
    hidden: int = WM_HIDDEN_NODES,
    reward_scale: float = 80.0,
) -> WorldModel:
    input_dim = state_dim + n_agent_actions
    shared = nn.init_params(
        [nn.LayerSpec(input_dim, hidden, "tanh"), nn.LayerSpec(hidden, hidden, "tanh")],
        rng,
    )
    action_head = nn.init_params(
        [nn.LayerSpec(hidden, hidden, "tanh"), nn.LayerSpec(hidden, n_user_actions, "softmax")],
        rng,
    )
    reward_head = nn.init_params(
        [nn.LayerSpec(hidden, hidden, "tanh"), nn.LayerSpec(hidden, 1, "linear")],
        rng,
    )
    term_head = nn.init_params(
        [nn.LayerSpec(hidden, hidden, "tanh"), nn.LayerSpec(hidden, 1, "sigmoid")],
        rng,
    )
    return WorldModel(shared, action_head, reward_head, term_head, reward_scale)


def copy_world_model(model: WorldModel) -> WorldModel:
    return WorldModel(
        *(nn.copy_params(p) for p in (
            model.shared, model.action_head, model.reward_head, model.term_head)),
        model.reward_scale,
    )


def _forward_all(model: WorldModel, x: np.ndarray):
    shared_acts = nn.forward(model.shared, x)
    h = shared_acts[-1]
    return (
        shared_acts,
        nn.forward(model.action_head, h),
        nn.forward(model.reward_head, h),
        nn.forward(model.term_head, h),
    )


def predict(model: WorldModel, s: np.ndarray, a_onehot: np.ndarray):
    """(user action distribution, reward estimate, termination probability)."""
    x = np.concatenate([s, a_onehot])
    _, a_acts, r_acts, t_acts = _forward_all(model, x)
    return a_acts[-1], float(r_acts[-1][0]) * model.reward_scale, float(t_acts[-1][0])


def simulate_turn(
    model: WorldModel,
    s: np.ndarray,
    a_onehot: np.ndarray,
    rng: np.random.Generator,
    config: WorldModelConfig = WorldModelConfig(),
):
    """One simulated environment response: (user action id, reward, terminal).

    The user action is the distribution's argmax by default; sampling mode is
    behind config. Terminal is thresholded at config.termination_threshold.
    """
    dist, r_hat, t_prob = predict(model, s, a_onehot)
    if config.sample_user_action:
        a_u = int(rng.choice(len(dist), p=dist / dist.sum()))
    else:
        a_u = int(np.argmax(dist))
    return a_u, r_hat, t_prob > config.termination_threshold


def _batch_update(model: WorldModel, x, a_u, r, t, lr: float):
    """Forward, combined loss, backward through heads and shared trunk, SGD."""
    shared_acts, a_acts, r_acts, t_acts = _forward_all(model, x)
    loss_a, grad_a = nn.cross_entropy_loss_grad(a_acts[-1], a_u)
    loss_r, grad_r = nn.mse_loss_grad(r_acts[-1][:, 0], r / model.reward_scale)
    loss_t, grad_t = nn.binary_cross_entropy_loss_grad(t_acts[-1][:, 0], t)
    grads_a, input_grad_a = nn.backward(model.action_head, a_acts, grad_a, with_input_grad=True)
    grads_r, input_grad_r = nn.backward(
        model.reward_head, r_acts, grad_r[:, None], with_input_grad=True
    )
    grads_t, input_grad_t = nn.backward(
        model.term_head, t_acts, grad_t[:, None], with_input_grad=True
    )
    shared_out_grad = input_grad_a + input_grad_r + input_grad_t
    grads_shared = nn.backward(model.shared, shared_acts, shared_out_grad)
    nn.sgd_step(model.action_head, grads_a, lr)
    nn.sgd_step(model.reward_head, grads_r, lr)
    nn.sgd_step(model.term_head, grads_t, lr)
    nn.sgd_step(model.shared, grads_shared, lr)
    return loss_a, loss_r, loss_t


def _experience_arrays(batch: list[Experience], n_agent_actions: int):
    s = np.stack([e.s for e in batch])
    a_onehot = np.zeros((len(batch), n_agent_actions))
    a_onehot[np.arange(len(batch)), [e.a for e in batch]] = 1.0
    x = np.concatenate([s, a_onehot], axis=1)
    a_u = np.array([e.a_u for e in batch], dtype=np.int64)
    r = np.array([e.r for e in batch], dtype=np.float64)
    t = np.array([e.terminal for e in batch], dtype=np.float64)
    return x, a_u, r, t


def world_model_step(
    model: WorldModel,
    buffer: ReplayBuffer,
    batch_size: int,
    lr: float,
    rng: np.random.Generator,
    n_agent_actions: int,
) -> tuple[float, float, float] | None:
    """One multi-task SGD step on a sampled minibatch of real experience.

    Returns pre-update (action, reward, termination) losses, or None when the
    buffer is too small to sample.
    """
    if len(buffer) < batch_size:
        return None
    batch = buffer.sample(batch_size, rng)
    x, a_u, r, t = _experience_arrays(batch, n_agent_actions)
    return _batch_update(model, x, a_u, r, t, lr)


def pretrain(
    model: WorldModel,
    seed_corpus: list[Experience],
    epochs: int,
    lr: float,
    rng: np.random.Generator,
    n_agent_actions: int,
    batch_size: int = 16,
) -> WorldModel:
    """Supervised pretraining over a fixed experience corpus (shuffled minibatches)."""
    from .errors import ConfigurationError

    if not seed_corpus:
        raise ConfigurationError("pretraining corpus is empty")
    x, a_u, r, t = _experience_arrays(seed_corpus, n_agent_actions)
    n = len(seed_corpus)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            idx = order[start : start + batch_size]
            _batch_update(model, x[idx], a_u[idx], r[idx], t[idx], lr)
    return model


def evaluate_on_corpus(
    model: WorldModel, corpus: list[Experience], n_agent_actions: int
) -> tuple[float, float, float]:
    """(user-action accuracy, raw-scale reward MSE, termination accuracy)."""
    x, a_u, r, t = _experience_arrays(corpus, n_agent_actions)
    _, a_acts, r_acts, t_acts = _forward_all(model, x)
    accuracy = float(np.mean(np.argmax(a_acts[-1], axis=1) == a_u))
    reward_mse = float(np.mean((r_acts[-1][:, 0] * model.reward_scale - r) ** 2))
    term_accuracy = float(np.mean((t_acts[-1][:, 0] > 0.5) == t.astype(bool)))
    return accuracy, reward_mse, term_accuracy
