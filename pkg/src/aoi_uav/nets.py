"""Actor and critic networks built on the tape-based tensor module.

Each agent owns a recurrent actor (one LSTM cell feeding a small policy
head); a single centralized critic blends a local value of the agent's own
observation with a global value of the full state through a softmax-
constrained weight pair, so the blend stays a convex combination no matter
how the weights train.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor

FORGET_GATE_BIAS = 1.0


@dataclass
class LstmCellParams:
    """Fused input/hidden weights and bias for the (i, f, g, o) gates."""

    w_ih: Tensor  # (4H, In)
    w_hh: Tensor  # (4H, H)
    bias: Tensor  # (4H,)
    hidden_size: int

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}/w_ih": self.w_ih, f"{prefix}/w_hh": self.w_hh,
                f"{prefix}/bias": self.bias}


@dataclass
class ActorParams:
    """Recurrent actor: LSTM cell, tanh hidden layer, action logits."""

    lstm: LstmCellParams
    w_head: Tensor   # (Hh, H)
    b_head: Tensor   # (Hh,)
    w_out: Tensor    # (A, Hh)
    b_out: Tensor    # (A,)
    recurrent: bool = True  # False: feed-forward variant (obs -> head directly)

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}/w_head": self.w_head, f"{prefix}/b_head": self.b_head,
               f"{prefix}/w_out": self.w_out, f"{prefix}/b_out": self.b_out}
        if self.recurrent:
            out.update(self.lstm.tensors(f"{prefix}/lstm"))
        return out


@dataclass
class CriticParams:
    """Local and global value heads plus the learnable blend logits.

    ``single_head`` drops the local branch entirely (plain centralized
    critic over the global state), used by the feed-forward baseline.
    """

    local_layers: list[tuple[Tensor, Tensor]]   # [(w, b), ...] over obs
    global_layers: list[tuple[Tensor, Tensor]]  # [(w, b), ...] over state
    blend_logits: Tensor                        # (2,) or (n_agents, 2)
    single_head: bool = False

    def tensors(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, (w, b) in enumerate(self.global_layers):
            out[f"{prefix}/global{i}/w"] = w
            out[f"{prefix}/global{i}/b"] = b
        if not self.single_head:
            out[f"{prefix}/blend_logits"] = self.blend_logits
            for i, (w, b) in enumerate(self.local_layers):
                out[f"{prefix}/local{i}/w"] = w
                out[f"{prefix}/local{i}/b"] = b
        return out


@dataclass
class HiddenState:
    h: np.ndarray
    c: np.ndarray

    def copy(self) -> "HiddenState":
        return HiddenState(self.h.copy(), self.c.copy())


def zero_hidden(hidden_size: int) -> HiddenState:
    return HiddenState(np.zeros(hidden_size), np.zeros(hidden_size))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def init_lstm(rng: np.random.Generator, input_dim: int, hidden: int) -> LstmCellParams:
    cell = LstmCellParams(
        w_ih=tt.glorot_uniform(rng, input_dim, hidden, (4 * hidden, input_dim)),
        w_hh=tt.glorot_uniform(rng, hidden, hidden, (4 * hidden, hidden)),
        bias=tt.zeros(4 * hidden),
        hidden_size=hidden,
    )
    # Open the forget gate early so gradients flow through time from the start.
    cell.bias.data[hidden:2 * hidden] = FORGET_GATE_BIAS
    return cell


def init_actor(rng: np.random.Generator, obs_dim: int, n_actions: int,
               hidden: int, head_hidden: int, recurrent: bool = True) -> ActorParams:
    feature_dim = hidden if recurrent else obs_dim
    return ActorParams(
        lstm=init_lstm(rng, obs_dim, hidden),
        w_head=tt.glorot_uniform(rng, feature_dim, head_hidden,
                                 (head_hidden, feature_dim)),
        b_head=tt.zeros(head_hidden),
        w_out=tt.glorot_uniform(rng, head_hidden, n_actions,
                                (n_actions, head_hidden)),
        b_out=tt.zeros(n_actions),
        recurrent=recurrent,
    )


def _init_mlp(rng: np.random.Generator, dims: list[int]) -> list[tuple[Tensor, Tensor]]:
    layers = []
    for d_in, d_out in zip(dims, dims[1:]):
        layers.append((tt.glorot_uniform(rng, d_in, d_out, (d_out, d_in)),
                       tt.zeros(d_out)))
    return layers


def init_critic(rng: np.random.Generator, obs_dim: int, state_dim: int,
                hidden1: int, hidden2: int, n_agents: int = 1,
                per_agent_weights: bool = False,
                single_head: bool = False) -> CriticParams:
    blend_shape = (n_agents, 2) if per_agent_weights else (2,)
    return CriticParams(
        local_layers=_init_mlp(rng, [obs_dim, hidden1, hidden2, 1]),
        global_layers=_init_mlp(rng, [state_dim, hidden1, hidden2, 1]),
        blend_logits=tt.zeros(blend_shape),
        single_head=single_head,
    )


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def lstm_step(cell: LstmCellParams, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One cell update; returns (h_new, c_new)."""
    H = cell.hidden_size
    z = tt.add(tt.add(tt.matmul(cell.w_ih, x), tt.matmul(cell.w_hh, h)), cell.bias)
    i = tt.sigmoid(z[0:H])
    f = tt.sigmoid(z[H:2 * H])
    g = tt.tanh(z[2 * H:3 * H])
    o = tt.sigmoid(z[3 * H:4 * H])
    c_new = tt.add(tt.mul(f, c), tt.mul(i, g))
    h_new = tt.mul(o, tt.tanh(c_new))
    return h_new, c_new


def policy_head(params: ActorParams, features: Tensor) -> Tensor:
    """Action logits from actor features (LSTM hidden state or raw obs)."""
    hid = tt.tanh(tt.add(tt.matmul(params.w_head, features), params.b_head))
    return tt.add(tt.matmul(params.w_out, hid), params.b_out)


def policy_head_batch(params: ActorParams, features: Tensor) -> Tensor:
    """Action logits for a (T, feature) matrix of actor features."""
    hid = tt.tanh(tt.add(tt.matmul(features, tt.transpose(params.w_head)),
                         params.b_head))
    return tt.add(tt.matmul(hid, tt.transpose(params.w_out)), params.b_out)


def actor_step(params: ActorParams, obs: np.ndarray,
               hidden: HiddenState) -> tuple[np.ndarray, HiddenState]:
    """Action distribution for one observation; advances the hidden state.

    Gradient-free convenience for rollouts; training replays the same math
    under a tape via `lstm_step` and `policy_head`.
    """
    x = Tensor(obs)
    if params.recurrent:
        h, c = lstm_step(params.lstm, x, Tensor(hidden.h), Tensor(hidden.c))
        new_hidden = HiddenState(h.data.copy(), c.data.copy())
        features = h
    else:
        new_hidden = hidden
        features = x
    probs = tt.softmax(policy_head(params, features))
    return probs.data.copy(), new_hidden


def critic_value(params: CriticParams, obs: Tensor, global_state: Tensor,
                 agent: int = 0) -> Tensor:
    """Blended scalar value w_l * V_local(obs) + w_g * V_global(state)."""
    v_global = _mlp_forward(params.global_layers, global_state)
    if params.single_head:
        return v_global
    v_local = _mlp_forward(params.local_layers, obs)
    weights = blend_weights(params, agent)
    return tt.add(tt.mul(weights[0:1], v_local), tt.mul(weights[1:2], v_global))


def _mlp_forward(layers: list[tuple[Tensor, Tensor]], x: Tensor) -> Tensor:
    out = x
    for idx, (w, b) in enumerate(layers):
        out = tt.add(tt.matmul(out, tt.transpose(w)) if out.data.ndim == 2
                     else tt.matmul(w, out), b)
        if idx < len(layers) - 1:
            out = tt.tanh(out)
    return out


def blend_weights(params: CriticParams, agent: int = 0) -> Tensor:
    """Softmax of the blend logits: positive weights summing to one."""
    logits = params.blend_logits
    if logits.data.ndim == 2:
        logits = logits[agent]
    return tt.softmax(logits)


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> tuple[int, float]:
    """Inverse-CDF draw from a distribution; returns (index, log prob)."""
    u = rng.random()
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, len(probs) - 1)
    return idx, math.log(probs[idx])


def sync_old(actor: ActorParams) -> ActorParams:
    """Frozen deep copy: later updates to the live actor leave it unchanged."""
    frozen = copy.deepcopy(actor)
    for t in frozen.tensors("x").values():
        t.requires_grad = False
        t.grad = None
    return frozen
