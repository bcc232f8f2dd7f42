"""Training loop: rollout collection, advantage estimation, clipped-surrogate
policy updates, periodic old-actor syncs, plus heuristic baselines and the
evaluation harness.

Rollout collection can fan out over worker threads; each worker owns its
environment instances and an RNG stream seeded base_seed + worker_id, and
results merge in worker order so scheduling never changes the output.  All
gradient work happens on the calling thread.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nets, tensor as tt, world
from .config import ScenarioConfig, TrainConfig
from .nets import (
    ActorParams,
    CriticParams,
    HiddenState,
    actor_step,
    critic_value,
    sample_action,
    sync_old,
    zero_hidden,
)
from .tensor import Adam, Tape, Tensor
from .world import EpisodeLog, WorldState, global_state_vector, observe, peak_aoi

METRICS_CSV_HEADER = ("episode,cum_reward,aoi_reward,energy_reward,peak_aoi,"
                      "collections,collisions,clips,wall_ms")


class TrainingDiverged(RuntimeError):
    """Non-finite loss; the update is aborted rather than silently poisoned."""


# ---------------------------------------------------------------------------
# Policy bundle
# ---------------------------------------------------------------------------

@dataclass
class PolicyBundle:
    actors: list[ActorParams]
    old_actors: list[ActorParams]
    critic: CriticParams
    hidden_size: int

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for j, actor in enumerate(self.actors):
            out.update(actor.tensors(f"actor{j}"))
        out.update(self.critic.tensors("critic"))
        return out

    def sync_old_actors(self) -> None:
        self.old_actors = [sync_old(a) for a in self.actors]


def build_bundle(scenario: ScenarioConfig, tconf: TrainConfig,
                 seed: int) -> PolicyBundle:
    rng = np.random.default_rng(seed)
    recurrent = tconf.algo == "mappo_lstm"
    actors = [nets.init_actor(rng, scenario.obs_dim, scenario.n_actions,
                              tconf.hidden_size, tconf.head_hidden,
                              recurrent=recurrent)
              for _ in range(scenario.n_uavs)]
    critic = nets.init_critic(rng, scenario.obs_dim, scenario.global_state_dim,
                              tconf.critic_hidden1, tconf.critic_hidden2,
                              n_agents=scenario.n_uavs,
                              per_agent_weights=tconf.per_agent_value_weights,
                              single_head=not recurrent)
    bundle = PolicyBundle(actors=actors, old_actors=[], critic=critic,
                          hidden_size=tconf.hidden_size)
    bundle.sync_old_actors()
    return bundle


def bundle_to_tensors(bundle: PolicyBundle) -> dict[str, np.ndarray]:
    return {name: t.data for name, t in bundle.parameters().items()}


def bundle_from_tensors(tensors: dict[str, np.ndarray],
                        scenario: ScenarioConfig,
                        tconf: TrainConfig) -> PolicyBundle:
    """Rebuild a bundle with the config's architecture, then load weights."""
    bundle = build_bundle(scenario, tconf, seed=0)
    params = bundle.parameters()
    missing = sorted(set(params) - set(tensors))
    extra = sorted(set(tensors) - set(params))
    if missing or extra:
        raise ValueError(f"checkpoint does not match config "
                         f"(missing={missing[:3]}, unexpected={extra[:3]})")
    for name, tensor in params.items():
        if tensor.data.shape != tensors[name].shape:
            raise ValueError(f"checkpoint tensor {name} has shape "
                             f"{tensors[name].shape}, config expects "
                             f"{tensor.data.shape}")
        tensor.data = tensors[name].copy()
    bundle.sync_old_actors()
    return bundle


# ---------------------------------------------------------------------------
# Trajectories and episode metrics
# ---------------------------------------------------------------------------

@dataclass
class AgentTrajectory:
    obs: list[np.ndarray] = field(default_factory=list)
    hiddens: list[HiddenState] = field(default_factory=list)  # pre-step
    actions: list[int] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)      # at collection
    rewards: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None


@dataclass
class EpisodeMetrics:
    episode: int
    cum_reward: float
    aoi_reward: float
    energy_reward: float
    peak_aoi: int
    peak_aoi_recorded: int
    collections: int
    collisions: int
    clips: int
    wall_ms: float

    def csv_row(self) -> str:
        return (f"{self.episode},{self.cum_reward!r},{self.aoi_reward!r},"
                f"{self.energy_reward!r},{self.peak_aoi},{self.collections},"
                f"{self.collisions},{self.clips},{self.wall_ms:.3f}")


@dataclass
class EpisodeTrajectory:
    agents: list[AgentTrajectory]
    global_states: list[np.ndarray]
    dones: list[bool]
    metrics: EpisodeMetrics
    log: EpisodeLog


@dataclass
class TrajectoryBatch:
    episodes: list[EpisodeTrajectory]

    def agent_slots(self):
        for ep in self.episodes:
            for agent_idx, traj in enumerate(ep.agents):
                yield ep, agent_idx, traj


def _episode_metrics(episode: int, rewards_by_agent, breakdown_by_agent,
                     log: EpisodeLog, config: ScenarioConfig,
                     wall_ms: float) -> EpisodeMetrics:
    n = config.n_uavs
    cum = sum(sum(rs) for rs in rewards_by_agent) / n
    aoi = sum(config.reward.alpha_a * b.r_a for b in breakdown_by_agent[0])
    energy = sum(sum(config.reward.beta_p * b.r_p for b in bs)
                 for bs in breakdown_by_agent) / n
    collects = sum(1 for e in log.events if e.event == "collect")
    collides = sum(1 for e in log.events if e.event == "collide") // 2
    clips = sum(1 for e in log.events if e.event == "clip")
    final = log.final_state
    return EpisodeMetrics(
        episode=episode,
        cum_reward=cum,
        aoi_reward=aoi,
        energy_reward=energy,
        peak_aoi=peak_aoi(final),
        peak_aoi_recorded=world.peak_aoi_recorded(final),
        collections=collects,
        collisions=collides,
        clips=clips,
        wall_ms=wall_ms,
    )


# ---------------------------------------------------------------------------
# Rollout collection (learned policies)
# ---------------------------------------------------------------------------

def _collect_episode(scenario: ScenarioConfig, bundle: PolicyBundle,
                     episode_idx: int, rng: np.random.Generator,
                     greedy: bool = False) -> EpisodeTrajectory:
    t0 = time.perf_counter()
    state = world.reset(scenario, scenario.rng_seed)
    log = EpisodeLog(config=scenario)
    agents = [AgentTrajectory() for _ in range(scenario.n_uavs)]
    hiddens = [zero_hidden(bundle.hidden_size) for _ in range(scenario.n_uavs)]
    global_states: list[np.ndarray] = []
    dones: list[bool] = []
    breakdowns: list[list] = [[] for _ in range(scenario.n_uavs)]

    done = False
    while not done:
        gstate = global_state_vector(state, scenario)
        global_states.append(gstate)
        joint = []
        for j in range(scenario.n_uavs):
            obs = observe(state, j, scenario)
            traj = agents[j]
            traj.obs.append(obs)
            traj.hiddens.append(hiddens[j].copy())
            probs, hiddens[j] = actor_step(bundle.actors[j], obs, hiddens[j])
            if greedy:
                action = int(np.argmax(probs))
                logp = math.log(probs[action])
            else:
                action, logp = sample_action(probs, rng)
            traj.actions.append(action)
            traj.log_probs.append(logp)
            traj.values.append(critic_value(
                bundle.critic, Tensor(obs), Tensor(gstate), j).item())
            joint.append(action)
        state, rewards, done = world.step(state, joint, scenario)
        log.absorb(state)
        dones.append(done)
        for j, breakdown in enumerate(rewards):
            agents[j].rewards.append(breakdown.total)
            breakdowns[j].append(breakdown)

    wall_ms = (time.perf_counter() - t0) * 1e3
    metrics = _episode_metrics(episode_idx,
                               [a.rewards for a in agents], breakdowns,
                               log, scenario, wall_ms)
    return EpisodeTrajectory(agents=agents, global_states=global_states,
                             dones=dones, metrics=metrics, log=log)


def collect_rollout(scenario: ScenarioConfig, bundle: PolicyBundle,
                    episodes: int, seed: int, *, workers: int = 1,
                    first_episode_idx: int = 0,
                    greedy: bool = False) -> TrajectoryBatch:
    """Run full episodes under the bundle's live actors.

    Hidden states reset at episode boundaries; every quantity the update
    needs (observations, pre-step hidden states, actions, collection-time
    log-probs, rewards, values, global states) is stored.  Worker ``w`` uses
    the RNG stream seeded ``seed + w`` and handles episodes w, w+k, ...;
    merge order is by episode index, so results do not depend on scheduling.
    """
    workers = max(1, min(workers, episodes))

    def run_worker(w: int) -> list[tuple[int, EpisodeTrajectory]]:
        rng = np.random.default_rng(seed + w)
        out = []
        for local in range(w, episodes, workers):
            out.append((local, _collect_episode(
                scenario, bundle, first_episode_idx + local, rng, greedy=greedy)))
        return out

    if workers == 1:
        collected = run_worker(0)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_worker, range(workers)))
        collected = [item for chunk in chunks for item in chunk]
    collected.sort(key=lambda pair: pair[0])
    return TrajectoryBatch(episodes=[ep for _, ep in collected])


# ---------------------------------------------------------------------------
# Advantages
# ---------------------------------------------------------------------------

def compute_advantages(batch: TrajectoryBatch, gamma: float, lam: float,
                       normalize: bool = True) -> None:
    """Generalized advantage estimation over every stored agent sequence.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t,
    A_t = sum_k (gamma * lam)^k * delta_{t+k};  lam = 0 recovers the one-step
    TD error.  Return targets are A_t + V_t.  With ``normalize`` the
    advantages are standardized jointly across the whole batch.
    """
    all_adv = []
    for ep in batch.episodes:
        for traj in ep.agents:
            T = len(traj.rewards)
            values = np.asarray(traj.values)
            rewards = np.asarray(traj.rewards)
            dones = np.asarray(ep.dones, dtype=float)
            adv = np.zeros(T)
            last = 0.0
            for t in range(T - 1, -1, -1):
                nonterminal = 1.0 - dones[t]
                next_value = values[t + 1] if t + 1 < T else 0.0
                delta = rewards[t] + gamma * next_value * nonterminal - values[t]
                last = delta + gamma * lam * nonterminal * last
                adv[t] = last
            traj.advantages = adv
            traj.returns = adv + values
            all_adv.append(adv)
    if normalize and all_adv:
        flat = np.concatenate(all_adv)
        mean, std = flat.mean(), flat.std()
        for ep in batch.episodes:
            for traj in ep.agents:
                traj.advantages = (traj.advantages - mean) / (std + 1e-8)


# ---------------------------------------------------------------------------
# PPO update
# ---------------------------------------------------------------------------

@dataclass
class LossReport:
    actor_loss: float
    value_loss: float
    entropy: float
    mean_ratio: float
    clip_fraction: float


def _replay_log_probs(actor: ActorParams, traj: AgentTrajectory):
    """Recompute per-slot log-probs and distributions under the live actor
    by replaying the recurrent cell over the stored observation sequence."""
    T = len(traj.obs)
    if actor.recurrent:
        h = Tensor(np.zeros(actor.lstm.hidden_size))
        c = Tensor(np.zeros(actor.lstm.hidden_size))
        feats = []
        for obs in traj.obs:
            h, c = nets.lstm_step(actor.lstm, Tensor(obs), h, c)
            feats.append(h)
        features = tt.stack(feats)                       # (T, H)
    else:
        features = Tensor(np.stack(traj.obs))            # (T, obs)
    logits = nets.policy_head_batch(actor, features)     # (T, A)
    probs = tt.softmax(logits, axis=-1)
    log_all = tt.log(probs)
    selected = log_all[np.arange(T), np.asarray(traj.actions)]
    return selected, probs, log_all


def ppo_update(batch: TrajectoryBatch, bundle: PolicyBundle, optimizer: Adam,
               tconf: TrainConfig) -> LossReport:
    """Clipped-surrogate actor update plus value regression, multiple epochs
    over full-episode sequences; the old actors must be in sync with the
    actors that collected ``batch``."""
    report = None
    for _ in range(tconf.epochs):
        with Tape() as tape:
            objectives, entropies, value_errs = [], [], []
            ratio_data, clipped_flags = [], []
            for ep, agent_idx, traj in batch.agent_slots():
                T = len(traj.obs)
                actor = bundle.actors[agent_idx]
                new_logp, probs, log_all = _replay_log_probs(actor, traj)
                old_logp = Tensor(np.asarray(traj.log_probs))
                adv = Tensor(traj.advantages)
                ratio = tt.exp(tt.sub(new_logp, old_logp))
                clipped = tt.clip_by_value(ratio, 1.0 - tconf.clip_epsilon,
                                           1.0 + tconf.clip_epsilon)
                obj = tt.minimum(tt.mul(ratio, adv), tt.mul(clipped, adv))
                objectives.append(obj)
                entropies.append(tt.mul(tt.sum_(tt.mul(probs, log_all), axis=-1), -1.0))
                ratio_data.append(ratio.data.copy())
                clipped_flags.append(ratio.data != clipped.data)

                obs_mat = Tensor(np.stack(traj.obs))
                state_mat = Tensor(np.stack(ep.global_states))
                v = critic_value(bundle.critic, obs_mat, state_mat, agent_idx)
                target = Tensor(traj.returns.reshape(T, 1))
                err = tt.sub(v, target)
                value_errs.append(tt.mul(err, err))

            surrogate = tt.mean(tt.concat(objectives))
            entropy = tt.mean(tt.concat(entropies))
            value_loss = tt.mean(tt.concat([e[:, 0] for e in value_errs]))
            loss = tt.add(
                tt.sub(tt.mul(surrogate, -1.0), tt.mul(entropy, tconf.entropy_coef)),
                tt.mul(value_loss, tconf.value_coef))
            if not np.isfinite(loss.item()):
                raise TrainingDiverged(
                    f"non-finite loss (surrogate={surrogate.item()!r}, "
                    f"value={value_loss.item()!r}, entropy={entropy.item()!r})")
            optimizer.zero_grad()
            tape.backward(loss)
            optimizer.step()
            ratios = np.concatenate(ratio_data)
            report = LossReport(
                actor_loss=-surrogate.item(),
                value_loss=value_loss.item(),
                entropy=entropy.item(),
                mean_ratio=float(ratios.mean()),
                clip_fraction=float(np.concatenate(clipped_flags).mean()),
            )
    return report


# ---------------------------------------------------------------------------
# Baseline policies
# ---------------------------------------------------------------------------

class RandomPolicy:
    """Uniform over the action set."""

    name = "random"

    def __init__(self, scenario: ScenarioConfig):
        self.n_actions = scenario.n_actions

    def begin_episode(self) -> None:
        pass

    def act(self, state: WorldState, agent: int, rng: np.random.Generator,
            greedy: bool) -> int:
        return int(rng.integers(self.n_actions))


class GreedyPolicy:
    """Chase the oldest pending IoT; divert to the nearest charging station
    below the energy threshold and stay until full."""

    name = "greedy"

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.charging = [False] * scenario.n_uavs

    def begin_episode(self) -> None:
        self.charging = [False] * self.scenario.n_uavs

    def _target(self, state: WorldState, agent: int) -> np.ndarray:
        cfg = self.scenario
        uav = state.uavs[agent]
        if uav.energy <= cfg.e_charge_threshold:
            self.charging[agent] = True
        elif uav.energy >= cfg.e_full - cfg.epsilon_energy:
            self.charging[agent] = False
        if self.charging[agent]:
            k, _ = world._nearest_lbd_horizontal(uav.pos, state.lbds)
            return state.lbds[k][:2]
        pending = [(state.slot - s.gen_time,
                    -float(np.hypot(*(s.pos - uav.pos))), -i, s)
                   for i, s in enumerate(state.iots) if s.has_data]
        if not pending:
            k, _ = world._nearest_lbd_horizontal(uav.pos, state.lbds)
            return state.lbds[k][:2]
        pending.sort(reverse=True)
        return pending[0][3].pos

    def act(self, state: WorldState, agent: int, rng: np.random.Generator,
            greedy: bool) -> int:
        cfg = self.scenario
        target = self._target(state, agent)
        pos = state.uavs[agent].pos
        step_len = cfg.speed * cfg.slot_dt
        best_action, best_dist = 0, float("inf")
        for a in range(cfg.n_actions):
            cand = pos + world._ACTION_UNIT[a] * step_len
            d = float(np.hypot(*(cand - target)))
            if d < best_dist - 1e-12:
                best_action, best_dist = a, d
        return best_action


class LearnedPolicy:
    """Greedy or sampling wrapper around trained actors."""

    name = "learned"

    def __init__(self, scenario: ScenarioConfig, bundle: PolicyBundle):
        self.scenario = scenario
        self.bundle = bundle
        self.hiddens = [zero_hidden(bundle.hidden_size)
                        for _ in range(scenario.n_uavs)]

    def begin_episode(self) -> None:
        self.hiddens = [zero_hidden(self.bundle.hidden_size)
                        for _ in range(self.scenario.n_uavs)]

    def act(self, state: WorldState, agent: int, rng: np.random.Generator,
            greedy: bool) -> int:
        obs = observe(state, agent, self.scenario)
        probs, self.hiddens[agent] = actor_step(
            self.bundle.actors[agent], obs, self.hiddens[agent])
        if greedy:
            return int(np.argmax(probs))
        action, _ = sample_action(probs, rng)
        return action


def make_policy(kind: str, scenario: ScenarioConfig,
                bundle: PolicyBundle | None = None):
    if kind == "random":
        return RandomPolicy(scenario)
    if kind == "greedy":
        return GreedyPolicy(scenario)
    if kind == "learned":
        if bundle is None:
            raise ValueError("learned policy requires a checkpoint bundle")
        return LearnedPolicy(scenario, bundle)
    raise ValueError(f"unknown policy kind {kind!r}")


# ---------------------------------------------------------------------------
# Policy rollouts without gradients (baselines and evaluation)
# ---------------------------------------------------------------------------

def rollout_policy(scenario: ScenarioConfig, policy, episodes: int, seed: int,
                   *, greedy: bool = True,
                   first_episode_idx: int = 0) -> tuple[list[EpisodeMetrics], list[EpisodeLog]]:
    """Run a policy for whole episodes, returning metrics and event logs."""
    rows, logs = [], []
    rng = np.random.default_rng(seed)
    for e in range(episodes):
        t0 = time.perf_counter()
        state = world.reset(scenario, scenario.rng_seed)
        policy.begin_episode()
        log = EpisodeLog(config=scenario)
        rewards = [[] for _ in range(scenario.n_uavs)]
        breakdowns = [[] for _ in range(scenario.n_uavs)]
        done = False
        while not done:
            joint = [policy.act(state, j, rng, greedy)
                     for j in range(scenario.n_uavs)]
            state, step_rewards, done = world.step(state, joint, scenario)
            log.absorb(state)
            for j, b in enumerate(step_rewards):
                rewards[j].append(b.total)
                breakdowns[j].append(b)
        wall_ms = (time.perf_counter() - t0) * 1e3
        rows.append(_episode_metrics(first_episode_idx + e, rewards, breakdowns,
                                     log, scenario, wall_ms))
        logs.append(log)
    return rows, logs


# ---------------------------------------------------------------------------
# Training driver
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    bundle: PolicyBundle
    metrics: list[EpisodeMetrics]
    loss_reports: list[LossReport]


def train(scenario: ScenarioConfig, tconf: TrainConfig, seed: int,
          metrics_sink=None, checkpoint_sink=None, event_sink=None,
          workers: int = 1) -> TrainResult:
    """Alternate rollout collection, advantage estimation, and PPO updates
    for ``tconf.episodes`` episodes; old actors re-sync each update period."""
    scenario.validate()
    tconf.validate()
    bundle = build_bundle(scenario, tconf, seed)
    optimizer = Adam(bundle.parameters(), lr=tconf.learning_rate,
                     beta1=tconf.adam_beta1, beta2=tconf.adam_beta2,
                     eps=tconf.adam_eps, clip_norm=tconf.clip_norm)
    metrics: list[EpisodeMetrics] = []
    reports: list[LossReport] = []
    episodes_done = 0
    update_idx = 0
    next_checkpoint = tconf.eval_interval
    last_checkpoint = -1

    while episodes_done < tconf.episodes:
        todo = min(tconf.episodes_per_update, tconf.episodes - episodes_done)
        rollout_seed = seed + 1_000_003 * (update_idx + 1)
        batch = collect_rollout(scenario, bundle, todo, rollout_seed,
                                workers=workers,
                                first_episode_idx=episodes_done)
        compute_advantages(batch, tconf.gamma, tconf.gae_lambda,
                           normalize=tconf.normalize_advantages)
        reports.append(ppo_update(batch, bundle, optimizer, tconf))
        update_idx += 1
        if update_idx % tconf.old_sync_period == 0:
            bundle.sync_old_actors()
        for ep in batch.episodes:
            metrics.append(ep.metrics)
            if metrics_sink is not None:
                metrics_sink(ep.metrics)
            if event_sink is not None:
                event_sink(ep.metrics.episode, ep.log)
        episodes_done += todo
        if checkpoint_sink is not None and episodes_done >= next_checkpoint:
            checkpoint_sink(episodes_done, bundle)
            last_checkpoint = episodes_done
            next_checkpoint += tconf.eval_interval
    if checkpoint_sink is not None and last_checkpoint != episodes_done:
        checkpoint_sink(episodes_done, bundle)
    return TrainResult(bundle=bundle, metrics=metrics, loss_reports=reports)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    policy: str
    episodes: int
    mean_peak_aoi: float
    max_peak_aoi: int
    mean_peak_aoi_recorded: float
    mean_cum_reward: float
    mean_aoi_reward: float
    mean_energy_reward: float
    mean_collections: float
    constraints: world.ConstraintReport

    CSV_HEADER = ("policy,episodes,mean_peak_aoi,max_peak_aoi,"
                  "mean_peak_aoi_recorded,mean_cum_reward,mean_aoi_reward,"
                  "mean_energy_reward,mean_collections")

    def csv_row(self) -> str:
        return (f"{self.policy},{self.episodes},{self.mean_peak_aoi!r},"
                f"{self.max_peak_aoi},{self.mean_peak_aoi_recorded!r},"
                f"{self.mean_cum_reward!r},{self.mean_aoi_reward!r},"
                f"{self.mean_energy_reward!r},{self.mean_collections!r}")

    def human_text(self) -> str:
        c = self.constraints
        lines = [
            f"policy             : {self.policy}",
            f"episodes           : {self.episodes}",
            f"mean peak AoI      : {self.mean_peak_aoi:.3f} slots "
            f"(recorded-only {self.mean_peak_aoi_recorded:.3f})",
            f"max peak AoI       : {self.max_peak_aoi} slots",
            f"mean cum reward    : {self.mean_cum_reward:.4f}",
            f"mean AoI reward    : {self.mean_aoi_reward:.4f}",
            f"mean energy reward : {self.mean_energy_reward:.4f}",
            f"mean collections   : {self.mean_collections:.2f}",
            "constraints (satisfied / violations over all episodes):",
            f"  all data collected : {c.all_data_collected.satisfied} / {c.all_data_collected.violations}",
            f"  iot energy floor   : {c.iot_energy_floor.satisfied} / {c.iot_energy_floor.violations}",
            f"  uav energy range   : {c.uav_energy_range.satisfied} / {c.uav_energy_range.violations}",
            f"  collision distance : {c.collision_clearance.satisfied} / {c.collision_clearance.violations}",
            f"  flight area        : {c.flight_area.satisfied} / {c.flight_area.violations}",
        ]
        return "\n".join(lines)


def _merge_constraints(reports: list[world.ConstraintReport]) -> world.ConstraintReport:
    def merge(name):
        checks = [getattr(r, name) for r in reports]
        return world.ConstraintCheck(all(c.satisfied for c in checks),
                                     sum(c.violations for c in checks))

    return world.ConstraintReport(
        all_data_collected=merge("all_data_collected"),
        iot_energy_floor=merge("iot_energy_floor"),
        uav_energy_range=merge("uav_energy_range"),
        collision_clearance=merge("collision_clearance"),
        flight_area=merge("flight_area"),
    )


def evaluate(scenario: ScenarioConfig, policy, episodes: int,
             seed: int) -> EvalReport:
    """Deterministic evaluation: learned/greedy policies act by argmax; the
    random baseline samples from its seeded stream (its argmax would collapse
    to a constant action)."""
    greedy = not isinstance(policy, RandomPolicy)
    rows, logs = rollout_policy(scenario, policy, episodes, seed, greedy=greedy)
    constraints = _merge_constraints([world.check_constraints(log) for log in logs])
    return EvalReport(
        policy=getattr(policy, "name", "policy"),
        episodes=episodes,
        mean_peak_aoi=float(np.mean([r.peak_aoi for r in rows])),
        max_peak_aoi=int(max(r.peak_aoi for r in rows)),
        mean_peak_aoi_recorded=float(np.mean([r.peak_aoi_recorded for r in rows])),
        mean_cum_reward=float(np.mean([r.cum_reward for r in rows])),
        mean_aoi_reward=float(np.mean([r.aoi_reward for r in rows])),
        mean_energy_reward=float(np.mean([r.energy_reward for r in rows])),
        mean_collections=float(np.mean([r.collections for r in rows])),
        constraints=constraints,
    )
