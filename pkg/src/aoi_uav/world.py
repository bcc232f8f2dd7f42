"""Discrete-time multi-UAV data collection environment.

One `step` advances all UAVs by one slot in a fixed order: movement with
boundary clipping, collision detection, charging assignment, propulsion
drain, data collection, AoI bookkeeping, and reward computation.  Everything
is deterministic given (config, seed, actions); randomness enters only
through IoT placement at reset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig
from .physics import laser_power_received, propulsion_power, transmission_rate

# Compass actions in index order; diagonals are unit-normalized so every move
# covers exactly speed*dt meters.
ACTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW", "H")
_SQ2 = math.sqrt(2.0) / 2.0
_ACTION_UNIT = np.array([
    (0.0, 1.0), (_SQ2, _SQ2), (1.0, 0.0), (_SQ2, -_SQ2),
    (0.0, -1.0), (-_SQ2, -_SQ2), (-1.0, 0.0), (-_SQ2, _SQ2),
    (0.0, 0.0),
])

EVENT_KINDS = ("move", "clip", "collide", "charge", "drain", "collect", "die")


class EpisodeOver(RuntimeError):
    """step() called on a finished episode."""


@dataclass
class Event:
    slot: int
    entity_kind: str  # uav | iot
    entity_id: int
    event: str
    value: float


@dataclass
class UavState:
    pos: np.ndarray               # (2,) horizontal position, m
    energy: float
    alive: bool = True
    charging_lbd: int | None = None

    def copy(self) -> "UavState":
        return UavState(self.pos.copy(), self.energy, self.alive, self.charging_lbd)


@dataclass
class IotState:
    pos: np.ndarray               # (2,) ground position, m
    gen_time: int = 0             # slot the buffered data was generated
    has_data: bool = True
    recorded_aoi: int = 0         # age at the most recent collection
    energy: float = 0.0
    data_remaining: float = 0.0   # bits buffered

    def copy(self) -> "IotState":
        return IotState(self.pos.copy(), self.gen_time, self.has_data,
                        self.recorded_aoi, self.energy, self.data_remaining)


@dataclass
class WorldState:
    slot: int
    uavs: list[UavState]
    iots: list[IotState]
    lbds: np.ndarray              # (L, 3) positions, m
    peak_recorded_aoi: int = 0    # max age over all collections so far
    events: list[Event] = field(default_factory=list)  # current slot only

    def copy(self) -> "WorldState":
        return WorldState(self.slot, [u.copy() for u in self.uavs],
                          [s.copy() for s in self.iots], self.lbds.copy(),
                          self.peak_recorded_aoi, list(self.events))


@dataclass(frozen=True)
class RewardBreakdown:
    r_a: float
    r_p: float
    r_s: float
    total: float


@dataclass
class EpisodeLog:
    """Accumulated events plus the final state of one episode."""

    config: ScenarioConfig
    events: list[Event] = field(default_factory=list)
    final_state: WorldState | None = None

    def absorb(self, state: WorldState) -> None:
        self.events.extend(state.events)
        self.final_state = state


@dataclass(frozen=True)
class ConstraintCheck:
    satisfied: bool
    violations: int


@dataclass(frozen=True)
class ConstraintReport:
    all_data_collected: ConstraintCheck   # every IoT collected at least once
    iot_energy_floor: ConstraintCheck     # final IoT energies above the floor
    uav_energy_range: ConstraintCheck     # no UAV battery ever hit zero
    collision_clearance: ConstraintCheck  # pairwise spacing kept
    flight_area: ConstraintCheck          # no boundary clips

    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in (
            self.all_data_collected, self.iot_energy_floor,
            self.uav_energy_range, self.collision_clearance, self.flight_area))


# ---------------------------------------------------------------------------
# Layout and reset
# ---------------------------------------------------------------------------

_CANONICAL_UAV_OFFSETS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


def parse_layout(text: str) -> tuple[list, list, list]:
    """Parse a scenario layout file: `IOT x y`, `LBD x y z`, `UAV x y` records."""
    iots, lbds, uavs = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].upper()
        try:
            if kind == "IOT" and len(parts) == 3:
                iots.append((float(parts[1]), float(parts[2])))
            elif kind == "LBD" and len(parts) == 4:
                lbds.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif kind == "UAV" and len(parts) == 3:
                uavs.append((float(parts[1]), float(parts[2])))
            else:
                raise ValueError
        except ValueError:
            raise ConfigError(f"layout line {lineno}: expected "
                              f"'IOT x y', 'LBD x y z' or 'UAV x y', got {raw!r}")
    return iots, lbds, uavs


def default_lbd_positions(config: ScenarioConfig) -> np.ndarray:
    if config.lbd_layout == "ring" and config.n_lbds > 1:
        angles = 2.0 * math.pi * np.arange(config.n_lbds) / config.n_lbds
        radius = config.charge_radius
        return np.stack([radius * np.cos(angles), radius * np.sin(angles),
                         np.zeros(config.n_lbds)], axis=1)
    out = np.zeros((config.n_lbds, 3))
    return out


def default_uav_positions(config: ScenarioConfig) -> np.ndarray:
    n = config.n_uavs
    if n <= len(_CANONICAL_UAV_OFFSETS):
        return np.array(_CANONICAL_UAV_OFFSETS[:n])
    angles = 2.0 * math.pi * np.arange(n) / n
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def reset(config: ScenarioConfig, seed: int,
          layout: tuple[list, list, list] | None = None) -> WorldState:
    """Build the initial world: fixed UAV spawn ring, seeded IoT placement.

    ``layout`` is an optional (iots, lbds, uavs) position override; when
    absent the config's layout file applies, then the defaults.
    """
    config.validate()
    layout_iots = layout_lbds = layout_uavs = None
    if layout is not None:
        layout_iots, layout_lbds, layout_uavs = layout
    elif config.layout_file:
        with open(config.layout_file, "r", encoding="utf-8") as fh:
            layout_iots, layout_lbds, layout_uavs = parse_layout(fh.read())

    if layout_uavs:
        if len(layout_uavs) != config.n_uavs:
            raise ConfigError(f"layout has {len(layout_uavs)} UAV records, "
                              f"config expects n_uavs={config.n_uavs}")
        uav_pos = np.array(layout_uavs)
    else:
        uav_pos = default_uav_positions(config)

    if layout_lbds:
        if len(layout_lbds) != config.n_lbds:
            raise ConfigError(f"layout has {len(layout_lbds)} LBD records, "
                              f"config expects n_lbds={config.n_lbds}")
        lbds = np.array(layout_lbds)
    else:
        lbds = default_lbd_positions(config)

    if layout_iots:
        if len(layout_iots) != config.n_iots:
            raise ConfigError(f"layout has {len(layout_iots)} IOT records, "
                              f"config expects n_iots={config.n_iots}")
        iot_pos = np.array(layout_iots)
    else:
        rng = np.random.default_rng(seed)
        h = config.area_half_side
        iot_pos = rng.uniform(-h, h, size=(config.n_iots, 2))

    e0 = config.e_init_frac * config.e_full
    uavs = [UavState(pos=uav_pos[j].astype(float).copy(), energy=e0)
            for j in range(config.n_uavs)]
    iots = [IotState(pos=iot_pos[i].astype(float).copy(),
                     energy=config.e_iot_init,
                     data_remaining=config.data_volume)
            for i in range(config.n_iots)]
    return WorldState(slot=0, uavs=uavs, iots=iots, lbds=lbds)


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def is_done(state: WorldState, config: ScenarioConfig) -> bool:
    return state.slot >= config.horizon or any(not u.alive for u in state.uavs)


def _nearest_lbd_horizontal(pos: np.ndarray, lbds: np.ndarray) -> tuple[int, float]:
    d = np.hypot(lbds[:, 0] - pos[0], lbds[:, 1] - pos[1])
    k = int(np.argmin(d))
    return k, float(d[k])


def step(state: WorldState, joint_action: list[int],
         config: ScenarioConfig) -> tuple[WorldState, list[RewardBreakdown], bool]:
    """Advance one slot; returns (next state, per-agent rewards, done)."""
    if is_done(state, config):
        raise EpisodeOver(f"episode finished at slot {state.slot}")
    if len(joint_action) != config.n_uavs:
        raise ValueError(f"expected {config.n_uavs} actions, got {len(joint_action)}")
    for a in joint_action:
        if not 0 <= a < config.n_actions:
            raise ValueError(f"action index {a} outside 0..{config.n_actions - 1}")

    nxt = state.copy()
    nxt.events = []
    nxt.slot = state.slot + 1
    t = nxt.slot
    events = nxt.events
    step_len = config.speed * config.slot_dt
    half = config.area_half_side

    moved_speed = [0.0] * config.n_uavs
    clip_counts = [0] * config.n_uavs

    # 1. Movement with square and flight-disc clipping.
    for j, uav in enumerate(nxt.uavs):
        if not uav.alive:
            continue
        a = joint_action[j]
        delta = _ACTION_UNIT[a] * step_len
        moved_speed[j] = 0.0 if a == 8 else config.speed
        target = uav.pos + delta
        if np.any(delta):
            events.append(Event(t, "uav", j, "move", float(np.hypot(*delta))))
        clipped = np.clip(target, -half, half)
        r = float(np.hypot(*clipped))
        if r > config.flight_limit:
            clipped = clipped * (config.flight_limit / r)
        correction = float(np.hypot(*(clipped - target)))
        if correction > 1e-12:
            events.append(Event(t, "uav", j, "clip", correction))
            clip_counts[j] += 1
        uav.pos = clipped

    # 2. Pairwise collision detection (soft constraint: logged and penalized).
    collide_counts = [0] * config.n_uavs
    collision_pairs = 0
    alive_idx = [j for j, u in enumerate(nxt.uavs) if u.alive]
    for ai, j in enumerate(alive_idx):
        for k in alive_idx[ai + 1:]:
            d = float(np.hypot(*(nxt.uavs[j].pos - nxt.uavs[k].pos)))
            if d < config.collision_dist:
                collision_pairs += 1
                collide_counts[j] += 1
                collide_counts[k] += 1
                events.append(Event(t, "uav", j, "collide", d))
                events.append(Event(t, "uav", k, "collide", d))

    # 3. Charging assignment: globally nearest-first, one UAV per LBD and one
    #    LBD per UAV; ties broken by lower UAV then LBD index.
    charge_gain = [0.0] * config.n_uavs
    for u in nxt.uavs:
        u.charging_lbd = None
    candidates = []
    for j in alive_idx:
        for k in range(len(nxt.lbds)):
            dh = float(np.hypot(nxt.uavs[j].pos[0] - nxt.lbds[k][0],
                                nxt.uavs[j].pos[1] - nxt.lbds[k][1]))
            if dh <= config.charge_radius:
                candidates.append((dh, j, k))
    candidates.sort()
    used_lbd: set[int] = set()
    for dh, j, k in candidates:
        if nxt.uavs[j].charging_lbd is not None or k in used_lbd:
            continue
        nxt.uavs[j].charging_lbd = k
        used_lbd.add(k)
        beam_height = config.altitude - float(nxt.lbds[k][2])
        power = laser_power_received(config.laser, dh, beam_height)
        charge_gain[j] = power * config.slot_dt
        events.append(Event(t, "uav", j, "charge", charge_gain[j]))

    # 4. Propulsion drain and energy update; an empty battery kills the UAV
    #    and ends the episode.
    any_death = [False] * config.n_uavs
    for j in alive_idx:
        uav = nxt.uavs[j]
        drain = propulsion_power(config.propulsion, moved_speed[j]) * config.slot_dt
        events.append(Event(t, "uav", j, "drain", drain))
        energy = uav.energy + charge_gain[j] - drain
        energy = min(max(energy, 0.0), config.e_full)
        uav.energy = energy
        if energy <= 0.0:
            uav.alive = False
            any_death[j] = True
            events.append(Event(t, "uav", j, "die", float(t)))

    # 5. Data collection: one collector per IoT (nearest alive UAV in range),
    #    a UAV may collect several IoTs in the same slot.
    collect_counts = [0] * config.n_uavs
    for i, iot in enumerate(nxt.iots):
        if not iot.has_data:
            continue
        best = None
        for j in alive_idx:
            if not nxt.uavs[j].alive:
                continue
            d = float(np.hypot(*(nxt.uavs[j].pos - iot.pos)))
            if d <= config.comm_radius and (best is None or d < best[0]):
                best = (d, j)
        if best is None:
            continue
        d, j = best
        if config.rate_gated_collection:
            rate = transmission_rate(config.channel, d, config.altitude,
                                     use_slant_distance=config.use_slant_distance)
            if rate * config.slot_dt < iot.data_remaining:
                continue
        age = t - iot.gen_time
        iot.recorded_aoi = age
        iot.energy = max(iot.energy - config.channel.tx_power_w * config.slot_dt, 0.0)
        if config.regenerate_on_collect:
            iot.gen_time = t
            iot.data_remaining = config.data_volume
        else:
            iot.has_data = False
            iot.data_remaining = 0.0
        collect_counts[j] += 1
        events.append(Event(t, "iot", i, "collect", float(j)))
        nxt.peak_recorded_aoi = max(nxt.peak_recorded_aoi, age)

    done = is_done(nxt, config)

    # 6/7. Rewards from the updated state and this slot's event tallies.
    rewards = [
        _reward(nxt, j, collect_counts[j], collide_counts[j] + clip_counts[j],
                any_death[j], config)
        for j in range(config.n_uavs)
    ]
    return nxt, rewards, done


def _reward(state: WorldState, agent: int, collected: int, penal_events: int,
            died: bool, config: ScenarioConfig) -> RewardBreakdown:
    rw = config.reward
    uav = state.uavs[agent]
    _, d_lbd = _nearest_lbd_horizontal(uav.pos, state.lbds)
    d_c = max(0.0, d_lbd - config.charge_radius)
    energy = uav.energy
    if energy <= config.e_charge_threshold:
        r_p = -d_c * rw.r_pen1
    elif abs(energy - config.e_full) <= config.epsilon_energy:
        r_p = -d_c * rw.r_pen2
    else:
        r_p = rw.r_0
    r_p -= rw.event_penalty * penal_events
    if died:
        r_p -= rw.death_penalty
    r_a = -peak_aoi(state) / config.aoi_norm
    r_s = float(collected)
    total = rw.alpha_a * r_a + rw.beta_p * r_p + rw.gamma_s * r_s
    return RewardBreakdown(r_a=r_a, r_p=r_p, r_s=r_s, total=total)


def reward_of(state_before: WorldState, state_after: WorldState, agent: int,
              config: ScenarioConfig) -> RewardBreakdown:
    """Recompute one agent's reward for the transition into ``state_after``."""
    collected = sum(1 for e in state_after.events
                    if e.event == "collect" and int(e.value) == agent)
    penal = sum(1 for e in state_after.events
                if e.entity_kind == "uav" and e.entity_id == agent
                and e.event in ("collide", "clip"))
    died = any(e.entity_kind == "uav" and e.entity_id == agent and e.event == "die"
               for e in state_after.events)
    return _reward(state_after, agent, collected, penal, died, config)


def peak_aoi(state: WorldState) -> int:
    """Network peak AoI including ages of still-pending data."""
    peak = state.peak_recorded_aoi
    for iot in state.iots:
        if iot.has_data:
            peak = max(peak, state.slot - iot.gen_time)
    return peak


def peak_aoi_recorded(state: WorldState) -> int:
    """Peak over collection-time ages only."""
    return state.peak_recorded_aoi


# ---------------------------------------------------------------------------
# Observations and global state
# ---------------------------------------------------------------------------

def observe(state: WorldState, agent: int, config: ScenarioConfig) -> np.ndarray:
    """Fixed-width local observation: own pose and energy, the K nearest
    IoTs (relative position, age, data flag), and the nearest LBD offset."""
    uav = state.uavs[agent]
    if not uav.alive:
        raise ValueError(f"agent {agent} is not alive")
    half = config.area_half_side
    span = 2.0 * half
    out = np.zeros(config.obs_dim)
    out[0] = uav.pos[0] / half
    out[1] = uav.pos[1] / half
    out[2] = uav.energy / config.e_full

    order = sorted(range(len(state.iots)),
                   key=lambda i: (float(np.hypot(*(state.iots[i].pos - uav.pos))), i))
    for row, i in enumerate(order[:config.obs_k_nearest]):
        iot = state.iots[i]
        age = (state.slot - iot.gen_time) if iot.has_data else iot.recorded_aoi
        base = 3 + 4 * row
        out[base] = (iot.pos[0] - uav.pos[0]) / span
        out[base + 1] = (iot.pos[1] - uav.pos[1]) / span
        out[base + 2] = age / config.aoi_norm
        out[base + 3] = 1.0 if iot.has_data else 0.0

    k, _ = _nearest_lbd_horizontal(uav.pos, state.lbds)
    out[-2] = (state.lbds[k][0] - uav.pos[0]) / span
    out[-1] = (state.lbds[k][1] - uav.pos[1]) / span
    return out


def global_state_vector(state: WorldState, config: ScenarioConfig) -> np.ndarray:
    """Centralized-training state: all UAV poses/energies, all IoT ages/flags."""
    half = config.area_half_side
    out = np.zeros(config.global_state_dim)
    for j, uav in enumerate(state.uavs):
        out[3 * j] = uav.pos[0] / half
        out[3 * j + 1] = uav.pos[1] / half
        out[3 * j + 2] = uav.energy / config.e_full
    base = 3 * config.n_uavs
    for i, iot in enumerate(state.iots):
        age = (state.slot - iot.gen_time) if iot.has_data else iot.recorded_aoi
        out[base + 2 * i] = age / config.aoi_norm
        out[base + 2 * i + 1] = 1.0 if iot.has_data else 0.0
    return out


# ---------------------------------------------------------------------------
# Constraint reporting and event serialization
# ---------------------------------------------------------------------------

def check_constraints(log: EpisodeLog) -> ConstraintReport:
    """Evaluate the five feasibility constraints over a completed episode."""
    if log.final_state is None:
        raise ValueError("episode log has no final state")
    config = log.config
    collected = set()
    die_events = 0
    collide_involvements = 0
    clip_events = 0
    for e in log.events:
        if e.event == "collect":
            collected.add(e.entity_id)
        elif e.event == "die":
            die_events += 1
        elif e.event == "collide":
            collide_involvements += 1
        elif e.event == "clip":
            clip_events += 1
    missing = config.n_iots - len(collected)
    low_iots = sum(1 for s in log.final_state.iots if s.energy < config.e_iot_floor)
    collision_pairs = collide_involvements // 2
    return ConstraintReport(
        all_data_collected=ConstraintCheck(missing == 0, missing),
        iot_energy_floor=ConstraintCheck(low_iots == 0, low_iots),
        uav_energy_range=ConstraintCheck(die_events == 0, die_events),
        collision_clearance=ConstraintCheck(collision_pairs == 0, collision_pairs),
        flight_area=ConstraintCheck(clip_events == 0, clip_events),
    )


EVENT_CSV_HEADER = "slot,entity_kind,entity_id,event,value"


def events_to_csv(events: list[Event]) -> str:
    lines = [EVENT_CSV_HEADER]
    for e in events:
        lines.append(f"{e.slot},{e.entity_kind},{e.entity_id},{e.event},{e.value!r}")
    return "\n".join(lines) + "\n"


def states_equal(a: WorldState, b: WorldState) -> bool:
    """Bitwise equality of two world states (for determinism checks)."""
    if a.slot != b.slot or a.peak_recorded_aoi != b.peak_recorded_aoi:
        return False
    if not np.array_equal(a.lbds, b.lbds):
        return False
    for ua, ub in zip(a.uavs, b.uavs):
        if (not np.array_equal(ua.pos, ub.pos) or ua.energy != ub.energy
                or ua.alive != ub.alive or ua.charging_lbd != ub.charging_lbd):
            return False
    for sa, sb in zip(a.iots, b.iots):
        if (not np.array_equal(sa.pos, sb.pos) or sa.gen_time != sb.gen_time
                or sa.has_data != sb.has_data or sa.recorded_aoi != sb.recorded_aoi
                or sa.energy != sb.energy or sa.data_remaining != sb.data_remaining):
            return False
    if len(a.events) != len(b.events):
        return False
    for ea, eb in zip(a.events, b.events):
        if (ea.slot, ea.entity_kind, ea.entity_id, ea.event, ea.value) != (
                eb.slot, eb.entity_kind, eb.entity_id, eb.event, eb.value):
            return False
    return True
