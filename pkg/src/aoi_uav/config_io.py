"""Plain-text config format: `key = value` lines under `[section]` headers.

Every key has a documented default (the dataclass defaults); unknown sections
or keys are hard errors so a typo cannot silently change the physics.  `#`
starts a comment.  A full dump of a parsed config re-parses to the same
values, which is what makes run manifests replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from . import __version__
from .config import (
    ConfigError,
    RewardParams,
    ScenarioConfig,
    TrainConfig,
)
from .physics import ChannelParams, LaserParams, PropulsionParams


@dataclass
class RunSettings:
    """Manifest metadata; `seed` doubles as the default run seed."""

    seed: int = 0
    tool_version: str = __version__
    started_at: str = ""
    out_dir: str = ""


_SECTION_TYPES = {
    "scenario": ScenarioConfig,
    "channel": ChannelParams,
    "laser": LaserParams,
    "propulsion": PropulsionParams,
    "reward": RewardParams,
    "train": TrainConfig,
    "run": RunSettings,
}

_NESTED_FIELDS = ("channel", "laser", "propulsion", "reward")


def _field_types(cls) -> dict[str, str]:
    return {f.name: f.type for f in fields(cls) if f.name not in _NESTED_FIELDS}


def _coerce(section: str, key: str, raw: str, kind: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError
        return raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {kind}") from None


def parse_config(text: str) -> tuple[ScenarioConfig, TrainConfig, RunSettings]:
    """Parse config text; returns (scenario, train, run) with defaults filled."""
    values: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTION_TYPES:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, raw_value = line.partition("=")
        key, raw_value = key.strip(), raw_value.strip()
        kinds = _field_types(_SECTION_TYPES[section])
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        values[section][key] = _coerce(section, key, raw_value, kinds[key])

    scenario = ScenarioConfig(
        **values["scenario"],
        channel=ChannelParams(**values["channel"]),
        laser=LaserParams(**values["laser"]),
        propulsion=PropulsionParams(**values["propulsion"]),
        reward=RewardParams(**values["reward"]),
    )
    tconf = TrainConfig(**values["train"])
    run = RunSettings(**values["run"])
    scenario.validate()
    tconf.validate()
    return scenario, tconf, run


def _dump_section(name: str, obj) -> list[str]:
    lines = [f"[{name}]"]
    for key in _field_types(type(obj)):
        value = getattr(obj, key)
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    lines.append("")
    return lines


def dump_config(scenario: ScenarioConfig, tconf: TrainConfig,
                run: RunSettings | None = None) -> str:
    """Full resolved dump; re-parsing reproduces the exact same configs."""
    lines: list[str] = []
    if run is not None:
        lines += _dump_section("run", run)
    lines += _dump_section("scenario", scenario)
    lines += _dump_section("channel", scenario.channel)
    lines += _dump_section("laser", scenario.laser)
    lines += _dump_section("propulsion", scenario.propulsion)
    lines += _dump_section("reward", scenario.reward)
    lines += _dump_section("train", tconf)
    return "\n".join(lines)


def load_config(path: str) -> tuple[ScenarioConfig, TrainConfig, RunSettings]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    return parse_config(text)


# Sweepable parameter name -> how to apply it to a scenario.
SWEEPABLE_PARAMS = ("eta_le", "n_uavs", "n_iots", "P_L")


def apply_sweep_value(scenario: ScenarioConfig, param: str,
                      value: float) -> ScenarioConfig:
    if param == "eta_le":
        return replace(scenario, laser=replace(scenario.laser,
                                               conversion_eff=value))
    if param == "P_L":
        return replace(scenario, laser=replace(scenario.laser, power_w=value))
    if param == "n_uavs":
        return replace(scenario, n_uavs=int(value))
    if param == "n_iots":
        return replace(scenario, n_iots=int(value))
    raise ConfigError(f"unknown sweep parameter {param!r}; "
                      f"choose from {', '.join(SWEEPABLE_PARAMS)}")
