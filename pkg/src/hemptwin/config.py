"""Scenario configuration: every tunable, file round-tripping, validation.

The external format is a flat, human-readable ``key = value`` file with dotted
section names (``growth.g = 0.0018``).  Writing a config and parsing it back
is an identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

__all__ = [
    "Topology",
    "ChainConfig",
    "RunConfig",
    "StageDuration",
    "ScenarioConfig",
    "ConfigError",
    "ConfigValidationError",
    "validate_config",
    "default_config",
    "config_to_text",
    "config_from_text",
    "load_config",
    "save_config",
    "DURATION_STAGES",
]


class Topology(enum.Enum):
    TWO_LAYER = "TwoLayer"
    SINGLE_CHAIN = "SingleChain"
    NONE = "None"


class ConfigError(ValueError):
    """Malformed config file or unknown key."""


class ConfigValidationError(ValueError):
    """One or more invariant violations; `.violations` lists all of them."""

    def __init__(self, violations: list[tuple[str, str, str]]):
        self.violations = violations
        lines = "; ".join(f"{kind}: {key}: {msg}" for key, kind, msg in violations)
        super().__init__(lines)


@dataclass(frozen=True)
class StageDuration:
    lo: float
    hi: float


@dataclass(frozen=True)
class ChainConfig:
    topology: Topology = Topology.TWO_LAYER
    n_shards: int = 2
    n_validators_per_shard: int = 4  # on-site verifiers per shard
    n_regulators: int = 2  # root-chain confirmers; also the single-chain pool size
    verification_mean_days: float = 0.1
    confirmation_mean_days: float = 0.05
    single_chain_mean_days: float = 0.15
    panel_size: int = 1
    miss_probability: float = 0.0  # verification miss chance; detection is perfect by default


@dataclass(frozen=True)
class RunConfig:
    warmup_lots: int = 200
    run_length_lots: int = 500
    replications: int = 100
    master_seed: int = 20210



# Stage keys that carry a uniform duration range in the config file.
DURATION_STAGES = (
    "germination",
    "soil_prep",
    "transplant",
    "cultivation",
    "preharvest_test",
    "harvest",
    "drying",
    "extraction",
    "winterization",
    "plc",
    "final_coa",
)

_DEFAULT_DURATIONS = {
    "germination": StageDuration(5.0, 10.0),
    "soil_prep": StageDuration(1.0, 2.0),
    "transplant": StageDuration(1.0, 2.0),
    "cultivation": StageDuration(50.0, 60.0),
    "preharvest_test": StageDuration(2.0, 7.0),
    "harvest": StageDuration(1.0, 2.0),
    "drying": StageDuration(1.0, 2.0),
    "extraction": StageDuration(1.0, 2.0),
    "winterization": StageDuration(1.0, 3.0),
    "plc": StageDuration(1.0, 5.0),
    "final_coa": StageDuration(0.0, 0.0),
}


@dataclass(frozen=True)
class ScenarioConfig:
    n_lots_per_season: int = 50
    growth_rate: float = 0.0018  # total cannabinoid fraction gained per day
    cbd_thc_ratio: float = 28.0
    lambda_var: float = 0.5
    thc_preharvest_limit: float = 0.003
    thc_final_limit: float = 0.0005
    harvest_deadline_days: float = 15.0
    seedling_wait_limit: float = 2.0
    dry_wait_limit: float = 2.0
    harvest_delay_days: float = 0.0
    n_field_workers: int = 10
    n_lab_servers: int = 10
    n_dryers: int = 3
    n_processors: int = 2
    dynamic_dryers: bool = False
    chain: ChainConfig = field(default_factory=ChainConfig)
    tamper_probability: float = 0.3
    run: RunConfig = field(default_factory=RunConfig)
    extraction_lo: float = 0.6
    extraction_hi: float = 0.8
    winterization_lo: float = 0.95
    winterization_hi: float = 1.0
    plc_cbd_lo: float = 0.9
    plc_cbd_hi: float = 1.0
    plc_thc_lo: float = 0.3
    plc_thc_hi: float = 0.5
    max_plc_passes: int = 2
    season_interval_days: float = 365.0
    stage_durations: tuple = tuple(sorted(_DEFAULT_DURATIONS.items()))

    def duration(self, stage: str) -> StageDuration:
        return dict(self.stage_durations)[stage]

    def with_durations(self, **overrides: StageDuration) -> "ScenarioConfig":
        merged = dict(self.stage_durations)
        merged.update(overrides)
        return replace(self, stage_durations=tuple(sorted(merged.items())))


def default_config() -> ScenarioConfig:
    """The baseline scenario used throughout the bundled experiments."""
    return ScenarioConfig()


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Return `cfg` if every invariant holds, else raise with all violations."""
    bad: list[tuple[str, str, str]] = []

    def prob(key: str, value: float) -> None:
        if not (0.0 <= value <= 1.0):
            bad.append((key, "invalid_probability", f"{value} outside [0, 1]"))

    def nonneg(key: str, value) -> None:
        if value < 0:
            bad.append((key, "invalid_range", f"{value} is negative"))

    prob("adversary.p2", cfg.tamper_probability)
    prob("chain.miss_probability", cfg.chain.miss_probability)
    nonneg("lots.n", cfg.n_lots_per_season)
    nonneg("growth.g", cfg.growth_rate)
    nonneg("growth.lambda", cfg.lambda_var)
    if cfg.cbd_thc_ratio <= 0:
        bad.append(("growth.r", "invalid_range", "ratio must be positive"))
    nonneg("limits.gamma_v", cfg.thc_preharvest_limit)
    nonneg("limits.gamma", cfg.thc_final_limit)
    if cfg.thc_final_limit >= cfg.thc_preharvest_limit:
        bad.append(
            ("limits.gamma", "invalid_range",
             "final limit must be below the pre-harvest limit")
        )
    nonneg("limits.harvest_deadline", cfg.harvest_deadline_days)
    nonneg("limits.Lt", cfg.seedling_wait_limit)
    nonneg("limits.Ld", cfg.dry_wait_limit)
    nonneg("policy.harvest_delay", cfg.harvest_delay_days)
    for key, count in (
        ("resources.n_f", cfg.n_field_workers),
        ("resources.n_l", cfg.n_lab_servers),
        ("resources.n_p", cfg.n_processors),
    ):
        if count < 1:
            bad.append((key, "zero_resource", "stage requires at least one server"))
    if cfg.n_dryers < 1 and not cfg.dynamic_dryers:
        bad.append(
            ("resources.n_d", "zero_resource",
             "no dryers and dynamic sizing disabled")
        )
    if cfg.n_dryers < 0:
        bad.append(("resources.n_d", "invalid_range", "negative dryer count"))
    ch = cfg.chain
    if ch.topology is Topology.TWO_LAYER:
        if ch.n_shards < 1:
            bad.append(("chain.n_shards", "zero_resource", "need at least one shard"))
        if ch.n_validators_per_shard < 1:
            bad.append(("chain.n_s", "zero_resource", "need validators per shard"))
        if ch.n_regulators < 1:
            bad.append(("chain.n_r", "zero_resource", "need root regulators"))
    if ch.topology is Topology.SINGLE_CHAIN and ch.n_regulators < 1:
        bad.append(("chain.n_r", "zero_resource", "need verification servers"))
    for key, mean in (
        ("chain.mu_v", ch.verification_mean_days),
        ("chain.mu_c", ch.confirmation_mean_days),
        ("chain.mu_s", ch.single_chain_mean_days),
    ):
        if mean <= 0:
            bad.append((key, "invalid_range", "service mean must be positive"))
    if ch.panel_size != 1:
        bad.append(
            ("chain.panel_m", "unsupported",
             "only single-validator panels are implemented")
        )
    for key, count in (
        ("run.warmup", cfg.run.warmup_lots),
        ("run.length", cfg.run.run_length_lots),
        ("run.reps", cfg.run.replications),
    ):
        nonneg(key, count)
    if cfg.run.run_length_lots < 1:
        bad.append(("run.length", "invalid_range", "need a measured window"))
    for stage, dur in cfg.stage_durations:
        if dur.lo > dur.hi:
            bad.append(
                (f"durations.{stage}", "invalid_range", f"lo {dur.lo} > hi {dur.hi}")
            )
        if dur.lo < 0:
            bad.append((f"durations.{stage}", "invalid_range", "negative duration"))
    for key, lo, hi in (
        ("extraction", cfg.extraction_lo, cfg.extraction_hi),
        ("winterization", cfg.winterization_lo, cfg.winterization_hi),
        ("plc_cbd", cfg.plc_cbd_lo, cfg.plc_cbd_hi),
        ("plc_thc", cfg.plc_thc_lo, cfg.plc_thc_hi),
    ):
        if not (0.0 <= lo <= hi <= 1.0):
            bad.append((f"fractions.{key}", "invalid_range",
                        f"bounds ({lo}, {hi}) must satisfy 0 <= lo <= hi <= 1"))

    if bad:
        raise ConfigValidationError(bad)
    return cfg


# ---------------------------------------------------------------------------
# external key-value format


def _flatten(cfg: ScenarioConfig) -> dict[str, object]:
    out: dict[str, object] = {
        "lots.n": cfg.n_lots_per_season,
        "growth.g": cfg.growth_rate,
        "growth.r": cfg.cbd_thc_ratio,
        "growth.lambda": cfg.lambda_var,
        "limits.gamma_v": cfg.thc_preharvest_limit,
        "limits.gamma": cfg.thc_final_limit,
        "limits.harvest_deadline": cfg.harvest_deadline_days,
        "limits.Lt": cfg.seedling_wait_limit,
        "limits.Ld": cfg.dry_wait_limit,
        "policy.harvest_delay": cfg.harvest_delay_days,
        "resources.n_f": cfg.n_field_workers,
        "resources.n_l": cfg.n_lab_servers,
        "resources.n_d": cfg.n_dryers,
        "resources.n_p": cfg.n_processors,
        "resources.dynamic_dryers": cfg.dynamic_dryers,
        "chain.topology": cfg.chain.topology.value,
        "chain.n_shards": cfg.chain.n_shards,
        "chain.n_s": cfg.chain.n_validators_per_shard,
        "chain.n_r": cfg.chain.n_regulators,
        "chain.mu_v": cfg.chain.verification_mean_days,
        "chain.mu_c": cfg.chain.confirmation_mean_days,
        "chain.mu_s": cfg.chain.single_chain_mean_days,
        "chain.panel_m": cfg.chain.panel_size,
        "chain.miss_probability": cfg.chain.miss_probability,
        "adversary.p2": cfg.tamper_probability,
        "run.warmup": cfg.run.warmup_lots,
        "run.length": cfg.run.run_length_lots,
        "run.reps": cfg.run.replications,
        "run.seed": cfg.run.master_seed,
    }
    for stage, dur in cfg.stage_durations:
        out[f"durations.{stage}.lo"] = dur.lo
        out[f"durations.{stage}.hi"] = dur.hi
    return out


def config_to_text(cfg: ScenarioConfig) -> str:
    lines = [f"{key} = {_format_value(v)}" for key, v in _flatten(cfg).items()]
    return "\n".join(lines) + "\n"


def _format_value(v: object) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def config_from_text(text: str) -> ScenarioConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()

    cfg = default_config()
    flat = _flatten(cfg)
    unknown = set(values) - set(flat)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")

    def geti(key: str, cur: int) -> int:
        return int(values[key]) if key in values else cur

    def getf(key: str, cur: float) -> float:
        return float(values[key]) if key in values else cur

    def getb(key: str, cur: bool) -> bool:
        return _parse_bool(values[key]) if key in values else cur

    topo = cfg.chain.topology
    if "chain.topology" in values:
        raw = values["chain.topology"].strip()
        matches = [t for t in Topology if t.value.lower() == raw.lower()]
        if not matches:
            raise ConfigError(f"unknown chain.topology {raw!r}")
        topo = matches[0]

    chain = ChainConfig(
        topology=topo,
        n_shards=geti("chain.n_shards", cfg.chain.n_shards),
        n_validators_per_shard=geti("chain.n_s", cfg.chain.n_validators_per_shard),
        n_regulators=geti("chain.n_r", cfg.chain.n_regulators),
        verification_mean_days=getf("chain.mu_v", cfg.chain.verification_mean_days),
        confirmation_mean_days=getf("chain.mu_c", cfg.chain.confirmation_mean_days),
        single_chain_mean_days=getf("chain.mu_s", cfg.chain.single_chain_mean_days),
        panel_size=geti("chain.panel_m", cfg.chain.panel_size),
        miss_probability=getf("chain.miss_probability", cfg.chain.miss_probability),
    )
    run = RunConfig(
        warmup_lots=geti("run.warmup", cfg.run.warmup_lots),
        run_length_lots=geti("run.length", cfg.run.run_length_lots),
        replications=geti("run.reps", cfg.run.replications),
        master_seed=geti("run.seed", cfg.run.master_seed),
    )
    durations = {}
    for stage in DURATION_STAGES:
        cur = cfg.duration(stage)
        durations[stage] = StageDuration(
            lo=getf(f"durations.{stage}.lo", cur.lo),
            hi=getf(f"durations.{stage}.hi", cur.hi),
        )

    return ScenarioConfig(
        n_lots_per_season=geti("lots.n", cfg.n_lots_per_season),
        growth_rate=getf("growth.g", cfg.growth_rate),
        cbd_thc_ratio=getf("growth.r", cfg.cbd_thc_ratio),
        lambda_var=getf("growth.lambda", cfg.lambda_var),
        thc_preharvest_limit=getf("limits.gamma_v", cfg.thc_preharvest_limit),
        thc_final_limit=getf("limits.gamma", cfg.thc_final_limit),
        harvest_deadline_days=getf("limits.harvest_deadline", cfg.harvest_deadline_days),
        seedling_wait_limit=getf("limits.Lt", cfg.seedling_wait_limit),
        dry_wait_limit=getf("limits.Ld", cfg.dry_wait_limit),
        harvest_delay_days=getf("policy.harvest_delay", cfg.harvest_delay_days),
        n_field_workers=geti("resources.n_f", cfg.n_field_workers),
        n_lab_servers=geti("resources.n_l", cfg.n_lab_servers),
        n_dryers=geti("resources.n_d", cfg.n_dryers),
        n_processors=geti("resources.n_p", cfg.n_processors),
        dynamic_dryers=getb("resources.dynamic_dryers", cfg.dynamic_dryers),
        chain=chain,
        tamper_probability=getf("adversary.p2", cfg.tamper_probability),
        run=run,
        stage_durations=tuple(sorted(durations.items())),
    )


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_to_text(cfg))


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read())
