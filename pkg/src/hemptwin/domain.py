"""Shared domain types: lots, cannabinoid state, stage order, run statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "Stage",
    "DropReason",
    "CannabinoidState",
    "RandomInputs",
    "Lot",
    "LotOutput",
    "StageOutcome",
    "ReplicationStats",
    "MANDATORY_PATH",
    "allowed_successors",
    "validate_stage_trace",
]


class Stage(enum.Enum):
    GERMINATION = "germination"
    SOIL_PREP = "soil_prep"
    TRANSPLANT = "transplant"
    CULTIVATION = "cultivation"
    PREHARVEST_TEST = "preharvest_test"
    HARVEST = "harvest"
    DRY_WAIT = "dry_wait"
    DRYING = "drying"
    EXTRACT_WAIT = "extract_wait"
    EXTRACTION = "extraction"
    WINTERIZATION = "winterization"
    PLC = "plc"
    FINAL_COA = "final_coa"
    FINISHED = "finished"
    DROPPED = "dropped"
    DESTROYED = "destroyed"


class DropReason(enum.Enum):
    SEEDLING_WAIT_EXCEEDED = "seedling_wait_exceeded"
    DRY_WAIT_EXCEEDED = "dry_wait_exceeded"
    PREHARVEST_FAIL = "preharvest_fail"
    HARVEST_DEADLINE_EXCEEDED = "harvest_deadline_exceeded"
    FINAL_COA_FAIL = "final_coa_fail"


# The linear backbone every finished lot walks through, in order.  Germination
# and soil preparation run in parallel ahead of transplant; retest loops send a
# lot from HARVEST back to PREHARVEST_TEST; repeat purification loops PLC ->
# FINAL_COA -> PLC.
MANDATORY_PATH = (
    Stage.GERMINATION,
    Stage.TRANSPLANT,
    Stage.CULTIVATION,
    Stage.PREHARVEST_TEST,
    Stage.HARVEST,
    Stage.DRY_WAIT,
    Stage.DRYING,
    Stage.EXTRACT_WAIT,
    Stage.EXTRACTION,
    Stage.WINTERIZATION,
    Stage.PLC,
    Stage.FINAL_COA,
    Stage.FINISHED,
)

_SUCCESSORS: dict[Stage, frozenset[Stage]] = {
    Stage.GERMINATION: frozenset({Stage.TRANSPLANT, Stage.DROPPED}),
    Stage.SOIL_PREP: frozenset({Stage.TRANSPLANT, Stage.DROPPED}),
    Stage.TRANSPLANT: frozenset({Stage.CULTIVATION}),
    Stage.CULTIVATION: frozenset({Stage.PREHARVEST_TEST}),
    Stage.PREHARVEST_TEST: frozenset({Stage.HARVEST, Stage.DESTROYED}),
    Stage.HARVEST: frozenset({Stage.DRY_WAIT, Stage.PREHARVEST_TEST}),
    Stage.DRY_WAIT: frozenset({Stage.DRYING, Stage.DROPPED}),
    Stage.DRYING: frozenset({Stage.EXTRACT_WAIT}),
    Stage.EXTRACT_WAIT: frozenset({Stage.EXTRACTION}),
    Stage.EXTRACTION: frozenset({Stage.WINTERIZATION}),
    Stage.WINTERIZATION: frozenset({Stage.PLC}),
    Stage.PLC: frozenset({Stage.FINAL_COA}),
    Stage.FINAL_COA: frozenset({Stage.FINISHED, Stage.PLC, Stage.DESTROYED}),
    Stage.FINISHED: frozenset(),
    Stage.DROPPED: frozenset(),
    Stage.DESTROYED: frozenset(),
}


def allowed_successors(stage: Stage) -> frozenset[Stage]:
    return _SUCCESSORS[stage]


def validate_stage_trace(trace: list[Stage]) -> bool:
    """True iff `trace` follows the stage partial order without skipping a
    mandatory stage.  The trace is the sequence of entered stages; germination
    and soil preparation form an unordered prefix, and transplant requires
    both."""
    if not trace:
        return False
    pre = {Stage.GERMINATION, Stage.SOIL_PREP}
    seen_pre: set[Stage] = set()
    i = 0
    while i < len(trace) and trace[i] in pre:
        if trace[i] in seen_pre:
            return False
        seen_pre.add(trace[i])
        i += 1
    if Stage.GERMINATION not in seen_pre:
        return False
    rest = trace[i:]
    if not rest:
        return True  # still in preparation
    if rest[0] is Stage.TRANSPLANT and seen_pre != pre:
        return False
    if rest[0] not in _SUCCESSORS[Stage.GERMINATION]:
        return False
    terminal = {Stage.FINISHED, Stage.DROPPED, Stage.DESTROYED}
    current = rest[0]
    for nxt in rest[1:]:
        if current in terminal or nxt in pre:
            return False
        if nxt not in _SUCCESSORS[current]:
            return False
        current = nxt
    return True


@dataclass(frozen=True)
class CannabinoidState:
    """CBD and THC as fractions of dry mass (0.097 means 9.7%)."""

    cbd_pct: float
    thc_pct: float

    def __post_init__(self) -> None:
        if self.cbd_pct < 0 or self.thc_pct < 0:
            raise ValueError(
                f"cannabinoid fractions must be non-negative, got "
                f"({self.cbd_pct}, {self.thc_pct})"
            )

    def scaled(self, cbd_factor: float, thc_factor: float) -> "CannabinoidState":
        return CannabinoidState(self.cbd_pct * cbd_factor, self.thc_pct * thc_factor)

    def ratio(self) -> float:
        return self.cbd_pct / self.thc_pct if self.thc_pct > 0 else math.inf


@dataclass
class RandomInputs:
    """Realized random input factors for one lot (first purification pass for
    the per-pass removal fractions)."""

    eps: float = 0.0
    t_prime: float = 0.0
    eps_prime: float = 0.0
    q_extract: float = 0.0
    w_winter: float = 0.0
    q_u: float = 0.0
    q_v: float = 0.0


FACTOR_NAMES = ("eps", "t_prime", "eps_prime", "q_extract", "w_winter", "q_u", "q_v")


@dataclass
class Lot:
    """A unit of product flowing through the chain, with an append-only
    cannabinoid history and per-stage timestamps in simulated days."""

    id: str
    season_index: int
    index_in_season: int
    arrival_time: float
    stage: Stage = Stage.GERMINATION
    cannabinoid_history: list = field(default_factory=list)
    timestamps: dict = field(default_factory=dict)
    stage_log: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)
    drop_reason: DropReason | None = None
    inputs: RandomInputs = field(default_factory=RandomInputs)

    # lifecycle bookkeeping used by the simulation
    state: CannabinoidState = field(
        default_factory=lambda: CannabinoidState(0.0, 0.0)
    )
    sample_time: float | None = None
    t_prime_legs: list = field(default_factory=list)
    plc_passes: int = 0
    false_pass_preharvest: bool = False
    false_pass_harvest: bool = False
    fake_qualified: bool = False
    terminated: bool = False
    termination_time: float | None = None

    def enter_stage(self, stage: Stage, now: float) -> None:
        if self.terminated:
            raise RuntimeError(f"lot {self.id} already terminated")
        prev = self.timestamps.get(self.stage)
        if prev is not None and prev[1] is None:
            self.timestamps[self.stage] = (prev[0], now)
        self.stage = stage
        self.stage_log.append(stage)
        existing = self.timestamps.get(stage)
        if existing is None:
            self.timestamps[stage] = (now, None)
        else:
            # revisited stage (retest / repeat purification): keep first entry
            self.timestamps[stage] = (existing[0], None)

    def record_state(self, stage: Stage, state: CannabinoidState) -> None:
        self.state = state
        self.cannabinoid_history.append((stage, state))

    def trace(self) -> list[Stage]:
        """Entered stages in order, revisits included."""
        return list(self.stage_log)


@dataclass(frozen=True)
class StageOutcome:
    """Decision record for one gate or wait-limit event.

    `decision` is one of "proceed", "destroy", "drop", "retest"; destruction
    happens only at the two test gates and drops only at the transplant and
    drying waits.
    """

    lot_id: str
    stage: Stage
    duration: float
    state_after: CannabinoidState
    decision: str

    _DESTROY_STAGES = frozenset({Stage.PREHARVEST_TEST, Stage.FINAL_COA})
    _DROP_STAGES = frozenset({Stage.TRANSPLANT, Stage.DRY_WAIT})

    def __post_init__(self) -> None:
        if self.decision not in ("proceed", "destroy", "drop", "retest"):
            raise ValueError(f"unknown decision {self.decision!r}")
        if self.decision == "destroy" and self.stage not in self._DESTROY_STAGES:
            raise ValueError(f"destroy is not legal at {self.stage}")
        if self.decision == "drop" and self.stage not in self._DROP_STAGES:
            raise ValueError(f"drop is not legal at {self.stage}")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


@dataclass
class LotOutput:
    """Per-lot outcome row for the measured window."""

    lot_id: str
    season_index: int
    outcome: str
    drop_reason: str | None
    final_cbd: float | None
    final_thc: float | None
    cycle_days: float | None
    t_prime: float | None
    false_pass_preharvest: bool
    false_pass_harvest: bool
    fake_qualified: bool


@dataclass
class ReplicationStats:
    """Counters and output samples for one replication's measured window."""

    replication_index: int
    lots_observed: int = 0
    finished_count: int = 0
    dry_drop_count: int = 0
    seedling_drop_count: int = 0
    destroyed_preharvest_count: int = 0
    destroyed_final_count: int = 0
    false_pass_preharvest: int = 0
    false_pass_harvest: int = 0
    fake_qualified: int = 0
    verification_mean: float = 0.0
    verification_sd: float = 0.0
    confirmation_mean: float = 0.0
    confirmation_sd: float = 0.0
    lot_outputs: list = field(default_factory=list)
    t_prime_samples: list = field(default_factory=list)

    @property
    def destroyed_count(self) -> int:
        return self.destroyed_preharvest_count + self.destroyed_final_count

    @property
    def dropped_count(self) -> int:
        return self.dry_drop_count + self.seedling_drop_count

    def rate(self, count: int) -> float:
        return count / self.lots_observed if self.lots_observed else 0.0
