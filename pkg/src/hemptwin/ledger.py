"""Two-layer authority-verified ledger: routing, queues, blocks, and audit.

Records are routed by the submitter's location to a shard, verified on-site
by that shard's local authority pool (slow), appended to the shard chain, and
then confirmed online by the root-chain regulator pool (fast).  A record only
becomes authoritative once its shard block header is embedded in a root
block.  The single-chain baseline runs one verification pool and no
confirmation layer; with the ledger disabled records are accepted at face
value with zero delay and falsification is never caught.

Chains are hash-linked: each block carries the header hash of its
predecessor and a merkle root over its records, so any post-hoc mutation is
detectable by `audit_chain`.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

from .config import ChainConfig, Topology
from .kernel import EventCalendar, ResourcePool
from .randomness import RngStream

__all__ = [
    "ParticipantRole",
    "RecordKind",
    "GATE_KINDS",
    "DataRecord",
    "ShardBlock",
    "RootBlock",
    "ChainState",
    "AuditResult",
    "MalformedRecordError",
    "ChainParseError",
    "GENESIS_HASH",
    "record_hash",
    "shard_header_hash",
    "root_header_hash",
    "merkle_root",
    "assign_shard",
    "audit_chain",
    "export_chain",
    "parse_chain",
    "LedgerSystem",
]

GENESIS_HASH = "0" * 64


class MalformedRecordError(ValueError):
    """Record missing required fields for its kind."""


class ChainParseError(ValueError):
    """Unreadable chain export."""


class ParticipantRole(enum.Enum):
    BREEDER = "breeder"
    GROWER = "grower"
    DRYER = "dryer"
    PROCESSOR = "processor"
    TRANSPORTER = "transporter"
    LAB = "lab"
    AUTHORITY = "authority"


class RecordKind(enum.Enum):
    SEED_SOURCE = "seed_source"
    FIELD_INFO = "field_info"
    CULTIVATION_DATA = "cultivation_data"
    PREHARVEST_REQUEST = "preharvest_request"
    PREHARVEST_RESULT = "preharvest_result"
    HARVEST_DATA = "harvest_data"
    DRYING_DATA = "drying_data"
    POST_STABILIZATION_TEST = "post_stabilization_test"
    EXTRACTION_DATA = "extraction_data"
    WINTERIZATION_DATA = "winterization_data"
    PLC_DATA = "plc_data"
    FINAL_COA = "final_coa"
    TRANSPORT_DATA = "transport_data"
    VERIFICATION_RESULT = "verification_result"


# Kinds whose confirmation blocks the lot's progression to the next stage.
GATE_KINDS = frozenset(
    {RecordKind.PREHARVEST_RESULT, RecordKind.HARVEST_DATA, RecordKind.FINAL_COA}
)


@dataclass
class DataRecord:
    """One submitted data record.  `payload` is the as-reported (on-chain)
    view; `true_values` holds the ground truth for gate-relevant numbers and
    stays off-chain, as does the `tampered` flag."""

    record_id: str
    lot_id: str
    participant_role: ParticipantRole
    record_kind: RecordKind
    location_index: int
    payload: dict
    submitted_at: float
    true_values: dict = field(default_factory=dict)
    tampered: bool = False

    def validate(self) -> None:
        if not self.record_id or not self.lot_id:
            raise MalformedRecordError("record_id and lot_id are required")
        if self.record_kind in GATE_KINDS and not self.true_values:
            raise MalformedRecordError(
                f"{self.record_kind.value} must carry true values"
            )
        if self.location_index < 0:
            raise MalformedRecordError("location_index must be non-negative")


@dataclass
class ShardBlock:
    shard_id: int
    height: int
    prev_hash: str
    merkle_root: str
    validator_signature: str
    created_at: float
    record_ids: list
    nonce: int = 0  # vestigial under proof-of-authority; kept constant


@dataclass
class RootBlock:
    height: int
    prev_hash: str
    shard_headers: list  # [(shard_id, height, header_hash), ...]
    regulator_id: str
    created_at: float
    nonce: int = 0


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def record_hash(rec: DataRecord) -> str:
    return hashlib.sha256(
        _canonical(
            {
                "record_id": rec.record_id,
                "lot_id": rec.lot_id,
                "role": rec.participant_role.value,
                "kind": rec.record_kind.value,
                "location": rec.location_index,
                "payload": rec.payload,
                "submitted_at": rec.submitted_at,
            }
        )
    ).hexdigest()


def merkle_root(leaf_hashes: list[str]) -> str:
    """Binary merkle root; a single leaf is its own root, odd levels repeat
    their last element."""
    if not leaf_hashes:
        return GENESIS_HASH
    level = list(leaf_hashes)
    while len(level) > 1:
        if len(level) % 2 == 1:
            level.append(level[-1])
        level = [
            hashlib.sha256((a + b).encode("ascii")).hexdigest()
            for a, b in zip(level[::2], level[1::2])
        ]
    return level[0]


def shard_header_hash(block: ShardBlock) -> str:
    return hashlib.sha256(
        _canonical(
            {
                "shard_id": block.shard_id,
                "height": block.height,
                "prev_hash": block.prev_hash,
                "merkle_root": block.merkle_root,
                "validator": block.validator_signature,
                "created_at": block.created_at,
                "nonce": block.nonce,
            }
        )
    ).hexdigest()


def root_header_hash(block: RootBlock) -> str:
    return hashlib.sha256(
        _canonical(
            {
                "height": block.height,
                "prev_hash": block.prev_hash,
                "headers": [list(h) for h in block.shard_headers],
                "regulator": block.regulator_id,
                "created_at": block.created_at,
                "nonce": block.nonce,
            }
        )
    ).hexdigest()


def assign_shard(location_index: int, n_shards: int) -> int:
    """Deterministic location-based routing, stable per participant."""
    if n_shards < 1:
        raise ValueError("need at least one shard")
    return location_index % n_shards


@dataclass
class ChainState:
    """Everything a chain export contains: confirmed records and blocks."""

    topology: Topology
    n_shards: int
    records: dict = field(default_factory=dict)  # record_id -> DataRecord
    shards: dict = field(default_factory=dict)  # shard_id -> [ShardBlock]
    roots: list = field(default_factory=list)

    def shard_blocks(self, shard_id: int) -> list:
        return self.shards.setdefault(shard_id, [])


@dataclass(frozen=True)
class AuditResult:
    ok: bool
    shard_id: int | None = None
    height: int | None = None
    reason: str | None = None

    def describe(self) -> str:
        if self.ok:
            return "Ok"
        where = f"shard {self.shard_id} " if self.shard_id is not None else ""
        return f"Violation at {where}height {self.height}: {self.reason}"


def audit_chain(chain: ChainState) -> AuditResult:
    """Recompute every hash link, merkle root, and root-coverage relation;
    report the first violation in deterministic order."""
    covered_records: set[str] = set()
    header_hashes: dict[tuple[int, int], str] = {}
    for shard_id in sorted(chain.shards):
        prev = GENESIS_HASH
        prev_height = -1
        for block in chain.shards[shard_id]:
            if block.height <= prev_height:
                return AuditResult(
                    False, shard_id, block.height, "height not strictly increasing"
                )
            if block.prev_hash != prev:
                return AuditResult(False, shard_id, block.height, "prev_hash mismatch")
            leaf_hashes = []
            for rid in block.record_ids:
                rec = chain.records.get(rid)
                if rec is None:
                    return AuditResult(
                        False, shard_id, block.height, f"missing record {rid}"
                    )
                if rid in covered_records:
                    return AuditResult(
                        False, shard_id, block.height, f"record {rid} in two blocks"
                    )
                covered_records.add(rid)
                leaf_hashes.append(record_hash(rec))
            if merkle_root(leaf_hashes) != block.merkle_root:
                return AuditResult(False, shard_id, block.height, "merkle root mismatch")
            prev = shard_header_hash(block)
            prev_height = block.height
            header_hashes[(shard_id, block.height)] = prev

    uncovered = set(chain.records) - covered_records
    if uncovered:
        rid = sorted(uncovered)[0]
        return AuditResult(False, None, None, f"record {rid} not in any block")

    referenced: set[tuple[int, int]] = set()
    prev = GENESIS_HASH
    prev_height = -1
    for root in chain.roots:
        if root.height <= prev_height:
            return AuditResult(
                False, None, root.height, "root height not strictly increasing"
            )
        if root.prev_hash != prev:
            return AuditResult(False, None, root.height, "root prev_hash mismatch")
        for shard_id, height, header in root.shard_headers:
            key = (shard_id, height)
            if key in referenced:
                return AuditResult(
                    False, shard_id, root.height, "shard header confirmed twice"
                )
            referenced.add(key)
            actual = header_hashes.get(key)
            if actual is None:
                return AuditResult(
                    False, shard_id, root.height,
                    f"root references missing shard block at height {height}",
                )
            if actual != header:
                return AuditResult(
                    False, shard_id, root.height, "shard header hash mismatch"
                )
        prev = root_header_hash(root)
        prev_height = root.height

    if chain.topology is Topology.TWO_LAYER:
        unconfirmed = set(header_hashes) - referenced
        if unconfirmed:
            shard_id, height = sorted(unconfirmed)[0]
            return AuditResult(False, shard_id, height, "shard block never confirmed")
    return AuditResult(True)


# ---------------------------------------------------------------------------
# export / parse


def export_chain(chain: ChainState) -> str:
    """Line-delimited export, one object per line, canonical field order.
    Bit-exact across runs with the same seed."""
    lines = [
        json.dumps(
            {"kind": "meta", "topology": chain.topology.value, "n_shards": chain.n_shards},
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for rid in sorted(chain.records):
        rec = chain.records[rid]
        lines.append(
            json.dumps(
                {
                    "kind": "record",
                    "record_id": rec.record_id,
                    "lot_id": rec.lot_id,
                    "role": rec.participant_role.value,
                    "record_kind": rec.record_kind.value,
                    "location": rec.location_index,
                    "payload": rec.payload,
                    "submitted_at": rec.submitted_at,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    for shard_id in sorted(chain.shards):
        for block in chain.shards[shard_id]:
            lines.append(
                json.dumps(
                    {
                        "kind": "shard_block",
                        "shard_id": block.shard_id,
                        "height": block.height,
                        "prev_hash": block.prev_hash,
                        "merkle_root": block.merkle_root,
                        "validator": block.validator_signature,
                        "created_at": block.created_at,
                        "records": block.record_ids,
                        "nonce": block.nonce,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
    for root in chain.roots:
        lines.append(
            json.dumps(
                {
                    "kind": "root_block",
                    "height": root.height,
                    "prev_hash": root.prev_hash,
                    "headers": [list(h) for h in root.shard_headers],
                    "regulator": root.regulator_id,
                    "created_at": root.created_at,
                    "nonce": root.nonce,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def parse_chain(text: str) -> ChainState:
    chain: ChainState | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ChainParseError(f"line {lineno}: {exc}") from exc
        kind = obj.get("kind")
        if kind == "meta":
            chain = ChainState(
                topology=Topology(obj["topology"]), n_shards=int(obj["n_shards"])
            )
        elif chain is None:
            raise ChainParseError(f"line {lineno}: content before meta line")
        elif kind == "record":
            rec = DataRecord(
                record_id=obj["record_id"],
                lot_id=obj["lot_id"],
                participant_role=ParticipantRole(obj["role"]),
                record_kind=RecordKind(obj["record_kind"]),
                location_index=int(obj["location"]),
                payload=obj["payload"],
                submitted_at=float(obj["submitted_at"]),
            )
            chain.records[rec.record_id] = rec
        elif kind == "shard_block":
            chain.shard_blocks(int(obj["shard_id"])).append(
                ShardBlock(
                    shard_id=int(obj["shard_id"]),
                    height=int(obj["height"]),
                    prev_hash=obj["prev_hash"],
                    merkle_root=obj["merkle_root"],
                    validator_signature=obj["validator"],
                    created_at=float(obj["created_at"]),
                    record_ids=list(obj["records"]),
                    nonce=int(obj["nonce"]),
                )
            )
        elif kind == "root_block":
            chain.roots.append(
                RootBlock(
                    height=int(obj["height"]),
                    prev_hash=obj["prev_hash"],
                    shard_headers=[tuple(h) for h in obj["headers"]],
                    regulator_id=obj["regulator"],
                    created_at=float(obj["created_at"]),
                    nonce=int(obj["nonce"]),
                )
            )
        else:
            raise ChainParseError(f"line {lineno}: unknown kind {kind!r}")
    if chain is None:
        # an empty export is a vacuously intact chain
        chain = ChainState(topology=Topology.NONE, n_shards=0)
    return chain


# ---------------------------------------------------------------------------
# simulated verification network


@dataclass
class RecordTicket:
    """In-flight tracking for one submitted record."""

    record: DataRecord
    on_resolved: Callable[[bool], None] | None
    verification_time: float | None = None
    confirmation_time: float | None = None
    shard: int | None = None
    height: int | None = None
    verify_end: float | None = None
    block: ShardBlock | None = None


class LedgerSystem:
    """Verification and confirmation queues wired into an event calendar.

    `submit` routes a record per the configured topology and calls
    `on_resolved(accepted)` once the record is usable: immediately with the
    ledger disabled, at verification for the single chain, at root
    confirmation for the two-layer chain.  Rejected (falsified) records
    resolve with accepted=False and never enter a block.
    """

    def __init__(
        self,
        calendar: EventCalendar,
        cfg: ChainConfig,
        stream: RngStream,
        keep_chain: bool = False,
    ) -> None:
        self.calendar = calendar
        self.cfg = cfg
        self.keep_chain = keep_chain
        self.chain = ChainState(topology=cfg.topology, n_shards=cfg.n_shards)
        self.latencies: list[tuple[str, str, float, float | None]] = []
        self._miss_stream = stream.child("miss")
        self._heights: dict[int, int] = {}
        self._prev_hash: dict[int, str] = {}
        self._root_height = 0
        self._root_prev = GENESIS_HASH
        # root-chain-first consensus commits each shard's headers in height
        # order; reviews that finish early park here until their turn
        self._next_commit: dict[int, int] = {}
        self._parked: dict[int, dict[int, RecordTicket]] = {}

        if cfg.topology is Topology.TWO_LAYER:
            self.shard_pools = [
                ResourcePool(calendar, f"shard-{s}-verify", cfg.n_validators_per_shard)
                for s in range(cfg.n_shards)
            ]
            self.shard_streams = [stream.child("shard", s) for s in range(cfg.n_shards)]
            self.root_pool = ResourcePool(calendar, "root-confirm", cfg.n_regulators)
            self.root_stream = stream.child("root")
        elif cfg.topology is Topology.SINGLE_CHAIN:
            self.shard_pools = [
                ResourcePool(calendar, "chain-verify", cfg.n_regulators)
            ]
            self.shard_streams = [stream.child("shard", 0)]
            self.root_pool = None
            self.root_stream = None
        else:
            self.shard_pools = []
            self.root_pool = None

    # -- submission --------------------------------------------------------

    def submit(
        self, record: DataRecord, on_resolved: Callable[[bool], None] | None = None
    ) -> RecordTicket:
        record.validate()
        ticket = RecordTicket(record, on_resolved)
        if self.cfg.topology is Topology.NONE:
            # no ledger: face-value acceptance, zero delay, no detection
            ticket.verification_time = 0.0
            self._record_latency(ticket)
            if on_resolved is not None:
                on_resolved(True)
            return ticket
        shard = (
            assign_shard(record.location_index, self.cfg.n_shards)
            if self.cfg.topology is Topology.TWO_LAYER
            else 0
        )
        pool = self.shard_pools[shard]
        pool.request(record.record_id, lambda: self._start_verification(ticket, shard))
        return ticket

    def _service_mean(self) -> float:
        if self.cfg.topology is Topology.TWO_LAYER:
            return self.cfg.verification_mean_days
        return self.cfg.single_chain_mean_days

    def _start_verification(self, ticket: RecordTicket, shard: int) -> None:
        service = self.shard_streams[shard].exponential(self._service_mean())
        self.calendar.schedule_in(
            service, lambda: self._finish_verification(ticket, shard)
        )

    def _finish_verification(self, ticket: RecordTicket, shard: int) -> None:
        pool = self.shard_pools[shard]
        now = self.calendar.now
        ticket.verification_time = now - ticket.record.submitted_at
        rejected = ticket.record.tampered and not (
            self.cfg.miss_probability > 0.0
            and self._miss_stream.bernoulli(self.cfg.miss_probability)
        )
        if rejected:
            # on-site validation caught the falsified values; no block
            self._record_latency(ticket)
            pool.release()
            if ticket.on_resolved is not None:
                ticket.on_resolved(False)
            return
        self._append_shard_block(ticket, shard, now)
        pool.release()
        if self.cfg.topology is Topology.SINGLE_CHAIN:
            self._record_latency(ticket)
            if ticket.on_resolved is not None:
                ticket.on_resolved(True)
            return
        ticket.verify_end = now
        self.root_pool.request(
            ticket.record.record_id, lambda: self._start_confirmation(ticket)
        )

    def _append_shard_block(self, ticket: RecordTicket, shard: int, now: float) -> None:
        height = self._heights.get(shard, 0)
        self._heights[shard] = height + 1
        ticket.shard = shard
        ticket.height = height
        if not self.keep_chain:
            return
        block = ShardBlock(
            shard_id=shard,
            height=height,
            prev_hash=self._prev_hash.get(shard, GENESIS_HASH),
            merkle_root=merkle_root([record_hash(ticket.record)]),
            validator_signature=f"authority-s{shard}",
            created_at=now,
            record_ids=[ticket.record.record_id],
        )
        self._prev_hash[shard] = shard_header_hash(block)
        self.chain.records[ticket.record.record_id] = ticket.record
        self.chain.shard_blocks(shard).append(block)
        ticket.block = block

    def _start_confirmation(self, ticket: RecordTicket) -> None:
        service = self.root_stream.exponential(self.cfg.confirmation_mean_days)
        self.calendar.schedule_in(service, lambda: self._finish_confirmation(ticket))

    def _finish_confirmation(self, ticket: RecordTicket) -> None:
        # the regulator's review is done; the header commits in shard height
        # order, so an early finisher parks until its predecessors commit
        self.root_pool.release()
        shard = ticket.shard
        self._parked.setdefault(shard, {})[ticket.height] = ticket
        parked = self._parked[shard]
        while self._next_commit.get(shard, 0) in parked:
            ready = parked.pop(self._next_commit.get(shard, 0))
            self._next_commit[shard] = ready.height + 1
            self._commit_root(ready)

    def _commit_root(self, ticket: RecordTicket) -> None:
        now = self.calendar.now
        ticket.confirmation_time = now - ticket.verify_end
        if self.keep_chain and ticket.block is not None:
            block = ticket.block
            root = RootBlock(
                height=self._root_height,
                prev_hash=self._root_prev,
                shard_headers=[
                    (block.shard_id, block.height, shard_header_hash(block))
                ],
                regulator_id="regulator-root",
                created_at=now,
            )
            self._root_height += 1
            self._root_prev = root_header_hash(root)
            self.chain.roots.append(root)
        self._record_latency(ticket)
        if ticket.on_resolved is not None:
            ticket.on_resolved(True)

    def _record_latency(self, ticket: RecordTicket) -> None:
        self.latencies.append(
            (
                ticket.record.lot_id,
                ticket.record.record_kind.value,
                ticket.verification_time,
                ticket.confirmation_time,
            )
        )

    # -- exported view -----------------------------------------------------

    def confirmed_chain(self) -> ChainState:
        """Snapshot restricted to blocks already confirmed (root-covered for
        the two-layer topology); in-flight work is excluded so the snapshot
        always audits clean."""
        if self.cfg.topology is not Topology.TWO_LAYER:
            return self.chain
        covered = {
            (sid, h) for root in self.chain.roots for sid, h, _ in root.shard_headers
        }
        snap = ChainState(topology=self.cfg.topology, n_shards=self.cfg.n_shards)
        snap.roots = list(self.chain.roots)
        for shard_id, blocks in self.chain.shards.items():
            kept = [b for b in blocks if (shard_id, b.height) in covered]
            snap.shards[shard_id] = kept
            for b in kept:
                for rid in b.record_ids:
                    snap.records[rid] = self.chain.records[rid]
        return snap
