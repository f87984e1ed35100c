"""End-to-end supply chain replication: seasons of lots flowing through
germination, transplant, cultivation, testing, harvest, drying, extraction,
winterization, purification, and final certification, with every hand-off
recorded on the configured ledger.

One replication is one single-threaded deterministic run: seasons of n lots
arrive 365 days apart until `run.warmup + run.length` lots have terminated;
statistics cover the post-warmup terminations only.  Replications are
independent and may execute in parallel processes.

Timing couplings that drive the headline comparisons:
  * gate records (pre-harvest result, harvest data, final certificate) block
    the next stage until the ledger resolves them, so verification and
    confirmation delays consume real schedule budget;
  * harvested biomass must start drying within the dry-wait limit measured
    from harvest completion -- ledger delay plus dryer queueing past that
    limit loses the lot;
  * the sampling-to-harvest window t' is emergent (test queue, test time,
    ledger resolution, harvest queue, harvest time) and drives both the
    15-day deadline gate and the growth accrued between sample and harvest.
"""

from __future__ import annotations

import numpy as np

from .config import ScenarioConfig, validate_config
from .domain import (
    DropReason,
    Lot,
    LotOutput,
    ReplicationStats,
    Stage,
    StageOutcome,
)
from .kernel import EventCalendar, ResourcePool
from .ledger import DataRecord, LedgerSystem, ParticipantRole, RecordKind
from .randomness import RngStream, sample_growth_noise
from . import stages

__all__ = ["SupplyChainSimulation", "run_replication"]


def _sd(values: list[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


class SupplyChainSimulation:
    """One replication of the configured scenario."""

    def __init__(
        self, cfg: ScenarioConfig, replication_index: int, keep_chain: bool = False
    ) -> None:
        validate_config(cfg)
        self.cfg = cfg
        self.rep = replication_index
        self.calendar = EventCalendar()
        self.base = RngStream(cfg.run.master_seed, ("rep", replication_index))
        self.ledger = LedgerSystem(
            self.calendar, cfg.chain, self.base.child("ledger"), keep_chain=keep_chain
        )
        cal = self.calendar
        self.field_pool = ResourcePool(cal, "field-workers", cfg.n_field_workers)
        self.lab_pool = ResourcePool(cal, "test-lab", cfg.n_lab_servers)
        self.dryer_pool = ResourcePool(cal, "dryers", cfg.n_dryers)
        self.processor_pool = ResourcePool(cal, "processors", cfg.n_processors)

        target = cfg.run.warmup_lots + cfg.run.run_length_lots
        self._target = target
        self._max_seasons = -(-target // max(cfg.n_lots_per_season, 1)) + 2
        self._terminations = 0
        self.done = False
        self.measured: list[Lot] = []
        self._record_seq = 0
        self._dry_phase = 0  # lots waiting for or busy in drying

    # ------------------------------------------------------------------ run

    def run(self) -> ReplicationStats:
        self.calendar.schedule(0.0, lambda: self._season_start(0))
        self.calendar.run(stop=lambda: self.done)
        if not self.done:
            raise RuntimeError(
                f"replication ended after {self._terminations} terminations, "
                f"needed {self._target}"
            )
        return self._collect_stats()

    # -------------------------------------------------------------- arrivals

    def _season_start(self, season: int) -> None:
        now = self.calendar.now
        if season + 1 < self._max_seasons:
            self.calendar.schedule(
                now + self.cfg.season_interval_days,
                lambda: self._season_start(season + 1),
            )
        for i in range(self.cfg.n_lots_per_season):
            lot = Lot(
                id=f"lot-{season}-{i}",
                season_index=season,
                index_in_season=i,
                arrival_time=now,
            )
            lot.life = self.base.child("lot", season, i, "life")
            lot.tamper = self.base.child("lot", season, i, "tamper")
            lot.timestamps[Stage.GERMINATION] = (now, None)
            lot.timestamps[Stage.SOIL_PREP] = (now, None)
            lot.stage_log += [Stage.GERMINATION, Stage.SOIL_PREP]
            lot.pending_parallel = 2
            self._submit(lot, RecordKind.SEED_SOURCE, ParticipantRole.BREEDER,
                         {"variety": "special-sauce", "seed_lot": lot.id})
            self._submit(lot, RecordKind.FIELD_INFO, ParticipantRole.GROWER,
                         {"field": f"field-{i}", "grower": f"grower-{i}"})
            germ = self._dur(lot, "germination")
            soil = self._dur(lot, "soil_prep")
            self.calendar.schedule_in(
                germ, lambda lot=lot: self._parallel_prep_done(lot, Stage.GERMINATION)
            )
            self.calendar.schedule_in(
                soil, lambda lot=lot: self._parallel_prep_done(lot, Stage.SOIL_PREP)
            )

    def _parallel_prep_done(self, lot: Lot, stage: Stage) -> None:
        enter, _ = lot.timestamps[stage]
        lot.timestamps[stage] = (enter, self.calendar.now)
        lot.pending_parallel -= 1
        if lot.pending_parallel == 0:
            self._ready_for_transplant(lot)

    def _ready_for_transplant(self, lot: Lot) -> None:
        req = self.field_pool.request(lot.id, lambda: self._transplant_start(lot))
        if not req.granted:
            self.calendar.schedule_in(
                self.cfg.seedling_wait_limit, lambda: self._seedling_timeout(lot, req)
            )

    def _seedling_timeout(self, lot, req) -> None:
        if req.granted or lot.terminated:
            return
        req.cancel()
        lot.outcomes.append(StageOutcome(
            lot.id, Stage.TRANSPLANT, self.cfg.seedling_wait_limit, lot.state,
            "drop",
        ))
        self._terminate(lot, Stage.DROPPED, DropReason.SEEDLING_WAIT_EXCEEDED)

    # ----------------------------------------------------- field operations

    def _transplant_start(self, lot: Lot) -> None:
        lot.enter_stage(Stage.TRANSPLANT, self.calendar.now)
        self.calendar.schedule_in(
            self._dur(lot, "transplant"), lambda: self._transplant_done(lot)
        )

    def _transplant_done(self, lot: Lot) -> None:
        self.field_pool.release()
        lot.enter_stage(Stage.CULTIVATION, self.calendar.now)
        t_c = self._dur(lot, "cultivation")
        lot.cultivation_days = t_c
        self.calendar.schedule_in(t_c, lambda: self._cultivation_done(lot))

    def _cultivation_done(self, lot: Lot) -> None:
        cfg = self.cfg
        eps = sample_growth_noise(
            cfg.growth_rate, lot.cultivation_days, cfg.lambda_var, lot.life
        )
        lot.inputs.eps = eps
        state = stages.cultivation_growth(
            cfg.growth_rate, lot.cultivation_days, cfg.cbd_thc_ratio, eps
        )
        lot.record_state(Stage.CULTIVATION, state)
        self._submit(lot, RecordKind.CULTIVATION_DATA, ParticipantRole.GROWER,
                     {"cultivation_days": lot.cultivation_days})
        self._submit(lot, RecordKind.PREHARVEST_REQUEST, ParticipantRole.GROWER,
                     {"requested_at": self.calendar.now})
        self._enter_test_queue(lot)

    # ------------------------------------------------------ pre-harvest test

    def _enter_test_queue(self, lot: Lot) -> None:
        lot.enter_stage(Stage.PREHARVEST_TEST, self.calendar.now)
        lot.sample_time = self.calendar.now
        self.lab_pool.request(lot.id, lambda: self._test_start(lot))

    def _test_start(self, lot: Lot) -> None:
        lot.pending_duration = self._dur(lot, "preharvest_test")
        self.calendar.schedule_in(lot.pending_duration,
                                  lambda: self._test_done(lot))

    def _test_done(self, lot: Lot) -> None:
        self.lab_pool.release()
        self._close_stage(lot, Stage.PREHARVEST_TEST)
        cfg = self.cfg
        would_fail = lot.state.thc_pct > cfg.thc_preharvest_limit
        tampered = would_fail and lot.tamper.bernoulli(cfg.tamper_probability)
        result = stages.preharvest_gate(lot.state, cfg.thc_preharvest_limit, tampered)
        lot.outcomes.append(StageOutcome(
            lot.id, Stage.PREHARVEST_TEST, lot.pending_duration, lot.state,
            "destroy" if result.decision is stages.GateDecision.DESTROY
            else "proceed",
        ))
        self._submit(
            lot, RecordKind.PREHARVEST_RESULT, ParticipantRole.LAB,
            {"cbd": lot.state.cbd_pct, "thc": result.reported_thc,
             "sampled_at": lot.sample_time},
            true_values={"cbd": lot.state.cbd_pct, "thc": result.true_thc},
            tampered=result.tampered,
            on_resolved=None if result.decision is stages.GateDecision.DESTROY
            else (lambda ok, lot=lot: self._preharvest_resolved(lot, ok)),
        )
        if result.decision is stages.GateDecision.DESTROY:
            self._terminate(lot, Stage.DESTROYED, DropReason.PREHARVEST_FAIL)

    def _preharvest_resolved(self, lot: Lot, accepted: bool) -> None:
        if lot.terminated:
            return
        if not accepted:
            # on-site validation exposed the falsified result; the true values
            # re-trigger the destruction the falsifier tried to dodge
            lot.outcomes.append(StageOutcome(
                lot.id, Stage.PREHARVEST_TEST, lot.pending_duration, lot.state,
                "destroy",
            ))
            self._terminate(lot, Stage.DESTROYED, DropReason.PREHARVEST_FAIL)
            return
        if lot.state.thc_pct > self.cfg.thc_preharvest_limit:
            lot.false_pass_preharvest = True
        delay = self.cfg.harvest_delay_days
        if delay > 0:
            self.calendar.schedule_in(delay, lambda: self._request_harvest(lot))
        else:
            self._request_harvest(lot)

    def _request_harvest(self, lot: Lot) -> None:
        if lot.terminated:
            return
        self.field_pool.request(lot.id, lambda: self._harvest_start(lot))

    def _harvest_start(self, lot: Lot) -> None:
        lot.enter_stage(Stage.HARVEST, self.calendar.now)
        lot.pending_duration = self._dur(lot, "harvest")
        self.calendar.schedule_in(lot.pending_duration,
                                  lambda: self._harvest_done(lot))

    def _harvest_done(self, lot: Lot) -> None:
        self.field_pool.release()
        cfg = self.cfg
        now = self.calendar.now
        t_prime = now - lot.sample_time
        eps_prime = sample_growth_noise(
            cfg.growth_rate, t_prime, cfg.lambda_var, lot.life
        )
        lot.inputs.t_prime = t_prime
        lot.inputs.eps_prime = eps_prime
        lot.t_prime_legs.append(t_prime)
        state = stages.harvest_increment(
            lot.state, cfg.growth_rate, t_prime, cfg.cbd_thc_ratio, eps_prime
        )
        lot.record_state(Stage.HARVEST, state)

        late = t_prime > cfg.harvest_deadline_days
        tampered = late and lot.tamper.bernoulli(cfg.tamper_probability)
        decision, reported_window, tampered = stages.harvest_deadline_gate(
            t_prime, cfg.harvest_deadline_days, tampered
        )
        lot.outcomes.append(StageOutcome(
            lot.id, Stage.HARVEST, lot.pending_duration, state,
            "retest" if decision is stages.GateDecision.RETEST else "proceed",
        ))
        if decision is stages.GateDecision.RETEST:
            self._enter_test_queue(lot)
            return
        # proceed: the biomass is wet from this moment; ledger resolution and
        # dryer queueing both burn the dry-wait budget
        lot.harvest_end = now
        lot.dry_episode = getattr(lot, "dry_episode", 0) + 1
        lot.dry_active = True
        lot.dryer_request = None
        self._dry_phase += 1
        if cfg.dynamic_dryers:
            # stabilizers see the shared schedule and size dryers to demand
            self.dryer_pool.resize(max(cfg.n_dryers, self._dry_phase))
        self._submit(
            lot, RecordKind.HARVEST_DATA, ParticipantRole.GROWER,
            {"harvest_window_days": reported_window, "completed_at": now},
            true_values={"harvest_window_days": t_prime},
            tampered=tampered,
            on_resolved=lambda ok, lot=lot: self._harvest_record_resolved(lot, ok),
        )
        self.calendar.schedule(
            now + cfg.dry_wait_limit,
            lambda token=lot.dry_episode: self._dry_timeout(lot, token),
        )

    def _harvest_record_resolved(self, lot: Lot, accepted: bool) -> None:
        if lot.terminated or not lot.dry_active:
            return
        if not accepted:
            # regulator uncovered the falsified completion date: back to testing
            lot.dry_active = False
            self._dry_phase -= 1
            lot.outcomes.append(StageOutcome(
                lot.id, Stage.HARVEST, lot.pending_duration, lot.state, "retest"
            ))
            self._enter_test_queue(lot)
            return
        if lot.inputs.t_prime > self.cfg.harvest_deadline_days:
            lot.false_pass_harvest = True
        lot.enter_stage(Stage.DRY_WAIT, lot.harvest_end)
        lot.dryer_request = self.dryer_pool.request(
            lot.id, lambda: self._drying_start(lot)
        )

    def _dry_timeout(self, lot: Lot, token: int) -> None:
        if lot.terminated or lot.dry_episode != token or not lot.dry_active:
            return
        if lot.dryer_request is not None:
            lot.dryer_request.cancel()
        lot.dry_active = False
        self._dry_phase -= 1
        lot.outcomes.append(StageOutcome(
            lot.id, Stage.DRY_WAIT, self.cfg.dry_wait_limit, lot.state, "drop"
        ))
        if lot.stage is not Stage.DRY_WAIT:
            # record still pending resolution; the biomass spoiled regardless
            lot.enter_stage(Stage.DRY_WAIT, lot.harvest_end)
        self._terminate(lot, Stage.DROPPED, DropReason.DRY_WAIT_EXCEEDED)

    # ------------------------------------------------------- stabilization

    def _drying_start(self, lot: Lot) -> None:
        if lot.terminated or not lot.dry_active:
            self.dryer_pool.release()
            return
        lot.dry_active = False
        self._submit(lot, RecordKind.TRANSPORT_DATA, ParticipantRole.TRANSPORTER,
                     {"from": f"grower-{lot.index_in_season}", "to": "dryer",
                      "shipped_at": self.calendar.now})
        lot.enter_stage(Stage.DRYING, self.calendar.now)
        self.calendar.schedule_in(
            self._dur(lot, "drying"), lambda: self._drying_done(lot)
        )

    def _drying_done(self, lot: Lot) -> None:
        self.dryer_pool.release()
        self._dry_phase -= 1
        # drying removes moisture only; cannabinoid content is unchanged
        self._submit(lot, RecordKind.DRYING_DATA, ParticipantRole.DRYER,
                     {"drying_days": self.calendar.now - lot.timestamps[Stage.DRYING][0]})
        self._submit(lot, RecordKind.POST_STABILIZATION_TEST, ParticipantRole.DRYER,
                     {"cbd": lot.state.cbd_pct, "thc": lot.state.thc_pct})
        self._submit(lot, RecordKind.TRANSPORT_DATA, ParticipantRole.TRANSPORTER,
                     {"from": "dryer", "to": "processor",
                      "shipped_at": self.calendar.now})
        lot.enter_stage(Stage.EXTRACT_WAIT, self.calendar.now)
        self.processor_pool.request(lot.id, lambda: self._extraction_start(lot))

    # -------------------------------------------------------- manufacturing

    def _extraction_start(self, lot: Lot) -> None:
        lot.enter_stage(Stage.EXTRACTION, self.calendar.now)
        self.calendar.schedule_in(
            self._dur(lot, "extraction"), lambda: self._extraction_done(lot)
        )

    def _extraction_done(self, lot: Lot) -> None:
        self.processor_pool.release()
        self._close_stage(lot, Stage.EXTRACTION)
        q = lot.life.uniform(self.cfg.extraction_lo, self.cfg.extraction_hi)
        lot.inputs.q_extract = q
        lot.record_state(Stage.EXTRACTION, stages.extraction_step(lot.state, q))
        self._submit(lot, RecordKind.EXTRACTION_DATA, ParticipantRole.PROCESSOR,
                     {"retained_fraction": q})
        self.processor_pool.request(lot.id, lambda: self._winterization_start(lot))

    def _winterization_start(self, lot: Lot) -> None:
        lot.enter_stage(Stage.WINTERIZATION, self.calendar.now)
        self.calendar.schedule_in(
            self._dur(lot, "winterization"), lambda: self._winterization_done(lot)
        )

    def _winterization_done(self, lot: Lot) -> None:
        self.processor_pool.release()
        self._close_stage(lot, Stage.WINTERIZATION)
        w = lot.life.uniform(self.cfg.winterization_lo, self.cfg.winterization_hi)
        lot.inputs.w_winter = w
        lot.record_state(Stage.WINTERIZATION, stages.winterization_step(lot.state, w))
        self._submit(lot, RecordKind.WINTERIZATION_DATA, ParticipantRole.PROCESSOR,
                     {"retained_fraction": w})
        self.processor_pool.request(lot.id, lambda: self._plc_start(lot))

    def _plc_start(self, lot: Lot) -> None:
        lot.enter_stage(Stage.PLC, self.calendar.now)
        self.calendar.schedule_in(self._dur(lot, "plc"), lambda: self._plc_done(lot))

    def _plc_done(self, lot: Lot) -> None:
        self.processor_pool.release()
        q_u = lot.life.uniform(self.cfg.plc_cbd_lo, self.cfg.plc_cbd_hi)
        q_v = lot.life.uniform(self.cfg.plc_thc_lo, self.cfg.plc_thc_hi)
        if lot.plc_passes == 0:
            lot.inputs.q_u = q_u
            lot.inputs.q_v = q_v
        lot.plc_passes += 1
        lot.record_state(Stage.PLC, stages.plc_step(lot.state, q_u, q_v))
        self._submit(lot, RecordKind.PLC_DATA, ParticipantRole.PROCESSOR,
                     {"pass": lot.plc_passes, "cbd_retained": q_u,
                      "thc_retained": q_v})
        lot.enter_stage(Stage.FINAL_COA, self.calendar.now)
        coa = self._dur(lot, "final_coa")
        if coa > 0:
            self.calendar.schedule_in(coa, lambda: self._coa_done(lot))
        else:
            self._coa_done(lot)

    def _coa_done(self, lot: Lot) -> None:
        cfg = self.cfg
        would_fail = lot.state.thc_pct >= cfg.thc_final_limit
        exhausted = lot.plc_passes >= cfg.max_plc_passes
        tampered = (
            would_fail and exhausted and lot.tamper.bernoulli(cfg.tamper_probability)
        )
        result = stages.final_coa_gate(
            lot.state, cfg.thc_final_limit, lot.plc_passes, cfg.max_plc_passes,
            tampered,
        )
        decision_word = {
            stages.GateDecision.ACCEPT: "proceed",
            stages.GateDecision.REPEAT_PLC: "retest",
            stages.GateDecision.REJECT: "destroy",
        }[result.decision]
        lot.outcomes.append(StageOutcome(
            lot.id, Stage.FINAL_COA, self.cfg.duration("final_coa").hi,
            lot.state, decision_word,
        ))
        if result.decision is stages.GateDecision.REPEAT_PLC:
            self.processor_pool.request(lot.id, lambda: self._plc_start(lot))
            return
        if result.decision is stages.GateDecision.REJECT:
            self._terminate(lot, Stage.DESTROYED, DropReason.FINAL_COA_FAIL)
            return
        self._submit(
            lot, RecordKind.FINAL_COA, ParticipantRole.PROCESSOR,
            {"cbd": lot.state.cbd_pct, "thc": result.reported_thc},
            true_values={"thc": result.true_thc},
            tampered=result.tampered,
            on_resolved=lambda ok, lot=lot: self._coa_resolved(lot, ok),
        )

    def _coa_resolved(self, lot: Lot, accepted: bool) -> None:
        if lot.terminated:
            return
        if not accepted:
            lot.outcomes.append(StageOutcome(
                lot.id, Stage.FINAL_COA, self.cfg.duration("final_coa").hi,
                lot.state, "destroy",
            ))
            self._terminate(lot, Stage.DESTROYED, DropReason.FINAL_COA_FAIL)
            return
        if lot.state.thc_pct >= self.cfg.thc_final_limit:
            lot.fake_qualified = True
        self._terminate(lot, Stage.FINISHED, None)

    # ----------------------------------------------------------- accounting

    def _terminate(self, lot: Lot, stage: Stage, reason: DropReason | None) -> None:
        lot.enter_stage(stage, self.calendar.now)
        lot.drop_reason = reason
        lot.terminated = True
        lot.termination_time = self.calendar.now
        self._terminations += 1
        cfgrun = self.cfg.run
        if cfgrun.warmup_lots < self._terminations <= self._target:
            self.measured.append(lot)
        if self._terminations >= self._target:
            self.done = True

    def _dur(self, lot: Lot, stage_key: str) -> float:
        d = self.cfg.duration(stage_key)
        return lot.life.uniform(d.lo, d.hi)

    def _close_stage(self, lot: Lot, stage: Stage) -> None:
        # buffer waits between process steps stay unattributed to either stage
        enter, _ = lot.timestamps[stage]
        lot.timestamps[stage] = (enter, self.calendar.now)

    def _submit(
        self,
        lot: Lot,
        kind: RecordKind,
        role: ParticipantRole,
        payload: dict,
        true_values: dict | None = None,
        tampered: bool = False,
        on_resolved=None,
    ) -> DataRecord:
        self._record_seq += 1
        record = DataRecord(
            record_id=f"r{self._record_seq:06d}",
            lot_id=lot.id,
            participant_role=role,
            record_kind=kind,
            location_index=lot.index_in_season,
            payload=payload,
            submitted_at=self.calendar.now,
            true_values=true_values or {},
            tampered=tampered,
        )
        self.ledger.submit(record, on_resolved)
        return record

    def _collect_stats(self) -> ReplicationStats:
        stats = ReplicationStats(replication_index=self.rep)
        measured_ids = {lot.id for lot in self.measured}
        stats.lots_observed = len(self.measured)
        for lot in self.measured:
            if lot.stage is Stage.FINISHED:
                stats.finished_count += 1
            elif lot.drop_reason is DropReason.SEEDLING_WAIT_EXCEEDED:
                stats.seedling_drop_count += 1
            elif lot.drop_reason is DropReason.DRY_WAIT_EXCEEDED:
                stats.dry_drop_count += 1
            elif lot.drop_reason is DropReason.PREHARVEST_FAIL:
                stats.destroyed_preharvest_count += 1
            elif lot.drop_reason is DropReason.FINAL_COA_FAIL:
                stats.destroyed_final_count += 1
            stats.false_pass_preharvest += lot.false_pass_preharvest
            stats.false_pass_harvest += lot.false_pass_harvest
            stats.fake_qualified += lot.fake_qualified
            stats.t_prime_samples.extend(lot.t_prime_legs)
            finished = lot.stage is Stage.FINISHED
            stats.lot_outputs.append(
                LotOutput(
                    lot_id=lot.id,
                    season_index=lot.season_index,
                    outcome=lot.stage.value,
                    drop_reason=lot.drop_reason.value if lot.drop_reason else None,
                    final_cbd=lot.state.cbd_pct if finished else None,
                    final_thc=lot.state.thc_pct if finished else None,
                    cycle_days=(lot.termination_time - lot.arrival_time)
                    if finished
                    else None,
                    t_prime=lot.t_prime_legs[-1] if lot.t_prime_legs else None,
                    false_pass_preharvest=lot.false_pass_preharvest,
                    false_pass_harvest=lot.false_pass_harvest,
                    fake_qualified=lot.fake_qualified,
                )
            )
        verifications = [
            v for lot_id, _, v, _ in self.ledger.latencies
            if lot_id in measured_ids and v is not None
        ]
        confirmations = [
            c for lot_id, _, _, c in self.ledger.latencies
            if lot_id in measured_ids and c is not None
        ]
        if verifications:
            stats.verification_mean = float(np.mean(verifications))
            stats.verification_sd = _sd(verifications)
        if confirmations:
            stats.confirmation_mean = float(np.mean(confirmations))
            stats.confirmation_sd = _sd(confirmations)
        return stats


def run_replication(
    cfg: ScenarioConfig, replication_index: int, keep_chain: bool = False
):
    """Run one replication; returns ReplicationStats, or (stats, simulation)
    when the chain is kept for export or audit."""
    sim = SupplyChainSimulation(cfg, replication_index, keep_chain=keep_chain)
    stats = sim.run()
    if keep_chain:
        return stats, sim
    return stats
