"""Replicated experiments, aggregation into comparison tables, and writers.

Tables follow one shape: metric rows, one (mean, sd) column pair per variant,
where the plus-minus values are across-replication sample standard
deviations.  CSV and JSON renderings carry the same content; with a fixed
seed the bytes are reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, Topology, validate_config
from .domain import ReplicationStats
from .riskmodel import RiskDecomposition
from .simulation import run_replication

__all__ = [
    "ExperimentSpec",
    "ComparisonTable",
    "run_replications",
    "aggregate_metrics",
    "build_table",
    "run_experiment",
    "security_variants",
    "scalability_variants",
    "resource_variants",
    "shapley_table",
    "write_lot_dump",
    "SD_FOOTNOTE",
]

SD_FOOTNOTE = "plus-minus values are across-replication sample standard deviations"


@dataclass
class ExperimentSpec:
    """A named comparison: variant labels paired with full configurations."""

    name: str
    variants: list  # [(label, ScenarioConfig), ...]
    out_dir: Path
    formats: tuple = ("csv",)
    metrics: tuple = ()

    def __post_init__(self) -> None:
        labels = [label for label, _ in self.variants]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate variant labels: {labels}")
        if not self.variants:
            raise ValueError("need at least one variant")


def _run_one(args) -> ReplicationStats:
    cfg, index = args
    return run_replication(cfg, index)


def run_replications(
    cfg: ScenarioConfig, replications: int | None = None, parallel: int = 1
) -> list[ReplicationStats]:
    validate_config(cfg)
    n = cfg.run.replications if replications is None else replications
    jobs = [(cfg, j) for j in range(n)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


# metric name -> extractor over ReplicationStats
_METRIC_FNS = {
    "false_pass_preharvest_pct": lambda r: 100.0 * r.rate(r.false_pass_preharvest),
    "false_pass_harvest_pct": lambda r: 100.0 * r.rate(r.false_pass_harvest),
    "fake_qualified_pct": lambda r: 100.0 * r.rate(r.fake_qualified),
    "mean_verification_time": lambda r: r.verification_mean,
    "sd_verification_time": lambda r: r.verification_sd,
    "mean_confirmation_time": lambda r: r.confirmation_mean,
    "finished_count": lambda r: float(r.finished_count),
    "dry_drop_count": lambda r: float(r.dry_drop_count),
    "seedling_drop_count": lambda r: float(r.seedling_drop_count),
    "destroyed_preharvest_count": lambda r: float(r.destroyed_preharvest_count),
    "destroyed_final_count": lambda r: float(r.destroyed_final_count),
}

SECURITY_METRICS = (
    "false_pass_preharvest_pct",
    "false_pass_harvest_pct",
    "fake_qualified_pct",
)
SCALABILITY_METRICS = (
    "mean_verification_time",
    "sd_verification_time",
    "finished_count",
    "dry_drop_count",
)
RESOURCE_METRICS = ("finished_count", "dry_drop_count")
ALL_METRICS = tuple(_METRIC_FNS)


def aggregate_metrics(
    reps: list[ReplicationStats], metrics: tuple
) -> dict[str, tuple[float, float]]:
    out = {}
    for name in metrics:
        fn = _METRIC_FNS[name]
        values = [fn(r) for r in reps]
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        out[name] = (float(np.mean(values)), sd)
    return out


@dataclass
class ComparisonTable:
    title: str
    metrics: tuple
    variants: list  # labels in column order
    cells: dict  # (metric, variant) -> (mean, sd)
    replications: int
    footnote: str = SD_FOOTNOTE

    def to_csv(self) -> str:
        header = ["metric"]
        for label in self.variants:
            header += [f"{label}_mean", f"{label}_sd"]
        lines = [",".join(header)]
        for metric in self.metrics:
            row = [metric]
            for label in self.variants:
                mean, sd = self.cells[(metric, label)]
                row += [repr(mean), repr(sd)]
            lines.append(",".join(row))
        lines.append(f"# replications={self.replications}; {self.footnote}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "title": self.title,
            "replications": self.replications,
            "footnote": self.footnote,
            "variants": list(self.variants),
            "metrics": {
                metric: {
                    label: {
                        "mean": self.cells[(metric, label)][0],
                        "sd": self.cells[(metric, label)][1],
                    }
                    for label in self.variants
                }
                for metric in self.metrics
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def mean(self, metric: str, variant: str) -> float:
        return self.cells[(metric, variant)][0]


def build_table(
    title: str,
    metrics: tuple,
    variant_reps: list,  # [(label, [ReplicationStats, ...]), ...]
) -> ComparisonTable:
    cells = {}
    replications = 0
    for label, reps in variant_reps:
        replications = len(reps)
        agg = aggregate_metrics(reps, metrics)
        for metric, pair in agg.items():
            cells[(metric, label)] = pair
    return ComparisonTable(
        title=title,
        metrics=metrics,
        variants=[label for label, _ in variant_reps],
        cells=cells,
        replications=replications,
    )


def write_lot_dump(path: Path, variant_reps: list) -> None:
    """Per-lot raw rows for every measured lot of every replication."""
    lines = [
        "variant,replication,lot_id,season,outcome,drop_reason,final_cbd,"
        "final_thc,cycle_days,t_prime,false_pass_preharvest,false_pass_harvest,"
        "fake_qualified"
    ]
    for label, reps in variant_reps:
        for stats in reps:
            for lot in stats.lot_outputs:
                lines.append(
                    ",".join(
                        [
                            label,
                            str(stats.replication_index),
                            lot.lot_id,
                            str(lot.season_index),
                            lot.outcome,
                            lot.drop_reason or "",
                            "" if lot.final_cbd is None else repr(lot.final_cbd),
                            "" if lot.final_thc is None else repr(lot.final_thc),
                            "" if lot.cycle_days is None else repr(lot.cycle_days),
                            "" if lot.t_prime is None else repr(lot.t_prime),
                            str(int(lot.false_pass_preharvest)),
                            str(int(lot.false_pass_harvest)),
                            str(int(lot.fake_qualified)),
                        ]
                    )
                )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(
    spec: ExperimentSpec,
    replications: int | None = None,
    parallel: int = 1,
) -> tuple[ComparisonTable, dict]:
    """Run every variant, write one comparison table plus the per-lot dump;
    returns the table and the output paths."""
    for _, cfg in spec.variants:
        validate_config(cfg)
    metrics = spec.metrics or ALL_METRICS
    variant_reps = [
        (label, run_replications(cfg, replications, parallel))
        for label, cfg in spec.variants
    ]
    table = build_table(spec.name, metrics, variant_reps)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    if "csv" in spec.formats:
        p = spec.out_dir / f"{spec.name}.csv"
        p.write_text(table.to_csv(), encoding="utf-8")
        paths["csv"] = p
    if "json" in spec.formats:
        p = spec.out_dir / f"{spec.name}.json"
        p.write_text(table.to_json(), encoding="utf-8")
        paths["json"] = p
    dump = spec.out_dir / f"{spec.name}_lots.csv"
    write_lot_dump(dump, variant_reps)
    paths["lots"] = dump
    return table, paths


# ---------------------------------------------------------------------------
# scenario builders


def _with_topology(cfg: ScenarioConfig, topology: Topology) -> ScenarioConfig:
    return dataclasses.replace(
        cfg, chain=dataclasses.replace(cfg.chain, topology=topology)
    )


def security_variants(base: ScenarioConfig) -> list:
    """Ledger on (two-layer) versus ledger off."""
    return [
        ("with_ledger", _with_topology(base, Topology.TWO_LAYER)),
        ("without_ledger", _with_topology(base, Topology.NONE)),
    ]


def scalability_variants(base: ScenarioConfig) -> list:
    """Two-layer sharded chain versus the single-chain baseline."""
    return [
        ("two_layer", _with_topology(base, Topology.TWO_LAYER)),
        ("single_chain", _with_topology(base, Topology.SINGLE_CHAIN)),
    ]


def resource_variants(base: ScenarioConfig) -> list:
    """Fixed dryer count versus demand-sized dryers (needs the shared
    schedule visibility the ledger provides)."""
    return [
        ("fixed_dryers", dataclasses.replace(base, dynamic_dryers=False)),
        ("dynamic_dryers", dataclasses.replace(base, dynamic_dryers=True)),
    ]


SCENARIOS = {
    "security": (security_variants, SECURITY_METRICS),
    "scalability": (scalability_variants, SCALABILITY_METRICS),
    "resource": (resource_variants, RESOURCE_METRICS),
}


# ---------------------------------------------------------------------------
# risk decomposition table


def shapley_table(decomp: RiskDecomposition, formats: tuple, out_dir: Path) -> dict:
    """Write the relative-contribution table (one row per input) plus the
    decomposition-identity residual in the footer."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    name = f"risk_{decomp.target}"
    if "csv" in formats:
        lines = ["input,rc_mean,rc_stderr"]
        for label, mean, err in zip(decomp.labels, decomp.rc_mean, decomp.rc_stderr):
            lines.append(f"{label},{mean!r},{err!r}")
        lines.append(
            f"# estimator={decomp.estimator_kind}; macro_replications="
            f"{decomp.macro_replications}; abs_rc_sum_residual={decomp.residual!r}"
        )
        p = out_dir / f"{name}.csv"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths["csv"] = p
    if "json" in formats:
        payload = {
            "target": decomp.target,
            "estimator": decomp.estimator_kind,
            "macro_replications": decomp.macro_replications,
            "variance_mean": decomp.variance_mean,
            "abs_rc_sum_residual": decomp.residual,
            "inputs": [
                {"name": label, "rc_mean": float(mean), "rc_stderr": float(err)}
                for label, mean, err in zip(
                    decomp.labels, decomp.rc_mean, decomp.rc_stderr
                )
            ],
        }
        p = out_dir / f"{name}.json"
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                     encoding="utf-8")
        paths["json"] = p
    return paths
