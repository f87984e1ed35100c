import dataclasses
import json

import pytest

from hemptwin.cli import main
from hemptwin.config import RunConfig, default_config, save_config
from hemptwin.reporting import (
    ExperimentSpec,
    RESOURCE_METRICS,
    SECURITY_METRICS,
    build_table,
    run_experiment,
    run_replications,
    security_variants,
)


def tiny_cfg(seed=1234):
    return dataclasses.replace(
        default_config(),
        run=RunConfig(warmup_lots=5, run_length_lots=50, replications=2,
                      master_seed=seed),
    )


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    save_config(tiny_cfg(), path)
    return path


def test_experiment_spec_rejects_duplicate_labels():
    cfg = tiny_cfg()
    with pytest.raises(ValueError):
        ExperimentSpec("x", [("a", cfg), ("a", cfg)], out_dir=None)


def test_experiment_spec_rejects_empty_variants():
    with pytest.raises(ValueError):
        ExperimentSpec("x", [], out_dir=None)


def test_table_shape_and_formats(tmp_path):
    cfg = tiny_cfg()
    spec = ExperimentSpec(
        name="security",
        variants=security_variants(cfg),
        out_dir=tmp_path,
        formats=("csv", "json"),
        metrics=SECURITY_METRICS,
    )
    table, paths = run_experiment(spec)
    csv_text = paths["csv"].read_text()
    lines = csv_text.strip().splitlines()
    assert lines[0] == (
        "metric,with_ledger_mean,with_ledger_sd,"
        "without_ledger_mean,without_ledger_sd"
    )
    assert len(lines) == 1 + len(SECURITY_METRICS) + 1  # header + rows + footer
    assert lines[-1].startswith("#")
    payload = json.loads(paths["json"].read_text())
    assert set(payload["metrics"]) == set(SECURITY_METRICS)
    assert payload["replications"] == 2
    # the ledger suppresses falsified gate passes entirely
    assert table.mean("false_pass_preharvest_pct", "with_ledger") == 0.0
    assert table.mean("false_pass_preharvest_pct", "without_ledger") > 0.0
    lots = paths["lots"].read_text().strip().splitlines()
    assert len(lots) == 1 + 2 * 2 * 50  # header + variants * reps * lots


def test_every_cell_covers_exactly_j_replications():
    cfg = tiny_cfg()
    reps = run_replications(cfg, replications=3)
    table = build_table("t", RESOURCE_METRICS, [("only", reps)])
    assert table.replications == 3


def test_cli_simulate_and_audit_round_trip(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_file), "--out", str(out)]) == 0
    chain = out / "chain_export.txt"
    assert chain.exists()
    assert main(["audit", "--chain", str(chain)]) == 0
    assert "Ok" in capsys.readouterr().out


def test_cli_audit_detects_corruption(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_file), "--out", str(out)])
    chain = out / "chain_export.txt"
    lines = chain.read_text().splitlines()
    for i, line in enumerate(lines):
        obj = json.loads(line)
        if obj.get("kind") == "record":
            key = sorted(obj["payload"])[0]
            obj["payload"][key] = "corrupted"
            lines[i] = json.dumps(obj, sort_keys=True, separators=(",", ":"))
            break
    chain.write_text("\n".join(lines) + "\n")
    assert main(["audit", "--chain", str(chain)]) == 1
    assert "Violation" in capsys.readouterr().out


def test_cli_audit_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("garbage\n")
    assert main(["audit", "--chain", str(bad)]) == 2


def test_cli_rejects_invalid_config(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("adversary.p2 = 1.5\n")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_cli_byte_identical_reports_for_identical_seeds(tmp_path, cfg_file):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["simulate", "--config", str(cfg_file), "--out", str(out),
                     "--format", "csv,json"]) == 0
    for name in ("simulate.csv", "simulate.json", "simulate_lots.csv",
                 "chain_export.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_cli_seed_override_changes_reports(tmp_path, cfg_file):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    main(["simulate", "--config", str(cfg_file), "--out", str(out_a)])
    main(["simulate", "--config", str(cfg_file), "--out", str(out_b),
          "--seed", "999"])
    assert (out_a / "simulate.csv").read_text() != (out_b / "simulate.csv").read_text()


def test_cli_compare_resource_scenario(tmp_path, cfg_file):
    out = tmp_path / "cmp"
    assert main(["compare", "--scenario", "resource", "--config", str(cfg_file),
                 "--out", str(out), "--format", "csv"]) == 0
    text = (out / "resource.csv").read_text()
    assert "fixed_dryers_mean" in text and "dynamic_dryers_mean" in text


def test_cli_shapley_smoke(tmp_path, cfg_file):
    out = tmp_path / "risk"
    assert main([
        "shapley", "--config", str(cfg_file), "--target", "thc",
        "--estimator", "exact", "--outer-k", "4", "--inner-i", "10",
        "--macro-reps", "2", "--out", str(out), "--format", "csv,json",
    ]) == 0
    rows = (out / "risk_thc.csv").read_text().strip().splitlines()
    assert rows[0] == "input,rc_mean,rc_stderr"
    assert len(rows) == 1 + 6 + 1
    payload = json.loads((out / "risk_thc.json").read_text())
    assert len(payload["inputs"]) == 6


def test_cli_shapley_cbd_has_seven_inputs(tmp_path, cfg_file):
    out = tmp_path / "risk"
    assert main([
        "shapley", "--config", str(cfg_file), "--target", "cbd",
        "--estimator", "sampled", "--perms", "40", "--outer-k", "4",
        "--inner-i", "10", "--macro-reps", "2", "--out", str(out),
    ]) == 0
    rows = (out / "risk_cbd.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 7 + 1
    assert rows[-1].startswith("#") and "residual" in rows[-1]


def test_parallel_replications_match_serial():
    cfg = tiny_cfg()
    serial = run_replications(cfg, replications=2, parallel=1)
    parallel = run_replications(cfg, replications=2, parallel=2)
    assert serial == parallel
