import json
import os
import time

import pytest

from grnnlab.cli import main
from grnnlab.evalbench import write_synthetic_linkstream


def read(path):
    with open(path) as fh:
        return fh.read()


def smoke_synth_config(tmp_path, **extra):
    cfg = {
        "command": "synth",
        "memory_values": [1],
        "hidden_sizes": [4],
        "seeds": [0],
        "epochs": 2,
        "num_nodes": 8,
        "edges_per_epoch": 10,
        "summary_window": 2,
        "out_dir": str(tmp_path / "out"),
    }
    cfg.update(extra)
    path = tmp_path / "synth.json"
    path.write_text(json.dumps(cfg))
    return str(path), cfg


def test_synth_smoke_and_summary_schema(tmp_path):
    cfg_path, cfg = smoke_synth_config(tmp_path, mode="both")
    assert main(["synth", "--config", cfg_path]) == 0
    summary = read(os.path.join(cfg["out_dir"], "summary.csv")).splitlines()
    assert summary[0] == "M,mode,hidden,seed,final_mse,final_mse_min,final_mse_max,baseline_mse"
    assert len(summary) == 3  # one row per (M, mode, hidden, seed) cell
    for row in summary[1:]:
        fields = row.split(",")
        assert fields[0] == "1" and fields[1] in ("t_bptt", "f_bptt")
        assert float(fields[4]) > 0 and float(fields[7]) > 0
    # telemetry excludes wall-clock fields so reruns are byte-identical
    tele = read(os.path.join(cfg["out_dir"], "synth_M1_t_bptt_h4_s0.jsonl"))
    record = json.loads(tele.splitlines()[0])
    assert set(record) == {"epoch", "mean_loss", "grad_norm"}


def test_synth_rerun_is_byte_identical(tmp_path):
    cfg_path, cfg = smoke_synth_config(tmp_path, mode="t_bptt", epochs=3)
    assert main(["synth", "--config", cfg_path]) == 0
    first = {
        name: read(os.path.join(cfg["out_dir"], name))
        for name in sorted(os.listdir(cfg["out_dir"]))
    }
    assert main(["synth", "--config", cfg_path]) == 0
    second = {
        name: read(os.path.join(cfg["out_dir"], name))
        for name in sorted(os.listdir(cfg["out_dir"]))
    }
    assert first == second


def test_effective_config_roundtrip(tmp_path):
    cfg_path, cfg = smoke_synth_config(tmp_path, mode="f_bptt")
    assert main(["synth", "--config", cfg_path]) == 0
    summary1 = read(os.path.join(cfg["out_dir"], "summary.csv"))
    effective = os.path.join(cfg["out_dir"], "effective_config.json")
    out2 = str(tmp_path / "out2")
    assert main(["synth", "--config", effective, "--out", out2]) == 0
    assert read(os.path.join(out2, "summary.csv")) == summary1


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"command": "synth", "bogus_knob": 3}))
    assert main(["synth", "--config", str(path)]) == 1


def test_wrong_command_config_rejected(tmp_path):
    cfg_path, _ = smoke_synth_config(tmp_path)
    assert main(["bench", "--config", cfg_path]) == 1


def test_invalid_mode_is_config_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"command": "synth", "mode": "sideways"}))
    assert main(["synth", "--config", str(path)]) == 1


def test_env_override(tmp_path, monkeypatch):
    cfg_path, cfg = smoke_synth_config(tmp_path, mode="t_bptt")
    monkeypatch.setenv("GRNNLAB_EPOCHS", "4")
    assert main(["synth", "--config", cfg_path]) == 0
    tele = read(os.path.join(cfg["out_dir"], "synth_M1_t_bptt_h4_s0.jsonl"))
    assert len(tele.splitlines()) == 4
    effective = json.loads(read(os.path.join(cfg["out_dir"], "effective_config.json")))
    assert effective["epochs"] == 4


def test_cli_flag_overrides_env(tmp_path, monkeypatch):
    cfg_path, cfg = smoke_synth_config(tmp_path)
    monkeypatch.setenv("GRNNLAB_MODE", '"f_bptt"')
    assert main(["synth", "--config", cfg_path, "--mode", "t_bptt"]) == 0
    effective = json.loads(read(os.path.join(cfg["out_dir"], "effective_config.json")))
    assert effective["mode"] == "t_bptt"


def bench_config(tmp_path, stream_path, **extra):
    cfg = {
        "command": "bench",
        "dataset_path": stream_path,
        "dataset_name": "smoke",
        "trials": 1,
        "seeds": [0],
        "hidden_size": 4,
        "batch_size": 50,
        "max_epochs": 2,
        "patience": 2,
        "out_dir": str(tmp_path / "bench_out"),
    }
    cfg.update(extra)
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(cfg))
    return str(path), cfg


def test_bench_smoke_both_modes(tmp_path):
    stream = str(tmp_path / "stream.csv")
    write_synthetic_linkstream(stream, num_events=1000, num_users=30, num_items=12, seed=5)
    cfg_path, cfg = bench_config(tmp_path, stream, mode="both")
    assert main(["bench", "--config", cfg_path]) == 0
    table = read(os.path.join(cfg["out_dir"], "results_table.csv")).splitlines()
    assert table[0] == "dataset,row,mrr,mrr_stderr,recall_at_10,recall_at_10_stderr"
    rows = {line.split(",")[1]: line.split(",") for line in table[1:]}
    assert set(rows) == {"t_bptt", "f_bptt", "gap"}
    # gap rows are F minus T per metric
    assert float(rows["gap"][2]) == pytest.approx(
        float(rows["f_bptt"][2]) - float(rows["t_bptt"][2])
    )
    assert float(rows["gap"][4]) == pytest.approx(
        float(rows["f_bptt"][4]) - float(rows["t_bptt"][4])
    )
    trial = json.loads(read(os.path.join(cfg["out_dir"], "trial_f_bptt_s0_t0.json")))
    assert {"dataset", "mode", "seed", "trial", "mrr", "recall_at_10", "epochs"} <= set(trial)


def test_bench_missing_dataset_is_data_error(tmp_path):
    cfg_path, _ = bench_config(tmp_path, str(tmp_path / "nope.csv"))
    assert main(["bench", "--config", cfg_path]) == 2


def test_bench_malformed_dataset_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("user_id,item_id,timestamp,state_label,f\nu0,i0,0.0,0,banana\n")
    cfg_path, _ = bench_config(tmp_path, str(bad))
    assert main(["bench", "--config", cfg_path]) == 2


def test_gradcheck_default_passes_quickly():
    t0 = time.time()
    assert main(["gradcheck"]) == 0
    assert time.time() - t0 < 10.0


def test_gradcheck_minimal_config_under_ten_seconds(tmp_path, capsys):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"command": "gradcheck", "hidden_size": 2, "events": 6}))
    t0 = time.time()
    assert main(["gradcheck", "--config", str(path)]) == 0
    assert time.time() - t0 < 10.0
    out = capsys.readouterr().out
    assert "epoch_full_bptt_fd_sequential" in out


def test_gradcheck_detects_injected_fault(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"command": "gradcheck", "inject_gradient_fault": True}))
    assert main(["gradcheck", "--config", str(path)]) == 3
