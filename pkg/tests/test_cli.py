import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fgccomp.cli import SWEEP_CSV_HEADER, main
from fgccomp.data_io import load_graph, save_graph
from fgccomp.graph import with_labels


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth.fgcg"
    assert main(["synth", "--n", "400", "--d", "8", "--anomaly-frac", "0.15",
                 "--homophily", "0.8", "--seed", "1", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory, data_file):
    out_dir = tmp_path_factory.mktemp("run")
    result = out_dir / "result.json"
    ckpt = out_dir / "model.fgcc"
    code = main(["train", "--data", str(data_file), "--model", "fgc",
                 "--hidden", "16", "--epochs", "40", "--patience", "10",
                 "--seed", "5", "--out", str(result),
                 "--checkpoint-out", str(ckpt), "--quiet"])
    assert code == 0
    return result, ckpt


def test_missing_data_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--out", "x.json"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_data_file_exits_3(tmp_path, capsys):
    code = main(["train", "--data", str(tmp_path / "nope.fgcg"),
                 "--out", str(tmp_path / "r.json"), "--quiet"])
    assert code == 3


def test_train_mlp_separable_reaches_val_auc_one(data_file, tmp_path):
    out = tmp_path / "mlp.json"
    code = main(["train", "--data", str(data_file), "--model", "mlp",
                 "--hidden", "16", "--lr", "0.003", "--epochs", "150",
                 "--patience", "25", "--seed", "1", "--out", str(out), "--quiet"])
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["best_val_auc"] == 1.0
    assert payload["schema"] == "fgccomp-run-v1"


def test_train_emits_epoch_log_lines(data_file, tmp_path, capsys):
    out = tmp_path / "log.json"
    main(["train", "--data", str(data_file), "--model", "mlp", "--hidden", "8",
          "--epochs", "3", "--patience", "3", "--seed", "2", "--out", str(out)])
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("{")]
    assert len(lines) == 3
    record = json.loads(lines[0])
    assert set(record) == {"epoch", "train_loss", "val_auc", "elapsed_ms"}


def test_train_deterministic_apart_from_wall_time(data_file, tmp_path):
    payloads = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code = main(["train", "--data", str(data_file), "--model", "fgc",
                     "--hidden", "16", "--dropout-ratio", "0.3",
                     "--epochs", "15", "--patience", "15",
                     "--seed", "9", "--out", str(out), "--quiet"])
        assert code == 0
        data = json.loads(out.read_text())
        data.pop("wall_time_s")
        payloads.append(json.dumps(data, sort_keys=True))
    assert payloads[0] == payloads[1]


def test_eval_matches_train_metrics_exactly(data_file, trained, capsys):
    result_path, ckpt = trained
    payload = json.loads(result_path.read_text())
    code = main(["eval", "--checkpoint", str(ckpt), "--data", str(data_file),
                 "--split-seed", "5", "--model", "fgc", "--hidden", "16"])
    assert code == 0
    out = capsys.readouterr().out
    metrics = dict(line.split()[:2] for line in out.splitlines())
    assert float(metrics["test_auc"]) == payload["test_auc"]
    assert float(metrics["test_recall_at_k"]) == payload["test_recall_at_k"]


def test_eval_hidden_mismatch_exits_3(data_file, trained, capsys):
    _, ckpt = trained
    code = main(["eval", "--checkpoint", str(ckpt), "--data", str(data_file),
                 "--split-seed", "5", "--model", "fgc", "--hidden", "32"])
    assert code == 3
    assert "hidden" in capsys.readouterr().err


def test_eval_scores_invariant_to_label_permutation(data_file, trained,
                                                    tmp_path, capsys):
    _, ckpt = trained
    dump_a = tmp_path / "scores_a.txt"
    main(["eval", "--checkpoint", str(ckpt), "--data", str(data_file),
          "--split-seed", "5", "--model", "fgc", "--hidden", "16",
          "--dump-scores", str(dump_a)])
    out_a = capsys.readouterr().out

    g = load_graph(data_file)
    rng = np.random.default_rng(0)
    permuted = with_labels(g, rng.permutation(np.array(g.labels)))
    shuffled_file = tmp_path / "shuffled.fgcg"
    save_graph(permuted, shuffled_file)
    dump_b = tmp_path / "scores_b.txt"
    main(["eval", "--checkpoint", str(ckpt), "--data", str(shuffled_file),
          "--split-seed", "5", "--model", "fgc", "--hidden", "16",
          "--dump-scores", str(dump_b)])
    out_b = capsys.readouterr().out

    assert dump_a.read_text() == dump_b.read_text()
    assert out_a != out_b  # metrics see the new labels, scores do not


def test_sweep_single_identity_cell(data_file, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--data", str(data_file), "--ratios", "0",
                 "--models", "mlp", "--seeds", "1", "--hidden", "16",
                 "--lr", "0.003", "--epochs", "60", "--patience", "15",
                 "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert rows[0]["status"] == "ok"
    assert float(rows[0]["auc"]) > 0.9  # uncorrupted separable baseline


def test_sweep_cartesian_row_count_and_header(data_file, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--data", str(data_file), "--ratios", "10,20,30,40",
                 "--models", "mlp,sage", "--seeds", "0,1,2", "--hidden", "8",
                 "--epochs", "2", "--patience", "2", "--out", str(out)])
    assert code == 0
    with out.open() as fh:
        header = fh.readline().strip()
    assert header == ",".join(SWEEP_CSV_HEADER)
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 24
    assert {r["model"] for r in rows} == {"mlp", "sage"}


def test_sweep_failed_cell_recorded_and_continues(data_file, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--data", str(data_file), "--ratios", "150,10",
                 "--models", "mlp", "--seeds", "0", "--hidden", "8",
                 "--epochs", "2", "--patience", "2", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["status"] == "error:ValueError"
    assert rows[1]["status"] == "ok"


def test_sweep_deterministic(data_file, tmp_path):
    texts = []
    for name in ("s1.csv", "s2.csv"):
        out = tmp_path / name
        main(["sweep", "--data", str(data_file), "--ratios", "20",
              "--models", "mlp", "--seeds", "0,1", "--hidden", "8",
              "--epochs", "4", "--patience", "4", "--out", str(out)])
        rows = [r[:6] for r in csv.reader(out.open())]  # drop wall_ms
        texts.append(json.dumps(rows))
    assert texts[0] == texts[1]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fgccomp.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
