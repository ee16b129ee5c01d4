import json

import numpy as np
import pytest

from degalign import load_features
from degalign.cli import main


def _write_tiny_dataset(tmp_path, seed=0):
    from degalign import generate_synthetic_pair

    g1, g2, anchors = generate_synthetic_pair(60, 2.5, 0.1, anchor_overlap=0.8, seed=seed)
    (tmp_path / "e1.txt").write_text(g1.to_edge_list_text())
    (tmp_path / "e2.txt").write_text(g2.to_edge_list_text())
    anchor_text = "\n".join(f"{a} {b}" for a, b in anchors.pairs) + "\n"
    (tmp_path / "anchors.txt").write_text(anchor_text)
    config = {
        "edges1": str(tmp_path / "e1.txt"),
        "edges2": str(tmp_path / "e2.txt"),
        "anchors": str(tmp_path / "anchors.txt"),
        "dim": 8,
        "hidden": 4,
        "map_dim": 8,
        "epochs": 1,
        "tail_threshold": 2,
        "neg_per_anchor": 2,
        "split": {"ratio": 0.5},
        "node2vec": {"walk_len": 8, "walks_per_node": 2, "window": 3, "epochs": 1},
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    return config


def test_synth_writes_dataset(tmp_path, capsys):
    out = tmp_path / "data"
    code = main(
        ["synth", "--n", "40", "--exponent", "2.5", "--noise", "0.1",
         "--seed", "3", "--out-dir", str(out)]
    )
    assert code == 0
    assert (out / "edges1.txt").exists()
    assert (out / "edges2.txt").exists()
    assert (out / "anchors.txt").exists()
    assert "anchors" in capsys.readouterr().out


def test_features_command(tmp_path, capsys):
    (tmp_path / "edges.txt").write_text("0 1\n1 2\n2 3\n3 0\n0 2\n")
    out = tmp_path / "feats.txt"
    code = main(
        ["features", str(tmp_path / "edges.txt"), "--dim", "6", "--out", str(out),
         "--walk-len", "8", "--walks-per-node", "2", "--window", "2", "--epochs", "1"]
    )
    assert code == 0
    feats = load_features(out.read_text())
    assert feats.data.shape == (4, 6)


def test_train_eval_cycle(tmp_path, capsys):
    _write_tiny_dataset(tmp_path)
    ckpt = tmp_path / "model.npz"
    code = main(["train", "--config", str(tmp_path / "config.json"), "--out", str(ckpt)])
    assert code == 0
    assert ckpt.exists()
    train_out = capsys.readouterr().out
    assert '"mrr"' in train_out

    report_path = tmp_path / "report.json"
    code = main(["eval", "--ckpt", str(ckpt), "--out", str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert set(report["hits"]) == {"1", "10", "30"}
    assert 0.0 <= report["mrr"] <= 1.0
    counts = sum(row["count"] for row in report["per_degree_mrr"])
    assert counts == report["num_anchors"]


def test_eval_report_matches_train_report(tmp_path, capsys):
    _write_tiny_dataset(tmp_path)
    ckpt = tmp_path / "model.npz"
    main(["train", "--config", str(tmp_path / "config.json"), "--out", str(ckpt)])
    train_out = capsys.readouterr().out
    train_report = json.loads(train_out[train_out.index("{"):])
    code = main(["eval", "--ckpt", str(ckpt)])
    eval_out = capsys.readouterr().out
    assert code == 0
    eval_report = json.loads(eval_out)
    assert eval_report == train_report


def test_ablate_prints_table(tmp_path, capsys):
    _write_tiny_dataset(tmp_path)
    code = main(["ablate", "--config", str(tmp_path / "config.json")])
    assert code == 0
    out = capsys.readouterr().out
    for name in ("full", "no_AP", "no_NR"):
        assert name in out
    assert "MRR" in out


def test_unknown_config_key_fails_with_diagnostic(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"not_a_key": 1}')
    code = main(["train", "--config", str(tmp_path / "bad.json"), "--out", "x.npz"])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "not_a_key" in err


def test_missing_file_fails_cleanly(tmp_path, capsys):
    code = main(["features", str(tmp_path / "nope.txt"), "--out", "f.txt"])
    assert code == 1
    assert "error:" in capsys.readouterr().err
