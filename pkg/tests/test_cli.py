import csv
import json

from shapharmony.cli import EXIT_CONFIG, EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, build_parser, load_config, main


def test_run_writes_reports(tmp_path, capsys):
    code = main(["run", "--seed", "0", "--out", str(tmp_path), "--model", "logit"])
    assert code == EXIT_OK
    assert (tmp_path / "manifest.json").exists()
    assert "cells.csv" in capsys.readouterr().out


def test_flags_override_config(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 1, "models": ["knn"], "grid": "0.5:1.5:0.5"}))
    args = build_parser().parse_args(["run", "--config", str(tmp_path / "c.json"), "--seed", "9"])
    cfg = load_config(args)
    assert (cfg.seed, cfg.models, cfg.grid) == (9, ["knn"], "0.5:1.5:0.5")


def test_missing_seed_is_config_error(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "seed" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "c.json")]) == EXIT_CONFIG
    (tmp_path / "d.json").write_text(json.dumps({"seed": 0, "datasets": ["mnist"]}))
    assert main(["run", "--config", str(tmp_path / "d.json")]) == EXIT_CONFIG


def test_skipped_cells_exit_code(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 0, "cell_budget_s": 0}))
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == EXIT_PARTIAL
    assert "budget" in (tmp_path / "o" / "summary.txt").read_text()


def test_unwritable_output_is_fatal(tmp_path):
    (tmp_path / "f").write_text("")
    assert main(["run", "--seed", "0", "--out", str(tmp_path / "f" / "o")]) == EXIT_FATAL


def test_perturb_export(tmp_path, capsys):
    code = main(["perturb", "--seed", "0", "--out", str(tmp_path), "--model", "knn", "--grid", "0.5:1.5:0.5"])
    assert code == EXIT_OK
    path = capsys.readouterr().out.strip()
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["feature", "p=0.5", "p=1", "p=1.5", "anwa", "base_score"]
    assert len(rows) == 5


def test_attr_export(tmp_path, capsys):
    code = main(["attr", "--seed", "0", "--out", str(tmp_path), "--class-policy", "predicted_class"])
    assert code == EXIT_OK
    rows = list(csv.reader(open(capsys.readouterr().out.strip())))
    assert rows[0][-1] == "baseline" and len(rows) == 31


def test_sweep_size(tmp_path):
    code = main(["sweep-size", "--seed", "0", "--dataset", "iris", "--sizes", "60,150", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "sample_size.csv").exists()


def test_datasets_list(capsys):
    assert main(["datasets", "list"]) == EXIT_OK
    listed = capsys.readouterr().out.split()
    assert {"iris", "census", "fraud"} <= set(listed)


def test_fetch_without_pin_is_config_error(tmp_path, capsys, monkeypatch):
    import shapharmony.runner as runner

    def refuse(*a, **k):
        raise AssertionError("network must not be touched")

    monkeypatch.setattr(runner.urllib.request, "urlopen", refuse)
    assert main(["datasets", "fetch", "census", "--dest", str(tmp_path)]) == EXIT_CONFIG
    assert "allow-unpinned" in capsys.readouterr().err
