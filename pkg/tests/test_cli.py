import json

import pytest

from tuconform.experiments.cli import main
from tuconform.experiments.reporting import load_csv
from tuconform.experiments.spambase import synthesize_spambase_like


def test_gaussian_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "runs" / "g"
    code = main(["gaussian", "--horizon", "400", "--reps", "2", "--seed", "5",
                 "--alpha", "0.2", "--delta", "0.2", "--stride", "100",
                 "--methods", "split,tuc", "--out", str(out)])
    assert code == 0
    rows = load_csv(out.with_suffix(".csv"))
    assert len(rows) == 2 * 2 * 4
    manifest = json.loads((out.parent / "g.manifest.json").read_text())
    assert manifest["config"]["seed"] == 5
    assert list(out.parent.glob("g_*.png"))
    assert "min content" in capsys.readouterr().out


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("horizon: 300\nreps: 2\nalpha: 0.2\ndelta: 0.2\n"
                   "methods: split\nstride: 100\nfigures: false\n")
    out = tmp_path / "cfg_run"
    code = main(["gaussian", "--config", str(cfg), "--reps", "3",
                 "--out", str(out)])
    assert code == 0
    rows = load_csv(out.with_suffix(".csv"))
    reps = {r.replication for r in rows}
    assert reps == {0, 1, 2}  # flag overrode the config file
    ts = {r.t for r in rows}
    assert max(ts) == 300     # config horizon respected
    assert not list(tmp_path.glob("cfg_run*.png"))


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("horizont: 300\n")
    with pytest.raises(SystemExit):
        main(["gaussian", "--config", str(cfg)])


def test_lemma_check_cli(tmp_path):
    out = tmp_path / "lemma"
    code = main(["lemma-check", "--lemma", "2", "--horizon", "2000",
                 "--reps", "50", "--alpha", "0.1", "--delta", "0.1",
                 "--seed", "2", "--out", str(out), "--no-figures"])
    assert code == 0
    manifest = json.loads((out.parent / "lemma.manifest.json").read_text())
    assert manifest["config"]["passed"] is True


def test_shift_cli_control(tmp_path):
    out = tmp_path / "shift"
    code = main(["shift", "--horizon", "1024", "--reps", "2", "--no-shift",
                 "--stride", "256", "--out", str(out), "--no-figures"])
    assert code == 0
    rows = load_csv(out.with_suffix(".csv"))
    assert {r.method for r in rows} == {"online-tuc"}
    assert all(r.epoch is not None for r in rows)


def test_spam_cli_requires_data(tmp_path):
    with pytest.raises(SystemExit):
        main(["spam", "--out", str(tmp_path / "s")])


def test_spam_cli_with_file(tmp_path):
    data = tmp_path / "spam.csv"
    synthesize_spambase_like(data, n_rows=600, seed=9)
    out = tmp_path / "spamrun"
    code = main(["spam", "--data", str(data), "--passes", "2", "--stride", "50",
                 "--methods", "split,tuc", "--out", str(out), "--no-figures"])
    assert code == 0
    rows = load_csv(out.with_suffix(".csv"))
    assert {"split", "tuc", "online-tuc", "online-tupac"} <= {r.method for r in rows}


def test_regression_cli(tmp_path):
    out = tmp_path / "reg"
    code = main(["regression", "--horizon", "900", "--reps", "1", "--dim", "4",
                 "--stride", "300", "--out", str(out), "--no-figures"])
    assert code == 0
    rows = load_csv(out.with_suffix(".csv"))
    assert {r.method for r in rows} == {"split", "cs", "tuc", "tupac"}
