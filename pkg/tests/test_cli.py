import csv
import io

import pytest

from pwlnas import cli, nn
from pwlnas.bench import load

FAST = ["--set", "train.epochs=3", "--set", "train.hidden_dims=[8]"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def rows(path):
    text = path.read_text()
    lines = [ln for ln in text.splitlines(keepends=True) if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def test_gen_synth_checksum_and_reload(tmp_path, capsys):
    assert run("gen-synth", "--size", 1000, "--seed", 7, "--out", tmp_path / "a") == 0
    first = capsys.readouterr().out
    assert run("gen-synth", "--size", 1000, "--seed", 7, "--out", tmp_path / "b") == 0
    second = capsys.readouterr().out
    assert first.split()[1] == second.split()[1]  # sha256=...
    assert first.startswith("N=1000 ")
    assert len(load(tmp_path / "a" / "table.jsonl")) == 1000
    assert cli.sha256_file(tmp_path / "a" / "table.jsonl") == first.split()[1].split("=")[1]


def test_gen_synth_csv(tmp_path):
    assert run("gen-synth", "--size", 50, "--format", "csv", "--out", tmp_path) == 0
    assert len(load(tmp_path / "table.csv")) == 50


def test_argument_error_before_work(tmp_path, capsys):
    assert run("gen-synth", "--size", 0, "--out", tmp_path / "x") == cli.EXIT_INVALID
    assert not (tmp_path / "x").exists()
    assert "--size" in capsys.readouterr().err


def test_sweep_single_cell(tmp_path):
    out = tmp_path / "s"
    args = ["sweep", "--portion", 5, "--repeats", 1, "--loss", "hinge_rank", "--out", out,
            "--set", "synth.size=300", *FAST]
    assert run(*args) == 0
    table = rows(out / "sweep.csv")
    assert [r["agg"] for r in table] == ["0", "1"]
    first = (out / "sweep.csv").read_bytes()
    assert run(*args) == 0
    assert (out / "sweep.csv").read_bytes() == first


def test_unknown_loss_lists_allowed(tmp_path, capsys):
    code = run("sweep", "--loss", "hinge", "--loss", "warp:weight_type=nope",
               "--set", "train.lr=1", "--out", tmp_path / "o")
    err = capsys.readouterr().err
    assert code == cli.EXIT_INVALID
    assert "losses[0]" in err and "hinge_rank" in err and "listmle" in err
    assert "losses[1]" in err and "weight_type" in err
    assert "train.lr" in err  # every problem is listed, not just the first
    assert not (tmp_path / "o").exists()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 3\nsynth: {size: 200, seed: 1}\nlosses: [mse, listmle]\n"
                   "sweep: {portions: [10], repeats: 2, Ts: [5], Ks: [10]}\n"
                   "train: {epochs: 2, hidden_dims: [8], backbone: mlp}\n")
    assert run("sweep", "--config", cfg, "--repeats", 1, "--out", tmp_path / "o") == 0
    table = rows(tmp_path / "o" / "sweep.csv")
    assert {r["loss"] for r in table} == {"mse", "listmle"}
    assert len([r for r in table if r["agg"] == "0"]) == 2


def test_config_problems(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("table: missing.jsonl\nsynth: {size: 10}\nbogus: 1\nsweep: {repeats: 0}\n")
    assert run("sweep", "--config", cfg) == cli.EXIT_INVALID
    err = capsys.readouterr().err
    assert "bogus" in err
    cfg.write_text("table: missing.jsonl\n")
    assert run("sweep", "--config", cfg) == cli.EXIT_INVALID
    assert "file not found" in capsys.readouterr().err
    cfg.write_text("table: t.jsonl\nsynth: {size: 10}\n")
    (tmp_path / "t.jsonl").write_text("")
    assert run("sweep", "--config", cfg) == cli.EXIT_INVALID
    assert "exactly one" in capsys.readouterr().err


def test_runtime_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "t.jsonl"
    bad.write_text("{broken\n")
    assert run("sweep", "--table", bad, "--out", tmp_path / "o") == cli.EXIT_RUNTIME
    assert "ParseError" in capsys.readouterr().err


def test_search_preset_switches_loss(tmp_path):
    assert run("search", "--preset", "nb201-like", "--budget", 50, "--out", tmp_path,
               "--set", "synth.size=300", *FAST) == 0
    table = rows(tmp_path / "search.csv")
    losses = [r["loss"] for r in table if r["iter"] not in ("0", "final")]
    assert losses == ["hinge_rank"] * 5 + ["mape"]


def test_search_zero_iterations(tmp_path):
    assert run("search", "--budget", 20, "--init", 20, "--oracle", "--out", tmp_path) == 0
    table = rows(tmp_path / "search.csv")
    assert [r["iter"] for r in table] == ["0", "final"]


def test_search_compare_random(tmp_path):
    assert run("search", "--oracle", "--compare-random", "--runs", 2, "--out", tmp_path) == 0
    table = rows(tmp_path / "search.csv")
    finals = [(r["method"], r["seed"]) for r in table if r["iter"] == "final"]
    assert finals == [("pwlnas", "0"), ("random", "0"), ("pwlnas", "1"), ("random", "1")]


def test_mutation_eval_oracle(tmp_path):
    assert run("mutation-eval", "--oracle", "--repeats", 1, "--out", tmp_path) == 0
    text = (tmp_path / "mutation_eval.csv").read_text()
    assert text.startswith("# n_eval=200 ")
    raw = [r for r in rows(tmp_path / "mutation_eval.csv") if r["agg"] == "0"]
    assert raw[0]["n_at_10"] == "1"
    assert set(raw[0]) >= {"tau", "precision_5", "n_at_10"}
    again = tmp_path / "again"
    assert run("mutation-eval", "--oracle", "--repeats", 1, "--out", again) == 0
    assert (again / "mutation_eval.csv").read_bytes() == text.encode()
    assert (again / "mutation_testset.json").read_bytes() == \
        (tmp_path / "mutation_testset.json").read_bytes()


def test_gradcheck_subset(tmp_path):
    assert run("gradcheck", "--loss", "hinge_rank", "--restarts", 2, "--out", tmp_path) == 0
    table = rows(tmp_path / "gradcheck.csv")
    assert [(r["loss"], r["backbone"]) for r in table] == [("hinge_rank", "gcn"),
                                                           ("hinge_rank", "mlp")]


def test_gradcheck_wrong_gradient_fails(tmp_path, monkeypatch):
    real = nn.backward
    monkeypatch.setattr(nn, "backward", lambda *a: [(0.9 * w, b) for w, b in real(*a)])
    code = run("gradcheck", "--loss", "mse", "--backbone", "mlp", "--restarts", 1,
               "--out", tmp_path)
    assert code != 0
    assert "FAIL" in (tmp_path / "gradcheck.csv").read_text()


@pytest.mark.parametrize("entry,label", [("warp", "warp"),
                                         ("warp:weight_type=gt,margin=0.2", "warp[gt]"),
                                         ({"kind": "exp_weighted", "alpha": 5}, "exp_weighted")])
def test_parse_loss(entry, label):
    assert cli.parse_loss(entry, "x").label == label


def test_parse_schedule():
    s = cli.parse_schedule({"warm": "listmle", "main": "warp", "warm_iters": 3})
    assert s.label == "pw(listmle->warp@3)"
    assert cli.parse_schedule("nb201-like").main_loss.kind == "mape"
    with pytest.raises(ValueError, match="needs both"):
        cli.parse_schedule({"warm": "mse"})
