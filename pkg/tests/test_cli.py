import json
from types import SimpleNamespace

import pytest

from povf import cli, vdf

CONFIG = """
node_count = 8
omega = 3
duration_epochs = 12
delay_height = 3
tx_rate_per_s = 5.0
rng_seed = 4
"""


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 10 and all(line.endswith(": PASS") for line in out)


def test_selftest_repeatable(capsys):
    cli.main(["selftest"])
    first = capsys.readouterr()
    cli.main(["selftest"])
    assert capsys.readouterr() == first


def test_selftest_names_broken_case(capsys, monkeypatch):
    real = vdf.vdf_eval

    def broken(params, x, *a, **kw):
        got = real(params, x, *a, **kw)
        return SimpleNamespace(output_y=got.output_y + 1, proof_pi=got.proof_pi)

    monkeypatch.setattr(vdf, "vdf_eval", broken)
    assert cli.main(["selftest"]) == 1
    cap = capsys.readouterr()
    assert "vdf-example-2: FAIL" in cap.out and "vdf-example-2" in cap.err


def test_vdf_eval_example(capsys):
    assert cli.main(["vdf", "eval", "--n", "101", "--l", "41", "--x", "2", "--t", "10"]) == 0
    assert capsys.readouterr().out.strip() == "y=5 pi=5"
    assert cli.main(["vdf", "eval", "--n", "0x65", "--l", "0x29", "--x", "2", "--t", "0xa"]) == 0
    assert capsys.readouterr().out.strip() == "y=5 pi=5"


def test_vdf_verify_exit_codes(capsys):
    base = ["vdf", "verify", "--n", "101", "--l", "41", "--x", "2", "--t", "10", "--y", "5"]
    assert cli.main(base + ["--pi", "5"]) == 0
    assert cli.main(base + ["--pi", "6"]) == 1


def test_vdf_eval_bits_roundtrip(capsys):
    assert cli.main(["vdf", "eval", "--bits", "64", "--x", "0x1234", "--t", "500"]) == 0
    line = capsys.readouterr().out.strip()
    y, pi = (int(p.split("=")[1], 16) for p in line.splitlines()[-1].split())
    assert cli.main(["vdf", "verify", "--bits", "64", "--x", "0x1234", "--t", "500",
                     "--y", hex(y), "--pi", hex(pi)]) == 0


@pytest.mark.parametrize("argv", [
    ["vdf", "eval", "--n", "101", "--l", "41", "--x", "0", "--t", "10"],
    ["vdf", "eval", "--n", "101", "--l", "41", "--x", "zz", "--t", "10"],
    ["vdf", "eval", "--n", "101", "--l", "41", "--x", "2"],
    ["vdf", "eval", "--n", "101", "--bits", "64", "--x", "2", "--t", "3"],
    ["vdf", "eval", "--n", "100", "--l", "41", "--x", "2", "--t", "10"],
    ["nonsense"],
    ["report"],
])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 2


def test_vdf_bench_small(capsys):
    assert cli.main(["vdf", "bench", "--bits", "64", "--t-list", "200,2000", "--repeat", "1",
                     "--backend", "python"]) == 0
    out = capsys.readouterr().out
    assert "200" in out and "2000" in out


@pytest.mark.parametrize("text,gini,std", [("0 0 0 4", 0.75, 3 ** 0.5), ("5 5 5", 0, 0)])
def test_report_counts(tmp_path, capsys, text, gini, std):
    f = tmp_path / "counts.txt"
    f.write_text(text)
    assert cli.main(["report", "--counts-file", str(f)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["gini"] == gini and data["std_dev"] == pytest.approx(std, abs=1e-11)
    assert cli.main(["report", "--counts-file", str(f), "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == f"gini,{data['gini']}"


@pytest.mark.parametrize("text", ["", "0 0", "1 -1", "a b"])
def test_report_bad_counts(tmp_path, text):
    f = tmp_path / "counts.txt"
    f.write_text(text)
    assert cli.main(["report", "--counts-file", str(f)]) == 2


def test_sim_and_report(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(CONFIG)
    monkeypatch.setenv("POVF_OUT_DIR", str(tmp_path / "runs"))
    assert cli.main(["sim", str(cfg)]) == 0
    cap = capsys.readouterr()
    out_dir = tmp_path / "runs" / "tiny-seed4"
    assert f"output: {out_dir}" in cap.out and "fork_free: True" in cap.out
    assert "seed: 4" in cap.err
    assert cli.main(["sim", str(cfg), "--out", str(tmp_path / "again")]) == 0
    capsys.readouterr()
    files = sorted(p.relative_to(out_dir) for p in out_dir.rglob("*") if p.is_file())
    assert len(files) >= 5
    for rel in files:
        assert (out_dir / rel).read_bytes() == (tmp_path / "again" / rel).read_bytes(), rel
    a = json.loads((out_dir / "summary.json").read_text())
    assert cli.main(["report", str(out_dir)]) == 0
    assert json.loads(capsys.readouterr().out) == a
    assert cli.main(["report", str(out_dir), "--format", "csv"]) == 0
    assert capsys.readouterr().out == (out_dir / "heights.csv").read_text()
    assert cli.main(["sim", str(cfg), "--seed", "5", "--out", str(tmp_path / "s5")]) == 0
    assert "seed: 5" in capsys.readouterr().err
    assert cli.main(["report", str(tmp_path / "nowhere")]) == 2


def test_sim_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("omega = 0\n")
    assert cli.main(["sim", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "omega" in capsys.readouterr().err
    assert cli.main(["sim", str(tmp_path / "missing.toml")]) == 2


def test_sim_internal_abort(tmp_path, capsys, monkeypatch):
    from povf import sim
    cfg = tmp_path / "tiny.toml"
    cfg.write_text(CONFIG)

    def boom(config, **kw):
        raise sim.SimulationAbort("forked", 10, 3)

    monkeypatch.setattr(sim, "run", boom)
    assert cli.main(["sim", str(cfg), "--out", str(tmp_path / "o")]) == 3
