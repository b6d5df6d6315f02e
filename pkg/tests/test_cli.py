import json
import subprocess
import sys

import pytest

from ehs.cli import main, parse_args


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestParse:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("EHS_PRECISION_BITS", raising=False)
        cfg = parse_args(["verify", "kajihara", "--n", "2", "--m", "2", "--N", "3", "--seed", "7"])
        assert cfg.command == "verify" and cfg.identity == "kajihara"
        assert cfg.dims == {"n": 2, "m": 2, "N": 3}
        assert (cfg.precision, cfg.p_mod, cfg.seed, cfg.output) == (256, 0.2, 7, "human")

    def test_env_precision(self, monkeypatch):
        monkeypatch.setenv("EHS_PRECISION_BITS", "320")
        assert parse_args(["verify", "kajihara"]).precision == 320
        assert parse_args(["verify", "kajihara", "--precision", "128"]).precision == 128

    def test_campaign_config(self):
        cfg = parse_args(["fuzz", "c3_transform", "--mvec", "1,2", "--trials", "10",
                          "--output", "json"])
        assert cfg.dims_grid == [{"mvec": (1, 2)}]
        assert (cfg.trials, cfg.output) == (10, "json")

    def test_grid_expansion(self):
        cfg = parse_args(["fuzz", "kajihara", "--n", "1,2", "--m", "3", "--N", "0,5"])
        assert len(cfg.dims_grid) == 4
        assert {"n": 2, "m": 3, "N": 5} in cfg.dims_grid
        cfg = parse_args(["fuzz", "delta_lemma", "--mvec", "1", "--mvec", "2,0,1"])
        assert [d["mvec"] for d in cfg.dims_grid] == [(1,), (2, 0, 1)]

    @pytest.mark.parametrize("argv,flag", [
        (["verify", "nonsense"], "IDENTITY"),
        (["verify", "c3_transform", "--mvec", "1,x"], "--mvec"),
        (["verify", "theta_inversion", "--n", "2"], "--n"),
        (["verify", "kajihara", "--n", "1,2"], "--n"),
        (["verify", "kajihara", "--precision", "32"], "--precision"),
        (["verify", "kajihara", "--n", "0"], "--n"),
        (["fuzz", "kajihara", "--trials", "0"], "--trials"),
        (["verify", "fc_family", "--n", "2", "--m", "3"], "--m"),
        ([], "command"),
    ])
    def test_usage_errors(self, argv, flag, capsys):
        code, _, err = run(argv, capsys)
        assert code == 2
        assert flag in err


class TestRun:
    def test_list(self, capsys):
        code, out, _ = run(["list"], capsys)
        assert code == 0 and len(out.strip().splitlines()) == 13
        code, out, _ = run(["list", "--output", "json"], capsys)
        assert len(json.loads(out)) == 13

    def test_verify_json_pass(self, capsys):
        code, out, _ = run(["verify", "an_jackson", "--n", "2", "--N", "3", "--output", "json"],
                           capsys)
        rep = json.loads(out)
        assert code == 0 and rep["status"] == "PASS"
        assert rep["dims"] == {"n": 2, "N": 3}

    def test_perturbation_hook_fails(self, capsys):
        code, out, _ = run(["verify", "kajihara", "--perturb", "1e-30", "--output", "json"],
                           capsys)
        assert code == 1 and json.loads(out)["status"] == "FAIL"

    def test_human_and_json_residuals_match(self, capsys):
        argv = ["verify", "sm_rewrite", "--n", "2", "--N", "4", "--seed", "3"]
        _, human, _ = run(argv, capsys)
        _, js, _ = run(argv + ["--output", "json"], capsys)
        line = next(ln for ln in human.splitlines() if ln.startswith("rel_residual"))
        assert line.split()[-1] == json.loads(js)["rel_residual"]

    def test_reproducible_output_is_byte_identical(self, capsys):
        argv = ["verify", "kajihara", "--seed", "9", "--output", "json", "--reproducible"]
        _, a, _ = run(argv, capsys)
        _, b, _ = run(argv, capsys)
        assert a == b and json.loads(a)["elapsed_ms"] is None

    def test_fuzz_outputs(self, capsys, tmp_path):
        path = tmp_path / "out.csv"
        code, out, _ = run(["fuzz", "delta_lemma", "--mvec", "1,1", "--mvec", "2", "--trials", "2",
                            "--output", "csv", "--out", str(path)], capsys)
        assert code == 0 and out == ""
        lines = path.read_text().splitlines()
        assert lines[0].startswith("identity,dims,seed") and len(lines) == 5
        code, out, _ = run(["fuzz", "an_jackson", "--n", "1,2", "--N", "2", "--trials", "2"],
                           capsys)
        assert code == 0 and "4 PASS, 0 FAIL" in out

    def test_fuzz_failure_exit(self, capsys):
        code, _, _ = run(["fuzz", "an_jackson", "--trials", "2", "--perturb", "1e-30"], capsys)
        assert code == 1

    def test_bench(self, capsys):
        code, out, _ = run(["bench", "kajihara", "--n", "2", "--m", "2", "--N", "2",
                            "--output", "json"], capsys)
        data = json.loads(out)
        assert code == 0 and data["runs"][0]["agree"] is True

    def test_io_failure(self, capsys, tmp_path):
        code, _, err = run(["verify", "kajihara", "--out", str(tmp_path / "missing" / "x.json")],
                           capsys)
        assert code == 3 and "cannot write" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ehs", "verify", "nonsense"],
                         capture_output=True, text=True)
    assert res.returncode == 2
    res = subprocess.run([sys.executable, "-m", "ehs", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "kajihara" in res.stdout
