import csv
import math

import pytest

from einsdrop import cli
from einsdrop.cli import main, parse_angle, read_config


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def manifest(path):
    return cli.read_manifest(path)


@pytest.mark.parametrize("text,value", [
    ("0.3", 0.3), ("pi/4", math.pi / 4), ("3pi/4", 3 * math.pi / 4),
    ("-2*pi/3", -2 * math.pi / 3), ("PI", math.pi), (".5pi", math.pi / 2),
])
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value, rel=1e-15)


def test_parse_angle_rejects_garbage():
    with pytest.raises(Exception):
        parse_angle("tau/2")


def test_int_list_ranges():
    assert cli._int_list("1-4,7") == [1, 2, 3, 4, 7]
    with pytest.raises(Exception):
        cli._int_list("a,b")


def test_fmt_round_trips():
    x = 0.1 + 0.2
    assert float(cli.fmt(x)) == x
    assert cli.fmt(True) == "true"
    assert cli.fmt(3) == "3"


def test_toy_output(capsys, tmp_path):
    rc = main(["toy", "--theta", "pi/4", "--n", "20", "--intercept", "1,3,5",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "0.000976562" in out
    rows = read_csv(tmp_path / "toy.csv")
    assert [r["n_intercepted"] for r in rows] == ["1", "3", "5"]
    pg = [float(r["pguess"]) for r in rows]
    assert pg == pytest.approx([0.8535533905932737, 0.9419417382415922, 0.9750873686097116], abs=1e-15)
    assert float(rows[0]["gamma"]) == pytest.approx(2.0 ** -10, rel=1e-14)
    m = manifest(tmp_path / "toy_manifest.txt")
    assert m["command"] == "toy" and m["output"] == "toy.csv"


def test_toy_intercept_out_of_range(capsys):
    assert main(["toy", "--theta", "0.5", "--n", "3", "--intercept", "4"]) == 1
    assert "intercept" in capsys.readouterr().err


def test_bound(capsys, tmp_path):
    rc = main(["bound", "--log10-gamma", "-40", "--fraction", "0.01,0.05",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "bound.csv")
    lb = [float(r["pguess_lower_bound"]) for r in rows]
    ln_inv = 40 * math.log(10)
    assert lb == pytest.approx([1 - math.exp(-0.01 * ln_inv), 1 - math.exp(-0.05 * ln_inv)], rel=1e-14)


def test_bound_edge_fractions(capsys):
    assert main(["bound", "--gamma", "0.5", "--fraction", "1.0"]) == 0
    assert "0.500000" in capsys.readouterr().out
    assert main(["bound", "--gamma", "0.5", "--fraction", "1.5"]) == 1
    assert main(["bound", "--gamma", "1.5", "--fraction", "0.5"]) == 1


@pytest.mark.parametrize("argv", [
    [], ["nope"], ["toy", "--n", "3"], ["bound", "--gamma", "0.5"],
    ["bound", "--gamma", "0.5", "--log10-gamma", "-1", "--fraction", "0.1"],
    ["toy", "--theta", "pi/x", "--n", "3"],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_tradeoff_passes_on_default_grid(capsys, tmp_path):
    rc = main(["tradeoff", "--quiet", "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "tradeoff.csv")
    assert len(rows) == 31 * 200
    assert min(float(r["slack"]) for r in rows) >= -1e-12


def test_tradeoff_violation_exits_2(monkeypatch, capsys):
    def broken(thetas, ns):
        yield (0.1, 1, 0.5, 0.4, -0.1)
    monkeypatch.setattr(cli, "tradeoff_rows", broken)
    assert main(["tradeoff", "--quiet"]) == 2


def test_verify(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "10/10 checks passed" in out
    assert "FAIL" not in out


def test_verify_failure_exits_2(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_checks", lambda seed: [("x", True, ""), ("y", False, "bad")])
    assert main(["verify"]) == 2
    assert "FAIL  y" in capsys.readouterr().out


SMALL = ["sweep", "--d", "6,8", "--instances", "2", "--k-points", "3", "--restarts", "2",
         "--max-iters", "200"]


def test_sweep_outputs(tmp_path, capsys):
    rc = main(SMALL + ["--seed", "4", "--out", str(tmp_path)])
    assert rc == 0
    rec = read_csv(tmp_path / "records.csv")
    agg = read_csv(tmp_path / "aggregates.csv")
    assert list(rec[0]) == ["D", "k", "k_over_D", "instance", "seed", "pguess", "ceiling",
                            "iterations", "converged"]
    assert list(agg[0]) == ["D", "k", "k_over_D", "mean", "std", "mean_ceiling", "n"]
    assert len(rec) == 2 * 3 * 2 and len(agg) == 2 * 3
    for r in rec:
        assert 0.5 - 1e-9 <= float(r["pguess"]) <= float(r["ceiling"]) + 1e-9
        assert r["converged"] in ("true", "false")
    m = manifest(tmp_path / "sweep_manifest.txt")
    assert m["seed"] == "4"
    assert m["config.k_grid.6"] == "2,4,6"


def test_sweep_seed_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("EINSDROP_SEED", "4")
    main(SMALL + ["--out", str(tmp_path / "env")])
    main(SMALL + ["--seed", "4", "--out", str(tmp_path / "flag")])
    assert (tmp_path / "env" / "records.csv").read_bytes() == (tmp_path / "flag" / "records.csv").read_bytes()
    monkeypatch.setenv("EINSDROP_SEED", "four")
    assert main(SMALL + ["--out", str(tmp_path / "bad")]) == 1


def test_sweep_threads_and_rerun_are_byte_identical(tmp_path, capsys):
    main(SMALL + ["--seed", "7", "--threads", "1", "--out", str(tmp_path / "a")])
    main(SMALL + ["--seed", "7", "--threads", "3", "--out", str(tmp_path / "b")])
    assert main(["rerun", str(tmp_path / "a" / "sweep_manifest.txt"),
                 "--out", str(tmp_path / "c"), "--threads", "2"]) == 0
    ref = (tmp_path / "a" / "records.csv").read_bytes()
    assert (tmp_path / "b" / "records.csv").read_bytes() == ref
    assert (tmp_path / "c" / "records.csv").read_bytes() == ref
    assert (tmp_path / "c" / "aggregates.csv").read_bytes() == (tmp_path / "a" / "aggregates.csv").read_bytes()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("# small run\nenv_dims = 6\ninstances = 2\nk_grid.6 = 2, 6\n"
                   "restarts = 1\nmax_iters = 100\nseed = 3\n")
    parsed = read_config(cfg)
    assert parsed["env_dims"] == [6] and parsed["k_grid"] == {6: [2, 6]} and parsed["seed"] == 3
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rec = read_csv(tmp_path / "o" / "records.csv")
    assert sorted({r["k"] for r in rec}) == ["2", "6"]
    assert manifest(tmp_path / "o" / "sweep_manifest.txt")["seed"] == "3"


@pytest.mark.parametrize("body", ["bogus = 1\n", "env_dims 6\n", "restarts = x\n",
                                  "env_dims = 6\nk_grid.6 = 1,7\n"])
def test_bad_config_exits_1(tmp_path, body, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_instances_count_mismatch(tmp_path, capsys):
    assert main(["sweep", "--d", "6,8", "--instances", "1,2,3", "--out", str(tmp_path)]) == 1


def test_rerun_missing_manifest(tmp_path, capsys):
    assert main(["rerun", str(tmp_path / "nope.txt")]) == 1


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "einsdrop", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "einsdrop" in r.stdout
