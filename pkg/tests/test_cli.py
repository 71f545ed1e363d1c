import csv
import io

import pytest

from qcka.cli import SWEEP_HEADER, SweepSpec, UsageError, main, rows_to_csv, run_finite_sweep, run_rate_sweep
from qcka.params import reference_params


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_rate_sweep_header_and_rows(capsys):
    assert main(["rate", "--n", "3,4", "--min", "0", "--max", "20", "--step", "10", "--lambda", "0.01"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == ",".join(SWEEP_HEADER)
    rows = read_rows(out)
    assert [(r["n"], float(r["L_km"])) for r in rows] == [("3", 0.0), ("3", 10.0), ("3", 20.0),
                                                          ("4", 0.0), ("4", 10.0), ("4", 20.0)]
    assert all(r["phi_z"] == "" and r["baseline_rate"] == "" for r in rows)


def test_compare_fills_baseline(tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--n", "3", "--min", "100", "--max", "100", "--out", str(out)]) == 0
    (row,) = read_rows(out.read_text())
    assert float(row["baseline_rate"]) < float(row["rate"])


def test_zero_step_is_invalid(capsys):
    assert main(["rate", "--step", "0"]) == 1
    assert "step" in capsys.readouterr().err
    with pytest.raises(UsageError):
        SweepSpec(reference_params(), (3,), 0.0, 10.0, 0.0)


def test_bad_usage_and_bad_config(tmp_path, capsys):
    assert main(["rate", "--no-such-flag"]) == 1
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 3\ned = 0.9\n")
    assert main(["rate", "--config", str(cfg)]) == 1
    cfg.write_text("n = 3\nwhat = 1\n")
    assert main(["rate", "--config", str(cfg)]) == 1
    assert "bad.cfg:2" in capsys.readouterr().err


def test_sweep_order_independent_of_workers():
    spec = SweepSpec(reference_params(), (3, 5), 0.0, 40.0, 20.0, mode="compare")
    assert rows_to_csv(run_rate_sweep(spec, workers=1)) == rows_to_csv(run_rate_sweep(spec, workers=2))


def test_finite_sweep_tiny_block_all_zero():
    spec = SweepSpec(reference_params(3, total_pulses=1e3), (3,), 0.0, 20.0, 10.0, mode="finite", lam=0.01)
    assert all(r.rate == 0.0 for r in run_finite_sweep(spec))


def test_finite_family_files(tmp_path):
    out = tmp_path / "fin.csv"
    argv = ["finite", "--n", "3", "--min", "50", "--max", "50", "--lambda", "0.01",
            "--pulses", "1e9,1e12", "--out", str(out)]
    assert main(argv) == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["fin_N1e09.csv", "fin_N1e12.csv"]
    low = float(read_rows((tmp_path / "fin_N1e09.csv").read_text())[0]["rate"])
    high = float(read_rows((tmp_path / "fin_N1e12.csv").read_text())[0]["rate"])
    assert high > low


def test_simulate_bit_level_check_passes(tmp_path):
    out = tmp_path / "sim.csv"
    argv = ["simulate", "--set", "n=3", "--set", "pz=0.5", "--gain", "1", "--qber", "0.05",
            "--pulses", "1e6", "--seed", "3", "--check", "--out", str(out)]
    assert main(argv) == 0
    rows = read_rows(out.read_text())
    ex = next(r for r in rows if r["quantity"] == "E_X(n)")
    assert float(ex["analytic"]) == pytest.approx(0.095)
    assert ex["passed"] == "1"


def test_simulate_mismatch_exits_2(tmp_path):
    argv = ["simulate", "--gain", "1", "--qber", "0.05", "--pulses", "1e5", "--check",
            "--inject-mismatch", "0.05", "--out", str(tmp_path / "x.csv")]
    assert main(argv) == 2


def test_simulate_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path in paths:
        assert main(["simulate", "--fidelity", "click", "--pulses", "2e5", "--seed", "42", "--out", str(path),
                     "--events-out", str(path.with_suffix(".events.csv"))]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].with_suffix(".events.csv").read_bytes() == paths[1].with_suffix(".events.csv").read_bytes()


def test_seed_must_be_u64():
    assert main(["simulate", "--seed", "-1"]) == 1


def test_verify_ghz(capsys):
    assert main(["verify-ghz", "--n", "3..5", "--check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_optimize_prints_result(capsys):
    assert main(["optimize", "--distance", "100"]) == 0
    out = capsys.readouterr().out
    assert "best_lambda=" in out and "converged=True" in out
    assert main(["optimize", "--distance", "1000", "--check"]) == 2
