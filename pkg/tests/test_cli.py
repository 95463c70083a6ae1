import json

from click.testing import CliRunner

from flexarea.cli import main
from flexarea.fagrid import read_csv


def run_cli(*args):
    return CliRunner().invoke(main, list(args))


def test_tcp_writes_three_artifacts(tmp_path):
    result = run_cli("tcp", "--net-name", "feeder4", "--fsp-dg", "0",
                     "--dp", "0.05", "--dq", "0.1", "--out-dir", str(tmp_path))
    assert result.exit_code == 0, result.output
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"tcp-fa.svg", "tcp-fa.csv", "tcp-report.txt"}
    assert "power_flows:" in result.output
    # the CSV is a loadable grid
    grid = read_csv(tmp_path / "tcp-fa.csv")
    assert grid.values.max() == 1.0


def test_opf_reports_attempted_solves(tmp_path):
    result = run_cli("opf", "--net-name", "feeder4", "--fsp-load", "0",
                     "--opf-step", "0.5", "--out-dir", str(tmp_path))
    assert result.exit_code == 0, result.output
    assert "attempted_solves: 12" in result.output
    assert (tmp_path / "opf-report.txt").read_text().count("attempted_solves: 12") == 1


def test_bad_distribution_exits_2(tmp_path):
    result = run_cli("monte-carlo", "--net-name", "feeder4", "--fsp-dg", "0",
                     "--distribution", "Gaussian", "--out-dir", str(tmp_path))
    assert result.exit_code == 2
    assert "Uniform" in result.output and "Hard" in result.output


def test_missing_fsp_exits_2(tmp_path):
    result = run_cli("tcp", "--net-name", "feeder4", "--out-dir", str(tmp_path))
    assert result.exit_code == 2
    assert "at least one" in result.output


def test_missing_bundle_exits_3(tmp_path):
    result = run_cli("tcp-adapt", "--net-name", "feeder4", "--fsp-dg", "0",
                     "--store-path", str(tmp_path / "none"),
                     "--out-dir", str(tmp_path))
    assert result.exit_code == 3
    assert "tcp-save" in result.output


def test_config_file_merges_and_flags_win(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "net_name": "feeder4",
        "fsp_dg_indices": [0],
        "no_samples": 10_000,  # overridden by the flag below
        "out_dir": str(tmp_path / "out"),
    }))
    result = run_cli("monte-carlo", "--config", str(cfg), "--no-samples", "25")
    assert result.exit_code == 0, result.output
    assert "power_flows: 25" in result.output


def test_unreadable_config_exits_2(tmp_path):
    result = run_cli("tcp", "--config", str(tmp_path / "nope.json"))
    assert result.exit_code == 2
    assert "config file" in result.output


def test_save_then_adapt_roundtrip(tmp_path):
    store = tmp_path / "tensors"
    saved = run_cli("tcp-save", "--net-name", "feeder4", "--fsp-load", "0",
                    "--fsp-dg", "0", "--dp", "0.1", "--dq", "0.2",
                    "--store-path", str(store), "--out-dir", str(tmp_path / "a"))
    assert saved.exit_code == 0, saved.output
    adapted = run_cli("tcp-adapt", "--net-name", "feeder4", "--fsp-load", "0",
                      "--fsp-dg", "0", "--store-path", str(store),
                      "--out-dir", str(tmp_path / "b"))
    assert adapted.exit_code == 0, adapted.output
    assert "power_flows: 1" in adapted.output
