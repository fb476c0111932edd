import csv

import pytest

from moerl_plot.cli import main


@pytest.fixture
def crl_glob(make_log, crl_tasks, tmp_path):
    sims = [None, None] + [0.5] * 10
    for seed in (0, 1):
        make_log(f"demo_{seed}.csv", crl_tasks, seed, sims=sims)
    return str(tmp_path / "demo_*.csv")


def test_curves_end_to_end(crl_glob, tmp_path, capsys):
    out = tmp_path / "figs"
    assert main(["curves", "--in", crl_glob, "--out", str(out)]) == 0
    assert (out / "curves_demo.png").exists()
    assert "curves_demo.png" in capsys.readouterr().out


def test_all_kinds_and_flags(crl_glob, make_log, crl_tasks, tmp_path):
    probs = [[[0.5, 0.5]] for _ in crl_tasks]
    make_log("routed_0.csv", crl_tasks, 0, probs=probs)
    out = tmp_path / "figs"
    assert main(["dormant", "--in", crl_glob, "--out", str(out)]) == 0
    assert main(["gradsim", "--in", crl_glob, "--out", str(out),
                 "--band", "ci95"]) == 0
    assert main(["experts", "--in", str(tmp_path / "routed_*.csv"),
                 "--out", str(out), "--fmt", "svg"]) == 0
    assert (out / "gradsim_demo.png").exists()
    assert (out / "experts_routed.svg").exists()


def test_no_matching_files_fails(tmp_path, capsys):
    code = main(["curves", "--in", str(tmp_path / "nope_*.csv"),
                 "--out", str(tmp_path)])
    assert code == 1
    assert "no files match" in capsys.readouterr().err


def test_schema_mismatch_fails(tmp_path, capsys):
    bad = tmp_path / "bad_0.csv"
    with open(bad, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "reward"])
        writer.writerow([1, 2.0])
    code = main(["curves", "--in", str(bad), "--out", str(tmp_path / "f")])
    assert code == 1
    assert "schema" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    capsys.readouterr()
