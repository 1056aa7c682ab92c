import json
import math
import os

import numpy as np
import pytest

from sgsim.cli import (
    RunConfig,
    config_from_mapping,
    config_to_text,
    default_config,
    load_config,
    main,
    parse_config_text,
)
from sgsim.errors import ConfigError


def run_cli(args, tmp_path, name):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, out


def read_bytes_tree(root):
    blobs = {}
    for dirpath, _, files in os.walk(root):
        for fn in sorted(files):
            path = os.path.join(dirpath, fn)
            with open(path, "rb") as fh:
                blobs[os.path.relpath(path, root)] = fh.read()
    return blobs


# ---------------------------------------------------------------------------
# config format


def test_config_roundtrip_all_experiments():
    for experiment in (
        "classical", "evolve", "density", "meanfield",
        "oracle-compare", "backtrack", "recombine", "sandwich",
    ):
        cfg = default_config(experiment)
        text = config_to_text(cfg)
        again = config_from_mapping(parse_config_text(text))
        assert again == cfg


def test_config_roundtrip_nondefault_values():
    cfg = RunConfig(
        experiment="sandwich",
        n=123,
        seed=9,
        bins=64,
        t=7.25,
        layers=((4.0, 4.5, 30.0), (5.0, 5.5, -30.0)),
        phase_error=0.4,
        out="elsewhere",
    )
    again = config_from_mapping(parse_config_text(config_to_text(cfg)))
    assert again == cfg


def test_parse_rejects_malformed_lines():
    with pytest.raises(ConfigError):
        parse_config_text("this is not a key value pair")
    with pytest.raises(ConfigError):
        parse_config_text("= 3")


def test_parse_ignores_comments_and_blank_lines():
    kv = parse_config_text("# note\n\nrun.seed = 5  # trailing\n")
    assert kv == {"run.seed": "5"}


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_mapping({"run.experiment": "classical", "run.bogus": "1"})


def test_non_numeric_value_rejected():
    with pytest.raises(ConfigError):
        config_from_mapping(
            {"run.experiment": "classical", "apparatus.y_b": "wide"}
        )


def test_missing_experiment_rejected():
    with pytest.raises(ConfigError):
        config_from_mapping({"run.seed": "1"})


# ---------------------------------------------------------------------------
# subcommands and artifacts


def test_classical_artifacts(tmp_path, capsys):
    code, out = run_cli(["classical", "--n", "5000", "--seed", "3"], tmp_path, "c")
    assert code == 0
    assert (out / "histogram.csv").exists()
    assert (out / "histogram.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n"] == 5000 and summary["seed"] == 3
    header = (out / "histogram.csv").read_text().splitlines()[0]
    assert header == "bin_lo,bin_hi,count"
    assert "histogram.csv" in capsys.readouterr().out


def test_evolve_artifacts(tmp_path):
    code, out = run_cli(["evolve", "--t", "5.0"], tmp_path, "e")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["peak_count"] == 2
    data = np.loadtxt(out / "z_marginal.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 2 and np.all(data[:, 1] >= 0)


def test_evolve_zero_kick_single_peak(tmp_path):
    cfg_path = tmp_path / "free.cfg"
    cfg_path.write_text(
        "run.experiment = evolve\napparatus.grad_Bz = 0\n"
    )
    code, out = run_cli(
        ["evolve", "--config", str(cfg_path), "--t", "5.0"], tmp_path, "e0"
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["peak_count"] == 1


def test_density_artifacts(tmp_path):
    code, out = run_cli(["density", "--t", "3.0"], tmp_path, "d")
    assert code == 0
    rows = (out / "density_sweep.csv").read_text().splitlines()
    assert rows[0] == "z,rho_pp,rho_mm,re_rho_pm,im_rho_pm,collapse_free"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["coherence_norm"] >= 0.0


def test_oracle_compare_report(tmp_path):
    code, out = run_cli(["oracle-compare"], tmp_path, "o")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["err_plus"] < 1e-3 and report["err_minus"] < 1e-3


def test_backtrack_report(tmp_path):
    code, out = run_cli(["backtrack"], tmp_path, "b")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["y_collapse"] == pytest.approx(5.5, abs=1e-6)


def test_recombine_reports(tmp_path):
    code, out = run_cli(["recombine"], tmp_path, "r1")
    assert code == 0
    assert json.loads((out / "report.json").read_text())["fidelity"] == pytest.approx(
        1.0, abs=1e-6
    )
    code, out = run_cli(
        ["recombine", "--phase-error", str(math.pi)], tmp_path, "r2"
    )
    assert json.loads((out / "report.json").read_text())["fidelity"] == pytest.approx(
        0.0, abs=1e-6
    )
    code, out = run_cli(["recombine", "--separated"], tmp_path, "r3")
    assert json.loads((out / "report.json").read_text())["fidelity"] == pytest.approx(
        0.5, abs=1e-3
    )


def test_sandwich_layers_flag(tmp_path):
    code, out = run_cli(
        ["sandwich", "--layers", "5:6:1", "--t", "5.6"], tmp_path, "s"
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["peak_count"] == 1 and report["kappas"] == [0.1]


def test_meanfield_artifacts(tmp_path):
    code, out = run_cli(["meanfield", "--n", "20000", "--t", "3.0"], tmp_path, "m")
    assert code == 0
    hist = json.loads((out / "histogram.json").read_text())
    assert sum(hist["counts"]) == hist["n_total"]


# ---------------------------------------------------------------------------
# determinism and exit codes


def test_byte_identical_reruns(tmp_path):
    args = ["classical", "--n", "40000", "--seed", "17", "--bins", "24"]
    _, out1 = run_cli(args, tmp_path, "run1")
    _, out2 = run_cli(args, tmp_path, "run2")
    assert read_bytes_tree(out1) == read_bytes_tree(out2)


def test_meanfield_byte_identical(tmp_path):
    args = ["meanfield", "--n", "30000", "--seed", "5", "--t", "3.0"]
    _, out1 = run_cli(args, tmp_path, "m1")
    _, out2 = run_cli(args, tmp_path, "m2")
    assert read_bytes_tree(out1) == read_bytes_tree(out2)


def test_exit_code_parse_error(tmp_path, capsys):
    code = main(["classical", "--config", str(tmp_path / "missing.cfg")])
    assert code == 2
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "ConfigError"


def test_exit_code_validation_error(tmp_path, capsys):
    code = main(["classical", "--n", "0", "--out", str(tmp_path / "x")])
    assert code == 3
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "InvalidParameterError"


def test_exit_code_numeric_error(tmp_path, capsys):
    code = main(["evolve", "--t", "0.1", "--out", str(tmp_path / "y")])
    assert code == 4
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "DomainError"


def test_argparse_rejects_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["warp-drive"])
    assert exc.value.code == 2


def test_flags_override_config_file(tmp_path):
    cfg_path = tmp_path / "base.cfg"
    cfg_path.write_text("run.experiment = classical\nrun.seed = 1\nrun.n = 1000\n")
    cfg = load_config(str(cfg_path))
    assert cfg.seed == 1 and cfg.n == 1000
    code, out = run_cli(
        ["classical", "--config", str(cfg_path), "--seed", "2", "--n", "500"],
        tmp_path, "ov",
    )
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["seed"] == 2


def test_csv_floats_have_full_precision(tmp_path):
    _, out = run_cli(["classical", "--n", "1000"], tmp_path, "p")
    row = (out / "histogram.csv").read_text().splitlines()[1]
    lo = row.split(",")[0]
    assert float(lo) == -20.5  # parses back exactly
