import csv
import io
import json
import math

import pytest

from zkl import experiments
from zkl.cli import main
from zkl.experiments import ConfigError, resolve_config, run, write_outputs


def read_csv(path):
    text = path.read_text()
    first, rest = text.split("\n", 1)
    assert first == "# zkl-csv v1"
    return list(csv.DictReader(io.StringIO(rest)))


def single_pair(**kw):
    raw = {"pairs": {"update_index": 0, "observed": [1]}}
    raw.update(kw)
    return raw


# -- config ---------------------------------------------------------------------

@pytest.mark.parametrize(
    "raw, path",
    [
        ({"p_sweep": []}, "config.p_sweep"),
        ({"p_sweep": [4, 0]}, "config.p_sweep[1]"),
        ({"seeds": [1, 1]}, "config.seeds"),
        ({"seeds": [-2]}, "config.seeds[0]"),
        ({"distributions": ["cauchy"]}, "config.distributions"),
        ({"model": {"output_dim": 1}}, "config.model"),
        ({"model": {"depth": 3}}, "config.model"),
        ({"optim": {"mu": 0}}, "config.optim"),
        ({"data": {"kind": "csv"}}, "config.data.kind"),
        ({"data": {"kind": "blobs", "per_class": 0, "separation": 1.0, "seed": 0}}, "config.data.per_class"),
        ({"kind": "nope"}, "config.kind"),
    ],
)
def test_config_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as err:
        resolve_config("kernel-compare", raw)
    assert str(err.value).startswith(path)


def test_v_sweep_validation():
    with pytest.raises(ConfigError, match="config.v_sweep"):
        resolve_config("v-scaling", {"v_sweep": [1, 10]})


def test_pair_index_validation():
    cfg = resolve_config("kernel-compare", single_pair(pairs={"observed": [10_000]}), seeds=[0], p_sweep=[1])
    with pytest.raises(ConfigError, match="config.pairs.observed"):
        run(cfg)


def test_flags_override_config_and_resolved_config_is_echoed(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"kind": "jl-budget", "n": 3, "epsilon": 0.9}))
    assert main(["jl-budget", "--config", str(cfg_path), "--n", "10", "--epsilon", "0.5", "--out", str(tmp_path / "o")]) == 0
    echoed = json.loads((tmp_path / "o" / "run_config.json").read_text())
    assert echoed["n"] == 10 and echoed["epsilon"] == 0.5 and echoed["kind"] == "jl-budget"
    assert json.loads((tmp_path / "o" / "jl_budget.json").read_text())["required_P"] == 148


def test_bad_config_exit_code(tmp_path, capsys):
    assert main(["kernel-compare", "--p", "0", "--out", str(tmp_path)]) == 2
    assert "config.p_sweep[0]" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["kernel-compare", "--config", str(bad), "--out", str(tmp_path)]) == 2


# -- kernel-compare --------------------------------------------------------------

def test_single_pair_single_p_single_seed(tmp_path):
    out = tmp_path / "kc"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(single_pair()))
    assert main(["kernel-compare", "--config", str(cfg), "--p", "1", "--seed", "0",
                 "--distributions", "gaussian", "--out", str(out)]) == 0
    rows = read_csv(out / "kernel_compare.csv")
    assert len(rows) == 2
    assert rows[0]["seed"] == "0" and rows[1]["seed"] == "median"
    assert rows[0]["rel_frobenius"] == rows[1]["rel_frobenius"]
    assert rows[0]["spectra_kind"] == "singular"


def test_sweep_row_counts_and_slopes(tmp_path):
    cfg = resolve_config("kernel-compare", single_pair(p_sweep=[1, 4, 16, 64, 256]), threads=4)
    res = run(cfg)
    assert len(res.reports) == 200 and len(res.medians) == 10
    files = write_outputs(cfg, res, str(tmp_path))
    assert "kernel_compare_summary.json" in files
    summary = json.loads((tmp_path / "kernel_compare_summary.json").read_text())
    for dist in ("gaussian", "rademacher"):
        assert -0.8 <= summary["slopes"][dist]["rel_frobenius"] <= -0.2
    assert set(summary["parity"]) == {"1", "4", "16", "64", "256"}
    rows = read_csv(tmp_path / "kernel_compare.csv")
    assert len(rows) == 210
    # every row carries what is needed to regenerate it
    assert all(r["pair_id"] and r["P"] and r["distribution"] and r["seed"] for r in rows)


def test_kernel_dumps(tmp_path):
    cfg = resolve_config("kernel-compare", single_pair(), p_sweep=[2], seeds=[3],
                         distributions=["rademacher"], dump_kernels=True)
    write_outputs(cfg, run(cfg), str(tmp_path))
    names = sorted(p.name for p in (tmp_path / "kernels").iterdir())
    assert names == ["fo_o1-u0.json", "zo_o1-u0_P2_rademacher_s3.json"]
    doc = json.loads((tmp_path / "kernels" / names[1]).read_text())
    assert doc["rows"] == doc["cols"] == 10 and doc["meta"]["tag"] == "ZO" and doc["meta"]["seed"] == 3


def test_kernel_compare_rerun_is_byte_identical(tmp_path):
    args = ["kernel-compare", "--p", "1,8", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    for name in ("kernel_compare.csv", "kernel_compare_summary.json", "run_config.json"):
        if name == "run_config.json":
            continue  # records the thread count only via flags, compared below
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(args + ["--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "run_config.json").read_bytes() == (tmp_path / "c" / "run_config.json").read_bytes()


# -- trajectory ------------------------------------------------------------------

def small_traj(**kw):
    raw = {"optim": {"steps": 5}, "data": {"kind": "blobs", "per_class": 3, "separation": 3.0, "seed": 0},
           "p_sweep": [1, 4], "seeds": [0, 1]}
    raw.update(kw)
    return raw


def test_zero_learning_rate_gives_zero_gaps():
    cfg = resolve_config("trajectory", small_traj(optim={"steps": 5, "eta": 0.0}))
    res = run(cfg)
    assert res.rows and all(r[-1] == 0.0 for r in res.rows)


def test_fo_control_gaps_are_zero(tmp_path):
    assert main(["trajectory", "--no-zo", "--steps", "4", "--seed", "2", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows and {r["algorithm"] for r in rows} == {"FO"}
    assert all(float(r["gap"]) == 0.0 for r in rows)


def test_trajectory_rows_and_determinism(tmp_path):
    cfg = resolve_config("trajectory", small_traj())
    res = run(cfg)
    # per seed: FO + 2 ZO runs, 5 steps, 4 probes, 4 classes
    assert len(res.rows) == 2 * 3 * 5 * 4 * 4
    write_outputs(cfg, res, str(tmp_path / "a"))
    cfg2 = resolve_config("trajectory", small_traj(), threads=2)
    write_outputs(cfg2, run(cfg2), str(tmp_path / "b"))
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert set(json.loads((tmp_path / "a" / "trajectory_summary.json").read_text())["median_final_gap"]) == {
        "gaussian/P1", "gaussian/P4"}


def test_divergence_is_reported_and_other_runs_continue():
    # at this step size the ZO runs blow up while the FO baseline stays finite
    cfg = resolve_config("trajectory", small_traj(optim={"steps": 5, "eta": 1e4}, p_sweep=[2]))
    res = run(cfg)
    assert [d["algorithm"] for d in res.summary["diverged"]] == ["ZO", "ZO"]
    assert all(d["steps_completed"] < 5 for d in res.summary["diverged"])
    fo_rows = [r for r in res.rows if r[1] == "FO"]
    assert len(fo_rows) == 2 * 5 * 4 * 4


# -- v-scaling -------------------------------------------------------------------

def test_v_scaling_table(tmp_path):
    cfg = resolve_config("v-scaling", {"v_sweep": [2, 10], "p_sweep": [10], "seeds": [0, 1, 2],
                                       "model": {"hidden_dims": [16]}})
    res = run(cfg)
    assert len(res.rows) == 6 and len(res.medians) == 2
    for V, P, dist, seed, k, f, r in res.rows:
        assert r == pytest.approx(k / f)
    write_outputs(cfg, res, str(tmp_path))
    rows = read_csv(tmp_path / "v_scaling.csv")
    assert list(rows[0]) == ["V", "P", "distribution", "seed", "difference_norm", "fo_norm", "relative_error"]
    summary = json.loads((tmp_path / "v_scaling_summary.json").read_text())
    assert "strictly_increasing" in summary["checks"]["gaussian/P10"]


def test_sqrt_v_log_v_prediction():
    assert experiments.sqrt_v_log_v_ratio(1000, 10) == pytest.approx(
        math.sqrt(1000 * math.log(1000) / (10 * math.log(10))))
    assert experiments.sqrt_v_log_v_ratio(1000, 10) == pytest.approx(17.32, abs=0.01)


# -- moment-check / jl-budget ----------------------------------------------------

def test_moment_check_default_passes(tmp_path):
    assert main(["moment-check", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "moment_check.json").read_text())
    names = {c["name"] for c in report["checks"]}
    assert {"gaussian_fourth_moment", "multi_perturbation_expectation",
            "rademacher_second_moment_exact", "gaussian_second_moment"} <= names
    assert report["all_pass"]


def test_moment_check_zero_matrix_passes():
    report = run(resolve_config("moment-check", {"W": "zero"}))
    assert report["all_pass"]
    assert all(c["value"] == 0.0 for c in report["checks"] if not c["name"].startswith("concentration"))


def test_moment_check_wrong_constant_fails(tmp_path):
    assert main(["moment-check", "--c", "1.0", "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "moment_check.json").read_text())
    assert not report["all_pass"]
    assert any(not c["pass"] for c in report["checks"] if c["name"].startswith("concentration"))


@pytest.mark.parametrize(
    "args, expected",
    [(["--n", "10", "--epsilon", "0.5", "--delta", "0.01", "--c", "0.25"], 148),
     (["--n", "1", "--epsilon", "0.99", "--delta", str(1 / math.e), "--c", "0.25"], 5)],
)
def test_jl_budget_command(tmp_path, args, expected):
    assert main(["jl-budget", *args, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "jl_budget.json").read_text())["required_P"] == expected


def test_jl_budget_monotone_in_delta():
    a = run(resolve_config("jl-budget", {"delta": 0.02}))["required_P"]
    b = run(resolve_config("jl-budget", {"delta": 0.01}))["required_P"]
    assert b >= a


def test_jl_budget_rejects_bad_epsilon(tmp_path):
    assert main(["jl-budget", "--epsilon", "1.5", "--out", str(tmp_path)]) == 2
