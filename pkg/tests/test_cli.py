from pathlib import Path
import json
import math

import pytest

from yamabe_lab import OUTPUT_DIR_ENV, cli_main, load_config
from utils.errors import ConfigError


def write_config(tmp_path, lab_args=None, module_args=None, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"lab_args": lab_args or {}, "module_args": module_args or {}}))
    return str(path)


def run(command, config=None, *extra):
    argv = [command, "--quiet", *extra]
    if config is not None:
        argv += ["--config", config]
    return cli_main(argv)


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SPHERE = {"model": "sphere3", "r_max": math.pi, "num_nodes": 100, "p": 4.0}


def test_models_lists_kinds_and_model_spaces(capsys):
    assert run("models") == 0
    out = capsys.readouterr().out
    assert "cylbump<n>:c=<value>,w=<value>" in out
    assert "n=3:" in out and "n=6:" in out


def test_unknown_lab_key_names_it(tmp_path, capsys):
    config = write_config(tmp_path, {"modle": "sphere3"})
    assert run("q", config) == 2
    assert "modle" in capsys.readouterr().err


@pytest.mark.parametrize(
    "module_args, expected",
    [
        ({"Minimizer": {"max_iters": 3}}, "unknown key 'max_iters' in module_args group 'Minimizer'"),
        ({"Solver": {}}, "unknown module_args group 'Solver'"),
    ],
)
def test_unknown_module_args(tmp_path, capsys, module_args, expected):
    assert run("q", write_config(tmp_path, SPHERE, module_args)) == 2
    assert expected in capsys.readouterr().err


def test_load_config_rejects_unknown_top_level_keys(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"lab_args": {}, "extra": {}}))
    with pytest.raises(ConfigError, match="extra"):
        load_config(str(path))
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_load_config_flattens_groups(tmp_path):
    config = write_config(tmp_path, {"model": "flat3"}, {"Minimizer": {"max_iter": 7}, "BubbleSweep": {"num_lambdas": 3}})
    lab_args, module_args = load_config(config)
    assert lab_args.model == "flat3"
    assert module_args.max_iter == 7
    assert module_args.num_lambdas == 3
    assert module_args.mu_tol == 1e-10


@pytest.mark.parametrize(
    "lab_args",
    [{"model": "torus3"}, {"model": "sphere3"}, {"model": "flat3", "num_nodes": 2}, {"model": "cylbump3:c=abc"}],
)
def test_bad_run_settings_exit_2(tmp_path, lab_args):
    assert run("q", write_config(tmp_path, lab_args)) == 2


def test_argparse_errors_exit_2():
    assert cli_main(["nosuchcommand"]) == 2
    assert cli_main(["q", "--seed", "abc"]) == 2


def test_q_writes_outputs(tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert run("q", write_config(tmp_path, SPHERE), "--out", str(out_dir)) == 0
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["command"] == "q"
    assert summary["model"] == "sphere3"
    assert summary["grid"]["N"] == 100
    assert summary["extremal"]["p"] == 4.0
    assert summary["extremal"]["residual"] <= 1e-8
    field = (out_dir / "field.csv").read_bytes()
    assert field.startswith(b"r,v,rho_alpha_v\n")
    assert b"\r\n" not in field
    assert len(field.splitlines()) == 102
    metadata = json.loads((out_dir / "metadata.json").read_text())
    assert {"created", "argv", "versions"} <= set(metadata)
    assert "extremal:" in capsys.readouterr().out


def test_output_dir_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    config = write_config(tmp_path, {**SPHERE, "output_dir": str(tmp_path / "from_config")})
    assert run("q", config) == 0
    assert (tmp_path / "from_config" / "summary.json").exists()
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    assert run("q", config) == 0
    assert (tmp_path / "from_env" / "summary.json").exists()
    assert run("q", config, "--out", str(tmp_path / "from_flag")) == 0
    assert (tmp_path / "from_flag" / "summary.json").exists()


def test_runs_are_reproducible(tmp_path):
    config = write_config(tmp_path, SPHERE)
    for name in ("first", "second"):
        assert run("q", config, "--out", str(tmp_path / name), "--seed", "3") == 0
    for file_name in ("summary.json", "field.csv"):
        assert (tmp_path / "first" / file_name).read_bytes() == (tmp_path / "second" / file_name).read_bytes()
    assert json.loads((tmp_path / "first" / "summary.json").read_text())["seed"] == 3


def test_continue_reports_failed_hypothesis(tmp_path, capsys):
    config = write_config(tmp_path, SPHERE, {"ContinuationDriver": {"margin_mu": 100.0}})
    assert run("continue", config, "--out", str(tmp_path / "out")) == 1
    assert "mu_positive failed" in capsys.readouterr().err
    verdict = json.loads((tmp_path / "out" / "summary.json").read_text())["verdict"]
    assert verdict["hypotheses_met"]["mu_positive"] is False
    assert verdict["final"] is None
    assert (tmp_path / "out" / "trace.csv").read_text() == "stage,alpha,p,Q,sup_v,argmax_r,residual,iterations,norm_pcrit\n"
    assert not (tmp_path / "out" / "field.csv").exists()


def test_non_convergence_exits_3(tmp_path, capsys):
    config = write_config(tmp_path, SPHERE, {"Minimizer": {"max_iter": 1}})
    assert run("q", config, "--out", str(tmp_path / "out")) == 3
    assert "NonConvergenceError" in capsys.readouterr().err


def test_bad_schedule_exits_2(tmp_path, capsys):
    config = write_config(tmp_path, SPHERE, {"ContinuationDriver": {"alpha_list": [0.5, 0.1]}})
    assert run("continue", config, "--out", str(tmp_path / "out")) == 2
    assert "invalid continuation schedule" in capsys.readouterr().err


def test_bubble_command(tmp_path):
    config = write_config(
        tmp_path,
        {"model": "flat3", "r_max": 20.0, "num_nodes": 200},
        {"BubbleSweep": {"num_lambdas": 5, "bubble_tol": 0.5}},
    )
    assert run("bubble", config, "--out", str(tmp_path / "out")) == 0
    trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert trace[0] == "lambda,Q"
    assert len(trace) == 6
    bubble = json.loads((tmp_path / "out" / "summary.json").read_text())["bubble"]
    assert bubble["rel_gap"] > 0


def test_mu_sweep_command(tmp_path):
    config = write_config(
        tmp_path,
        {"model": "flat3", "r_max": 4.0, "num_nodes": 79},
        {"Eigensolver": {"mu_r_max_sweep": [1.0, 2.0, 4.0]}},
    )
    assert run("mu", config, "--out", str(tmp_path / "out")) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert [entry["N"] for entry in summary["sweep"]["entries"]] == [19, 39, 79]
    assert summary["sweep"]["nonincreasing"] is True
    assert summary["mu"]["value"] == pytest.approx(summary["sweep"]["entries"][-1]["value"], rel=1e-9)
    trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert trace[0] == "r_max,N,value,residual,iterations"


def test_reduced_audit_passes(tmp_path):
    config = write_config(
        tmp_path,
        module_args={
            "AuditSuite": {
                "audit_models": ["sphere3"],
                "audit_alphas": [0.2, 0.0],
                "audit_p_list": [2.0, 4.0],
                "audit_num_nodes": 60,
                "consistency_models": ["sphere3"],
                "certify_models": [],
                "scaling_exponents": [4.0],
            }
        },
    )
    assert run("audit", config, "--out", str(tmp_path / "out")) == 0
    audit = json.loads((tmp_path / "out" / "summary.json").read_text())["audit"]
    assert [cell["name"] for cell in audit["cells"]] == ["monotonicity sphere3", "consistency sphere3", "scaling s=4.0"]
    assert audit["failures"] == []


def test_qinf_command(tmp_path):
    config = write_config(
        tmp_path,
        {"model": "flat3", "r_max": 10.0, "num_nodes": 199},
        {"ContinuationDriver": {"q_inf_radii": [1.0, 2.0, 4.0]}},
    )
    assert run("qinf", config, "--out", str(tmp_path / "out")) == 0
    trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
    assert trace[0] == "R,value,mu,error"
    assert [row.split(",")[0] for row in trace[1:]] == ["1.0", "2.0", "4.0"]
    report = json.loads((tmp_path / "out" / "summary.json").read_text())["q_at_infinity"]
    assert report["nondecreasing"] is True
    assert report["q_bar"] == report["entries"][-1]["value"]


def test_module_args_are_coerced_to_declared_types(tmp_path):
    config = write_config(
        tmp_path,
        module_args={
            "AuditSuite": {"num_audit_workers": "4", "scaling_radii": [1, 3]},
            "ContinuationDriver": {"stage1_overrides": {"max_iter": 5}, "q_inf_radii": None},
            "Eigensolver": {"mu_tol": 1e-9},
        },
    )
    _, module_args = load_config(config)
    assert module_args.num_audit_workers == 4
    assert module_args.scaling_radii == [1.0, 3.0]
    assert module_args.stage1_overrides == {"max_iter": 5}
    assert module_args.q_inf_radii is None
    assert module_args.mu_tol == 1e-9


@pytest.mark.parametrize(
    "module_args, expected",
    [
        ({"Eigensolver": {"mu_tol": "tight"}}, "invalid float value: 'tight'"),
        ({"AuditSuite": {"num_audit_workers": 2.5}}, "invalid int value: '2.5'"),
        ({"AuditSuite": {"scaling_radii": [1.0]}}, "expected 2 arguments"),
        ({"Minimizer": {"init": "random"}}, "invalid choice: 'random'"),
        ({"BubbleSweep": {"num_lambdas": None}}, "'num_lambdas' in module_args group 'BubbleSweep' must not be null"),
    ],
)
def test_mistyped_module_args_exit_2(tmp_path, capsys, module_args, expected):
    assert run("mu", write_config(tmp_path, SPHERE, module_args)) == 2
    assert expected in capsys.readouterr().err


def test_mu_field_has_one_column_per_quantity(tmp_path):
    assert run("mu", write_config(tmp_path, SPHERE), "--out", str(tmp_path / "out")) == 0
    field = (tmp_path / "out" / "field.csv").read_text().splitlines()
    assert field[0] == "r,v"
    assert len(field) == 102


def test_audit_limit_tolerance(tmp_path):
    module_args = {
        "AuditSuite": {
            "audit_models": ["flat3"],
            "audit_alphas": [0.5, 0.0],
            "audit_p_list": [2.0],
            "audit_num_nodes": 60,
            "consistency_models": [],
            "certify_models": [],
            "scaling_exponents": [],
        }
    }
    for name, limit_tol in (("reported", None), ("checked", 1e-6)):
        module_args["AuditSuite"]["audit_limit_tol"] = limit_tol
        run("audit", write_config(tmp_path, module_args=module_args, name=f"{name}.json"), "--out", str(tmp_path / name))
    reported, checked = (
        json.loads((tmp_path / name / "summary.json").read_text())["audit"]["cells"][0]["report"]["monotonicity"]
        for name in ("reported", "checked")
    )
    assert reported["limit_gaps"]["2.0"] > 0
    assert not any(v.startswith("(c)") for v in reported["violations"])
    assert checked["limit_gaps"] == reported["limit_gaps"]
    assert checked["violations"][-1].startswith("(c) p=2.0")
    assert not checked["passed"]


@pytest.mark.slow
def test_shipped_audit_config_passes(tmp_path):
    assert run("audit", str(CONFIG_DIR / "config_audit.json"), "--out", str(tmp_path / "out")) == 0
    audit = json.loads((tmp_path / "out" / "summary.json").read_text())["audit"]
    assert audit["failures"] == []


@pytest.mark.slow
def test_shipped_sphere_config_reaches_the_sphere_constant(tmp_path):
    assert run("q", str(CONFIG_DIR / "config_sphere.json"), "--out", str(tmp_path / "out")) == 0
    extremal = json.loads((tmp_path / "out" / "summary.json").read_text())["extremal"]
    assert extremal["Q"] == pytest.approx(43.823, rel=5e-3)


@pytest.mark.slow
def test_shipped_cylinder_bump_continuation_is_certified_and_reproducible(tmp_path):
    config = str(CONFIG_DIR / "config_cylbump.json")
    for name in ("first", "second"):
        assert run("continue", config, "--out", str(tmp_path / name)) == 0
    summary = json.loads((tmp_path / "first" / "summary.json").read_text())
    verdict = summary["verdict"]
    assert all(verdict["hypotheses_met"].values())
    assert verdict["mu_value"] >= 0.1
    assert verdict["q_inf_estimate"] - verdict["q_estimate"] >= 0.5
    assert verdict["final"]["residual"] <= 1e-6
    assert verdict["final"]["norm_pcrit"] == pytest.approx(1.0, abs=1e-2)
    assert summary["certify_mu1"] is True
    field = (tmp_path / "first" / "field.csv").read_text().splitlines()
    assert all(float(row.split(",")[1]) > 0 for row in field[1:])
    for file_name in ("summary.json", "trace.csv", "field.csv"):
        assert (tmp_path / "first" / file_name).read_bytes() == (tmp_path / "second" / file_name).read_bytes()
