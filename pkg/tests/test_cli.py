import json

import pytest
from click.testing import CliRunner

from doflab.cli import cli, run
from doflab.polytope import VERTEX_LABEL
from doflab.schemedsl import DataSym, Expr, Stream, builtin, emit_scheme, parse_scheme

RESIDUAL = "d_1=3,d_12=1,d_13=1,d_23=2"


@pytest.fixture
def runner(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in ("DOFLAB_SEED", "DOFLAB_MODE", "DOFLAB_THREADS", "DOFLAB_LOG_LEVEL", "DOFLAB_MAX_TRIALS"):
        monkeypatch.delenv(name, raising=False)
    return CliRunner()


def invoke(runner, *args, env=None):
    return runner.invoke(cli, list(args), env=env)


def test_bounds_vertices_json(runner):
    result = invoke(runner, "bounds", "--users", "3", "--perfect", "1", "--private", "--slice", "d_1=1", "--vertices", "--format", "json")
    assert result.exit_code == 0, result.output
    document = json.loads(result.output)
    assert document["variables"] == ["d_2", "d_3"]
    assert document["vertices"] == [["0", "0"], ["0", "1/2"], ["1/3", "1/2"], ["4/9", "4/9"], ["1/2", "0"], ["1/2", "1/3"]]
    assert document["slice"] == {"d_1": "1"}


def test_bounds_text_lists_provenance(runner):
    result = invoke(runner, "bounds", "--users", "3", "--perfect", "1")
    assert result.exit_code == 0
    assert "18 inequalities" in result.output
    assert "1/2 d_1 + d_2 + d_12 <= 1    [E_D={2} pi_P=(1) pi_D=(2)]" in result.output


def test_bounds_csv(runner):
    result = invoke(runner, "bounds", "--users", "3", "--perfect", "1", "--private", "--format", "csv")
    assert result.output.splitlines()[0] == "d_1,d_2,d_3,rhs,provenance"
    assert len(result.output.splitlines()) == 11


def test_bounds_irredundant(runner):
    result = invoke(runner, "bounds", "--users", "3", "--perfect", "1", "--private", "--irredundant", "--format", "json")
    assert len(json.loads(result.output)["inequalities"]) == 8


def test_check_outside_point(runner):
    result = invoke(runner, "check", "--users", "3", "--perfect", "1", "--private", "--point", "1,1/2,1/2")
    assert result.exit_code == 1
    assert "feasible: no" in result.output
    assert "lhs 13/12" in result.output


def test_check_vertex(runner):
    result = invoke(runner, "check", "--users", "3", "--perfect", "1", "--private", "--point", "1,1/2,1/3", "--format", "json")
    assert result.exit_code == 0
    document = json.loads(result.output)
    assert document["feasible"] is True
    assert document["classification"] == VERTEX_LABEL


def test_check_wrong_length(runner):
    result = invoke(runner, "check", "--users", "3", "--perfect", "1", "--private", "--point", "1,1/2")
    assert result.exit_code == 1
    assert "error:" in result.output


def test_maximize(runner):
    result = invoke(runner, "maximize", "--users", "3", "--perfect", "1", "--private")
    assert result.output.splitlines() == ["value: 17/9", "argpoint: (1, 4/9, 4/9)"]
    result = invoke(runner, "maximize", "--users", "3", "--perfect", "1", "--private", "--weights", "0,1,1")
    assert "value: 4/3" in result.output


def test_feas(runner):
    assert invoke(runner, "feas", "--residual", RESIDUAL, "--slots", "5").exit_code == 0
    result = invoke(runner, "feas", "--residual", RESIDUAL + ",d_2=1", "--slots", "5")
    assert result.exit_code == 1
    assert "11/2" in result.output


def test_sim_builtin(runner):
    result = invoke(runner, "sim", "hybrid-5over3-a", "--trials", "100", "--seed", "7", "--mode", "field", "--format", "json")
    assert result.exit_code == 0, result.output
    document = json.loads(result.output)
    assert document["achieved_dof"] == ["1", "1/3", "1/3"]
    assert document["successes_per_receiver"] == [100, 100, 100]


def test_sim_output_is_reproducible(runner):
    args = ("sim", "alt-npp-4over9", "--trials", "5", "--seed", "3", "--format", "json")
    assert invoke(runner, *args).output == invoke(runner, *args).output


def test_sim_expect(runner):
    base = ("sim", "hybrid-5over3-b", "--trials", "5", "--seed", "1")
    assert invoke(runner, *base, "--expect", "1,1/3,1/3").exit_code == 0
    assert invoke(runner, *base, "--expect", "1,1/2,1/2").exit_code == 1


def test_sim_seed_from_environment(runner):
    result = invoke(runner, "sim", "hybrid-5over3-a", "--trials", "2", "--format", "json", env={"DOFLAB_SEED": "42"})
    assert json.loads(result.output)["seed"] == 42


def test_bad_environment_is_a_usage_error(runner):
    result = invoke(runner, "schemes", env={"DOFLAB_MODE": "bogus"})
    assert result.exit_code == 2


def test_sim_refuses_invalid_scheme(runner, tmp_path, schemes):
    broken = schemes["hybrid-5over3-b"].with_additions(
        symbols=(("v3", 2),), streams={1: [Stream(Expr(((1, DataSym("v3")),)), (1,))]}
    )
    path = tmp_path / "broken.scheme"
    path.write_text(emit_scheme(broken))
    refused = invoke(runner, "sim", str(path), "--trials", "3")
    assert refused.exit_code == 1
    assert "zf-capacity" in refused.output
    forced = invoke(runner, "sim", str(path), "--trials", "3", "--no-validate", "--format", "json")
    assert forced.exit_code == 0
    assert json.loads(forced.output)["all_decodable"] == 0


def test_validate(runner):
    result = invoke(runner, "validate", "hybrid-5over3-a")
    assert result.exit_code == 0
    assert result.output.strip() == "ok"


def test_parse_prints_canonical_text(runner, tmp_path):
    path = tmp_path / "a.scheme"
    path.write_text(builtin("hybrid-5over3-a"))
    result = invoke(runner, "parse", str(path))
    assert result.exit_code == 0
    assert parse_scheme(result.output) == parse_scheme(builtin("hybrid-5over3-a"))


def test_parse_syntax_error(runner, tmp_path):
    path = tmp_path / "bad.scheme"
    path.write_text("users 3\nsend ?\n")
    result = invoke(runner, "parse", str(path))
    assert result.exit_code == 1
    assert "line 2, column 6" in result.output


def test_rate(runner):
    result = invoke(runner, "rate", "hybrid-5over3-a", "--seed", "0", "--format", "json")
    assert result.exit_code == 0, result.output
    slopes = [r["slope"] for r in json.loads(result.output)["receivers"]]
    assert slopes == pytest.approx([1, 1 / 3, 1 / 3], abs=0.05)


def test_rate_bad_snr(runner):
    assert invoke(runner, "rate", "hybrid-5over3-a", "--snr-db", "60").exit_code == 2
    assert invoke(runner, "rate", "hybrid-5over3-a", "--snr-db", "20,100").exit_code == 1


def test_builtin_and_schemes(runner):
    assert invoke(runner, "schemes").output.split() == ["alt-npp-4over9", "hybrid-5over3-a", "hybrid-5over3-b"]
    assert invoke(runner, "builtin", "hybrid-5over3-b", "--emit").output == builtin("hybrid-5over3-b")
    document = json.loads(invoke(runner, "builtin", "alt-npp-4over9", "--format", "json").output)
    assert document["claimed_dof"] == ["1", "4/9", "4/9"]
    assert invoke(runner, "builtin", "nope").exit_code == 1


def test_run_exit_codes(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("DOFLAB_MODE", raising=False)
    assert run(["bounds", "--users", "3", "--perfect", "1", "--private"]) == 0
    assert run(["nosuch"]) == 2
    assert run(["check", "--users", "3", "--perfect", "1", "--private", "--point", "1,1/2,1/2"]) == 1
    assert run(["bounds", "--users", "3", "--perfect", "9"]) == 1


@pytest.mark.parametrize(
    "args",
    [
        ["check", "--users", "3", "--perfect", "1", "--private", "--point", "1,1/0,0"],
        ["bounds", "--users", "3", "--perfect", "1", "--slice", "d_1=1/0"],
        ["maximize", "--users", "3", "--perfect", "1", "--private", "--weights", "1,0/0,1"],
        ["feas", "--residual", "d_1=1/0", "--slots", "1"],
    ],
)
def test_zero_denominator_is_a_domain_error(runner, args):
    result = invoke(runner, *args)
    assert result.exit_code == 1
    assert "zero denominator" in result.output
    assert run(args) == 1
