import math

import pytest
from click.testing import CliRunner
from pydantic import ValidationError

from app import main
from core.exceptions import GeometryError, NumericError
from schemas.report import ExperimentReport, Relation, ReportRow
from schemas.run import ExperimentId, RunConfig
from tasks.export import COLUMNS
from tasks.verify_core import oracle_rows


@pytest.fixture
def runner():
    return CliRunner()


def test_passing_run_exits_zero(runner, mocker, passing_report):
    mocker.patch.object(main, "run_quantization", return_value=passing_report)
    result = runner.invoke(main.cli, ["--experiment", "quantization"])
    assert result.exit_code == 0
    assert ",".join(COLUMNS) in result.output


def test_failing_run_exits_one(runner, mocker, failing_report, tmp_path):
    mocker.patch.object(main, "run_rigged", return_value=failing_report)
    out = tmp_path / "rigged.json"
    result = runner.invoke(main.cli, ["--experiment", "rigged", "--format", "json", "--out", str(out)])
    assert result.exit_code == 1
    assert out.exists()


def test_inadmissible_mu_exits_two(runner):
    result = runner.invoke(main.cli, ["--experiment", "verify-core", "--mu", "2.5"])
    assert result.exit_code == 2


@pytest.mark.parametrize("n", ["100", "32", "4096"])
def test_bad_resolution_exits_two(runner, n):
    assert runner.invoke(main.cli, ["--experiment", "rigged", "--n", n]).exit_code == 2


def test_unwritable_output_exits_two(runner, mocker, passing_report, tmp_path):
    mocker.patch.object(main, "run_quantization", return_value=passing_report)
    result = runner.invoke(main.cli, ["--experiment", "quantization", "--out", str(tmp_path / "no" / "such.csv")])
    assert result.exit_code == 2


def test_injected_kernel_fault_exits_one(runner, mocker):
    def oracle_only(mu, seed, inject_kernel_fault):
        return ExperimentReport(experiment="verify-core", rows=oracle_rows(mu, seed, inject_kernel_fault))
    mocker.patch.object(main, "run_verify_core", side_effect=oracle_only)
    assert runner.invoke(main.cli, ["--experiment", "verify-core"]).exit_code == 0
    assert runner.invoke(main.cli, ["--experiment", "verify-core", "--inject-kernel-fault"]).exit_code == 1


def test_missing_experiment_exits_two(runner):
    assert runner.invoke(main.cli, []).exit_code == 2


@pytest.mark.parametrize("error, code", [(NumericError("nan mass"), 3), (GeometryError("bad ball"), 2)])
def test_lab_errors_map_to_exit_codes(mocker, error, code):
    mocker.patch.object(main, "run_multibubble", side_effect=error)
    assert main.run(RunConfig(experiment=ExperimentId.MULTIBUBBLE)) == code


def test_non_finite_tolerance_row_exits_three(runner, mocker, tmp_path):
    report = ExperimentReport(experiment="quantization", rows=[
        ReportRow(experiment="quantization", quantity="mass_extrapolated", value=math.nan, target=8 * math.pi,
                  tolerance=0.03, relation=Relation.REL),
    ])
    mocker.patch.object(main, "run_quantization", return_value=report)
    out = tmp_path / "quantization.csv"
    result = runner.invoke(main.cli, ["--experiment", "quantization", "--out", str(out)])
    assert result.exit_code == 3
    #the report is still written for inspection
    assert out.read_text().splitlines()[0] == ",".join(COLUMNS)


def test_non_finite_info_row_is_not_numeric_failure(mocker):
    report = ExperimentReport(experiment="quantization", rows=[
        ReportRow(experiment="quantization", quantity="extrapolation_order", value=math.nan),
    ])
    mocker.patch.object(main, "run_quantization", return_value=report)
    assert main.run(RunConfig(experiment=ExperimentId.QUANTIZATION)) == 0


def test_inconclusive_report_fails(mocker):
    mocker.patch.object(main, "run_rigged", return_value=ExperimentReport(experiment="rigged", inconclusive=True))
    assert main.run(RunConfig(experiment=ExperimentId.RIGGED)) == 1


def test_options_reach_the_experiment(mocker, passing_report):
    run_rigged = mocker.patch.object(main, "run_rigged", return_value=passing_report)
    main.execute(RunConfig(experiment="rigged", mu=0.5, n=256, ks="4,8,16"))
    run_rigged.assert_called_once_with(mu=0.5, n=256, ks=[4, 8, 16])


def test_multibubble_options(mocker, passing_report):
    run = mocker.patch.object(main, "run_multibubble", return_value=passing_report)
    main.execute(RunConfig(experiment="multibubble", centers="0.3,0;-0.3,0", deltas="100", half_width=1.0))
    run.assert_called_once_with(mu=1.0, half_width=1.0, centers=[(0.3, 0.0), (-0.3, 0.0)], deltas=[100.0])


def test_config_file_is_overridden_by_options(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("EXPERIMENT=quantization\nMU=0.5\nDELTAS=8,16,32\nSEED=7\n")
    config = main.build_config(path, mu=1.5, seed=None, inject_kernel_fault=False)
    assert config.experiment == ExperimentId.QUANTIZATION
    assert config.mu == 1.5
    assert config.deltas == [8.0, 16.0, 32.0]
    assert config.seed == 7
    assert config.inject_kernel_fault is False


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(experiment="rigged", ks="")
    with pytest.raises(ValidationError):
        RunConfig(experiment="multibubble", centers="0.1;0.2")
