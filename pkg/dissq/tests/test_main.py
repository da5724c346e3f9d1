import json
from pathlib import Path

import pytest
from tinydb import TinyDB

from dissq import main as cli
from dissq.core.lindblad import EvolutionError
from dissq.models import ExperimentSpec, ResultSet
from dissq.routers.verify import CheckResult, VerifyReport

# --- Fixtures for testing ---


@pytest.fixture
def phi_spec_file(tmp_path: Path) -> Path:
    """Provides a three-point analytic phase-calibration spec on disk."""
    path = tmp_path / "phi.json"
    path.write_text(
        json.dumps(
            {
                "experiment": "phi_calibration",
                "phi_calibration": {"phi_grid_rad": [0.0, 1.0, 2.0]},
                "output": {"stem": "phi"},
            }
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture(autouse=True)
def registry(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> TinyDB:
    """Keeps every CLI run out of the configured registry."""
    test_db = TinyDB(tmp_path / "runs.json")
    monkeypatch.setattr("dissq.routers.experiments.get_db", lambda: test_db)
    monkeypatch.delenv("DISSQ_SEED", raising=False)
    return test_db


def fake_result(spec: ExperimentSpec) -> ResultSet:
    return ResultSet(
        experiment=spec.experiment,
        columns=["a"],
        rows=[[1.0]],
        summary={},
        spec_hash="0" * 64,
        version="test",
        wall_time_s=0.0,
    )


# --- Test cases for the dissq command ---


def test_list_experiments(capsys: pytest.CaptureFixture[str]) -> None:
    assert cli.main(["list-experiments"]) == 0
    out = capsys.readouterr().out.split()
    assert out[0] == "cooling_interleave"
    assert "synthetic_readout" in out
    assert len(out) == 7


def test_run_writes_outputs(
    phi_spec_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str], registry: TinyDB
) -> None:
    code = cli.main(["run", str(phi_spec_file), "--out", str(tmp_path / "out")])

    assert code == 0
    line = json.loads(capsys.readouterr().out)
    assert line["experiment"] == "phi_calibration"
    assert line["rows"] == 3
    assert (tmp_path / "out" / "phi.csv").exists()
    assert (tmp_path / "out" / "phi.json").exists()
    assert len(registry) == 1


def test_invalid_spec_exits_with_code_two(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    path = tmp_path / "bad.json"
    path.write_text('{"experiment": "time_sweep", "unknown": true}', encoding="utf-8")

    assert cli.main(["run", str(path)]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "SpecError"
    assert record["field"] == "unknown"


def test_runtime_failure_exits_with_code_one(
    phi_spec_file: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    def explode(spec: ExperimentSpec, threads: int, out_dir: str | None) -> ResultSet:
        raise EvolutionError("step size underflow", {"time": 1e-3})

    monkeypatch.setattr(cli, "run", explode)

    assert cli.main(["run", str(phi_spec_file)]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "EvolutionError"
    assert record["diagnostics"] == {"time": 1e-3}


def test_seed_and_threads_from_environment(
    phi_spec_file: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    seen: dict[str, object] = {}

    def capture(spec: ExperimentSpec, threads: int, out_dir: str | None) -> ResultSet:
        seen.update(seed=spec.statistics.seed, threads=threads)
        return fake_result(spec)

    monkeypatch.setattr(cli, "run", capture)
    monkeypatch.setenv("DISSQ_SEED", "42")
    monkeypatch.setenv("DISSQ_THREADS", "3")

    assert cli.main(["run", str(phi_spec_file)]) == 0
    assert seen == {"seed": 42, "threads": 3}


def test_threads_flag_wins(phi_spec_file: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    seen: dict[str, int] = {}

    def capture(spec: ExperimentSpec, threads: int, out_dir: str | None) -> ResultSet:
        seen["threads"] = threads
        return fake_result(spec)

    monkeypatch.setattr(cli, "run", capture)
    monkeypatch.setenv("DISSQ_THREADS", "3")

    assert cli.main(["run", str(phi_spec_file), "--threads", "5"]) == 0
    assert seen["threads"] == 5


def test_zero_threads_is_a_spec_error(
    phi_spec_file: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    assert cli.main(["run", str(phi_spec_file), "--threads", "0"]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "SpecError"
    assert record["field"] == "threads"


def test_value_error_during_run_is_a_runtime_failure(
    phi_spec_file: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    def explode(spec: ExperimentSpec, threads: int, out_dir: str | None) -> ResultSet:
        raise ValueError("fidelity has imaginary residue 1.0e-03; rho is not Hermitian")

    monkeypatch.setattr(cli, "run", explode)

    assert cli.main(["run", str(phi_spec_file)]) == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "ValueError"


def test_verify_prints_report(
    phi_spec_file: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture[str]
) -> None:
    report = VerifyReport(
        checks=[CheckResult(name="positivity", passed=False, value=1e-3, tolerance=1e-6)]
    )
    monkeypatch.setattr(cli, "verify", lambda spec: report)

    assert cli.main(["verify", str(phi_spec_file)]) == 0
    assert capsys.readouterr().out.strip() == "FAIL positivity value=1.000e-03 tol=1.0e-06"


def test_missing_subcommand_is_usage_error() -> None:
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
