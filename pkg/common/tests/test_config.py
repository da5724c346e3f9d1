import pytest

from common.config import SimulationSettings, load_simulation_settings

# --- Test cases for SimulationSettings ---


def test_defaults_without_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Unset variables fall back to the documented defaults."""
    for name in ("DISSQ_SEED", "DISSQ_THREADS", "DISSQ_LOG_LEVEL", "DISSQ_RESULTS_DB"):
        monkeypatch.delenv(name, raising=False)

    settings = load_simulation_settings()

    assert settings.DISSQ_SEED is None
    assert settings.DISSQ_THREADS == 1
    assert settings.DISSQ_LOG_LEVEL == "INFO"
    assert settings.DISSQ_RESULTS_DB == "results/runs.json"


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("DISSQ_SEED", "77")
    monkeypatch.setenv("DISSQ_THREADS", "4")
    monkeypatch.setenv("DISSQ_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("DISSQ_RESULTS_DB", "/tmp/registry.json")

    settings = load_simulation_settings()

    assert settings.DISSQ_SEED == 77
    assert settings.DISSQ_THREADS == 4
    assert settings.DISSQ_LOG_LEVEL == "DEBUG"
    assert settings.DISSQ_RESULTS_DB == "/tmp/registry.json"


def test_blank_seed_is_treated_as_unset(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("DISSQ_SEED", "  ")
    assert load_simulation_settings().DISSQ_SEED is None


def test_thread_count_must_be_positive() -> None:
    with pytest.raises(ValueError, match="greater than or equal to 1"):
        SimulationSettings(DISSQ_THREADS=0)
