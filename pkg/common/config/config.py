import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


def _optional_int(name: str) -> int | None:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    return int(raw)


class SimulationSettings(BaseModel):
    DISSQ_SEED: int | None = Field(default_factory=lambda: _optional_int("DISSQ_SEED"))
    DISSQ_THREADS: int = Field(
        default_factory=lambda: int(os.getenv("DISSQ_THREADS", "1")), ge=1
    )
    DISSQ_LOG_LEVEL: str = Field(default_factory=lambda: os.getenv("DISSQ_LOG_LEVEL", "INFO"))
    DISSQ_RESULTS_DB: str = Field(
        default_factory=lambda: os.getenv("DISSQ_RESULTS_DB", "results/runs.json")
    )


def load_simulation_settings() -> SimulationSettings:
    return SimulationSettings()


simulation_settings: SimulationSettings = load_simulation_settings()
