"""Line-oriented photon-count records.

Each record is a header line followed by one integer count per line::

    # time_us=<float> condition=<I|pi|pi2> shots=<int>
    <count>
    ...

Records are separated by a blank line.
"""

import re
from pathlib import Path

from pydantic import BaseModel, Field, field_validator

from dissq.models import Condition

_HEADER = re.compile(
    r"^#\s*time_us=(?P<time>\S+)\s+condition=(?P<condition>\S+)\s+shots=(?P<shots>\d+)\s*$"
)


class CountRecord(BaseModel):
    time_us: float = Field(..., ge=0)
    condition: Condition
    counts: list[int]

    @field_validator("counts")
    @classmethod
    def _non_negative(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("a count record needs at least one shot")
        if any(c < 0 for c in v):
            raise ValueError("photon counts must be non-negative")
        return v


def format_count_records(records: list[CountRecord]) -> str:
    blocks = []
    for rec in records:
        lines = [
            f"# time_us={rec.time_us!r} condition={rec.condition.value} shots={len(rec.counts)}"
        ]
        lines.extend(str(c) for c in rec.counts)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def write_count_records(path: str | Path, records: list[CountRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_count_records(records), encoding="utf-8")
    return path


def parse_count_records(text: str) -> list[CountRecord]:
    records: list[CountRecord] = []
    header: dict[str, str] | None = None
    header_line = 0
    counts: list[int] = []

    def close() -> None:
        if header is None:
            return
        expected = int(header["shots"])
        if len(counts) != expected:
            raise ValueError(
                f"record at line {header_line} declares {expected} shots but has {len(counts)}"
            )
        records.append(
            CountRecord(time_us=float(header["time"]), condition=header["condition"], counts=counts)
        )

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _HEADER.match(line)
            if match is None:
                raise ValueError(f"line {lineno}: malformed record header {line!r}")
            close()
            header, header_line, counts = match.groupdict(), lineno, []
            continue
        if header is None:
            raise ValueError(f"line {lineno}: count before any record header")
        try:
            counts.append(int(line))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {line!r} is not an integer count") from exc
    close()
    return records


def read_count_records(path: str | Path) -> list[CountRecord]:
    return parse_count_records(Path(path).read_text(encoding="utf-8"))
