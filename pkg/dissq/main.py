import argparse
import json
import logging
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from common.config import load_simulation_settings
from dissq import __version__
from dissq.core.lindblad import EvolutionError
from dissq.routers import (
    SpecError,
    apply_settings,
    list_experiments,
    load_spec,
    run,
    verify,
)

logger = logging.getLogger(__name__)

EXIT_RUNTIME = 1
EXIT_SPEC = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dissq", description="Dissipative two-ion singlet generation simulator"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="run the experiment a spec describes")
    run_cmd.add_argument("spec", help="path to the JSON experiment spec")
    run_cmd.add_argument("--threads", type=int, default=None, help="worker cap")
    run_cmd.add_argument("--out", default=None, help="output directory")

    verify_cmd = commands.add_parser("verify", help="check invariants for a spec's configuration")
    verify_cmd.add_argument("spec", help="path to the JSON experiment spec")

    commands.add_parser("list-experiments", help="list the available experiments")
    return parser


def _error_record(exc: Exception) -> dict[str, object]:
    if isinstance(exc, SpecError):
        return exc.record()
    record: dict[str, object] = {"error": type(exc).__name__, "detail": str(exc)}
    if isinstance(exc, EvolutionError):
        record["diagnostics"] = exc.diagnostics
    return record


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = load_simulation_settings()
    logging.basicConfig(
        level=settings.DISSQ_LOG_LEVEL.upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )

    if args.command == "list-experiments":
        for name in list_experiments():
            print(name)
        return 0

    try:
        spec = apply_settings(load_spec(args.spec), settings)
        if args.command == "verify":
            report = verify(spec)
            for line in report.lines():
                print(line)
            return 0
        threads = args.threads if args.threads is not None else settings.DISSQ_THREADS
        if threads < 1:
            raise SpecError(f"--threads must be at least 1, got {threads}", field="threads")
        result = run(spec, threads=threads, out_dir=args.out)
    except (SpecError, ValidationError) as exc:
        print(json.dumps(_error_record(exc), default=str), file=sys.stderr)
        return EXIT_SPEC
    except Exception as exc:
        logger.exception("run failed")
        print(json.dumps(_error_record(exc), default=str), file=sys.stderr)
        return EXIT_RUNTIME

    print(
        json.dumps(
            {
                "experiment": result.experiment,
                "spec_hash": result.spec_hash,
                "rows": len(result.rows),
                "wall_time_s": round(result.wall_time_s, 3),
            }
        )
    )
    return 0
