"""
Command-line entry point: one subcommand per experiment step, each driven
by a JSON config file.

    freqlemma gen-data --config configs/batch_reactor_direct.json --out out/data
    freqlemma simulate --config configs/simulate_batch_reactor.json --out out/sim
    freqlemma serve
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ValidationError

from . import io
from .config import configure_logging, get_settings
from .errors import ConfigError, FreqLemmaError, error_payload
from .models.run_config import COMMAND_CONFIGS
from .runner.commands import COMMANDS


logger = logging.getLogger(__name__)

HELP = {
    "gen-data": "generate a spectra dataset (direct or closed-loop measurement)",
    "estimate-frf": "estimate the FRF from closed-loop multisine experiments",
    "check-pe": "check (collective) persistency of excitation",
    "simulate": "data-driven simulation from a dataset",
    "freqresp": "evaluate the frequency response at complex points",
    "lqr": "data-driven LQR from input-state spectra",
    "freepc": "receding-horizon FreePC on a plant",
    "deepc": "receding-horizon DeePC on a plant",
    "mpc": "receding-horizon model-based MPC benchmark",
    "monte-carlo": "seeded Monte Carlo study over noisy datasets",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqlemma", description="Frequency-domain data-driven analysis and control.")
    parser.add_argument("--log-level", default=None, help="overrides FREQLEMMA_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, type=Path, help="JSON config file")
        p.add_argument("--out", default=Path("out"), type=Path, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--tolerance", type=float, default=None, help="overrides the config tolerance")
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def load_config(command: str, path: Path, seed: Optional[int] = None, tolerance: Optional[float] = None) -> BaseModel:
    model = COMMAND_CONFIGS[command]
    config = io.load_model(path, model)
    overrides = {}
    if seed is not None:
        if "seed" not in model.model_fields:
            raise ConfigError(f"{command} takes no seed")
        overrides["seed"] = seed
    if tolerance is not None:
        if "tolerance" not in model.model_fields:
            raise ConfigError(f"{command} takes no tolerance")
        overrides["tolerance"] = tolerance
    if not overrides:
        return config
    try:
        return model.model_validate({**config.model_dump(), **overrides})
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _report_error(exc: Exception, out: Optional[Path]) -> None:
    payload = error_payload(exc)
    print(json.dumps(payload), file=sys.stderr)
    if out is None:
        return
    try:
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "error.json", payload)
    except OSError:
        logger.exception("could not write error.json to %s", out)


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        if isinstance(value, (list, dict)):
            value = json.dumps(value) if len(json.dumps(value)) <= 200 else "(see summary.json)"
        print(f"{key}: {value}")


def serve(host: Optional[str], port: Optional[int]) -> None:
    import uvicorn

    settings = get_settings()
    uvicorn.run(
        "freqlemma.api.server:app",
        host=host or settings.api_host,
        port=port or settings.api_port,
        log_level=settings.log_level.lower(),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command == "serve":
        serve(args.host, args.port)
        return 0

    try:
        config = load_config(args.command, args.config, args.seed, args.tolerance)
        summary = COMMANDS[args.command](config, args.out)
    except (ConfigError, ValidationError) as exc:
        _report_error(exc, args.out)
        return 2
    except (FreqLemmaError, OSError) as exc:
        _report_error(exc, args.out)
        return 1
    _print_summary(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
