"""Command-line client.

    fairbasis <command> --config <path> [--seed N] [--out DIR]

Commands run against the in-process service unless ``--server URL`` points
at a running one (``fairbasis serve`` starts it). Output tables are written
as CSV only after the whole command succeeds, each through a temporary file
and an atomic rename.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
import warnings
from importlib import resources
from pathlib import Path

import httpx

from .config import ConfigError, ScenarioConfig

COMMANDS = ("price", "fair-basis", "jtd-profile", "mc-verify", "capital", "regress")
EXIT_VALIDATION = 2
EXIT_FAILURE = 1


def shipped_data(filename: str) -> Path:
    return Path(str(resources.files("fairbasis") / "data" / filename))


def shipped_config(name: str) -> Path:
    """Path of a bundled scenario (``ig`` or ``hy``)."""
    return shipped_data(f"{name}.cfg")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _table_csv(table: dict) -> str:
    lines = [",".join(table["header"])] + [",".join(r) for r in table["rows"]]
    return "\n".join(lines) + "\n"


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        # starlette's transport-shim deprecation notice is irrelevant in-process
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbasis", description="Fair CDS-bond basis pricing.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument(
            "--config",
            required=name != "regress",
            help="scenario file ('ig' / 'hy' for the shipped ones); for regress, the input CSV",
        )
        p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed, overrides mc.seed")
        p.add_argument("--out", default=None, help="output directory, overrides output.dir")
        p.add_argument("--server", default=None, help="URL of a running fairbasis service")
        if name == "price":
            p.add_argument("--instrument", choices=("cds", "bond", "floating-bond", "survival"), default="bond")
        if name == "regress":
            p.add_argument("--input", default=None, help="CSV with header date,basis,lois,vix (default: shipped synthetic data)")
    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _config_path(arg: str) -> Path:
    if arg in ("ig", "hy") and not Path(arg).exists():
        return shipped_config(arg)
    return Path(arg)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("fairbasis.service:app", host=args.host, port=args.port)
        return 0

    try:
        cfg_text, cfg = None, None
        if args.command == "regress":
            source = args.input or args.config
            source = Path(source) if source else shipped_data("synthetic_basis.csv")
        elif args.config:
            cfg = ScenarioConfig.load(_config_path(args.config))
            cfg_text = cfg.to_text()
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "mc.seed")
        if args.command == "regress":
            try:
                payload = {"csv": source.read_text()}
            except OSError as exc:
                print(f"error: cannot read {source}: {exc.strerror}", file=sys.stderr)
                return EXIT_VALIDATION
        else:
            payload = {"config": cfg_text, "seed": args.seed}
            if args.command == "price":
                payload["instrument"] = args.instrument
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        with _client(args.server) as client:
            response = client.post(f"/{args.command}", json=payload)
    except httpx.HTTPError as exc:
        print(f"error: service unreachable: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    body = response.json()
    if response.status_code != 200:
        message = body.get("message") or body.get("detail") or response.text
        print(f"error: {message}", file=sys.stderr)
        return EXIT_VALIDATION if response.status_code == 422 else EXIT_FAILURE

    out_dir = Path(args.out) if args.out else Path(cfg.output_dir() if cfg else ".")
    prefix = cfg.output_prefix() if cfg else ""
    for table in body["tables"]:
        name = f"{prefix}_{table['name']}.csv" if prefix else f"{table['name']}.csv"
        write_atomic(out_dir / name, _table_csv(table))
        print(out_dir / name)
    for warning in body.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
