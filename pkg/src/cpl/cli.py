"""Command-line client for the experiment service.

``cpl train|eval|sweep|ablate|viz --config <file> [--set key=value]...``

Each verb loads the JSON config, applies overrides, and posts it to the
service: an in-process instance by default, or a running server named with
``--server URL``.  ``cpl serve`` starts that server.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 numeric failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx

from .config import RunConfig, load_run_config
from .errors import ConfigurationError, CplError, DataError, NumericError
from .service import create_app

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_KIND_CODES = {
    "configuration": EXIT_CONFIG,
    "data": EXIT_DATA,
    "numeric": EXIT_NUMERIC,
}


def exit_code_for(exc: CplError) -> int:
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_ERROR


def _safe_json(response) -> dict:
    try:
        body = response.json()
    except ValueError:
        return {}
    return body if isinstance(body, dict) else {}


class ServiceClient:
    """POSTs to the experiment service, in-process unless a URL is given."""

    def __init__(self, server: str | None = None):
        self._server = server
        self._app = create_app() if server is None else None

    def post(self, path: str, payload: dict):
        if self._server is None:
            return asyncio.run(self._post_in_process(path, payload))
        with httpx.Client(base_url=self._server, timeout=3600.0) as client:
            response = client.post(path, json=payload)
            return response.status_code, _safe_json(response)

    async def _post_in_process(self, path: str, payload: dict):
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://cpl.service"
        ) as client:
            response = await client.post(path, json=payload)
            return response.status_code, _safe_json(response)


def report_failure(status: int, body: dict) -> int:
    """Print a service failure and pick its exit code; 0 when healthy."""
    if status == 200:
        return EXIT_OK
    error = body.get("error")
    if status == 400 and isinstance(error, dict):
        kind = error.get("kind", "error")
        print(f"{kind} error: {error.get('message', '')}", file=sys.stderr)
        return _KIND_CODES.get(kind, EXIT_ERROR)
    if status == 422:
        print(f"configuration error: {body.get('detail')}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"service failure (HTTP {status}): {body}", file=sys.stderr)
    return EXIT_ERROR


def cmd_train(client: ServiceClient, config: RunConfig) -> int:
    status, body = client.post("/train", config.model_dump(mode="json"))
    code = report_failure(status, body)
    if code:
        return code
    print(f"trained {body['epochs']} epochs; kept epoch {body['best_epoch']}")
    print(f"val  accuracy {body['val_accuracy']:.4f}  mae {body['val_mae']:.4f}")
    print(f"test accuracy {body['test_accuracy']:.4f}  mae {body['test_mae']:.4f}")
    for key in ("checkpoint", "training_log", "summary"):
        print(f"wrote {body[key]}")
    return EXIT_OK


def cmd_eval(client: ServiceClient, config: RunConfig) -> int:
    status, body = client.post("/eval", config.model_dump(mode="json"))
    code = report_failure(status, body)
    if code:
        return code
    print(
        f"accuracy {body['accuracy']:.4f}  mae {body['mae']:.4f}  "
        f"({body['samples']} samples, {body['split']} split)"
    )
    print(f"wrote {body['output']}")
    return EXIT_OK


def cmd_sweep(client: ServiceClient, config: RunConfig) -> int:
    status, body = client.post("/sweep", config.model_dump(mode="json"))
    code = report_failure(status, body)
    if code:
        return code
    for row in body["rows"]:
        print(
            f"{body['parameter']}={row['value']:g}  "
            f"accuracy {row['accuracy']:.4f}  mae {row['mae']:.4f}"
        )
    print(f"wrote {body['output']}")
    return EXIT_OK


def cmd_ablate(client: ServiceClient, config: RunConfig) -> int:
    status, body = client.post("/ablate", config.model_dump(mode="json"))
    code = report_failure(status, body)
    if code:
        return code
    for row in body["rows"]:
        print(
            f"{row['variant']}: accuracy {row['accuracy']:.4f}  "
            f"mae {row['mae']:.4f}"
        )
    print(f"wrote {body['output']}")
    return EXIT_OK


def cmd_viz(client: ServiceClient, config: RunConfig) -> int:
    status, body = client.post("/viz", config.model_dump(mode="json"))
    code = report_failure(status, body)
    if code:
        return code
    print(f"plotted {body['samples']} samples (accuracy {body['accuracy']:.4f})")
    for key in ("proxies", "features", "figure"):
        print(f"wrote {body[key]}")
    return EXIT_OK


_HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "viz": cmd_viz,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpl",
        description="Train and analyze ordinal classifiers with proxy layouts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "train a model and write checkpoint, log, and summary"),
        ("eval", "evaluate a checkpoint and write metrics"),
        ("sweep", "train across a hyperparameter grid"),
        ("ablate", "compare a variant against its reference"),
        ("viz", "export 2-d proxy/feature coordinates and an SVG figure"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON run config")
        cmd.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key (value parsed as JSON when possible)",
        )
        cmd.add_argument(
            "--server", default=None,
            help="URL of a running service (default: run in-process)",
        )
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("cpl.service:app", host=args.host, port=args.port)
        return EXIT_OK
    try:
        config = load_run_config(args.config, args.set)
    except CplError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    client = ServiceClient(args.server)
    try:
        return _HANDLERS[args.command](client, config)
    except httpx.HTTPError as exc:
        print(f"cannot reach the service: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
