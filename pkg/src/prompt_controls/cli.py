"""Command line entry points.

``serve`` runs the HTTP/SSE service against a live, replaying, or
recording backend. ``replay`` executes a scenario file headlessly under
the virtual clock and diffs the canonical transcript against a golden
file; exit status 0 means byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .gateway import BackendConfig
from .harness import diff_golden, run_scenario_file
from .session import Mode


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prompt-controls")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP + SSE service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--backend", choices=["live", "replay", "record"], default="live")
    serve.add_argument("--fixtures", type=Path, default=None, help="fixture directory (replay/record)")
    serve.add_argument("--fixture", default=None, help="fixture id every replay session uses")
    serve.add_argument("--mode", choices=["dynamic", "static"], default="dynamic",
                       help="default mode for new sessions")
    serve.add_argument("--store", type=Path, default=None, help="session persistence directory")
    serve.add_argument("--model", default=None)
    serve.add_argument("--base-url", default=None)

    replay = sub.add_parser("replay", help="run a scenario and diff its transcript")
    replay.add_argument("--scenario", type=Path, required=True)
    replay.add_argument("--golden", type=Path, required=True)
    replay.add_argument("--fixtures", type=Path, default=None,
                        help="directory holding <fixture>.fixture.json (default: scenario dir)")
    replay.add_argument("--update-golden", action="store_true",
                        help="rewrite the golden file from this run")
    return parser


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, build_service

    backend_config = BackendConfig(
        base_url=args.base_url or os.environ.get("OPENAI_BASE_URL", BackendConfig.base_url),
        api_key=os.environ.get("OPENAI_API_KEY", ""),
        model=args.model or os.environ.get("OPENAI_MODEL", BackendConfig.model),
    )
    config = ServiceConfig(
        backend=args.backend,
        fixtures_dir=args.fixtures,
        fixture_id=args.fixture,
        default_mode=Mode(args.mode),
        store_dir=args.store,
        backend_config=backend_config,
    )
    try:
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    app = build_service(config)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _replay(args: argparse.Namespace) -> int:
    try:
        transcript = run_scenario_file(args.scenario, args.fixtures)
    except Exception as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    if args.update_golden:
        args.golden.write_text(transcript.to_text(), encoding="utf-8")
        print(f"golden updated: {args.golden}")
        return 0
    diff = diff_golden(transcript, args.golden)
    if diff is None:
        print(f"transcript matches golden ({len(transcript.entries)} events)")
        return 0
    print(f"transcript mismatch:\n{diff}", file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args)
    return _replay(args)


if __name__ == "__main__":
    sys.exit(main())
