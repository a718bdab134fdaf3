"""Headless command line: validate, render, metrics, synth, serve.

Diagnostics go to stderr; machine-readable output (JSON lines) goes to
stdout. Exit codes: 0 success, 1 failed checks or runtime errors, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .project import Project, ProjectError, validate
from .synthetic import SynthSpecError, SyntheticSpec, write_synthetic

DEFAULT_LISTEN = "127.0.0.1:8765"
LISTEN_ENV = "RVV_LISTEN"


def _parse_range(text: str) -> tuple[int, int]:
    a, sep, b = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(f"range must look like A..B, got {text!r}")
    try:
        return int(a), int(b)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad range {text!r}: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvv",
        description="Track objects in recorded RGB-D clips and bind annotations and "
                    "motion effects to them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="schema and reference checks for a project file")
    p.add_argument("--project", required=True)

    p = sub.add_parser("render", help="headless export of per-frame snapshots")
    p.add_argument("--project", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--range", type=_parse_range, default=None, metavar="A..B")
    p.add_argument("--ply", action="store_true", help="also write augmented point clouds")

    p = sub.add_parser("metrics", help="tracking-loss table for one tracker")
    p.add_argument("--project", required=True)
    p.add_argument("--tracker", required=True)
    p.add_argument("--range", type=_parse_range, default=None, metavar="A..B")

    p = sub.add_parser("synth", help="generate a synthetic sequence plus ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None)

    p = sub.add_parser("serve", help="serve an authoring session over WebSocket")
    p.add_argument("--project", required=True)
    p.add_argument("--listen", default=None, metavar="HOST:PORT")
    p.add_argument("--stride", type=int, default=4, help="live cloud downsample stride")

    return parser


def run(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # argparse already printed the message
        return int(e.code or 0)
    try:
        return _dispatch(args)
    except (ProjectError, SynthSpecError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "render":
        return _cmd_render(args)
    if args.command == "metrics":
        return _cmd_metrics(args)
    if args.command == "synth":
        return _cmd_synth(args)
    if args.command == "serve":
        return _cmd_serve(args)
    raise AssertionError(f"unhandled command {args.command}")


def _load_session(project_path: str):
    from .session import Session

    path = Path(project_path)
    project = Project.load(path)
    return Session.from_project(project, path.parent)


def _cmd_validate(args) -> int:
    path = Path(args.project)
    try:
        project = Project.load(path)
        errors = validate(project, path.parent)
    except ProjectError as e:
        errors = [str(e)]
    print(json.dumps({"ok": not errors, "errors": errors}))
    for err in errors:
        print(f"invalid: {err}", file=sys.stderr)
    return 1 if errors else 0


def _cmd_render(args) -> int:
    from .export import export_range

    session = _load_session(args.project)
    n = export_range(session, args.out, frame_range=args.range, ply=args.ply)
    print(json.dumps({"frames": n, "out": str(args.out), "ply": bool(args.ply)}))
    print(f"rendered {n} frame(s) to {args.out}", file=sys.stderr)
    return 0


def _cmd_metrics(args) -> int:
    from .session import SessionError

    session = _load_session(args.project)
    try:
        report = session.tracking_metrics(args.tracker, args.range)
    except SessionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(report))
    print(f"{'tracker':<12}{'frames':>8}{'valid':>8}{'fraction':>10}", file=sys.stderr)
    print(
        f"{report['tracker']:<12}{report['frames']:>8}{report['valid_frames']:>8}"
        f"{report['fraction']:>10.3f}",
        file=sys.stderr,
    )
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec.load(args.spec)
    gt = write_synthetic(spec, args.out, args.truth)
    doc = {"out": str(args.out), "frames": spec.frames,
           "primitives": [p.name for p in spec.primitives]}
    if args.truth:
        doc["truth"] = str(args.truth)
    print(json.dumps(doc))
    print(f"wrote {spec.frames} frame(s) to {args.out}", file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve_blocking

    listen = args.listen or os.environ.get(LISTEN_ENV, DEFAULT_LISTEN)
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"error: bad listen address {listen!r}, want HOST:PORT", file=sys.stderr)
        return 2
    serve_blocking(args.project, host, int(port_text), stride=args.stride)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
