"""``engage`` command line: run, metrics, validate.

Exit codes: 0 ok, 1 input error, 2 config error. Set ``ENGAGE_LOG`` to a
logging level name (``DEBUG``, ``INFO``, ...) for more output on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from .engine import EngineConfig, Mode, correspondence_for, load_config, metrics, read_trace, run
from .errors import (EngineError, MissingJoint, ModelValidationError, ParseError,
                     TopologyError, TopologyMismatch)
from .ingest import parse_bvh, read_stream
from .robot_model import load_model

log = logging.getLogger("engage")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="engage", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="produce an engagement trace from a pose stream")
    r.add_argument("--mode", choices=[m.value for m in Mode], default="both")
    r.add_argument("--input", required=True, help="BVH or NDJSON file, or - for stdin")
    r.add_argument("--format", choices=["bvh", "ndjson"], default=None,
                   help="input format (default: from the file extension)")
    r.add_argument("--model", help="robot model JSON")
    r.add_argument("--config", help="engine config JSON")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--delay", type=float, default=None, help="mirroring delay in seconds")
    r.add_argument("--out", default="-", help="trace file, or - for stdout")
    r.add_argument("--summary", help="write the run summary JSON here")
    r.add_argument("--workers", type=int, default=None,
                   help="threads for per-joint attention updates")

    m = sub.add_parser("metrics", help="summarize a trace")
    m.add_argument("--trace", required=True)
    m.add_argument("--summary", help="run summary JSON, for throughput")

    v = sub.add_parser("validate", help="check a robot model file")
    v.add_argument("--model", required=True)
    return p


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _load_model(path):
    try:
        return load_model(Path(path))
    except ModelValidationError as exc:
        raise ConfigError(str(exc)) from None
    except OSError as exc:
        raise ConfigError(f"cannot read model: {exc}") from None


def _load_config(path, seed) -> EngineConfig:
    try:
        return load_config(Path(path), seed=seed)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except (ValueError, KeyError, TypeError, TopologyError) as exc:
        raise ConfigError(f"bad config: {exc}") from None


def _cmd_run(args) -> int:
    if args.config is None:
        raise ConfigError("--config is required for run")
    cfg = _load_config(args.config, args.seed)
    mode = Mode(args.mode)
    if args.workers is not None and cfg.attention is not None:
        cfg.attention = replace(cfg.attention, workers=args.workers)
    delay = args.delay if args.delay is not None else cfg.delay
    model = _load_model(args.model) if args.model else None
    if mode.imitates and model is None:
        raise ConfigError(f"--model is required for mode {mode.value}")
    if mode.attends and cfg.attention is None:
        raise ConfigError(f"config has no attention section, needed for mode {mode.value}")

    fmt = args.format
    if fmt is None:
        fmt = "ndjson" if args.input.endswith((".ndjson", ".jsonl")) else "bvh"

    try:
        if fmt == "bvh":
            data = sys.stdin.buffer.read() if args.input == "-" else Path(args.input).read_bytes()
            stream = parse_bvh(data, cfg.rename)
            topo = stream.topology
        else:
            if args.input == "-":
                stream = read_stream(sys.stdin, cfg.skeleton, cfg.rename)
            else:
                lines = Path(args.input).read_text().splitlines()
                stream = read_stream(lines, cfg.skeleton, cfg.rename)
            topo = cfg.skeleton
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from None
    except ParseError as exc:
        raise InputError(f"input parse error: {exc}") from None

    corr = None
    if mode.imitates:
        try:
            corr = correspondence_for(cfg.correspondence, model, topo)
        except MissingJoint as exc:
            raise ConfigError(f"correspondence: {exc}") from None

    with _open_out(args.out) as out:
        def sink(frame):
            out.write(frame.to_json() + "\n")
        try:
            summary = run(mode, stream, model, corr, cfg.attention, delay, sink)
        except (EngineError, TopologyMismatch) as exc:
            raise InputError(str(exc)) from None
    rec = summary.to_record()
    log.info("run summary: %s", rec)
    if args.summary:
        Path(args.summary).write_text(json.dumps(rec, indent=2) + "\n")
    else:
        print(json.dumps(rec), file=sys.stderr)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    try:
        with open(args.trace) as fh:
            trace = read_trace(fh)
        timing = json.loads(Path(args.summary).read_text()) if args.summary else None
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read trace: {exc}") from None
    if not trace:
        raise InputError("trace is empty")
    print(json.dumps(metrics(trace, timing), indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    model = _load_model(args.model)
    print(f"ok: {model.name}, {len(model.joints)} joint(s): "
          + ", ".join(f"{j.name}(dof {j.dof})" for j in model.joints))
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("ENGAGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "metrics": _cmd_metrics, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"engage: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"engage: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
