"""Adapter command line.

    wxadapter <exchange-dir>                     one protocol step (stub model)
    wxadapter step <exchange-dir> [options]      the same, with options
    wxadapter convert <src> <time> <out.wxs>     archive slice -> snapshot

Exit codes: 0 success, 2 input/validation failure, 3 model load failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .adapter import AdapterConfig, ModelLoadError, adapter_step
from .convert import MissingVariablesError, convert_archive
from .wxs import WxsFormatError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise WxsFormatError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="wxadapter")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("step", help="advance input.wxs by one 6-hour step")
    s.add_argument("exchange_dir")
    s.add_argument("--model", default="stub", help="model identifier or checkpoint path")
    s.add_argument("--device", default="cpu")
    s.add_argument("--mapping", default=None, help="JSON channel-order mapping file")

    s = sub.add_parser("convert", help="convert an archive slice to .wxs")
    s.add_argument("source")
    s.add_argument("timestamp", help="ISO-8601 UTC or Unix seconds")
    s.add_argument("output")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # bare directory invocation: `wxadapter <exchange-dir>`
    if len(argv) == 1 and argv[0] not in ("step", "convert", "-h", "--help") and Path(argv[0]).is_dir():
        argv = ["step", argv[0]]
    try:
        args = build_parser().parse_args(argv)
        if args.command == "step":
            config = AdapterConfig(model=args.model, device=args.device, mapping_path=args.mapping)
            adapter_step(args.exchange_dir, config)
        else:
            convert_archive(args.source, args.timestamp, args.output)
        return 0
    except ModelLoadError as e:
        print(f"model error: {e}", file=sys.stderr)
        return 3
    except MissingVariablesError as e:
        print(f"conversion error: {e}", file=sys.stderr)
        return 2
    except (WxsFormatError, OSError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
