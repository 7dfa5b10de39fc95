"""Command-line front end.

    poissonprop SUBCOMMAND CONFIG.json [--threads N] [--dotted.field VALUE ...]

Exit codes: 0 success, 1 runtime or numerical failure, 2 configuration error.
"""

import argparse
import sys

from . import config
from .errors import ConfigError, TruncationRiskError
from .experiments import COMMANDS
from .seeding import default_threads


def _split_overrides(extra):
    """Turn ``["--a.b", "4", "--c=x"]`` into ``[("a.b", 4), ("c", "x")]``."""
    out = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}", "<cli>")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError("override is missing a value", key)
            val = extra[i + 1]
            i += 2
        top = key.split(".")[0]
        if top not in config.SCHEMA["properties"]:
            raise ConfigError("unknown config field", key)
        out.append((key, config.parse_value(val)))
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="poissonprop", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="JSON experiment config")
    p.add_argument("--threads", type=int, default=None,
                   help="replication worker threads (default: all cores)")
    return p


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = config.load(args.config, _split_overrides(extra))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    threads = args.threads if args.threads and args.threads > 0 else default_threads()
    try:
        written = COMMANDS[args.command](cfg, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TruncationRiskError as exc:
        hint = f" (suggested r_max: {exc.suggested_r_max:.6g})" if exc.suggested_r_max else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
