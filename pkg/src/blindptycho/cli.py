"""``blindptycho`` command line: ``sweep``, ``wdd`` and ``validate`` subcommands.

Settings come from defaults, then an optional ``--config`` file of ``key=value``
lines, then explicit flags.  Exit codes: 0 success, 2 configuration error,
3 solver/runtime failure.
"""

import argparse
import sys
from dataclasses import asdict, fields, replace

from . import _csv
from .errors import BlindPtychoError, ConfigError
from .experiment import MODES, ExperimentConfig, load_config_file, run_sweep, run_wdd_demo, validate_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _add_config_flags(p):
    p.add_argument("--config", help="key=value settings file (flags override it)")
    for f in fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        names = [flag] if flag == "--" + f.name else [flag, "--" + f.name]
        if f.name == "wall_time":
            p.add_argument(*names, dest=f.name, action="store_const", const="true", default=None,
                           help="add a wall-time column (breaks byte-identical reruns)")
        elif f.name == "mode":
            p.add_argument(*names, dest=f.name, choices=MODES, default=None)
        elif f.name == "snr_grid":
            p.add_argument(*names, dest=f.name, default=None, metavar="DB[,DB...]",
                           help="comma-separated SNR values in dB; 'inf' for noiseless")
        else:
            p.add_argument(*names, dest=f.name, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="blindptycho", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("sweep", "Monte-Carlo sweep over the SNR grid"),
                       ("wdd", "known-mask reconstruction error versus SNR"),
                       ("validate", "check a configuration and print it normalized")):
        _add_config_flags(sub.add_parser(name, help=text))
    return parser


def config_from_args(args, default_mode=None):
    values = load_config_file(args.config) if args.config else {}
    for f in fields(ExperimentConfig):
        flag_value = getattr(args, f.name)
        if flag_value is not None:
            values[f.name] = flag_value
    cfg = ExperimentConfig()
    if default_mode and "mode" not in values:
        cfg = replace(cfg, mode=default_mode)
    return validate_config(replace(cfg, **values))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "wdd":
            cfg = config_from_args(args, default_mode="wdd-known-mask")
            out = run_wdd_demo(cfg)
        else:
            cfg = config_from_args(args)
            if args.command == "validate":
                for key, value in asdict(cfg).items():
                    if key == "snr_grid":
                        value = ",".join(_csv.fmt(float(s)) for s in value)
                    print(f"{key}={_csv.fmt(value)}")
                return EXIT_OK
            out = run_sweep(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlindPtychoError as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
