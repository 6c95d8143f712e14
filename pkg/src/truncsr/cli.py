"""``truncsr`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error
(divergence, missing stage dependency, non-finite values).
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiment
from .config import PRESETS, ConfigError, load_config
from .errors import FreezeViolationError, MissingDependencyError, NonFiniteError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="truncsr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in config preset")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (dotted path, YAML value)")
        return p

    common(sub.add_parser("generate-data", help="write the synthetic corpus"))
    p = common(sub.add_parser("train", help="train stage 1 or 2"))
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p = common(sub.add_parser("stability-report", help="multi-run metrics and montages"))
    p.add_argument("--no-montage", action="store_true")
    p = common(sub.add_parser("ablate", help="train and compare ablation arms"))
    p.add_argument("--grid", choices=experiment.GRIDS, default="switches")
    p = common(sub.add_parser("dump-chain", help="write one restoration's latent chain"))
    p.add_argument("--image", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--out", required=True)
    common(sub.add_parser("show-config", help="print the resolved config"))
    return parser


def _resolve(args):
    import yaml

    if args.config and args.preset:
        raise ConfigError("use either --config or --preset")
    cfg = load_config(args.config, args.preset)
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key] = yaml.safe_load(value)
    return cfg.replace(**overrides) if overrides else cfg


def run(args) -> int:
    cfg = _resolve(args)
    if args.command == "show-config":
        sys.stdout.write(cfg.to_yaml())
        return EXIT_OK
    cfg.out.mkdir(parents=True, exist_ok=True)
    cfg.save(cfg.out / "config.yaml")
    if args.command == "generate-data":
        print(experiment.generate_data(cfg))
    elif args.command == "train":
        fn = experiment.train_stage_one if args.stage == 1 else experiment.train_stage_two
        print(fn(cfg))
    elif args.command == "stability-report":
        report = experiment.stability_report(cfg, montages=not args.no_montage)
        for key, value in report.summary.items():
            print(f"{key}\t{'NA' if value is None else f'{value:.6g}'}")
    elif args.command == "ablate":
        rows = experiment.ablate(cfg, args.grid)
        for row in rows:
            print(f"{row['arm']}\tpsnr={row['psnr_mean']:.4f}\tl_std={row['l_std']}")
    elif args.command == "dump-chain":
        for path in experiment.dump_chain(cfg, args.image, args.run, args.out):
            print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, FileNotFoundError, IndexError) as exc:
        print(f"truncsr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MissingDependencyError, NonFiniteError, FreezeViolationError) as exc:
        print(f"truncsr: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
