"""Command-line entry point: ``fraudadv {baseline,attack,sweep,transfer,full}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/numeric error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, DataError, FraudAdvError
from .experiment import (Experiment, ExperimentConfig, SyntheticSpec, apply_overrides,
                         read_config_file, write_report)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH", help="CSV in the Kaggle credit-card schema")
    src.add_argument("--synthetic", metavar="N,FRAC,D,SEP",
                     help="generate Gaussian data instead (default 20000,0.01,10,4)")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory (default results/)")
    common.add_argument("--label-column", metavar="NAME", help="label column (default Class)")
    common.add_argument("--n-jobs", type=int, help="processes for forest training")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set forest.n_trees=50")
    common.add_argument("-q", "--quiet", action="store_true", help="no terminal tables")

    p = _Parser(prog="fraudadv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("baseline", parents=[common], help="train LR and RF, score the clean test set")
    a = sub.add_parser("attack", parents=[common], help="FGSM on the LR at one epsilon")
    a.add_argument("--epsilon", type=float, required=True)
    s = sub.add_parser("sweep", parents=[common], help="LR recall over an epsilon grid")
    s.add_argument("--epsilons", metavar="E1,E2,...", help="override the epsilon grid")
    t = sub.add_parser("transfer", parents=[common], help="replay LR adversarials on the RF")
    t.add_argument("--epsilon", type=float, required=True)
    f = sub.add_parser("full", parents=[common], help="baseline, sweep, attack and transfer")
    f.add_argument("--epsilon", type=float, help="attack/transfer budget (default 2.2)")
    f.add_argument("--epsilons", metavar="E1,E2,...", help="override the epsilon grid")
    return p


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    values: dict[str, str] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    for key, attr in (("data_path", "data"), ("seed", "seed"), ("out_dir", "out"),
                      ("label_column", "label_column"), ("n_jobs", "n_jobs"),
                      ("epsilon_list", "epsilons")):
        v = getattr(args, attr, None)
        if v is not None:
            values[key] = str(v)
    if args.synthetic:
        values["synthetic"] = args.synthetic
        values["data_path"] = "none"
    cfg = apply_overrides(cfg, values)
    eps = getattr(args, "epsilon", None)
    if eps is not None or args.command in ("attack", "transfer", "full"):
        cfg = cfg.with_epsilon(cfg.attack.epsilon if eps is None else eps)
    return cfg


def _print_metrics(name: str, m: dict | None) -> None:
    if m is None:
        return
    cm = m["confusion_matrix"]
    print(f"{name:<22} accuracy {m['accuracy']:.2f}  precision {m['precision']:.2f}  "
          f"recall {m['recall']:.2f}   tp={cm['tp']} fp={cm['fp']} tn={cm['tn']} fn={cm['fn']}")


def print_summary(exp: Experiment) -> None:
    r = exp.report
    _print_metrics("clean LR", r.clean_lr)
    _print_metrics("clean RF", r.clean_rf)
    if r.sweep:
        print(f"\n{'epsilon':>8} {'recall':>7} {'precision':>9} {'accuracy':>8}")
        for row in r.sweep:
            print(f"{row['epsilon']:>8.2f} {row['recall']:>7.2f} {row['precision']:>9.2f} "
                  f"{row['accuracy']:>8.2f}")
        print()
    for e in r.adversarial:
        if e["epsilon"] == exp.cfg.attack.epsilon:
            _print_metrics(f"adversarial LR e={e['epsilon']:g}", e["metrics"])
            print(f"{'':<22} {e['n_flipped']} of {e['n_targets']} targets flipped")
    if r.transfer:
        t = r.transfer
        print(f"transfer LR->RF e={t['epsilon']:g}  successful {t['successful']}  "
              f"failed {t['failed']}  rate {t['rate']:.2f}")


def run(args) -> int:
    cfg = config_from_args(args)
    exp = Experiment(cfg)
    eps = exp.cfg.attack.epsilon
    if args.command == "baseline":
        exp.run_baseline()
    elif args.command == "attack":
        exp.run_baseline(forest=False)
        exp.run_attack(eps)
    elif args.command == "sweep":
        exp.run_baseline(forest=False)
        exp.run_epsilon_sweep()
    elif args.command == "transfer":
        exp.run_baseline()
        exp.run_attack(eps)
        exp.run_transfer(eps)
    else:
        exp.run_full()
    paths = write_report(exp, cfg.out_dir)
    if not args.quiet:
        print_summary(exp)
        print(f"wrote {len(paths)} files to {cfg.out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as e:
        print(f"fraudadv: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"fraudadv: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except FraudAdvError as e:
        print(f"fraudadv: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
