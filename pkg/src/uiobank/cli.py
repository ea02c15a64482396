"""Command-line entry point: ``estimator run|example|synth``.

Exit codes: 0 success, 2 synthesis failure, 3 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .bank import BankConstructionError
from .harness import bank_for, export_csv, render_plots, run
from .model import AttackScenario, ConfigError, bundled_config, load_config, parse_config
from .subsets import SubsetError, label
from .synthesis import GainSynthesisFailed, RankDeficient, spec_to_dict, verify_contraction

EXIT_SYNTHESIS = 2
EXIT_CONFIG = 3


def _reseed(scenario, settings, seed):
    scenario = AttackScenario(scenario.n_u, scenario.n_y, scenario.W_u, scenario.W_y, scenario.generators, seed)
    return scenario, dataclasses.replace(settings, seed=seed)


def _report(model, scenario, bank, metrics, out):
    print(f"bank: {bank.kind}, {len(bank.specs)} observers retained, {len(bank.excluded)} excluded")
    for i, reason in bank.excluded.items():
        print(f"  excluded {i} {bank.family[i].name}: {reason}")
    print(f"true attacks:   W_u={label(sorted(scenario.W_u))} W_y={label(sorted(scenario.W_y))}")
    for field in dataclasses.fields(metrics):
        print(f"{field.name}: {getattr(metrics, field.name)}")
    print(f"outputs written to {out}")


def _execute(model, scenario, settings, out, plots=True):
    records, metrics, bank = run(model, scenario, settings)
    export_csv(records, out)
    if plots:
        render_plots(out)
    last = records[-1]
    _report(model, scenario, bank, metrics, out)
    if last.W_u_hat is not None:
        print(f"isolated:       W_u={label(sorted(last.W_u_hat))} W_y={label(sorted(last.W_y_hat))}")
    return 0


def cmd_run(args):
    model, scenario, settings = load_config(args.config)
    if args.seed is not None:
        scenario, settings = _reseed(scenario, settings, args.seed)
    overrides = {k: v for k, v in (("horizon", args.horizon), ("epsilon", args.epsilon), ("window", args.window)) if v is not None}
    settings = dataclasses.replace(settings, **overrides)
    return _execute(model, scenario, settings, args.out, plots=not args.no_plots)


def cmd_example(args):
    data = json.loads(bundled_config(f"example{args.number}").read_text())
    data = copy.deepcopy(data)
    m = float(args.attack_magnitude)
    data["attack"]["generators"] = {"default": {"type": "uniform", "lo": -m, "hi": m}}
    model, scenario, settings = parse_config(data)
    if args.seed is not None:
        scenario, settings = _reseed(scenario, settings, args.seed)
    out = args.out or Path("out") / f"example{args.number}_m{args.attack_magnitude:g}"
    return _execute(model, scenario, settings, out, plots=not args.no_plots)


def cmd_synth(args):
    model, _, settings = load_config(args.config)
    bank = bank_for(model, settings)
    dump = {
        "kind": bank.kind,
        "observers": [],
        "excluded": [{"id": i, "name": bank.family[i].name, "reason": r} for i, r in bank.excluded.items()],
    }
    for i, spec in sorted(bank.specs.items()):
        entry = spec_to_dict(spec)
        check = verify_contraction(spec, model.slopes)
        entry["verified"] = check.passed
        dump["observers"].append(entry)
        print(f"{i:3d} {spec.name:<20} lambda={spec.certificate.lam:.4f} bound={spec.certificate.bound:.4f} {'PASS' if check else 'FAIL'}")
    for e in dump["excluded"]:
        print(f"{e['id']:3d} {e['name']:<20} excluded: {e['reason']}")
    if args.out:
        Path(args.out).write_text(json.dumps(dump, indent=2))
        print(f"specs written to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="estimator", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a configuration file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--out", default="out/run")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("example", help="reproduce one of the bundled examples")
    p.add_argument("number", type=int, choices=[1, 2, 3, 4])
    p.add_argument("--attack-magnitude", type=float, default=10.0, choices=[1.0, 10.0])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("synth", help="synthesize the observer bank and dump certificates")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="JSON file for the observer matrices")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (GainSynthesisFailed, RankDeficient, BankConstructionError) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except (ConfigError, SubsetError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
