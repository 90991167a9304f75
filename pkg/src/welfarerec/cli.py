"""Command-line driver: ``simulate``, ``train``, ``evaluate`` and ``experiment``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .experiment import PRESETS, ExperimentConfig, preset_config, run_experiment
from .metrics import compute_metrics, write_report_csv
from .model import Family, load_checkpoint, save_checkpoint
from .sim import EnvConfig, generate_world, load_world, read_events_csv, save_world, simulate_sessions, write_events_csv
from .slate import Method, Objective, is_supported, model_slates, write_slates_csv
from .train import TrainConfig, events_to_arrays, fit

_logger = logging.getLogger("welfarerec")


def _ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k expects a comma-separated list of integers, got {text!r}")
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("--k values must be >= 1")
    return ks


def _read_json(path) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def _pick(doc: dict, cls, section: str) -> dict:
    """Fields of ``cls`` found either under ``doc[section]`` or at the top level."""
    names = {f.name for f in fields(cls)}
    src = doc.get(section, doc)
    if not isinstance(src, dict):
        return {}
    return {k: v for k, v in src.items() if k in names}


def _env_config(args) -> EnvConfig:
    doc = _pick(_read_json(args.config), EnvConfig, "env")
    if args.preset:
        cfg = preset_config(args.preset, **doc)
    else:
        cfg = EnvConfig(**doc)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg.validate()


def _train_config(args, dimension: int) -> TrainConfig:
    doc = _pick(_read_json(args.config), TrainConfig, "train")
    cfg = TrainConfig(**doc)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.dimension is None:
        cfg = replace(cfg, dimension=dimension)
    return cfg.validate()


def cmd_simulate(args) -> int:
    cfg = _env_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    world = generate_world(cfg)
    save_world(world, out / "world.json")
    write_events_csv(simulate_sessions(world), out / "events.csv")
    _logger.info("wrote world and %d sessions to %s", cfg.nb_users * cfg.nb_sessions, out)
    return 0


def cmd_train(args) -> int:
    world = load_world(args.world)
    events = read_events_csv(args.events)
    cfg = _train_config(args, world.config.dimension)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = fit(events_to_arrays(events), world.prices, Family(args.family.replace("-", "_")), cfg,
                 nb_users=world.nb_users, nb_prods=world.nb_prods)
    save_checkpoint(result.params, out / "checkpoint.json")
    result.write_trace(out / "loss_trace.csv")
    return 0


def cmd_evaluate(args) -> int:
    world = load_world(args.world)
    params = load_checkpoint(args.checkpoint)
    method = Method.from_family(params.family)
    ks = args.k or (1,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, slates = [], []
    for name in args.objectives.split(","):
        objective = Objective(name)
        if not is_supported(method, objective):
            _logger.warning("skipping unsupported pair %s/%s", method.value, objective.value)
            continue
        full = model_slates(params, world.prices, max(ks), objective)
        for k in sorted(ks):
            s = full.truncate(min(k, full.k))
            slates.append(s)
            reports.append(compute_metrics(world, s, k=k))
    write_report_csv(reports, out / "metrics.csv")
    if args.dump_slates:
        write_slates_csv(slates, out / "slates.csv")
    return 0


def cmd_experiment(args) -> int:
    doc = _read_json(args.config)
    if args.preset:
        doc["env"] = args.preset.split(",")
    if args.k:
        doc["ks"] = list(args.k)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.n_seeds is not None:
        doc["n_seeds"] = args.n_seeds
    if args.dump_slates:
        doc["dump_slates"] = True
    config = ExperimentConfig.from_dict(doc)
    run_experiment(config, args.out or config.output_dir or "results")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="welfarerec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=out_required, help="output directory")
        return p

    p = common(sub.add_parser("simulate", help="generate a world and its session log"))
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("train", help="fit one model family on a session log"))
    p.add_argument("--world", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--family", default="rum-mf",
                   choices=["rum-mf", "mf-sm", "mf-pclick"])
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("evaluate", help="score slates from a checkpoint"))
    p.add_argument("--world", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=_ks)
    p.add_argument("--objectives", default=",".join(o.value for o in Objective))
    p.add_argument("--dump-slates", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("experiment", help="end-to-end multi-seed run"), out_required=False)
    p.add_argument("--preset", help="preset name or comma-separated list")
    p.add_argument("--k", type=_ks)
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--dump-slates", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        _logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
