"""End-to-end pipeline: simulate, fit, build slates, score, aggregate over seeds."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .metrics import MetricReport, aggregate, compute_metrics, objectives_table, pivot_table, write_report_csv
from .sim import EnvConfig, generate_world, simulate_sessions
from .slate import Method, Objective, bestof_slates, is_supported, model_slates, oracle_slates, write_slates_csv
from .train import TrainConfig, events_to_arrays, fit

_logger = logging.getLogger(__name__)

PRESETS = {
    "medium1": dict(nb_sessions=3, nb_items_session=10, nb_users=1000, nb_prods=100, dimension=10),
    "medium2": dict(nb_sessions=15, nb_items_session=2, nb_users=1000, nb_prods=100, dimension=10),
    "hard": dict(nb_sessions=3, nb_items_session=10, nb_users=1000, nb_prods=1000, dimension=10),
}
PRESET_COMMON = dict(latent_variance=3.0, price_noise_lo=0.0, price_noise_hi=5.0)

ALL_METHODS = ("oracle", "bestof", "rum-mf", "mf-sm", "mf-pclick")
ALL_OBJECTIVES = tuple(o.value for o in Objective)
TRAIN_SEED_OFFSET = 10_000


def preset_config(name: str, seed: int = 0, **overrides) -> EnvConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return EnvConfig(**{**PRESET_COMMON, **base, "seed": seed, **overrides}).validate()


def _expand_methods(methods) -> list[Method]:
    out = []
    for m in methods:
        if m == "oracle":
            out += [Method.ORACLE_UTILITY, Method.ORACLE_WELFARE]
        else:
            out.append(Method(m))
    return out


@dataclass
class ExperimentConfig:
    envs: dict = field(default_factory=lambda: {"medium2": preset_config("medium2")})
    train: TrainConfig = field(default_factory=TrainConfig)
    methods: tuple = ALL_METHODS
    objectives: tuple = ALL_OBJECTIVES
    ks: tuple = (1,)
    n_seeds: int = 3
    seed: int = 0
    output_dir: str | None = None
    dump_slates: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        env = doc.pop("env", "medium2")
        envs = {}
        for item in env if isinstance(env, list) else [env]:
            if isinstance(item, str):
                envs[item] = preset_config(item)
            else:
                item = dict(item)
                name = item.pop("name", "custom")
                envs[name] = (preset_config(item.pop("preset"), **item) if "preset" in item
                              else EnvConfig(**item).validate())
        train = TrainConfig(**doc.pop("train", {}))
        known = {f.name for f in fields(cls)} - {"envs", "train"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys {sorted(unknown)}")
        for key in ("methods", "objectives", "ks"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(envs=envs, train=train, **doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "env": [{"name": n, **asdict(c)} for n, c in self.envs.items()],
            "train": asdict(self.train),
            "methods": list(self.methods), "objectives": list(self.objectives), "ks": list(self.ks),
            "n_seeds": self.n_seeds, "seed": self.seed, "output_dir": self.output_dir,
            "dump_slates": self.dump_slates,
        }


@dataclass
class SeedRun:
    env: str
    seed: int
    reports: list
    traces: dict
    slates: list


def run_seed(env_name: str, env: EnvConfig, train: TrainConfig, seed: int, methods, objectives,
             ks, keep_slates: bool = False) -> SeedRun:
    """One full pipeline run: world, sessions, fits, slates, metrics."""
    env = replace(env, seed=seed)
    world = generate_world(env)
    events = simulate_sessions(world)
    data = events_to_arrays(events)
    train = replace(train, seed=seed + TRAIN_SEED_OFFSET,
                    dimension=train.dimension if train.dimension is not None else env.dimension)
    kmax = max(ks)
    reports, traces, kept = [], {}, []

    def score(slate_set):
        for k in sorted(ks):
            s = slate_set.truncate(min(k, slate_set.k))
            rep = compute_metrics(world, s, k=k)
            reports.append(rep)
            if keep_slates:
                kept.append(s)

    for method in _expand_methods(methods):
        wanted = [Objective(o) for o in objectives]
        usable = [o for o in wanted if is_supported(method, o)]
        for o in wanted:
            if o not in usable and method not in (Method.ORACLE_UTILITY, Method.ORACLE_WELFARE, Method.BESTOF):
                _logger.warning("skipping unsupported pair %s/%s", method.value, o.value)
        if not usable:
            _logger.warning("method %s supports none of the requested objectives", method.value)
            continue
        if method in (Method.ORACLE_UTILITY, Method.ORACLE_WELFARE):
            for o in usable:
                score(oracle_slates(world, kmax, o))
        elif method is Method.BESTOF:
            score(bestof_slates(events, kmax, world.nb_prods, world.nb_users))
        else:
            result = fit(data, world.prices, method.family, train, nb_users=world.nb_users,
                         nb_prods=world.nb_prods)
            traces[method.value] = result
            for o in usable:
                score(model_slates(result.params, world.prices, kmax, o))
    return SeedRun(env_name, seed, reports, traces, kept)


def _group(reports):
    groups = {}
    for r in reports:
        groups.setdefault((r.method, r.objective, r.k), []).append(r)
    return groups


def best_objective(aggregated, method: str, k: int, metric: str = "welfare") -> MetricReport | None:
    rows = [r for r in aggregated if r.method == method and r.k == k]
    return max(rows, key=lambda r: r.value(metric)) if rows else None


def build_report_md(results: dict, runs: dict, ks) -> str:
    """Markdown tables: per-env objectives at each k, Welfare@1 across envs, Welfare over k."""
    out = ["# Experiment report", ""]
    k0 = min(ks)
    for env, agg in results.items():
        for k in sorted(ks):
            out += [f"## {env}: objectives at k={k}", "", objectives_table([r for r in agg if r.k == k]), ""]

    method_names = []
    for agg in results.values():
        for r in agg:
            if r.method not in method_names:
                method_names.append(r.method)

    columns, rows = [], {m: {} for m in method_names}
    for env, agg in results.items():
        seeds = sorted({run.seed for run in runs[env]})
        env_cols = [f"{env} seed{s}" for s in seeds] + [f"{env} mean"]
        columns += env_cols
        for m in method_names:
            best = best_objective(agg, m, k0)
            if best is None:
                continue
            for run in runs[env]:
                for r in run.reports:
                    if (r.method, r.objective, r.k) == (m, best.objective, k0):
                        rows[m][f"{env} seed{run.seed}"] = f"{r.welfare_at_k:.2f}"
            rows[m][f"{env} mean"] = f"{best.welfare_at_k:.2f} ({best.objective})"
    out += [f"## Welfare@{k0} across environments (best objective per method)", "",
            pivot_table(rows, columns), ""]

    for env, agg in results.items():
        cols = [f"Welfare@{k}" for k in sorted(ks)]
        rows = {}
        for m in method_names:
            best = best_objective(agg, m, k0)
            if best is None:
                continue
            label = f"{m} ({best.objective})"
            rows[label] = {f"Welfare@{r.k}": f"{r.welfare_at_k:.2f}" for r in agg
                           if r.method == m and r.objective == best.objective}
        out += [f"## {env}: Welfare over k", "", pivot_table(rows, cols), ""]
    return "\n".join(out)


def run_experiment(config: ExperimentConfig, output_dir=None) -> dict:
    """Run every env x seed, aggregate, and write CSV/markdown outputs when a directory is given.

    Returns ``{env_name: [aggregated MetricReport, ...]}``.
    """
    output_dir = output_dir if output_dir is not None else config.output_dir
    results, runs = {}, {}
    for env_name, env in config.envs.items():
        runs[env_name] = []
        for i in range(config.n_seeds):
            seed = config.seed + i
            _logger.info("running %s seed %d", env_name, seed)
            runs[env_name].append(run_seed(env_name, env, config.train, seed, config.methods,
                                           config.objectives, config.ks, config.dump_slates))
        all_reports = [r for run in runs[env_name] for r in run.reports]
        results[env_name] = [aggregate(group) for group in _group(all_reports).values()]

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
        agg_rows = [(env, r) for env, agg in results.items() for r in agg]
        write_report_csv([r for _, r in agg_rows], out / "metrics.csv",
                         extra_columns=[("env", [e for e, _ in agg_rows])])
        seed_rows = [(env, run.seed, r) for env, rs in runs.items() for run in rs for r in run.reports]
        write_report_csv([r for *_, r in seed_rows], out / "metrics_per_seed.csv",
                         extra_columns=[("env", [e for e, _, _ in seed_rows]),
                                        ("seed", [s for _, s, _ in seed_rows])])
        traces = out / "traces"
        traces.mkdir(exist_ok=True)
        for env, rs in runs.items():
            for run in rs:
                for method, res in run.traces.items():
                    res.write_trace(traces / f"{env}_seed{run.seed}_{method}.csv")
                if config.dump_slates:
                    write_slates_csv(run.slates, out / f"slates_{env}_seed{run.seed}.csv")
        (out / "report.md").write_text(build_report_md(results, runs, config.ks))
    return results


def summarize(results: dict, metric: str = "welfare", k: int = 1) -> dict:
    """``{env: {method: best mean value over objectives}}`` at one k."""
    out = {}
    for env, agg in results.items():
        out[env] = {}
        for m in {r.method for r in agg}:
            best = best_objective(agg, m, k, metric)
            out[env][m] = best.value(metric)
    return out


def identity_violations(reports, tol: float = 1e-9) -> list:
    return [r for r in reports
            if not np.isclose(r.welfare_at_k, r.utility_at_k + r.revenue_at_k, rtol=0, atol=tol)]
