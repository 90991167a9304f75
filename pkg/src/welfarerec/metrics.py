"""Ground-truth scoring of slates: Welfare, Utility, Revenue, Sales and Precision @k."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .sim import NO_BUY, LatentWorld
from .slate import SlateSet, SlateSpec

METRICS = ("welfare", "utility", "revenue", "sales", "precision")


@dataclass
class MetricReport:
    method: str
    objective: str
    k: int
    welfare_at_k: float
    utility_at_k: float
    revenue_at_k: float
    sales_at_k: float
    precision_at_k: float
    n_runs: int = 1
    dispersion: dict = field(default_factory=lambda: {m: 0.0 for m in METRICS})
    n_nobuy_users: float = 0

    def value(self, metric: str) -> float:
        return getattr(self, f"{metric}_at_k")

    def as_row(self) -> dict:
        row = {"method": self.method, "objective": self.objective, "k": self.k}
        row.update({m: self.value(m) for m in METRICS})
        row.update({f"std_{m}": self.dispersion[m] for m in METRICS})
        row.update({"n_runs": self.n_runs, "n_nobuy_users": self.n_nobuy_users})
        return row


CSV_COLUMNS = (["method", "objective", "k"] + list(METRICS) + [f"std_{m}" for m in METRICS]
               + ["n_runs", "n_nobuy_users"])


def eval_choice(world: LatentWorld, user: int, slate) -> tuple[int, float, float]:
    """Noise-free choice of ``user`` among the slate items and leaving.

    Returns ``(item, utility, price)``; leaving is ``(NO_BUY, 0, 0)`` and
    wins ties, remaining ties go to the lowest item id.
    """
    items = slate.items if isinstance(slate, SlateSpec) else tuple(slate)
    best, best_u, best_p = NO_BUY, 0.0, 0.0
    for item in sorted(set(int(i) for i in items)):
        p = float(world.prices[item])
        u = float(world.user_vecs[user] @ world.item_vecs[item]) - p
        if u > best_u:
            best, best_u, best_p = item, u, p
    return best, best_u, best_p


def _slate_choices(U: np.ndarray, prices: np.ndarray, items: np.ndarray):
    """Vectorized ``eval_choice`` over all users; ``items`` is (n_users, k)."""
    n = U.shape[0]
    r = np.arange(n)[:, None]
    if items.shape[1] == 0:
        return np.full(n, NO_BUY), np.zeros(n), np.zeros(n)
    u = U[r, items]
    # highest utility first, then lowest id
    order = np.lexsort([items, -u], axis=-1)
    top = items[np.arange(n), order[:, 0]]
    top_u = U[np.arange(n), top]
    buys = top_u > 0
    chosen = np.where(buys, top, NO_BUY)
    return chosen, np.where(buys, top_u, 0.0), np.where(buys, prices[top], 0.0)


def compute_metrics(world: LatentWorld, slates, k: int | None = None) -> MetricReport:
    """Score one slate per user against the world's noise-free utilities.

    ``slates`` is a ``SlateSet`` or a sequence of ``SlateSpec`` (one per user).
    """
    n_users = world.nb_users
    if isinstance(slates, SlateSet):
        if len(slates) != n_users:
            raise ValueError(f"expected {n_users} slates, got {len(slates)}")
        items, method, objective = slates.items, slates.method.value, slates.objective.value
        k = slates.k if k is None else k
    else:
        by_user = {s.user: s for s in slates}
        missing = [u for u in range(n_users) if u not in by_user]
        if missing:
            raise ValueError(f"no slate for users {missing[:10]}")
        first = by_user[0]
        k = first.k if k is None else k
        width = max(len(by_user[u].items) for u in range(n_users))
        if any(len(by_user[u].items) != width for u in range(n_users)):
            raise ValueError("slates must share a common size")
        items = np.array([by_user[u].items for u in range(n_users)], dtype=np.int64).reshape(n_users, width)
        method, objective = first.method.value, first.objective.value

    U = world.utility()
    chosen, u, p = _slate_choices(U, world.prices, items)

    best = U.argmax(axis=1)
    nobuy_users = U[np.arange(n_users), best] <= 0
    in_slate = (items == best[:, None]).any(axis=1)
    hits = np.where(nobuy_users, chosen == NO_BUY, in_slate)

    return MetricReport(
        method=method, objective=objective, k=int(k),
        welfare_at_k=float(np.mean(u + p)),
        utility_at_k=float(np.mean(u)),
        revenue_at_k=float(np.mean(p)),
        sales_at_k=float(np.mean(u > 0)),
        precision_at_k=float(np.mean(hits)),
        n_nobuy_users=int(nobuy_users.sum()),
    )


def aggregate(reports) -> MetricReport:
    """Mean and population standard deviation over runs of one (method, objective, k)."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    keys = {(r.method, r.objective, r.k) for r in reports}
    if len(keys) != 1:
        raise ValueError(f"cannot aggregate across configurations {sorted(keys)}")
    vals = {m: np.array([r.value(m) for r in reports]) for m in METRICS}
    first = reports[0]
    return MetricReport(
        first.method, first.objective, first.k,
        *(float(vals[m].mean()) for m in METRICS),
        n_runs=len(reports),
        dispersion={m: float(vals[m].std()) for m in METRICS},
        n_nobuy_users=float(np.mean([r.n_nobuy_users for r in reports])),
    )


def write_report_csv(reports, path, extra_columns=()) -> None:
    """Write one row per report; ``extra_columns`` are (name, per-report values) pairs."""
    reports = list(reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name for name, _ in extra_columns] + CSV_COLUMNS)
        for i, rep in enumerate(reports):
            row = rep.as_row()
            w.writerow([vals[i] for _, vals in extra_columns]
                       + [repr(row[c]) if isinstance(row[c], float) else row[c] for c in CSV_COLUMNS])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(rep: MetricReport, metric: str) -> str:
    mean = f"{rep.value(metric):.2f}"
    if rep.n_runs > 1:
        return f"{mean}+/-{rep.dispersion[metric]:.2f}"
    return mean


def objectives_table(reports) -> str:
    """Markdown table with one row per (method, objective): all five metrics."""
    lines = ["| Algo | Objective | Welfare@k | Utility@k | Revenue@k | Sales@k | Precision@k |",
             "|---|---|---:|---:|---:|---:|---:|"]
    for rep in reports:
        cells = " | ".join(_fmt(rep, m) for m in METRICS)
        lines.append(f"| {rep.method} | {rep.objective} | {cells} |")
    return "\n".join(lines)


def pivot_table(rows: dict, columns: list, row_label: str = "") -> str:
    """Markdown table from ``{row_name: {column: text}}``."""
    lines = ["| " + " | ".join([row_label] + list(columns)) + " |",
             "|---|" + "---:|" * len(columns)]
    for name, cells in rows.items():
        lines.append("| " + " | ".join([name] + [cells.get(c, "") for c in columns]) + " |")
    return "\n".join(lines)
