"""Greedy top-k slate construction by expected value per sale (eVPS)."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .model import Family, ModelParams, UnsupportedObjectiveError, predict_wtp, predicted_utility, sigmoid
from .sim import NO_BUY, LatentWorld


class Objective(str, enum.Enum):
    VOLUME = "sales"
    UTILITY = "utility"
    REVENUE = "revenue"
    WELFARE = "welfare"


class Method(str, enum.Enum):
    ORACLE_UTILITY = "oracle-utility"
    ORACLE_WELFARE = "oracle-welfare"
    BESTOF = "bestof"
    RUM_MF = "rum-mf"
    MF_SM = "mf-sm"
    MF_PCLICK = "mf-pclick"

    @property
    def family(self) -> Family | None:
        return _FAMILY.get(self)

    @classmethod
    def from_family(cls, family) -> "Method":
        return {v: k for k, v in _FAMILY.items()}[Family(family)]


_FAMILY = {Method.RUM_MF: Family.RUM_MF, Method.MF_SM: Family.MF_SM, Method.MF_PCLICK: Family.MF_PCLICK}

SUPPORTED_OBJECTIVES = {
    Method.ORACLE_UTILITY: (Objective.UTILITY,),
    Method.ORACLE_WELFARE: (Objective.WELFARE,),
    Method.BESTOF: (Objective.VOLUME,),
    Method.RUM_MF: tuple(Objective),
    Method.MF_SM: tuple(Objective),
    Method.MF_PCLICK: (Objective.VOLUME, Objective.REVENUE),
}


def is_supported(method, objective) -> bool:
    return Objective(objective) in SUPPORTED_OBJECTIVES[Method(method)]


@dataclass(frozen=True)
class SlateSpec:
    user: int
    k: int
    items: tuple
    method: Method
    objective: Objective
    evps: tuple = ()


@dataclass
class SlateSet:
    """Slates of one (method, objective, k) for every user, as arrays.

    ``items[u]`` is user ``u``'s ranked slate; ``evps[u]`` the matching scores.
    """
    method: Method
    objective: Objective
    k: int
    items: np.ndarray
    evps: np.ndarray

    def __len__(self):
        return self.items.shape[0]

    def __getitem__(self, user) -> SlateSpec:
        return SlateSpec(int(user), self.k, tuple(int(i) for i in self.items[user]), self.method,
                         self.objective, tuple(float(s) for s in self.evps[user]))

    def __iter__(self):
        return (self[u] for u in range(len(self)))

    def truncate(self, k: int) -> "SlateSet":
        """Greedy slates nest, so a top-k slate is a prefix of a longer one."""
        if k > self.k:
            raise ValueError(f"cannot extend a slate of size {self.k} to {k}")
        return SlateSet(self.method, self.objective, k, self.items[:, :k], self.evps[:, :k])


def ranked_items(scores: np.ndarray, tiebreak: np.ndarray | None = None) -> np.ndarray:
    """Indices sorting each row by score descending, then ``tiebreak`` descending, then id."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    ids = np.broadcast_to(np.arange(scores.shape[1]), scores.shape)
    keys = [ids]
    if tiebreak is not None:
        keys.append(-np.atleast_2d(np.asarray(tiebreak, dtype=float)))
    keys.append(-scores)
    return np.lexsort(keys, axis=-1)


def greedy_slate(scores, k: int, user: int = 0, method=Method.RUM_MF,
                 objective=Objective.VOLUME) -> SlateSpec:
    """Top-``k`` items of one user by eVPS; ``scores`` is a vector or an {item: score} map."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if isinstance(scores, dict):
        n = max(scores) + 1
        vec = np.full(n, -np.inf)
        for item, s in scores.items():
            vec[item] = s
        present = np.zeros(n, dtype=bool)
        present[list(scores)] = True
    else:
        vec = np.asarray(scores, dtype=float)
        present = np.ones(vec.size, dtype=bool)
    order = [i for i in ranked_items(vec)[0] if present[i]][:k]
    return SlateSpec(user, min(k, len(order)), tuple(int(i) for i in order), Method(method),
                     Objective(objective), tuple(float(vec[i]) for i in order))


def evps_matrix(params: ModelParams, prices, objective, users=None) -> np.ndarray:
    """eVPS of every (user, item) pair under a learned model."""
    objective = Objective(objective)
    prices = np.asarray(prices, dtype=float)
    users = np.arange(params.X.shape[0]) if users is None else np.asarray(users)
    fam = params.family
    if fam is Family.MF_PCLICK and objective in (Objective.UTILITY, Objective.WELFARE):
        raise UnsupportedObjectiveError(f"MF_PCLICK does not support the {objective.value} objective")
    dots = params.X[users] @ params.Y.T
    if fam is Family.RUM_MF:
        kap = np.exp(params.rho[users])[:, None]
        prob = sigmoid(dots - kap * prices[None, :])
    else:
        prob = sigmoid(dots)
    return prob * _model_value(params, users, prices, objective)


def _model_value(params, users, prices, objective):
    n_items = params.Y.shape[0]
    if objective is Objective.VOLUME:
        return np.ones((users.size, n_items))
    if objective is Objective.REVENUE:
        return np.broadcast_to(prices, (users.size, n_items))
    uu, ii = users[:, None], np.arange(n_items)[None, :]
    if objective is Objective.UTILITY:
        return predicted_utility(params, uu, ii, prices[None, :])
    return predict_wtp(params, uu, ii, prices[None, :])


def evps(params, user: int, item: int, price: float, objective) -> float:
    """eVPS of one (user, item) pair.

    ``params`` is either learned ``ModelParams`` or a ``LatentWorld`` for the
    oracle, whose buy probability is 1 when the true utility is positive and
    0 otherwise.
    """
    objective = Objective(objective)
    if isinstance(params, LatentWorld):
        wtp = float(params.user_vecs[user] @ params.item_vecs[item])
        u = wtp - price
        value = {Objective.VOLUME: 1.0, Objective.UTILITY: u, Objective.REVENUE: price,
                 Objective.WELFARE: wtp}[objective]
        return float(u > 0) * value
    prices = np.zeros(params.Y.shape[0])
    prices[item] = price
    return float(evps_matrix(params, prices, objective, users=[user])[0, item])


def _truncate_rows(order: np.ndarray, scores: np.ndarray, k: int):
    k = min(k, order.shape[1])
    items = order[:, :k]
    return items, np.take_along_axis(scores, items, axis=1)


def model_slates(params: ModelParams, prices, k: int, objective) -> SlateSet:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = evps_matrix(params, prices, objective)
    items, vals = _truncate_rows(ranked_items(scores), scores, k)
    return SlateSet(Method.from_family(params.family), Objective(objective), items.shape[1], items, vals)


def oracle_scores(world: LatentWorld, objective) -> tuple[np.ndarray, np.ndarray]:
    """Oracle eVPS (1[u > 0] * true value) and the raw true value used to break its ties."""
    objective = Objective(objective)
    if objective not in (Objective.UTILITY, Objective.WELFARE):
        raise UnsupportedObjectiveError(f"the oracle ranks by utility or welfare, not {objective.value}")
    wtp = world.wtp()
    u = wtp - world.prices[None, :]
    value = u if objective is Objective.UTILITY else wtp
    return np.where(u > 0, value, 0.0), value


def oracle_slates(world: LatentWorld, k: int, objective) -> SlateSet:
    primary, value = oracle_scores(world, objective)
    items, vals = _truncate_rows(ranked_items(primary, value), primary, k)
    method = Method.ORACLE_UTILITY if Objective(objective) is Objective.UTILITY else Method.ORACLE_WELFARE
    return SlateSet(method, Objective(objective), items.shape[1], items, vals)


def oracle_slate(world: LatentWorld, user: int, k: int, objective) -> SlateSpec:
    return oracle_slates(world, k, objective)[user]


def sales_counts(events, nb_prods: int) -> np.ndarray:
    counts = np.zeros(nb_prods, dtype=np.int64)
    for ev in events:
        if ev.choice != NO_BUY:
            counts[ev.choice] += 1
    return counts


def bestof_slates(events, k: int, nb_prods: int, nb_users: int) -> SlateSet:
    """The ``k`` best-selling items, identical for every user."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts = sales_counts(events, nb_prods).astype(float)
    order = ranked_items(counts)[0][:k]
    items = np.tile(order, (nb_users, 1))
    vals = np.tile(counts[order], (nb_users, 1))
    return SlateSet(Method.BESTOF, Objective.VOLUME, items.shape[1], items, vals)


def bestof_slate(events, k: int, nb_prods: int | None = None, user: int = 0) -> SlateSpec:
    events = list(events)
    if not events:
        raise ValueError("bestof needs a non-empty event log")
    if nb_prods is None:
        nb_prods = 1 + max(max(ev.exposed, default=-1) for ev in events)
    s = bestof_slates(events, k, nb_prods, 1)
    return SlateSpec(user, s.k, tuple(int(i) for i in s.items[0]), Method.BESTOF,
                     Objective.VOLUME, tuple(float(v) for v in s.evps[0]))


def write_slates_csv(slate_sets, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "method", "objective", "k", "rank", "item", "evps"])
        for s in slate_sets:
            for user in range(len(s)):
                for rank in range(s.k):
                    w.writerow([user, s.method.value, s.objective.value, s.k, rank,
                                int(s.items[user, rank]), repr(float(s.evps[user, rank]))])
