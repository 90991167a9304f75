"""Slow, loop-based reference implementations used as test oracles."""
import itertools

import numpy as np

from welfarerec.model import ModelParams
from welfarerec.sim import NO_BUY, EnvConfig, LatentWorld, SessionEvent
from welfarerec.train import event_loss


def hand_world():
    """2 users x 3 items with integer data so every metric is exact in float64.

    User 0 has a utility tie between items 0 and 2 and a zero-utility item 1.
    User 1 dislikes everything, so leaving is optimal.
    """
    users = np.array([[2.0, 1.0], [-1.0, 0.0]])
    items = np.array([[3.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
    prices = np.array([5.0, 4.0, 3.0])
    # wtp: user0 -> 7, 4, 5 ; user1 -> -3, -1, -1
    # utility: user0 -> 2, 0, 2 ; user1 -> -8, -5, -4
    cfg = EnvConfig(nb_users=2, nb_prods=3, nb_sessions=1, nb_items_session=3, dimension=2)
    return LatentWorld(users, items, prices, 1.0, cfg)


def brute_utility(world, user, item):
    w = sum(float(a) * float(b) for a, b in zip(world.user_vecs[user], world.item_vecs[item]))
    return w - float(world.prices[item])


def brute_choice(world, user, slate):
    """Enumerate slate items plus leaving; leaving wins ties, then lower id."""
    options = [(0.0, 0, NO_BUY)]
    for item in slate:
        options.append((brute_utility(world, user, item), 1, item))
    # sort by utility desc, prefer leaving (flag 0), then id asc
    options.sort(key=lambda t: (-t[0], t[1], t[2]))
    u, _, item = options[0]
    return item, u, (0.0 if item == NO_BUY else float(world.prices[item]))


def brute_metrics(world, slates):
    """All five metrics by explicit enumeration; ``slates[u]`` is a tuple of items."""
    n = world.nb_users
    tot = dict(welfare=0.0, utility=0.0, revenue=0.0, sales=0.0, precision=0.0)
    for user in range(n):
        item, u, p = brute_choice(world, user, slates[user])
        catalog = [(brute_utility(world, user, i), i) for i in range(world.nb_prods)]
        best_u, best_i = max(catalog, key=lambda t: (t[0], -t[1]))
        if best_u <= 0:
            hit = item == NO_BUY
        else:
            hit = best_i in slates[user]
        tot["welfare"] += u + p
        tot["utility"] += u
        tot["revenue"] += p
        tot["sales"] += 1.0 if u > 0 else 0.0
        tot["precision"] += 1.0 if hit else 0.0
    return {m: v / n for m, v in tot.items()}


def all_slate_profiles(nb_users, nb_prods, k):
    """Every combination of per-user ordered slates of size ``k``."""
    per_user = list(itertools.permutations(range(nb_prods), k))
    return itertools.product(per_user, repeat=nb_users)


def random_case(rng, family, nb_users=4, nb_prods=7, d=3):
    params = ModelParams(family, rng.normal(size=(nb_users, d)), rng.normal(size=(nb_prods, d)),
                         rng.normal(scale=0.5, size=nb_users))
    m = int(rng.integers(1, nb_prods + 1))
    exposed = tuple(int(i) for i in rng.choice(nb_prods, m, replace=False))
    choice = NO_BUY if rng.random() < 0.3 else exposed[int(rng.integers(m))]
    event = SessionEvent(int(rng.integers(nb_users)), 0, exposed, choice)
    prices = rng.uniform(0, 3, nb_prods)
    return params, event, prices, float(rng.uniform(0, 0.1))


def objective(params, event, prices, lam):
    """Data loss plus the event's L2 term, written out directly."""
    rows_x = params.X[event.user]
    rows_y = params.Y[list(event.exposed)]
    return event_loss(params, event, prices) + lam * (rows_x @ rows_x + np.sum(rows_y * rows_y))


def finite_difference(params, event, prices, lam, h=1e-5):
    out = {}
    for name in ("X", "Y", "rho"):
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = objective(params, event, prices, lam)
            arr[idx] = old - h
            down = objective(params, event, prices, lam)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[name] = g
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(err.max(initial=0.0)))
    return worst
