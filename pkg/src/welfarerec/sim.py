"""Synthetic shopper simulator with known ground-truth willingness-to-pay.

A world holds latent user and item vectors whose dot product is the true
WTP, plus one static price per item. Sessions expose a user to a random
subset of the catalog; the user picks the alternative (an item or leaving)
with the highest Gumbel-perturbed utility.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

NO_BUY = -1
NOBUY_TOKEN = "NOBUY"


@dataclass(frozen=True)
class EnvConfig:
    nb_users: int = 1000
    nb_prods: int = 100
    nb_sessions: int = 3
    nb_items_session: int = 10
    dimension: int = 10
    latent_variance: float = 3.0
    price_noise_lo: float = 0.0
    price_noise_hi: float = 5.0
    kappa_true: float = 1.0
    seed: int = 0

    def validate(self) -> "EnvConfig":
        if self.nb_users <= 0 or self.nb_prods <= 0:
            raise ValueError("nb_users and nb_prods must be positive")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.nb_sessions < 0 or self.nb_items_session < 0:
            raise ValueError("nb_sessions and nb_items_session must be >= 0")
        if self.nb_items_session > self.nb_prods:
            raise ValueError(
                f"nb_items_session ({self.nb_items_session}) exceeds nb_prods ({self.nb_prods})"
            )
        if self.latent_variance < 0:
            raise ValueError("latent_variance must be >= 0")
        if self.price_noise_lo > self.price_noise_hi:
            raise ValueError("price_noise_lo must be <= price_noise_hi")
        if not self.kappa_true > 0:
            raise ValueError("kappa_true must be > 0")
        return self


@dataclass
class LatentWorld:
    user_vecs: np.ndarray
    item_vecs: np.ndarray
    prices: np.ndarray
    kappa_true: float
    config: EnvConfig = field(default_factory=EnvConfig)

    @property
    def nb_users(self) -> int:
        return self.user_vecs.shape[0]

    @property
    def nb_prods(self) -> int:
        return self.item_vecs.shape[0]

    def wtp(self) -> np.ndarray:
        """Ground-truth WTP matrix, users x items."""
        return self.user_vecs @ self.item_vecs.T

    def utility(self) -> np.ndarray:
        """Ground-truth noise-free utility matrix, users x items."""
        return self.wtp() - self.prices[None, :]

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "user_vecs": self.user_vecs.tolist(),
            "item_vecs": self.item_vecs.tolist(),
            "prices": self.prices.tolist(),
            "kappa_true": self.kappa_true,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "LatentWorld":
        doc = json.loads(text)
        config = EnvConfig(**doc["config"])
        d = config.dimension
        return cls(
            user_vecs=np.asarray(doc["user_vecs"], dtype=float).reshape(-1, d),
            item_vecs=np.asarray(doc["item_vecs"], dtype=float).reshape(-1, d),
            prices=np.asarray(doc["prices"], dtype=float),
            kappa_true=float(doc["kappa_true"]),
            config=config,
        )


@dataclass(frozen=True)
class SessionEvent:
    user: int
    session_index: int
    exposed: tuple[int, ...]
    choice: int

    def __post_init__(self):
        if len(set(self.exposed)) != len(self.exposed):
            raise ValueError(f"duplicate items in exposed set {self.exposed}")
        if self.choice != NO_BUY and self.choice not in self.exposed:
            raise ValueError(f"choice {self.choice} not in exposed set {self.exposed}")


def standard_gumbel(rng: np.random.Generator, size) -> np.ndarray:
    """Inverse-CDF standard Gumbel draws, -log(-log(U))."""
    tiny = np.finfo(float).eps
    u = np.clip(rng.random(size), tiny, 1.0 - tiny)
    return -np.log(-np.log(u))


def revenue_maximizing_price(wtps: np.ndarray) -> float:
    """Monopolist price against a fixed population of WTPs.

    Candidates are the positive WTP values; revenue at price p is
    p * #{w >= p}. Ties go to the lower price. Returns 0 when no WTP is
    positive.
    """
    w = np.sort(np.asarray(wtps, dtype=float))
    candidates = np.unique(w[w > 0])
    if candidates.size == 0:
        return 0.0
    buyers = w.size - np.searchsorted(w, candidates, side="left")
    revenue = candidates * buyers
    # np.argmax returns the first maximum, i.e. the lowest candidate price
    return float(candidates[np.argmax(revenue)])


def set_prices(user_vecs: np.ndarray, item_vecs: np.ndarray, config: EnvConfig,
               rng: np.random.Generator) -> np.ndarray:
    wtp = user_vecs @ item_vecs.T
    base = np.array([revenue_maximizing_price(wtp[:, j]) for j in range(item_vecs.shape[0])])
    noise = rng.uniform(config.price_noise_lo, config.price_noise_hi, size=base.shape)
    return base + noise


def generate_world(config: EnvConfig, rng_seed: int | None = None) -> LatentWorld:
    """Draw a world from ``config``; ``rng_seed`` overrides ``config.seed``."""
    config.validate()
    seed = config.seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)
    d = config.dimension
    sd = np.sqrt(config.latent_variance)
    user_mean = rng.normal(0.0, sd, size=d)
    item_mean = rng.normal(0.0, sd, size=d)
    user_vecs = user_mean + rng.normal(0.0, sd, size=(config.nb_users, d))
    item_vecs = item_mean + rng.normal(0.0, sd, size=(config.nb_prods, d))
    prices = set_prices(user_vecs, item_vecs, config, rng)
    return LatentWorld(user_vecs, item_vecs, prices, config.kappa_true, config)


def true_utility(world: LatentWorld, user: int, item: int) -> float:
    if not 0 <= user < world.nb_users:
        raise IndexError(f"unknown user {user}")
    if item == NO_BUY:
        return 0.0
    if not 0 <= item < world.nb_prods:
        raise IndexError(f"unknown item {item}")
    return float(world.user_vecs[user] @ world.item_vecs[item] - world.prices[item])


def simulate_sessions(world: LatentWorld, rng: np.random.Generator | int | None = None
                      ) -> list[SessionEvent]:
    """Simulate ``nb_sessions`` noisy shopping sessions for every user.

    Events are ordered by user then session index. With ``rng=None`` the
    stream is seeded from ``config.seed + 1`` so that world draws and
    session draws never share a stream.
    """
    cfg = world.config
    if rng is None:
        rng = cfg.seed + 1
    rng = np.random.default_rng(rng)
    n_users, n_items = world.nb_users, world.nb_prods
    m = cfg.nb_items_session
    n = n_users * cfg.nb_sessions
    users = np.repeat(np.arange(n_users), cfg.nb_sessions)
    sessions = np.tile(np.arange(cfg.nb_sessions), n_users)

    # uniform subsets without replacement: first m columns of random permutations
    exposed = rng.random((n, n_items)).argsort(axis=1)[:, :m]
    noise = standard_gumbel(rng, (n, m + 1))

    util = np.zeros((n, m + 1))
    if m:
        wtp = np.einsum("nd,nkd->nk", world.user_vecs[users], world.item_vecs[exposed])
        util[:, :m] = wtp - world.prices[exposed]
    # last column is the outside option with utility 0
    best = np.argmax(util + world.kappa_true * noise, axis=1)

    events = []
    for r in range(n):
        b = best[r]
        choice = NO_BUY if b == m else int(exposed[r, b])
        events.append(SessionEvent(int(users[r]), int(sessions[r]),
                                   tuple(int(i) for i in exposed[r]), choice))
    return events


def write_events_csv(events, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user", "session", "exposed", "choice"])
        for ev in events:
            choice = NOBUY_TOKEN if ev.choice == NO_BUY else str(ev.choice)
            writer.writerow([ev.user, ev.session_index, ";".join(map(str, ev.exposed)), choice])


def read_events_csv(path) -> list[SessionEvent]:
    events = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            exposed = tuple(int(i) for i in row["exposed"].split(";") if i != "")
            choice = NO_BUY if row["choice"] == NOBUY_TOKEN else int(row["choice"])
            events.append(SessionEvent(int(row["user"]), int(row["session"]), exposed, choice))
    return events


def save_world(world: LatentWorld, path) -> None:
    Path(path).write_text(world.to_json())


def load_world(path) -> LatentWorld:
    return LatentWorld.from_json(Path(path).read_text())
