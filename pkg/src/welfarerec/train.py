"""Regularized maximum-likelihood fitting of the choice models with sparse Adam."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Family, ModelParams, sigmoid
from .sim import NO_BUY, SessionEvent

_logger = logging.getLogger(__name__)

BLOCKS = ("X", "Y", "rho")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    l2_weight: float = 1e-4
    epochs: int = 200
    batch: int = 256
    seed: int = 0
    dimension: int | None = None  # None: take it from the caller (usually the world)
    init_scale: float = 0.1
    learn_kappa: bool = True

    def validate(self) -> "TrainConfig":
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0 < b < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {b}")
        if not self.eps_adam > 0:
            raise ValueError("eps_adam must be > 0")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be >= 0 and batch >= 1")
        return self


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        arrays = {"X": params.X, "Y": params.Y, "rho": params.rho}
        return cls({k: np.zeros_like(a) for k, a in arrays.items()},
                   {k: np.zeros_like(a) for k, a in arrays.items()}, 0)


@dataclass
class SparseGrad:
    """Gradient restricted to the rows an event (or batch) touches.

    ``rows[b]`` holds unique row indices into block ``b`` and ``values[b]``
    the matching gradient rows.
    """
    rows: dict
    values: dict

    def dense(self, params: ModelParams) -> dict:
        out = {"X": np.zeros_like(params.X), "Y": np.zeros_like(params.Y),
               "rho": np.zeros_like(params.rho)}
        for b in BLOCKS:
            out[b][self.rows[b]] = self.values[b]
        return out


@dataclass
class EventArrays:
    """Padded array view of an event log.

    ``choice_pos`` indexes into the exposed row; the value ``width``
    (one past the last column) means the outside option.
    """
    users: np.ndarray
    exposed: np.ndarray
    mask: np.ndarray
    choice_pos: np.ndarray
    prices: np.ndarray | None = None  # per-exposure prices; None means catalog prices

    def __len__(self):
        return self.users.size

    def take(self, idx) -> "EventArrays":
        return EventArrays(self.users[idx], self.exposed[idx], self.mask[idx], self.choice_pos[idx],
                           None if self.prices is None else self.prices[idx])

    def exposure_prices(self, prices: np.ndarray) -> np.ndarray:
        return prices[self.exposed] if self.prices is None else self.prices


def events_to_arrays(events) -> EventArrays:
    events = list(events)
    n = len(events)
    width = max((len(ev.exposed) for ev in events), default=0)
    users = np.empty(n, dtype=np.int64)
    exposed = np.zeros((n, width), dtype=np.int64)
    mask = np.zeros((n, width), dtype=bool)
    choice_pos = np.empty(n, dtype=np.int64)
    for r, ev in enumerate(events):
        k = len(ev.exposed)
        users[r] = ev.user
        exposed[r, :k] = ev.exposed
        mask[r, :k] = True
        if ev.choice == NO_BUY:
            choice_pos[r] = width
        else:
            try:
                choice_pos[r] = ev.exposed.index(ev.choice)
            except ValueError:
                raise ValueError(f"choice {ev.choice} not in decision set of event {r}") from None
    return EventArrays(users, exposed, mask, choice_pos)


def _data_terms(params: ModelParams, batch: EventArrays, prices: np.ndarray):
    """Per-event data loss and the gradient of each loss w.r.t. the item scores.

    Returns ``(losses, G, kap)`` with ``G`` of shape (n, width) holding
    dL/d(score of exposed item); padded slots are zero.
    """
    U = params.X[batch.users]
    Yx = params.Y[batch.exposed]
    dots = np.einsum("nd,nkd->nk", U, Yx)
    n, width = dots.shape
    fam = params.family

    if fam is Family.MF_PCLICK:
        y = np.zeros((n, width))
        bought = batch.choice_pos < width
        y[np.flatnonzero(bought), batch.choice_pos[bought]] = 1.0
        # stable binary cross-entropy: softplus(s) - y*s
        bce = np.logaddexp(0.0, dots) - y * dots
        losses = np.where(batch.mask, bce, 0.0).sum(axis=1)
        G = np.where(batch.mask, sigmoid(dots) - y, 0.0)
        return losses, G, None

    kap = np.exp(params.rho[batch.users]) if fam is Family.RUM_MF else None
    scores = np.zeros((n, width + 1))
    scores[:, :width] = dots
    if kap is not None:
        scores[:, :width] -= kap[:, None] * batch.exposure_prices(prices)
    scores[:, :width][~batch.mask] = -np.inf
    top = scores.max(axis=1, keepdims=True)
    e = np.exp(scores - top)
    z = e.sum(axis=1, keepdims=True)
    P = e / z
    lse = (top + np.log(z))[:, 0]
    losses = lse - scores[np.arange(n), batch.choice_pos]
    P[np.arange(n), batch.choice_pos] -= 1.0
    G = np.where(batch.mask, P[:, :width], 0.0)
    return losses, G, kap


def batch_losses(params: ModelParams, batch: EventArrays, prices) -> np.ndarray:
    return _data_terms(params, batch, np.asarray(prices, dtype=float))[0]


def batch_loss_grad(params: ModelParams, batch: EventArrays, prices, l2_weight: float,
                    scale: float = 1.0) -> tuple[float, SparseGrad]:
    """Summed per-event objective (data loss + L2 on the event's rows), times ``scale``.

    The gradient equals ``scale`` times the sum of the per-event gradients.
    """
    losses, reg, grad = _loss_grad(params, batch, np.asarray(prices, dtype=float), l2_weight, scale)
    return scale * (float(losses.sum()) + reg), grad


def _loss_grad(params, batch, prices, l2_weight, scale):
    losses, G, kap = _data_terms(params, batch, prices)
    U = params.X[batch.users]
    Yx = params.Y[batch.exposed]
    maskf = batch.mask[:, :, None]

    # every event penalizes its own user row and exposed item rows
    gU = np.einsum("nk,nkd->nd", G, Yx) + 2.0 * l2_weight * U
    gYx = (G[:, :, None] * U[:, None, :] + 2.0 * l2_weight * Yx) * maskf
    reg = l2_weight * (float(np.sum(U * U)) + float(np.sum(Yx * Yx * maskf)))

    x_rows, x_inv = np.unique(batch.users, return_inverse=True)
    gX = np.zeros((x_rows.size, params.d))
    np.add.at(gX, x_inv, scale * gU)

    y_rows, y_inv = np.unique(batch.exposed[batch.mask], return_inverse=True)
    gY = np.zeros((y_rows.size, params.d))
    np.add.at(gY, y_inv, scale * gYx[batch.mask])

    if kap is not None:
        g_rho_ev = np.sum(G * (-kap[:, None] * batch.exposure_prices(prices)), axis=1)
        g_rho = np.zeros(x_rows.size)
        np.add.at(g_rho, x_inv, scale * g_rho_ev)
        rho_rows = x_rows
    else:
        g_rho = np.zeros(0)
        rho_rows = np.zeros(0, dtype=np.int64)

    grad = SparseGrad({"X": x_rows, "Y": y_rows, "rho": rho_rows},
                      {"X": gX, "Y": gY, "rho": g_rho})
    return losses, reg, grad


def event_loss(params: ModelParams, event: SessionEvent, prices, l2_weight: float = 0.0) -> float:
    """Data loss of one event. The L2 term is applied per gradient step, not here."""
    return float(batch_losses(params, events_to_arrays([event]), prices)[0])


def event_grad(params: ModelParams, event: SessionEvent, prices, l2_weight: float) -> SparseGrad:
    return batch_loss_grad(params, events_to_arrays([event]), prices, l2_weight)[1]


def adam_step(params: ModelParams, grads: SparseGrad, state: AdamState, cfg: TrainConfig,
              blocks=BLOCKS) -> tuple[ModelParams, AdamState]:
    """One lazy Adam update: only touched rows move, moments included.

    The step counter is global, so bias correction follows the number of
    optimizer steps rather than per-row visits.
    """
    for b in blocks:
        if not np.all(np.isfinite(grads.values[b])):
            bad = grads.rows[b][~np.isfinite(grads.values[b]).reshape(len(grads.rows[b]), -1).all(axis=1)]
            raise FloatingPointError(f"non-finite gradient in block {b!r} at rows {bad[:10].tolist()}")
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    arrays = {"X": params.X, "Y": params.Y, "rho": params.rho}
    for b in blocks:
        rows, g = grads.rows[b], grads.values[b]
        if rows.size == 0:
            continue
        m = state.m[b][rows] * cfg.beta1 + (1.0 - cfg.beta1) * g
        v = state.v[b][rows] * cfg.beta2 + (1.0 - cfg.beta2) * (g * g)
        state.m[b][rows] = m
        state.v[b][rows] = v
        arrays[b][rows] -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps_adam)
    return params, state


@dataclass
class FitResult:
    params: ModelParams
    mean_nll: list
    reg_term: list

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "mean_nll", "reg_term"])
            for e, (nll, reg) in enumerate(zip(self.mean_nll, self.reg_term)):
                w.writerow([e, repr(nll), repr(reg)])


def _epoch_reg(params, data, l2_weight) -> float:
    """Total L2 term the per-event objectives charge over the whole log."""
    user_visits = np.bincount(data.users, minlength=params.X.shape[0])
    item_visits = np.bincount(data.exposed[data.mask], minlength=params.Y.shape[0])
    return l2_weight * float(user_visits @ np.sum(params.X ** 2, axis=1)
                             + item_visits @ np.sum(params.Y ** 2, axis=1))


def fit(events, prices, family, cfg: TrainConfig = TrainConfig(), nb_users: int | None = None,
        nb_prods: int | None = None, init: ModelParams | None = None) -> FitResult:
    """Fit one model family to an event log.

    Each step follows the minibatch mean of the per-event objectives, where
    an event's L2 term covers its user row and exposed item rows. ``rho`` is
    never penalized. Returns the final parameters and per-epoch traces.
    """
    cfg.validate()
    family = Family(family)
    data = events if isinstance(events, EventArrays) else events_to_arrays(events)
    if len(data) == 0:
        raise ValueError("cannot fit on an empty event log")
    prices = np.asarray(prices, dtype=float)
    nb_users = nb_users if nb_users is not None else int(data.users.max()) + 1
    nb_prods = nb_prods if nb_prods is not None else prices.size

    init_ss, shuffle_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    if init is None:
        if cfg.dimension is None:
            raise ValueError("TrainConfig.dimension must be set when no init is given")
        params = ModelParams.init(family, nb_users, nb_prods, cfg.dimension,
                                  np.random.default_rng(init_ss), cfg.init_scale)
    else:
        params = init.copy()
        params.family = family
    shuffle_rng = np.random.default_rng(shuffle_ss)
    state = AdamState.for_params(params)
    blocks = ("X", "Y", "rho") if family is Family.RUM_MF and cfg.learn_kappa else ("X", "Y")

    n = len(data)
    trace_nll, trace_reg = [], []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch):
            batch = data.take(order[start:start + cfg.batch])
            losses, _, grad = _loss_grad(params, batch, prices, cfg.l2_weight, 1.0 / len(batch))
            total += float(losses.sum())
            adam_step(params, grad, state, cfg, blocks)
        mean_nll = total / n
        reg = _epoch_reg(params, data, cfg.l2_weight) / n
        if trace_nll and mean_nll > 1.05 * trace_nll[-1]:
            warnings.warn(f"epoch {epoch}: mean training loss rose from {trace_nll[-1]:.4g} "
                          f"to {mean_nll:.4g}", RuntimeWarning, stacklevel=2)
        trace_nll.append(mean_nll)
        trace_reg.append(reg)
        _logger.debug("epoch %d mean_nll=%.6g reg=%.6g", epoch, mean_nll, reg)
    return FitResult(params, trace_nll, trace_reg)
