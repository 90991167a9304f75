"""Choice-model families over user/item embeddings.

Three families share the same embedding layout:

* ``RUM_MF``: softmax over ``X_u . Y_i - kappa_u * p_i`` with the outside
  option scored 0, ``kappa_u = exp(rho_u)``.
* ``MF_SM``: the same softmax without the price term.
* ``MF_PCLICK``: independent Bernoulli conversion, ``sigmoid(X_u . Y_i)``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .sim import NO_BUY

KAPPA_FLOOR = 0.1


class Family(str, enum.Enum):
    RUM_MF = "rum_mf"
    MF_SM = "mf_sm"
    MF_PCLICK = "mf_pclick"


class UnsupportedObjectiveError(ValueError):
    """Raised when a model family cannot provide the requested quantity."""


@dataclass
class ModelParams:
    family: Family
    X: np.ndarray
    Y: np.ndarray
    rho: np.ndarray

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def kappa(self) -> np.ndarray:
        return np.exp(self.rho)

    @classmethod
    def init(cls, family, nb_users: int, nb_prods: int, d: int,
             rng: np.random.Generator, scale: float = 0.1) -> "ModelParams":
        """Small Gaussian embeddings (std ``scale``) and ``rho = 0``."""
        X = rng.normal(0.0, scale, size=(nb_users, d))
        Y = rng.normal(0.0, scale, size=(nb_prods, d))
        return cls(Family(family), X, Y, np.zeros(nb_users))

    def copy(self) -> "ModelParams":
        return ModelParams(self.family, self.X.copy(), self.Y.copy(), self.rho.copy())

    def to_json(self) -> str:
        return json.dumps({
            "family": self.family.value,
            "d": self.d,
            "X": self.X.tolist(),
            "Y": self.Y.tolist(),
            "rho": self.rho.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        doc = json.loads(text)
        d = int(doc["d"])
        return cls(
            Family(doc["family"]),
            np.asarray(doc["X"], dtype=float).reshape(-1, d),
            np.asarray(doc["Y"], dtype=float).reshape(-1, d),
            np.asarray(doc["rho"], dtype=float),
        )


def save_checkpoint(params: ModelParams, path) -> None:
    Path(path).write_text(params.to_json())


def load_checkpoint(path) -> ModelParams:
    return ModelParams.from_json(Path(path).read_text())


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    z = scores - np.max(scores, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x):
    return expit(x)


def choice_scores(params: ModelParams, user: int, decision_set, prices) -> np.ndarray:
    """Logit scores over ``decision_set``; the outside option scores 0."""
    if params.family is Family.MF_PCLICK:
        raise UnsupportedObjectiveError("MF_PCLICK has no categorical choice model")
    items = np.asarray(list(decision_set), dtype=int)
    if NO_BUY not in items:
        raise ValueError("decision set must contain NO_BUY")
    prices = np.asarray(prices, dtype=float)
    scores = np.zeros(items.size)
    real = items != NO_BUY
    idx = items[real]
    scores[real] = params.Y[idx] @ params.X[user]
    if params.family is Family.RUM_MF:
        scores[real] -= np.exp(params.rho[user]) * prices[idx]
    return scores


def choice_probs(params: ModelParams, user: int, decision_set, prices) -> np.ndarray:
    """Choice probabilities over ``decision_set`` (in the given order)."""
    return softmax(choice_scores(params, user, decision_set, prices))


def pclick_prob(params: ModelParams, user: int, item: int) -> float:
    if params.family is not Family.MF_PCLICK:
        raise ValueError(f"pclick_prob needs MF_PCLICK, got {params.family.value}")
    return float(sigmoid(params.X[user] @ params.Y[item]))


def predict_wtp(params: ModelParams, user, item, price=0.0):
    """Estimated WTP. Works elementwise on broadcastable user/item/price arrays."""
    dot = np.sum(params.X[user] * params.Y[item], axis=-1)
    if params.family is Family.RUM_MF:
        return dot / np.maximum(np.exp(params.rho[user]), KAPPA_FLOOR)
    if params.family is Family.MF_SM:
        return dot + price
    raise UnsupportedObjectiveError("MF_PCLICK does not estimate willingness-to-pay")


def predicted_utility(params: ModelParams, user, item, price):
    if params.family is Family.MF_SM:
        # (dot + p) - p is not exact in floating point
        return np.sum(params.X[user] * params.Y[item], axis=-1) + 0.0 * np.asarray(price)
    return predict_wtp(params, user, item, price) - price
