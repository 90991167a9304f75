"""scikit-learn style recommenders wrapping the model, training and slate code.

All estimators follow the ``fit(events, prices)`` / ``recommend(k, objective)``
pattern and expose hyperparameters through ``get_params``/``set_params``, so
they can be cloned and grid-searched like any sklearn estimator.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import Family, UnsupportedObjectiveError, choice_probs, predict_wtp, sigmoid
from .sim import NO_BUY, LatentWorld, SessionEvent
from .slate import (Objective, SlateSet, bestof_slates, evps_matrix, model_slates, oracle_slates,
                    sales_counts)
from .train import EventArrays, TrainConfig, events_to_arrays, fit


def check_prices(prices) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or prices.size == 0:
        raise ValueError(f"prices must be a non-empty 1-d array, got shape {prices.shape}")
    if not np.all(np.isfinite(prices)):
        raise ValueError("prices must be finite")
    return prices


def check_events(events, nb_prods: int | None = None) -> list:
    """Validate an event log and return it as a list of ``SessionEvent``."""
    events = list(events)
    if not events:
        raise ValueError("event log is empty")
    for ev in events:
        if not isinstance(ev, SessionEvent):
            raise TypeError(f"expected SessionEvent, got {type(ev).__name__}")
        if ev.user < 0:
            raise ValueError(f"negative user id {ev.user}")
        if nb_prods is not None and any(not 0 <= i < nb_prods for i in ev.exposed):
            raise ValueError(f"event of user {ev.user} exposes an item outside the catalog")
    return events


class _FactorizationRecommender(BaseEstimator):
    """Shared fit/predict plumbing; subclasses pin the model family."""

    _family: Family

    def __init__(self, dimension=10, learning_rate=0.01, beta1=0.9, beta2=0.999, eps_adam=1e-8,
                 l2_weight=1e-4, epochs=200, batch=256, init_scale=0.1, random_state=0):
        self.dimension = dimension
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_adam = eps_adam
        self.l2_weight = l2_weight
        self.epochs = epochs
        self.batch = batch
        self.init_scale = init_scale
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            eps_adam=self.eps_adam, l2_weight=self.l2_weight, epochs=self.epochs,
            batch=self.batch, seed=int(self.random_state), dimension=self.dimension,
            init_scale=self.init_scale,
        )

    def fit(self, events, prices, nb_users=None):
        prices = check_prices(prices)
        if not isinstance(events, EventArrays):
            events = events_to_arrays(check_events(events, prices.size))
        if nb_users is None:
            nb_users = int(events.users.max()) + 1
        result = fit(events, prices, self._family, self.train_config(), nb_users=nb_users,
                     nb_prods=prices.size)
        self.params_ = result.params
        self.loss_curve_ = np.asarray(result.mean_nll)
        self.prices_ = prices
        self.n_users_, self.n_items_ = nb_users, prices.size
        return self

    def predict_wtp(self, users=None):
        """Estimated WTP matrix (users x items)."""
        check_is_fitted(self, "params_")
        users = np.arange(self.n_users_) if users is None else np.asarray(users)
        return predict_wtp(self.params_, users[:, None], np.arange(self.n_items_)[None, :],
                           self.prices_[None, :])

    def evps(self, objective, users=None):
        check_is_fitted(self, "params_")
        return evps_matrix(self.params_, self.prices_, objective, users)

    def recommend(self, k, objective=Objective.WELFARE) -> SlateSet:
        check_is_fitted(self, "params_")
        return model_slates(self.params_, self.prices_, k, objective)


class _SoftmaxMixin:
    def predict_proba(self, user, decision_set):
        """Choice probabilities over ``decision_set``, which must contain ``NO_BUY``."""
        check_is_fitted(self, "params_")
        return choice_probs(self.params_, user, decision_set, self.prices_)


class RUMMFRecommender(_SoftmaxMixin, _FactorizationRecommender):
    """Random-utility matrix factorization with a learned per-user price sensitivity."""
    _family = Family.RUM_MF

    @property
    def kappa_(self):
        check_is_fitted(self, "params_")
        return self.params_.kappa


class SoftmaxMFRecommender(_SoftmaxMixin, _FactorizationRecommender):
    """Price-blind softmax over ``X_u . Y_i`` with an outside option."""
    _family = Family.MF_SM


class PClickMFRecommender(_FactorizationRecommender):
    """Independent Bernoulli conversion model; no WTP, so only sales and revenue slates."""
    _family = Family.MF_PCLICK

    def predict_proba(self, user, items=None):
        check_is_fitted(self, "params_")
        items = np.arange(self.n_items_) if items is None else np.asarray(items)
        return sigmoid(self.params_.Y[items] @ self.params_.X[user])

    def predict_wtp(self, users=None):
        raise UnsupportedObjectiveError("MF_PCLICK does not estimate willingness-to-pay")


class BestOfRecommender(BaseEstimator):
    """Recommends the best-selling items to everybody."""

    def fit(self, events, prices, nb_users=None):
        prices = check_prices(prices)
        self.events_ = check_events(events, prices.size)
        self.n_items_ = prices.size
        self.n_users_ = nb_users if nb_users is not None else 1 + max(ev.user for ev in self.events_)
        self.sales_ = sales_counts(self.events_, self.n_items_)
        return self

    def recommend(self, k, objective=Objective.VOLUME) -> SlateSet:
        check_is_fitted(self, "sales_")
        if Objective(objective) is not Objective.VOLUME:
            raise UnsupportedObjectiveError("bestof ranks by sales only")
        return bestof_slates(self.events_, k, self.n_items_, self.n_users_)


class OracleRecommender(BaseEstimator):
    """Ranks with the simulator's ground truth; ``fit`` takes the world itself."""

    def fit(self, world: LatentWorld, prices=None):
        if not isinstance(world, LatentWorld):
            raise TypeError("the oracle is fitted on a LatentWorld")
        self.world_ = world
        return self

    def recommend(self, k, objective=Objective.WELFARE) -> SlateSet:
        check_is_fitted(self, "world_")
        return oracle_slates(self.world_, k, objective)


RECOMMENDERS = {
    Family.RUM_MF: RUMMFRecommender,
    Family.MF_SM: SoftmaxMFRecommender,
    Family.MF_PCLICK: PClickMFRecommender,
}

__all__ = ["RUMMFRecommender", "SoftmaxMFRecommender", "PClickMFRecommender", "BestOfRecommender",
           "OracleRecommender", "check_events", "check_prices", "NO_BUY"]
