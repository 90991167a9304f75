import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from welfarerec.estimators import (BestOfRecommender, OracleRecommender, PClickMFRecommender,
                                   RUMMFRecommender, SoftmaxMFRecommender, check_events, check_prices)
from welfarerec.model import UnsupportedObjectiveError
from welfarerec.sim import NO_BUY, EnvConfig, SessionEvent, generate_world, simulate_sessions
from welfarerec.slate import Objective, bestof_slates, oracle_slates


@pytest.fixture(scope="module")
def data():
    world = generate_world(EnvConfig(nb_users=40, nb_prods=12, nb_sessions=6, nb_items_session=3,
                                     dimension=3, seed=2))
    return world, simulate_sessions(world)


SMALL = dict(dimension=3, epochs=3, batch=32)


def test_get_params_and_clone():
    est = RUMMFRecommender(dimension=4, l2_weight=1e-3)
    params = est.get_params()
    assert params["dimension"] == 4 and params["l2_weight"] == 1e-3
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(epochs=7)
    assert est.epochs == 7


@pytest.mark.parametrize("cls", [RUMMFRecommender, SoftmaxMFRecommender, PClickMFRecommender])
def test_unfitted_raises(cls):
    with pytest.raises(NotFittedError):
        cls().recommend(1)


@pytest.mark.parametrize("cls", [RUMMFRecommender, SoftmaxMFRecommender])
def test_fit_recommend_softmax_families(data, cls):
    world, events = data
    est = cls(**SMALL).fit(events, world.prices, nb_users=world.nb_users)
    assert est.loss_curve_.shape == (3,)
    slates = est.recommend(2, Objective.WELFARE)
    assert slates.items.shape == (40, 2)
    probs = est.predict_proba(0, [0, 1, NO_BUY])
    assert probs.sum() == pytest.approx(1.0)
    assert est.predict_wtp().shape == (40, 12)


def test_rum_kappa_positive(data):
    world, events = data
    est = RUMMFRecommender(**SMALL).fit(events, world.prices, nb_users=world.nb_users)
    assert np.all(est.kappa_ > 0)


def test_same_random_state_same_model(data):
    world, events = data
    a = SoftmaxMFRecommender(**SMALL, random_state=3).fit(events, world.prices)
    b = SoftmaxMFRecommender(**SMALL, random_state=3).fit(events, world.prices)
    np.testing.assert_array_equal(a.params_.X, b.params_.X)


def test_pclick_restrictions(data):
    world, events = data
    est = PClickMFRecommender(**SMALL).fit(events, world.prices, nb_users=world.nb_users)
    assert est.predict_proba(0).shape == (12,)
    est.recommend(1, Objective.REVENUE)
    with pytest.raises(UnsupportedObjectiveError):
        est.recommend(1, Objective.WELFARE)
    with pytest.raises(UnsupportedObjectiveError):
        est.predict_wtp()


def test_bestof_matches_function(data):
    world, events = data
    est = BestOfRecommender().fit(events, world.prices, nb_users=world.nb_users)
    np.testing.assert_array_equal(est.recommend(3).items,
                                  bestof_slates(events, 3, 12, world.nb_users).items)
    with pytest.raises(UnsupportedObjectiveError):
        est.recommend(1, Objective.WELFARE)


def test_oracle_matches_function(data):
    world, _ = data
    est = OracleRecommender().fit(world)
    np.testing.assert_array_equal(est.recommend(2, Objective.UTILITY).items,
                                  oracle_slates(world, 2, Objective.UTILITY).items)
    with pytest.raises(TypeError):
        OracleRecommender().fit(np.zeros(3))


class TestValidation:
    def test_prices(self):
        with pytest.raises(ValueError):
            check_prices([[1.0]])
        with pytest.raises(ValueError):
            check_prices([np.nan])
        assert check_prices([1, 2]).dtype == float

    def test_events(self):
        with pytest.raises(ValueError):
            check_events([])
        with pytest.raises(TypeError):
            check_events([(0, 0, (1,), 1)])
        with pytest.raises(ValueError):
            check_events([SessionEvent(0, 0, (5,), NO_BUY)], nb_prods=3)
