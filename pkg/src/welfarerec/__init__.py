"""Welfare-aware recommendation with a random-utility matrix factorization model."""
from .estimators import (BestOfRecommender, OracleRecommender, PClickMFRecommender, RUMMFRecommender,
                         SoftmaxMFRecommender)
from .experiment import ExperimentConfig, preset_config, run_experiment
from .metrics import MetricReport, compute_metrics
from .model import Family, ModelParams
from .sim import NO_BUY, EnvConfig, LatentWorld, generate_world, simulate_sessions
from .slate import Method, Objective
from .train import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "BestOfRecommender", "OracleRecommender", "PClickMFRecommender", "RUMMFRecommender",
    "SoftmaxMFRecommender", "ExperimentConfig", "preset_config", "run_experiment", "MetricReport",
    "compute_metrics", "Family", "ModelParams", "NO_BUY", "EnvConfig", "LatentWorld",
    "generate_world", "simulate_sessions", "Method", "Objective", "TrainConfig", "fit",
]
