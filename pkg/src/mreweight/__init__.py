"""Multiplicative reweighting of training examples for noisy-label robustness."""
from .errors import (
    CapabilityError, ConsistencyError, DataError, DimensionError, MRError, NumericError,
    ParameterError, ParseError, SchemaError, TrainingDiverged,
)
from .losses import LossKind, LossModel, ModelKind
from .objective import MixupObjective, Objective, QuadraticEnsemble
from .optim import OptimConfig, mr_gd_run, mr_sampled_sgd_run, mr_sgd_run
from .reweighting import ReweightState, init_uniform, normalize
from .trainer import ExperimentSpec, grid_search_eta, run_experiment

__version__ = "0.1.0"
