"""Training time-sensitive prediction models for the near future.

The library fits neural predictors F(x, t) on a sequence of labeled data
snapshots and regularizes them so that they keep working slightly past the
last training timestamp. It ships its own small numpy autodiff engine
(reverse mode over parameters, forward mode over the scalar time input),
time-conditioned network components, the interpolation-based training
objectives, synthetic drift datasets, and an experiment runner CLI.
"""

from futurefit.autodiff import (
    Adam,
    DualTensor,
    NumericError,
    ParamStore,
    SGD,
    ShapeError,
    Tensor,
    UsageError,
)
from futurefit.data import Snapshot, TemporalDataset
from futurefit.losses import DeltaState, LossSpec
from futurefit.nets import PerFeatureTimeModel, Time2Vec, TimeModel, TimeScaler, TReLU
from futurefit.training import TrainConfig, TrainReport

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "DeltaState",
    "DualTensor",
    "LossSpec",
    "NumericError",
    "ParamStore",
    "PerFeatureTimeModel",
    "SGD",
    "ShapeError",
    "Snapshot",
    "TemporalDataset",
    "Tensor",
    "Time2Vec",
    "TimeModel",
    "TimeScaler",
    "TrainConfig",
    "TrainReport",
    "TReLU",
    "UsageError",
]
