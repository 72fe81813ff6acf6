"""Fast-slow continual test-time adaptation on a toy CTC sequence model."""
from .model import ConfigurationError, ParamSet, forward, greedy_ctc_decode, restore, snapshot
from .objective import (
    LossBreakdown,
    batched_suta_loss_grad,
    entropy_loss,
    mcc_loss,
    suta_loss,
    suta_loss_grad,
    temperature_softmax,
)
from .optim import Optimizer, OptimizerConfig, OptimizerState
from .controllers import CSUTA, DSUTA, SUTA, AdaptConfig, AdaptationError, SourceModel, StepOutcome, suta_adapt
from .reset import DynamicReset, FixedReset, GaussianStats, OracleReset, ResetStrategy, fit_gaussian, lii, shift_z
from .counters import StepCounters

__version__ = "0.1.0"
