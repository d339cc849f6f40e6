from .config import PredictorConfig, desk_config, paper_config
from .model import MotionPredictor, one_hot
from .training import (
    PredictorTrainingError,
    assemble_batch,
    eval_teacher_forced_mse,
    partition_by_cloud_size,
    sample_window_batch,
    train_predictor,
)
from .closed_loop import (
    BatchedClosedLoopPredictor,
    ClosedLoopPredictor,
    closed_loop_drift,
    mean_drift,
)

__all__ = [
    "PredictorConfig",
    "desk_config",
    "paper_config",
    "MotionPredictor",
    "one_hot",
    "train_predictor",
    "assemble_batch",
    "sample_window_batch",
    "partition_by_cloud_size",
    "eval_teacher_forced_mse",
    "PredictorTrainingError",
    "ClosedLoopPredictor",
    "BatchedClosedLoopPredictor",
    "closed_loop_drift",
    "mean_drift",
]
