"""Configuration, experiment runner, metrics and result persistence."""
from .config import Config, default_config, dumps_default, from_dict, load
from .detection import DetectionEval, GroundTruth, Prediction, detection_metrics
from .experiment import (TrialRecord, export, import_records, run_experiment,
                         success_rate, summarize)
from .stats import AnovaResult, one_way_anova

__all__ = [
    "AnovaResult", "Config", "DetectionEval", "GroundTruth", "Prediction", "TrialRecord",
    "default_config", "detection_metrics", "dumps_default", "export", "from_dict",
    "import_records", "load", "one_way_anova", "run_experiment", "success_rate", "summarize",
]
