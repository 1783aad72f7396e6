from .artifacts import flag_artifacts
from .config import RunConfig, TrainConfig, load_run_config, save_run_config
from .early_stop import EarlyStopper
from .engine import (PipelineModels, PipelineResult, StageSummary, TASK_MODES,
                     component_hashes, effective_seed, load_flat_arrays,
                     load_pipeline_models, prepare_arrays, resolve_model_config,
                     run_pipeline, run_stage1, run_stage2, run_stage3, run_stage4,
                     train_task_classifier)
from .search import SearchResult, TrialRecord, successive_halving_search

__all__ = [
    "EarlyStopper", "PipelineModels", "PipelineResult", "RunConfig", "SearchResult",
    "StageSummary", "TASK_MODES", "TrainConfig", "TrialRecord", "component_hashes",
    "effective_seed", "flag_artifacts", "load_flat_arrays", "load_pipeline_models",
    "load_run_config",
    "prepare_arrays", "resolve_model_config", "run_pipeline", "run_stage1", "run_stage2",
    "run_stage3", "run_stage4", "save_run_config", "successive_halving_search",
    "train_task_classifier",
]
