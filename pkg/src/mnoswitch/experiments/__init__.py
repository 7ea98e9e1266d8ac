from ..latency import ingest_traces
from .harness import (
    ExperimentConfig,
    QLearningConfig,
    RunResult,
    SweepSpec,
    config_from_dict,
    load_config,
    rebuild,
    restrict_to_service,
    run_fixed_mno_baseline,
    run_sweep,
)
from .templates import REFERENCE_SERVICES, generate_scenario
