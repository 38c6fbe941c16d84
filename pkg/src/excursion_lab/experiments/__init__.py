from .config import Campaign, ExperimentConfig, load_config, parse_config
from .report import ExperimentRecord, emit_report, parse_report, summarize
from .runner import run_campaign
from .seeds import trial_seed

__all__ = [
    "Campaign", "ExperimentConfig", "ExperimentRecord", "emit_report", "load_config",
    "parse_config", "parse_report", "run_campaign", "summarize", "trial_seed",
]
