"""Experiment harness: configs, test families, bounded-ratio checks, reports and the CLI."""
from .checks import Operator, Problem, RatioReport
from .config import CampaignConfig, ConfigError, default_config, load_config

__all__ = ["CampaignConfig", "ConfigError", "Operator", "Problem", "RatioReport", "default_config", "load_config"]
