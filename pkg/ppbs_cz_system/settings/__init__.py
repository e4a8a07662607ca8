"""
PURPOSE: Package init for settings module
"""
from ppbs_cz_system.settings.experiment_config import ExperimentConfig

__all__ = ['ExperimentConfig']
