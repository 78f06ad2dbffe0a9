"""Two-stage (trial, then execution) tool-use agent pipeline: rollouts,
trajectory synthesis and filtering, rewards, evaluation, and analysis."""

__version__ = "0.1.0"
