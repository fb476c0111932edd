"""Mixture-of-experts PPO on small grid games, with continual and multi-task schedules."""

__version__ = "0.1.0"
