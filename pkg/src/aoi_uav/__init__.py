"""Laser-charged multi-UAV IoT data collection: simulator, MARL trainer, oracle."""

__version__ = "0.1.0"
