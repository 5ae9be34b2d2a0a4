"""Offline post-processing for UAV building-inspection surveys."""

__version__ = "0.1.0"
