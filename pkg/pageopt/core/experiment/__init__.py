"""Experiment orchestration and CSV persistence."""
