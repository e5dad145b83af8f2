"""Experiment harness: orchestration, metrics, seeds and the CLI."""
