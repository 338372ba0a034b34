"""Stratified benchmarking of AI radiology systems against radiologist baselines."""

__version__ = "0.1.0"
