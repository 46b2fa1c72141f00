"""Anomaly-focused frame sampling, dual benchmark manifests and AUC evaluation."""

__version__ = "0.1.0"
