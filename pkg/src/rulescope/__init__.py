"""Rule-population classifier with feature tracking and cluster-based interpretation."""

__version__ = "0.1.0"
