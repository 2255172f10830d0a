"""Department-aware wildfire risk pipeline and ordinal evaluation harness."""

__version__ = "0.1.0"
