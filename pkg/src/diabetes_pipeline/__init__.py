"""Three-stage tabular diabetes analytics: detection, subtype clustering, hypothesis testing."""

__version__ = "0.1.0"
