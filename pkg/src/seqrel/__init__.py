"""Event-sequence scoring with compressed relation graphs."""

__version__ = "0.1.0"
