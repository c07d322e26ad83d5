"""Ship fuel-efficiency prediction: synthetic telemetry, mode clustering, features and a regression zoo."""

__version__ = "0.1.0"
