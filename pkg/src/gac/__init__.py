"""Hybrid GPS/accelerometer/compass dead reckoning with duty-cycled GPS."""

__version__ = "0.1.0"
