"""Trust-scored, hash-chained information propagation on social graphs."""

__version__ = "0.1.0"
