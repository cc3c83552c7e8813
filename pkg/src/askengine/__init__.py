"""Self-hosted scholarly literature search and exploration engine."""

__version__ = "0.1.0"
