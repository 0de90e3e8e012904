"""Exact simulation of strong and weak sequential measurements on pre- and post-selected qubits."""

__version__ = "0.1.0"
