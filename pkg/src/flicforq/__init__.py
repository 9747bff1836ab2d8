"""Pulse-level simulator and gate compiler for two fixed-coupled qubits."""

__version__ = "0.1.0"
