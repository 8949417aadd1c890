"""Simulation and security analysis of quantum and classical bit-string generation."""

__version__ = "0.1.0"
