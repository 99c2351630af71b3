"""Simulation toolkit for one-round distributed quantum certification protocols."""

__version__ = "0.1.0"
