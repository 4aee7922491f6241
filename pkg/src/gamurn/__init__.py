"""Simulation and analysis of generalized attachment models and reinforced urns."""
__version__ = "0.1.0"
