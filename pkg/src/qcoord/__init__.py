"""Quantum learning and estimation toolkit for risk-averse distribution-network / energy-community coordination."""

__version__ = "0.1.0"
