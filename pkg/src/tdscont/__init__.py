"""Periodic orbits, TDSs and homoclinic continuation for a delayed saddle model."""

from .model import ParameterSet, StateVector, Spectrum

__all__ = ["ParameterSet", "StateVector", "Spectrum"]
__version__ = "0.1.0"
