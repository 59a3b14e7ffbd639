"""Null controls for underactuated coupled parabolic systems by the fictitious control method."""
from .model import ActuationMatrix, CoupledSystem, ValidationReport, apply_actuation, validate_system

__version__ = "0.1.0"

__all__ = ["ActuationMatrix", "CoupledSystem", "ValidationReport", "apply_actuation",
           "validate_system", "__version__"]
