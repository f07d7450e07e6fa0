"""Particle-based belief propagation for extended object detection and tracking.

The library provides the probabilistic models, the message-passing engine,
independent brute-force oracles, set metrics, and a reproducible simulation
scenario, plus a command-line harness (``eotspa``).
"""

from .errors import (
    DegenerateSupport,
    EotError,
    InvalidExtent,
    InvalidModel,
    NoExistence,
    NumericalFailure,
    ParseError,
    TooLarge,
)
from .geometry import EigenStructure, ShapeKind

__all__ = [
    "DegenerateSupport",
    "EigenStructure",
    "EotError",
    "InvalidExtent",
    "InvalidModel",
    "NoExistence",
    "NumericalFailure",
    "ParseError",
    "ShapeKind",
    "TooLarge",
]

__version__ = "0.1.0"
