"""Killed random walks in cones."""

from .cones import Cone, ConeKind, InteriorSetParams
from .harmonic import HarmonicForm
from .laws import IncrementLaw, LawKind
from .kernels import default_backend

__version__ = "0.1.0"

__all__ = ["Cone", "ConeKind", "InteriorSetParams", "HarmonicForm", "IncrementLaw", "LawKind",
           "default_backend", "__version__"]
