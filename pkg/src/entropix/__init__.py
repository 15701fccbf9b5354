"""Entropic fluctuation functionals of the open XY chain."""

__version__ = "0.1.0"

from .chain import ChainSpec, Interval, TailModel, preset, restrict
from .finite import ConfinedSystem, FunctionalQuery, assemble
from .fock import DiscreteMeasure, FockSystem
from .scattering import SupportSet, essential_support, smatrix
from .asymptotics import e_p_plus, e_plus, landauer_flux, rate_function

__all__ = [
    "ChainSpec",
    "Interval",
    "TailModel",
    "preset",
    "restrict",
    "ConfinedSystem",
    "FunctionalQuery",
    "assemble",
    "DiscreteMeasure",
    "FockSystem",
    "SupportSet",
    "essential_support",
    "smatrix",
    "e_plus",
    "e_p_plus",
    "landauer_flux",
    "rate_function",
]
