"""Laminar currents, their wedge products and strong approximation by curves."""

from .geometry import AtomicMeasure, LinearForm, make_subdivision, binned_distance
from .potentials import GridPotential, wedge_by_potentials, wedge_masses
from .laminar import GraphDisk, UniformLaminarPiece, geometric_wedge
from .models import HenonMap, iterated_line_measure
from .experiments import EXPERIMENTS, ExperimentResult

__all__ = [
    "AtomicMeasure", "LinearForm", "make_subdivision", "binned_distance",
    "GridPotential", "wedge_by_potentials", "wedge_masses",
    "GraphDisk", "UniformLaminarPiece", "geometric_wedge",
    "HenonMap", "iterated_line_measure",
    "EXPERIMENTS", "ExperimentResult",
]
