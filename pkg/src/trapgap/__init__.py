"""Floquet band structure of a 2D periodic Neumann waveguide with delta-prime traps."""

from .asymptotics import (ConvergenceReport, TrialBounds, gap_convergence_study, scaling_check, trial_bounds,
                          verify_upper_bounds)
from .eigen import SpectrumSlice, smallest_eigs, solve_cell
from .floquet import BandStructure, GapReport, band_structure, detect_gaps, first_gap_endpoints
from .forms import AssembledForms, LidCondition, assemble, total_operator
from .geometry import (CellGeometry, GapConstants, canonical_geometry, effective_unit_coupling, limit_gap,
                       measures)
from .mesh import MeshedCell, build_cell_mesh, refine

__version__ = "0.1.0"

__all__ = [
    "AssembledForms", "BandStructure", "CellGeometry", "ConvergenceReport", "GapConstants", "GapReport",
    "LidCondition", "MeshedCell", "SpectrumSlice", "TrialBounds", "assemble", "band_structure",
    "build_cell_mesh", "canonical_geometry", "detect_gaps", "effective_unit_coupling", "first_gap_endpoints",
    "gap_convergence_study", "limit_gap", "measures", "refine", "scaling_check", "smallest_eigs", "solve_cell",
    "total_operator", "trial_bounds", "verify_upper_bounds",
]
