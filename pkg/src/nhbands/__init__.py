"""Topological invariants of non-Hermitian Bloch Hamiltonians."""

__version__ = "0.1.0"

from .algebra import ClassGroup, Permutation, classification_group, reduced_perm_matrix, snf
from .braids import BraidInvariant, BraidWord, action_on_chern, braid_along_loop, braid_to_perm
from .models import (GridModel, KpModel, LatticeModel, eval_kp, eval_lattice, kp_weyl_positions,
                     load_grid_model)
from .nodes import NodeReport, Region, chern_sphere, classify_node, find_nodes
from .spectra import EigenFrame, decompose, discriminant, track
from .wilson import CrossingReport, CylinderSpec, WilsonFlow, count_crossings, wilson_flow, wilson_loop

__all__ = [
    "ClassGroup", "Permutation", "classification_group", "reduced_perm_matrix", "snf",
    "BraidInvariant", "BraidWord", "action_on_chern", "braid_along_loop", "braid_to_perm",
    "GridModel", "KpModel", "LatticeModel", "eval_kp", "eval_lattice", "kp_weyl_positions",
    "load_grid_model", "NodeReport", "Region", "chern_sphere", "classify_node", "find_nodes",
    "EigenFrame", "decompose", "discriminant", "track",
    "CrossingReport", "CylinderSpec", "WilsonFlow", "count_crossings", "wilson_flow", "wilson_loop",
]
