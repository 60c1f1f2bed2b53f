"""Dyadic Haar shifts, weights and sparse bounds on finite dyadic trees."""

from .backend import FLOAT, RATIONAL, as_float, get_backend, mp
from .dyadic import DyadicInterval, TreeSpec, grid_of
from .errors import *  # noqa: F401,F403
from .haar import TreeFunction, analyze, haar_function, integral, paraproduct, synthesize
from .measures import (
    DyadicMeasure,
    construct_measure,
    density_plus_atoms,
    lebesgue,
    mu_k,
    random_sibling_balanced,
    regularity_characteristics,
    sib_not_balanced,
    thm34_block,
    thm34_glued,
)
from .normlab import brute_force_norm, commutator_operator, operator_norm, shift_operator, weak_type_ratio
from .shifts import HaarShiftSpec, apply_shift, commutator, dyadic_hilbert, remainder_shift
from .sparse import build_sparse_family, cz_decompose, domination_check, sparse_forms, verify_packing
from .weights import bmo_norm, characteristic, find_admissible_delta, reverse_holder_exponent

__version__ = "0.1.0"
