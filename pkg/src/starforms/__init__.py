"""Regularized Poincare and Bogovskii operators for differential forms on star-shaped domains."""

from .bogovskii import BogovskiiConfig, apply_bogovskii, bogovskii_field, exactness_check_bogovskii
from .chain import ChainDecomposition, build_chain, glue_bc, glue_no_bc, partition_of_unity
from .constants import (
    BoundRangeError,
    BoundReport,
    bound_sweep,
    chain_bound,
    cigar_family,
    dirichlet_constant,
    estimate_empirical_ratio,
    h1_bound,
    h2_bound_poincare,
    kappa,
    poincare_constant_KP,
)
from .exterior import DegreeError, FormValue, contract, hodge_star, wedge
from .geometry import Ball, Cigar, Domain, Ellipsoid, RadialStar2D, make_domain
from .mollifier import Mollifier, build_bump, c_phi_constant
from .poincare import PoincareConfig, apply_poincare_poly, apply_poincare_quad, homotopy_defect
from .polyform import FieldForm, MultiPoly, PolyForm, random_closed_form, sobolev_seminorm, trace_pairing

__all__ = [
    "Ball",
    "BogovskiiConfig",
    "BoundRangeError",
    "BoundReport",
    "ChainDecomposition",
    "Cigar",
    "DegreeError",
    "Domain",
    "Ellipsoid",
    "FieldForm",
    "FormValue",
    "Mollifier",
    "MultiPoly",
    "PoincareConfig",
    "PolyForm",
    "RadialStar2D",
    "apply_bogovskii",
    "apply_poincare_poly",
    "apply_poincare_quad",
    "bogovskii_field",
    "bound_sweep",
    "build_bump",
    "build_chain",
    "c_phi_constant",
    "chain_bound",
    "cigar_family",
    "contract",
    "dirichlet_constant",
    "estimate_empirical_ratio",
    "exactness_check_bogovskii",
    "glue_bc",
    "glue_no_bc",
    "h1_bound",
    "h2_bound_poincare",
    "hodge_star",
    "homotopy_defect",
    "kappa",
    "make_domain",
    "partition_of_unity",
    "poincare_constant_KP",
    "random_closed_form",
    "sobolev_seminorm",
    "trace_pairing",
    "wedge",
]
