"""Nonlinear opinion dynamics of a three-agent chain with a leader.

Simulation, equilibrium classification (high discord, majority rule, low
discord) and the kappa1..kappa4 regime boundaries in the (delta_mu, kappa)
plane.
"""
__version__ = "0.1.0"

from .bifurcation import (
    BoundaryCurve,
    BoundaryKind,
    NormalForm,
    boundary_curves,
    cubic_discriminant,
    kappa1,
    kappa2,
    kappa3,
    normal_form,
    theta_shd,
)
from .integrate import Equilibrium, SolverConfig, Trajectory, find_equilibrium, integrate
from .model import (
    DerivConvention,
    ModelParams,
    coupling,
    coupling_deriv,
    composite_deriv,
    from_rsx,
    jacobian_chain3,
    rhs_chain3,
    rhs_general,
    rsx_rhs,
    to_rsx,
)
from .regimes import (
    Regime,
    RegimeLabel,
    classify,
    kappa4_search,
    scenario_presets,
    stability_diagram,
)

__all__ = [
    "BoundaryCurve", "BoundaryKind", "NormalForm", "boundary_curves", "cubic_discriminant",
    "kappa1", "kappa2", "kappa3", "normal_form", "theta_shd",
    "Equilibrium", "SolverConfig", "Trajectory", "find_equilibrium", "integrate",
    "DerivConvention", "ModelParams", "coupling", "coupling_deriv", "composite_deriv",
    "from_rsx", "jacobian_chain3", "rhs_chain3", "rhs_general", "rsx_rhs", "to_rsx",
    "Regime", "RegimeLabel", "classify", "kappa4_search", "scenario_presets",
    "stability_diagram",
]
