"""Reeb flows on model contact 3-manifolds.

Periodic orbits and their linearizations, blow-up torus rotation numbers,
invariant measures and linking, section criteria, separated-set entropy
bounds and a local Lift Axiom perturbation.
"""

__version__ = "0.1.0"

from .geometry import ContactManifold, ModelError, helicity, make_model, verify_contact  # noqa: E402
from .dynamics import (  # noqa: E402
    PeriodicOrbit, classify_orbit, find_periodic_orbits, flow, trajectory, transport_linearized,
)
from .blowup import TubularFrame, build_tubular_frame, rotation_number  # noqa: E402
from .measures import (  # noqa: E402
    BirkhoffSegment, CohomologyClass, TorusMeasure, WeightedOrbitMeasure, action_linking_report,
    birkhoff_integral, measure_integral, measure_intersection, weakstar_report,
)
from .seifert import SeifertMesh, orbit_surface_intersection  # noqa: E402
from .sfs import build_pr_map, check_criterion, search_positive_class, section_diagnostics  # noqa: E402
from .entropy import CatMapSuspension, dT_distance, entropy_estimate, separated_count  # noqa: E402
from .liftaxiom import build_lift, contact_hamiltonian_field, verify_lift  # noqa: E402

__all__ = [
    "ContactManifold", "ModelError", "helicity", "make_model", "verify_contact",
    "PeriodicOrbit", "classify_orbit", "find_periodic_orbits", "flow", "trajectory",
    "transport_linearized", "TubularFrame", "build_tubular_frame", "rotation_number",
    "BirkhoffSegment", "CohomologyClass", "TorusMeasure", "WeightedOrbitMeasure",
    "action_linking_report", "birkhoff_integral", "measure_integral", "measure_intersection",
    "weakstar_report", "SeifertMesh", "orbit_surface_intersection", "build_pr_map",
    "check_criterion", "search_positive_class", "section_diagnostics", "CatMapSuspension",
    "dT_distance", "entropy_estimate", "separated_count", "build_lift",
    "contact_hamiltonian_field", "verify_lift",
]
