"""Exactness of Shor SDP relaxations for QCQPs, decided through the geometry
of the cone of convex Lagrange multipliers."""

from .certify import (
    Certificate,
    Kind,
    Verdict,
    certify_convex_hull,
    certify_convex_hull_point,
    dual_interior_certificate,
    face_multiplier,
    kernel_obstruction,
    polyhedral_certify,
    rounding_space,
    steepness_certificate,
)
from .dual import (
    Membership,
    SolverOptions,
    Status,
    dual_gradient,
    dual_value,
    epigraph_height,
    membership,
    solve_sdp,
)
from .errors import QcqpError
from .linalg import HAVE_COMPILED, eigh, jacobi_eigh
from .model import (
    EpigraphPoint,
    Multiplier,
    QcqpInstance,
    QuadraticForm,
    Sense,
    feasible,
    gamma_membership,
    load_instance,
    make_instance,
    save_instance,
)

__version__ = "0.1.0"
