"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the command line
interface copies into its JSON error record.
"""


class QcqpError(Exception):
    """Base class for all domain errors raised by the package."""

    code = "qcqp_error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class DimensionMismatch(QcqpError, ValueError):
    code = "dimension_mismatch"


class NotPositiveDefinite(QcqpError):
    code = "not_positive_definite"


class NotPsd(QcqpError):
    code = "not_psd"


class EighNotConverged(QcqpError):
    code = "eigh_not_converged"


class AssumptionFailed(QcqpError):
    """The strict-feasibility search did not find a definite aggregation.

    This is not a disproof: the search is a local ascent procedure.
    """

    code = "assumption_failed"


class NotInGammaP(QcqpError):
    code = "not_in_gamma_p"


class NotOnBoundary(QcqpError):
    code = "not_on_boundary"


class NotInSsdp(QcqpError):
    code = "not_in_ssdp"


class FaceExtractionFailed(QcqpError):
    code = "face_extraction_failed"


class WrongFaceCase(QcqpError):
    code = "wrong_face_case"


class GeneratorNotInGamma(QcqpError):
    code = "generator_not_in_gamma"


class NotStrictlyFeasible(QcqpError):
    code = "not_strictly_feasible"


class SubspaceTooSmall(QcqpError):
    code = "subspace_too_small"


class GridTooLarge(QcqpError):
    code = "grid_too_large"


class TooLarge(QcqpError):
    code = "too_large"


class NotInterior(QcqpError):
    code = "not_interior"


class InvalidInstance(QcqpError, ValueError):
    code = "invalid_instance"
