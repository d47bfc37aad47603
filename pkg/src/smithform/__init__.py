"""Smith normal form and Smith massager of nonsingular integer matrices."""

from .matcore import IntMat, SmithDiagonal, det_crt, load_matrix, save_matrix
from .massager import MassagerConfig, SmithMassager, compute_smith_massager
from .certify import verify_massager

__all__ = [
    "IntMat",
    "SmithDiagonal",
    "det_crt",
    "load_matrix",
    "save_matrix",
    "MassagerConfig",
    "SmithMassager",
    "compute_smith_massager",
    "verify_massager",
]

__version__ = "0.1.0"
