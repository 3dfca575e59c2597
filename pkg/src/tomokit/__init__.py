"""tomokit: generalized tomographic transforms.

Subpackages cover four layers of the same idea, recovering a function (or an
operator) from integrals over a family of submanifolds:

- field        grids, phantoms, quadrature, TOMOGRD1 file I/O
- radon_affine line/hyperplane transforms and their inversions
- radon_deformed  diffeomorphism-bent and quadric-bent Radon maps
- cstomo       coherent-state (Husimi/Sudarshan) operator tomography
- group_tomo   unitary-representation sampling functions and spectral tomograms
- cli          command line front end (tomo / qtomo / gtomo)

Hot kernels run under numba when available; set TOMO_BACKEND=numpy to force
the pure-numpy fallback and TOMO_THREADS to cap kernel threads.
"""

from . import field
from . import radon_affine
from . import radon_deformed
from . import cstomo
from . import group_tomo
from .errors import ValidationError, BudgetError, GridFormatError
from ._backend import BACKEND

__all__ = [
    "field",
    "radon_affine",
    "radon_deformed",
    "cstomo",
    "group_tomo",
    "ValidationError",
    "BudgetError",
    "GridFormatError",
    "BACKEND",
]

__version__ = "0.1.0"
