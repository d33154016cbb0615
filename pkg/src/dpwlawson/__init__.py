"""Numerical construction of high-genus minimal surfaces in the 3-sphere.

The pipeline: a family of flat-connection potentials on a punctured plane,
a Newton/continuation solve of the unitary-monodromy conditions, loop-group
(Iwasawa) factorization of the solution frames, and reconstruction of closed
minimal surfaces together with their area asymptotics.
"""

__version__ = "0.1.0"

from .loops import MatrixLoop, ScalarLoop
from .potential import PotentialParams

__all__ = ["MatrixLoop", "PotentialParams", "ScalarLoop", "__version__"]


def __getattr__(name):
    # heavier subsystems are imported on first use
    if name in ("iwasawa_decompose", "finite_dim_iwasawa"):
        from . import iwasawa
        return getattr(iwasawa, name)
    if name in ("kappa", "solve_at_t", "continuation_solve", "SolveOptions",
                "certify_solution", "derivative_check"):
        from . import solver
        return getattr(solver, name)
    if name in ("area_residue", "area_quadrature", "immerse",
                "fundamental_patch", "replicate_symmetry", "export_mesh",
                "blowup_compare"):
        from . import geometry
        return getattr(geometry, name)
    raise AttributeError(name)
