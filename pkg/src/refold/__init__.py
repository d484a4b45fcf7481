"""Cut-and-glue refolding of polyhedral manifolds.

Submodules: :mod:`geom` (planar primitives), :mod:`manifold` (faces,
gluings, refolding steps), :mod:`plan`, :mod:`planar` (doubly covered convex
polygons), :mod:`polycube` (tree-shaped polycubes), :mod:`dissect` (common
dissections), :mod:`intermediate` (two-step refolding), :mod:`render` and
:mod:`cli`.
"""

from .manifold import (
    Arc,
    Face,
    Glue,
    Manifold,
    RefoldStep,
    apply_step,
    double_cover,
    invert_step,
    labeled_isomorphic,
    validate,
)
from .plan import Plan, verify_plan

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "Face",
    "Glue",
    "Manifold",
    "Plan",
    "RefoldStep",
    "apply_step",
    "double_cover",
    "invert_step",
    "labeled_isomorphic",
    "validate",
    "verify_plan",
]
