"""Mixed-dimensional poromechanics of fractured porous media.

The package is organized along the pipeline:

``geometry``     forests of subdomains, loading and validation
``meshing``      matched simplicial meshes on a forest
``spaces``       block-indexed L2 spaces over k-forests
``operators``    sparse block differential/trace/extension operators
``strain``       finite-strain and volume measures with linearization checks
``constitutive`` monotone relations, resolvents, monotonicity certification
``evolution``    the four-field backward-Euler time integrator
``oracles``      classical closed-form references (consolidation series)
``verification`` headless verification suites
``cli``          command-line front end
"""

from .geometry import MdGeometry, load_geometry, validate, closest_point_projection
from .meshing import MdMesh, build_mesh
from .spaces import MdFunction, MdSpace, build_space, inner_product

__all__ = [
    "MdGeometry",
    "load_geometry",
    "validate",
    "closest_point_projection",
    "MdMesh",
    "build_mesh",
    "MdSpace",
    "MdFunction",
    "build_space",
    "inner_product",
]

__version__ = "0.1.0"
