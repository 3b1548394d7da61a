"""facegen: synthetic face asset toolkit.

Articulated blendshape head model, identity-basis learning, statistical
samplers for identity/expression/pose/hair/illumination, strand-hair and
HDR codecs, and scene assembly/export for an external renderer.
"""

__version__ = "0.1.0"

from .mesh import MeshConnectivity, QuadMesh, build_connectivity, vertex_normals
from .model import BlendshapeModel, ModelParams, Pose, Skeleton, evaluate
from .subdivision import subdivide_catmull_clark

__all__ = [
    "__version__",
    "QuadMesh",
    "MeshConnectivity",
    "build_connectivity",
    "vertex_normals",
    "subdivide_catmull_clark",
    "BlendshapeModel",
    "ModelParams",
    "Pose",
    "Skeleton",
    "evaluate",
]
