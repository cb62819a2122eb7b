"""Unified-representation image matting: network, losses, metrics and benchmark tooling."""
from .losses import fuse
from .semantics import ImageType, trimap_from_alpha, unify

__version__ = "0.1.0"
__all__ = ["ImageType", "fuse", "trimap_from_alpha", "unify", "__version__"]
