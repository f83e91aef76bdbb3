"""Network-coding dissemination strategies for content-based MANETs."""
from .field import GF256, FieldSpec
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = ["GF256", "FieldSpec", "KERNEL_BACKEND"]
__version__ = "0.1.0"
