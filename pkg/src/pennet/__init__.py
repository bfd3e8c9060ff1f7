"""Pyramid-context encoder network for image inpainting.

Trainable numpy implementation: cross-layer attention transfer over a
U-Net style encoder, multi-scale decoder with per-scale reconstruction
losses, and a spectrally normalized patch discriminator. Hot kernels run
through numba when available (see :mod:`pennet.backend`).
"""

from .backend import active_backend, set_backend

__version__ = "0.1.0"
__all__ = ["active_backend", "set_backend", "__version__"]
