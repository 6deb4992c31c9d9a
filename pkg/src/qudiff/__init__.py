"""Fully quantum diffusion image-generation engine on an exact statevector
simulator: forward scrambling, PQC reverse denoising, block-wise training."""

__version__ = "0.1.0"
