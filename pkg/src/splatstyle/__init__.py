"""Differentiable Gaussian splatting with multiscale style transfer."""

__version__ = "0.1.0"
