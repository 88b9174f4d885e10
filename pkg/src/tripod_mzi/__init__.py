"""Dual-rail tripod quantum memory: kernels, Schmidt modes and squeezed-light scenarios."""

__version__ = "0.1.0"
