"""Particle-based posterior samplers: parallel SGLD, SVGD, and SGLD+R
(kernel-coupled Langevin chains with repulsion and correlated noise).
"""
from ._core import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
