"""Convex-geometry laboratory for volume products and boundary perturbations."""

__version__ = "0.1.0"
