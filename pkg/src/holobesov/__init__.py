"""Polynomial approximation, Besov-type smoothness and pseudoanalytic continuation
for holomorphic functions on strictly convex domains in C^n."""

from .geometry import Domain, ball, ellipsoid

__all__ = ["Domain", "ball", "ellipsoid"]
__version__ = "0.1.0"
