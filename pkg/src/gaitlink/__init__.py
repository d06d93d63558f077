"""Planar hopper with a gait vocabulary and a data-driven transition tensor."""

__version__ = "0.1.0"
