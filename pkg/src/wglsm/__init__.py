"""Sampling-method imaging of a penetrable obstacle in a PEC rectangular waveguide."""

from .spectra import CrossSection, Family, ModeIndex, count_propagating, eigenpair
from .greens import GreensEvaluator, eval_freespace_dyadic, incident_field
from .scatterer import Box, Geometry, Sphere, rasterize, tight_box
from .forward import make_array, synthesize_near_field, add_noise
from .lsm import RegConfig, SamplingGrid, assemble, scan, iso_level

__all__ = [
    "CrossSection", "Family", "ModeIndex", "count_propagating", "eigenpair",
    "GreensEvaluator", "eval_freespace_dyadic", "incident_field",
    "Box", "Geometry", "Sphere", "rasterize", "tight_box",
    "make_array", "synthesize_near_field", "add_noise",
    "RegConfig", "SamplingGrid", "assemble", "scan", "iso_level",
]
