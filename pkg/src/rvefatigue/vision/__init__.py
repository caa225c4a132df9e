"""Crack geometry from atomistic snapshots: surface atoms, raster, skeleton, length."""

from .coordination import coordination_filter, coordination_numbers, default_cutoff
from .raster import ContourRaster, rasterize, read_image, write_pgm, write_png, write_raster_png
from .extract import Extraction, ExtractionSettings, extract_crack, measure_raster
from .skeleton import (
    CrackSkeleton,
    binarize_median,
    close_faces,
    crack_front,
    crack_length,
    otsu_threshold,
    overlay,
    skeletonize,
    zhang_suen,
)

__all__ = [
    "ContourRaster",
    "CrackSkeleton",
    "binarize_median",
    "close_faces",
    "extract_crack",
    "Extraction",
    "ExtractionSettings",
    "coordination_filter",
    "coordination_numbers",
    "crack_front",
    "crack_length",
    "default_cutoff",
    "otsu_threshold",
    "measure_raster",
    "overlay",
    "rasterize",
    "read_image",
    "skeletonize",
    "write_pgm",
    "write_png",
    "write_raster_png",
    "zhang_suen",
]
