"""One-call crack extraction from an atom snapshot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .coordination import coordination_filter, default_cutoff
from .raster import ContourRaster, rasterize
from .skeleton import CrackSkeleton, binarize_median, close_faces, crack_front, crack_length, skeletonize


@dataclass(frozen=True)
class ExtractionSettings:
    """Knobs of the snapshot -> crack length chain.

    Attributes:
        lattice_constant: sets the default coordination cutoff and disc radius.
        cutoff: coordination radius in Angstrom; None means between the
            first two BCC shells.
        threshold: atoms with fewer neighbours are crack-face atoms.
        resolution: Angstrom per pixel.
        binarize_threshold: intensity cut, or "otsu".
        median_window: odd median filter width.
        face_gap: largest crack opening (Angstrom) merged into one band.
        prune_length: spur length (pixels) removed from the skeleton.
        mouth: raster edge holding the crack mouth.
        mouth_tolerance: largest gap (pixels) between skeleton and mouth edge.
    """

    lattice_constant: float = 2.85
    cutoff: float | None = None
    threshold: int = 6
    resolution: float = 1.0
    binarize_threshold: int | str = 128
    median_window: int = 3
    face_gap: float = 25.0
    prune_length: float = 5.0
    mouth: str = "left"
    mouth_tolerance: float = 20.0

    @property
    def coordination_cutoff(self) -> float:
        return self.cutoff if self.cutoff is not None else default_cutoff(self.lattice_constant)


def mouth_component(binary: np.ndarray, mouth: str = "left", reach: float = 12.0) -> np.ndarray:
    """Keep the foreground component that comes closest to the mouth edge.

    Ties (several components touching the edge) go to the larger one.
    Returns the input unchanged when it is empty.
    """
    labels, n = ndimage.label(binary, structure=np.ones((3, 3), dtype=bool))
    if n <= 1:
        return np.asarray(binary, dtype=bool)
    h, w = binary.shape
    rows, cols = np.nonzero(labels)
    gap = {"left": cols, "right": w - 1 - cols, "bottom": rows, "top": h - 1 - rows}[mouth]
    lab = labels[rows, cols]
    best_gap = np.full(n + 1, np.inf)
    np.minimum.at(best_gap, lab, gap)
    sizes = np.bincount(lab, minlength=n + 1)
    near = np.flatnonzero(best_gap <= max(reach, best_gap[1:].min()))
    keep = near[np.argmax(sizes[near])]
    return labels == keep


@dataclass
class Extraction:
    raster: ContourRaster
    binary: np.ndarray
    skeleton: CrackSkeleton
    length: float
    tip: tuple[float, float]
    surface: np.ndarray | None
    front: tuple[float, float]


def measure_raster(raster: ContourRaster, settings: ExtractionSettings = ExtractionSettings()) -> Extraction:
    """Image half of the chain: binarize + median, merge faces, thin, measure."""
    binary = binarize_median(raster, settings.binarize_threshold, settings.median_window)
    span = int(round(settings.face_gap / raster.scale))
    binary = close_faces(binary, span)
    binary = mouth_component(binary, settings.mouth, settings.mouth_tolerance)
    skel = skeletonize(binary, raster.scale, raster.origin, settings.prune_length, settings.mouth)
    length, tip = crack_length(skel, settings.mouth, settings.mouth_tolerance)
    front = crack_front(skel)
    return Extraction(
        raster, binary, skel, float(length), (float(tip[0]), float(tip[1])), None,
        (float(front[0]), float(front[1])),
    )


def extract_crack(
    positions: np.ndarray,
    box: np.ndarray,
    periodic=(False, False, True),
    exclude: np.ndarray | None = None,
    settings: ExtractionSettings = ExtractionSettings(),
    extent: tuple[float, float, float, float] | None = None,
) -> Extraction:
    """Coordination filter, raster, binarize + median, merge faces, thin, measure."""
    mask = coordination_filter(
        positions, settings.coordination_cutoff, settings.threshold, box, periodic, exclude
    )
    if extent is None:
        extent = (0.0, 0.0, float(box[0]), float(box[1]))
    raster = rasterize(positions[mask], settings.resolution, settings.lattice_constant, extent)
    ex = measure_raster(raster, settings)
    ex.surface = mask
    return ex
