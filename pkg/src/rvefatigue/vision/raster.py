"""Contour rasters: splatting flagged atoms to a grayscale grid and image I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class ContourRaster:
    """Grayscale image of crack-face atoms.

    Row ``i`` and column ``j`` map to the physical point
    ``origin + (j * scale, i * scale)``; rows therefore run along +y.

    Attributes:
        grid: uint8 intensities, shape (height, width).
        scale: Angstrom per pixel.
        origin: physical (x, y) of the centre of pixel (0, 0).
    """

    grid: np.ndarray
    scale: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.uint8)
        if self.grid.ndim != 2:
            raise ValueError("raster grid must be two-dimensional")
        if not self.scale > 0:
            raise ValueError("raster scale must be positive")

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def to_physical(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        cols = np.asarray(cols, dtype=float)
        return np.stack(
            [self.origin[0] + cols * self.scale, self.origin[1] + rows * self.scale], axis=-1
        )


def rasterize(
    positions: np.ndarray,
    resolution: float = 1.0,
    radius: float = 2.85,
    extent: tuple[float, float, float, float] | None = None,
) -> ContourRaster:
    """Splat atoms (x, y) as filled discs of ``radius`` Angstrom.

    The raster covers ``extent`` = (xmin, ymin, xmax, ymax) when given,
    otherwise the atoms' bounding box padded by the disc radius.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    pos = np.atleast_2d(np.asarray(positions, dtype=float))[:, :2]
    if extent is None:
        if len(pos) == 0:
            raise ValueError("no atoms to rasterize")
        lo = pos.min(axis=0) - radius
        hi = pos.max(axis=0) + radius
    else:
        lo = np.array(extent[:2], dtype=float)
        hi = np.array(extent[2:], dtype=float)
    if np.any(hi - lo <= 0):
        raise ValueError("degenerate raster bounding box")
    w = int(np.floor((hi[0] - lo[0]) / resolution)) + 1
    h = int(np.floor((hi[1] - lo[1]) / resolution)) + 1
    grid = np.zeros((h, w), dtype=np.uint8)
    rpx = radius / resolution
    k = int(np.ceil(rpx))
    dy, dx = np.mgrid[-k : k + 1, -k : k + 1]
    for x, y in pos:
        cx = (x - lo[0]) / resolution
        cy = (y - lo[1]) / resolution
        ic, jc = int(round(cy)), int(round(cx))
        rows = ic + dy
        cols = jc + dx
        inside = ((rows - cy) ** 2 + (cols - cx) ** 2 <= rpx**2) & (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
        grid[rows[inside], cols[inside]] = 255
    return ContourRaster(grid, resolution, (float(lo[0]), float(lo[1])))


def write_pgm(raster: ContourRaster, path: str | Path) -> None:
    """Binary PGM (P5); the top image row is the highest y."""
    img = np.flipud(raster.grid)
    header = f"P5\n# scale {float(raster.scale)!r} origin {float(raster.origin[0])!r} {float(raster.origin[1])!r}\n"
    header += f"{raster.width} {raster.height}\n255\n"
    Path(path).write_bytes(header.encode("ascii") + img.tobytes())


def read_image(path: str | Path, scale: float | None = None, origin=None) -> ContourRaster:
    """Load a PGM or PNG as a raster.

    Explicit ``scale`` and ``origin`` win; otherwise values embedded by
    :func:`write_pgm` or :func:`write_raster_png` are used, falling back to
    one Angstrom per pixel at the origin.
    """
    path = Path(path)
    meta_scale, meta_origin = 1.0, (0.0, 0.0)
    data = path.read_bytes()
    if data[:2] == b"P5":
        tokens, comments, pos = [], [], 2
        while len(tokens) < 3:
            while data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":
                end = data.index(b"\n", pos)
                comments.append(data[pos + 1 : end].decode().split())
                pos = end + 1
                continue
            end = pos
            while not data[end : end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
        pos += 1
        w, h, _ = tokens
        grid = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w)
        for c in comments:
            if len(c) >= 5 and c[0] == "scale" and c[2] == "origin":
                meta_scale, meta_origin = float(c[1]), (float(c[3]), float(c[4]))
    else:
        from PIL import Image

        with Image.open(path) as im:
            grid = np.asarray(im.convert("L"))
            text = getattr(im, "text", {}) or {}
        if "scale" in text:
            meta_scale = float(text["scale"])
        if "origin_x" in text and "origin_y" in text:
            meta_origin = (float(text["origin_x"]), float(text["origin_y"]))
    return ContourRaster(
        np.flipud(grid).copy(),
        meta_scale if scale is None else scale,
        meta_origin if origin is None else (float(origin[0]), float(origin[1])),
    )


def write_png(grid: np.ndarray, path: str | Path, text: dict[str, str] | None = None) -> None:
    """Write a grayscale (or RGB) PNG, top row = highest y; ``text`` goes to tEXt chunks."""
    from PIL import Image
    from PIL.PngImagePlugin import PngInfo

    info = None
    if text:
        info = PngInfo()
        for k, v in text.items():
            info.add_text(str(k), str(v))
    Image.fromarray(np.flipud(np.asarray(grid, dtype=np.uint8))).save(path, pnginfo=info)


def write_raster_png(raster: ContourRaster, path: str | Path, **extra) -> None:
    """PNG that remembers its scale and origin, plus any ``extra`` key/values."""
    text = {"scale": repr(float(raster.scale)), "origin_x": repr(float(raster.origin[0])), "origin_y": repr(float(raster.origin[1]))}
    text.update({k: str(v) for k, v in extra.items()})
    write_png(raster.grid, path, text)
