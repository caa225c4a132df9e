"""Binarization, Zhang-Suen thinning and crack-length measurement on rasters."""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import ContourRaster

_EIGHT = np.ones((3, 3), dtype=bool)
# clockwise from north: P2..P9 as (drow, dcol) with rows running "up"
_RING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def otsu_threshold(grid: np.ndarray) -> int:
    """Threshold maximising the between-class variance of a uint8 histogram."""
    hist = np.bincount(np.asarray(grid, dtype=np.uint8).ravel(), minlength=256).astype(float)
    total = hist.sum()
    if total == 0:
        return 128
    levels = np.arange(256)
    w0 = np.cumsum(hist)
    mu0 = np.cumsum(hist * levels)
    w1 = total - w0
    mu_t = mu0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_t * w0 - mu0 * total) ** 2 / (w0 * w1)
    between[~np.isfinite(between)] = -1
    if between.max() <= 0:
        return 128
    # first level of the upper class
    return int(np.argmax(between)) + 1


def binarize_median(
    raster: ContourRaster | np.ndarray, threshold: int | str = 128, window: int = 3
) -> np.ndarray:
    """Threshold then median filter.

    Args:
        raster: raster or bare uint8 grid.
        threshold: intensity cut (pixel kept iff value >= threshold) or "otsu".
        window: odd median window edge in pixels, at least 3.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("median window must be an odd integer >= 3")
    grid = raster.grid if isinstance(raster, ContourRaster) else np.asarray(raster)
    if threshold == "otsu":
        threshold = otsu_threshold(grid)
    binary = grid >= threshold
    return ndimage.median_filter(binary.astype(np.uint8), size=window, mode="nearest").astype(bool)


def _neighbours(img: np.ndarray) -> list[np.ndarray]:
    p = np.pad(img, 1)
    h, w = img.shape
    return [p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in _RING]


def zhang_suen(binary: np.ndarray) -> np.ndarray:
    """Two-subiteration thinning, repeated until nothing changes."""
    img = np.asarray(binary, dtype=bool).copy()
    while True:
        changed = False
        for sub in (0, 1):
            P = [n.astype(np.int8) for n in _neighbours(img)]
            p2, p3, p4, p5, p6, p7, p8, p9 = P
            B = sum(P)
            seq = P + [P[0]]
            A = sum(((seq[k] == 0) & (seq[k + 1] == 1)).astype(np.int8) for k in range(8))
            if sub == 0:
                c1 = p2 * p4 * p6 == 0
                c2 = p4 * p6 * p8 == 0
            else:
                c1 = p2 * p4 * p8 == 0
                c2 = p2 * p6 * p8 == 0
            kill = img & (B >= 2) & (B <= 6) & (A == 1) & c1 & c2
            if kill.any():
                img &= ~kill
                changed = True
        if not changed:
            return img


def _graph(pix: set) -> dict:
    adj = {}
    for r, c in pix:
        nb = []
        for dr, dc in _RING:
            q = (r + dr, c + dc)
            if q in pix:
                nb.append((q, math.sqrt(2.0) if dr and dc else 1.0))
        adj[(r, c)] = nb
    return adj


def _dijkstra(adj: dict, src) -> tuple[dict, dict]:
    dist = {src: 0.0}
    prev = {src: None}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            # ties broken on pixel order so results do not depend on set iteration
            if v not in dist or nd < dist[v] - 1e-12 or (abs(nd - dist[v]) <= 1e-12 and u < prev[v]):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, prev


def _farthest(dist: dict):
    return max(dist, key=lambda p: (round(dist[p], 9), p))


def _prune(pix: set, prune_len: float) -> set:
    """Drop end branches (endpoint up to a junction) shorter than ``prune_len`` px."""
    pix = set(pix)
    while True:
        adj = _graph(pix)
        deg = {p: len(n) for p, n in adj.items()}
        if not any(d >= 3 for d in deg.values()):
            return pix
        removed = False
        for end in sorted(p for p, d in deg.items() if d == 1):
            branch, length, cur, prev = [end], 0.0, end, None
            while True:
                nxt = [(q, w) for q, w in adj[cur] if q != prev and q not in branch]
                if len(nxt) != 1 or deg[nxt[0][0]] >= 3:
                    if nxt:
                        length += min(w for _, w in nxt)
                    break
                prev, cur = cur, nxt[0][0]
                length += nxt[0][1]
                branch.append(cur)
            reached_junction = any(deg[q] >= 3 for q, _ in adj[cur]) or deg[cur] >= 3
            if reached_junction and length < prune_len:
                pix -= set(branch)
                removed = True
                break
        if not removed:
            return pix


_EDGES = ("left", "right", "bottom", "top")


def _edge_gap(p, edge: str, shape) -> float:
    r, c = p
    h, w = shape
    return {"left": c + 0.5, "right": w - 0.5 - c, "bottom": r + 0.5, "top": h - 0.5 - r}[edge]


@dataclass
class CrackSkeleton:
    """Thinned crack and its measured length.

    Attributes:
        grid: boolean image holding only the selected crack path.
        path: (k, 2) pixel (row, col) coordinates, ordered end to end.
        length: path length in Angstrom including both end corrections.
        tip: physical position of the path's last pixel.
        scale: Angstrom per pixel.
        origin: physical position of pixel (0, 0).
        end_extension: per end (first, last), distance in pixels from the
            end pixel to the foreground boundary beyond it.
    """

    grid: np.ndarray
    path: np.ndarray
    length: float
    tip: tuple[float, float]
    scale: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    end_extension: tuple[float, float] = (0.0, 0.0)

    @property
    def path_length_px(self) -> float:
        if len(self.path) < 2:
            return 0.0
        steps = np.abs(np.diff(self.path, axis=0))
        return float(np.sum(np.where(steps.sum(axis=1) == 2, math.sqrt(2.0), 1.0)))

    def to_physical(self, pix) -> tuple[float, float]:
        r, c = pix
        return (self.origin[0] + c * self.scale, self.origin[1] + r * self.scale)


def skeletonize(
    binary: np.ndarray | ContourRaster,
    scale: float = 1.0,
    origin: tuple[float, float] = (0.0, 0.0),
    prune_length: float = 5.0,
    mouth: str | None = None,
) -> CrackSkeleton:
    """Thin a binary crack region and keep its longest path.

    With ``mouth`` set to an image edge the path instead starts at the
    skeleton pixel nearest that edge and ends at the pixel farthest from
    it along the skeleton. Wide, short regions thin to branched shapes
    whose longest path can run across the crack; anchoring at the mouth
    keeps the path along it.

    The length is the sum of path steps (1 px orthogonal, sqrt 2 px
    diagonal) plus, at each end, the remaining foreground beyond the end
    pixel (its distance-transform value less half a pixel). Thinning eats
    roughly one half-width from each end of a band, and the correction
    gives it back.
    """
    if isinstance(binary, ContourRaster):
        scale, origin = binary.scale, binary.origin
        binary = binary.grid > 0
    fg = np.asarray(binary, dtype=bool)
    if not fg.any():
        raise ValueError("empty foreground: nothing to skeletonize")
    labels, n = ndimage.label(fg, structure=_EIGHT)
    if n > 1:
        sizes = ndimage.sum_labels(fg, labels, index=np.arange(1, n + 1))
        keep = int(np.argmax(sizes)) + 1
        warnings.warn(f"foreground has {n} components; keeping the largest", RuntimeWarning, stacklevel=2)
        fg = labels == keep
    thin = zhang_suen(fg)
    pix = set(map(tuple, np.argwhere(thin).tolist()))
    if prune_length > 0:
        pix = _prune(pix, prune_length)
    adj = _graph(pix)
    if mouth is None:
        d0, _ = _dijkstra(adj, min(pix))
        a = _farthest(d0)
    elif mouth in _EDGES:
        a = min(pix, key=lambda p: (_edge_gap(p, mouth, fg.shape), p))
    else:
        raise ValueError(f"mouth must be one of {_EDGES}")
    da, prev = _dijkstra(adj, a)
    b = _farthest(da)
    path = [b]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path = np.array(path[::-1], dtype=int)  # a -> b
    grid = np.zeros_like(fg)
    grid[path[:, 0], path[:, 1]] = True
    edt = ndimage.distance_transform_edt(fg)
    ext = tuple(max(float(edt[tuple(p)]) - 0.5, 0.0) for p in (path[0], path[-1]))
    if len(path) == 1:
        ext = (0.0, 0.0)
    sk = CrackSkeleton(grid, path, 0.0, (0.0, 0.0), scale, origin, ext)
    sk.length = (sk.path_length_px + ext[0] + ext[1]) * scale
    sk.tip = sk.to_physical(path[-1])
    return sk


def crack_length(
    skeleton: CrackSkeleton, mouth: str = "left", mouth_tolerance: float = 20.0
) -> tuple[float, tuple[float, float]]:
    """Crack length measured from the raster edge holding the crack mouth.

    The mouth-side end is the path end nearer the ``mouth`` edge. The length
    is that end's gap to the edge, plus the geodesic path length, plus the
    foreground remaining beyond the far end. Returns (length in Angstrom,
    physical tip position). The skeleton is reoriented in place so its
    path runs mouth to tip.

    Raises:
        ValueError: the crack foreground, judged from the path ends and their
            end extensions, stays more than ``mouth_tolerance`` pixels
            away from the mouth edge.
    """
    if mouth not in _EDGES:
        raise ValueError(f"mouth must be one of {_EDGES}")
    path = skeleton.path
    if len(path) == 0:
        raise ValueError("empty skeleton")
    shape = skeleton.grid.shape
    g0 = _edge_gap(path[0], mouth, shape)
    g1 = _edge_gap(path[-1], mouth, shape)
    # the foreground, not the thinned path, has to come close to the edge
    reach = min(g0 - skeleton.end_extension[0], g1 - skeleton.end_extension[1])
    if reach > mouth_tolerance:
        raise ValueError(f"crack does not reach the {mouth} edge (gap {reach:.1f} px)")
    if g0 <= g1:
        tip_pix, gap, ext = path[-1], g0, skeleton.end_extension[1]
    else:
        tip_pix, gap, ext = path[0], g1, skeleton.end_extension[0]
        skeleton.path = path = path[::-1].copy()
        skeleton.end_extension = skeleton.end_extension[::-1]
        skeleton.tip = skeleton.to_physical(tip_pix)
    if len(path) == 1:
        ext = 0.0
    length = (gap + skeleton.path_length_px + ext) * skeleton.scale
    return length, skeleton.to_physical(tip_pix)


def crack_front(skeleton: CrackSkeleton, tip_end: int = -1, lookback: int = 5) -> tuple[float, float]:
    """Physical crack front: the tip pixel pushed forward by its end extension.

    The direction is taken from the pixel ``lookback`` steps back along the
    path to the tip pixel.
    """
    path = skeleton.path
    ext = skeleton.end_extension[1 if tip_end == -1 else 0]
    if tip_end == 0:
        path = path[::-1]
    tip = path[-1].astype(float)
    if len(path) < 2 or ext <= 0:
        return skeleton.to_physical(tip)
    back = path[max(0, len(path) - 1 - lookback)].astype(float)
    d = tip - back
    d /= np.hypot(*d)
    return skeleton.to_physical(tip + ext * d)


def overlay(binary: np.ndarray, skeleton: CrackSkeleton) -> np.ndarray:
    """RGB image: foreground grey, skeleton red, tip green."""
    img = np.zeros(binary.shape + (3,), dtype=np.uint8)
    img[np.asarray(binary, bool)] = 110
    img[skeleton.grid] = (230, 30, 30)
    r, c = skeleton.path[-1]
    img[r, c] = (30, 220, 30)
    return img


def close_faces(binary: np.ndarray, span: int = 15) -> np.ndarray:
    """Merge the two faces of an opened crack into one band.

    Vertical gaps shorter than ``span`` pixels between foreground pixels
    are filled, then enclosed holes, so the upper and lower face lines of
    an opened crack thin to a single centre line rather than a loop.
    """
    fg = np.asarray(binary, dtype=bool)
    if span < 2:
        return fg.copy()
    pad = span
    p = np.pad(fg, ((pad, pad), (0, 0)))
    closed = ndimage.binary_closing(p, structure=np.ones((span, 1), dtype=bool))
    return ndimage.binary_fill_holes(closed[pad:-pad] | fg)
