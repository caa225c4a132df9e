"""Explicit polyline crack geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import StructuredMesh


@dataclass
class CrackPolyline:
    """Ordered crack vertices with one or two propagating tips.

    ``tips`` lists which ends are crack tips: ``"end"`` for the last vertex,
    ``"start"`` for the first. An edge crack has its mouth at the start and
    a single tip at the end; a centre crack has both.
    """

    vertices: np.ndarray
    tips: tuple[str, ...] = ("end",)
    kinks: dict[str, list[float]] = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.array(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 2:
            raise ValueError("crack needs at least two 2D vertices")
        for t in self.tips:
            if t not in ("start", "end"):
                raise ValueError(f"unknown tip id {t!r}")
            self.kinks.setdefault(t, [])
        seg = np.diff(self.vertices, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) <= 0):
            raise ValueError("crack segments must have positive length")

    @property
    def segments(self) -> np.ndarray:
        """Array (nseg, 2, 2) of segment end points."""
        v = self.vertices
        return np.stack([v[:-1], v[1:]], axis=1)

    @property
    def length(self) -> float:
        seg = np.diff(self.vertices, axis=0)
        return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))

    def tip(self, which: str) -> np.ndarray:
        return self.vertices[-1] if which == "end" else self.vertices[0]

    def tip_angle(self, which: str) -> float:
        """Direction the tip is travelling, radians from +x."""
        if which == "end":
            d = self.vertices[-1] - self.vertices[-2]
        else:
            d = self.vertices[0] - self.vertices[1]
        return float(np.arctan2(d[1], d[0]))

    def copy(self) -> "CrackPolyline":
        return CrackPolyline(
            self.vertices.copy(), tuple(self.tips), {k: list(v) for k, v in self.kinks.items()}
        )

    def extend(self, which: str, da: float, theta: float) -> None:
        """Grow tip ``which`` by ``da`` at kink angle ``theta`` (tip frame)."""
        ang = self.tip_angle(which) + theta
        new = self.tip(which) + da * np.array([np.cos(ang), np.sin(ang)])
        if which == "end":
            self.vertices = np.vstack([self.vertices, new])
        else:
            self.vertices = np.vstack([new, self.vertices])
        self.kinks[which].append(float(theta))

    def is_self_intersecting(self) -> bool:
        segs = self.segments
        n = len(segs)
        for i in range(n):
            for j in range(i + 2, n):
                if _segments_cross(segs[i, 0], segs[i, 1], segs[j, 0], segs[j, 1]):
                    return True
        return False

    def closest(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closest-point data for each point.

        Returns (distance, segment index, parameter t in [0, 1]).
        """
        pts = np.atleast_2d(pts)
        a = self.vertices[:-1]
        d = self.vertices[1:] - a
        L2 = np.sum(d * d, axis=1)
        rel = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(rel * d[None], axis=2) / L2[None], 0.0, 1.0)
        proj = a[None] + t[..., None] * d[None]
        dist = np.hypot(pts[:, None, 0] - proj[..., 0], pts[:, None, 1] - proj[..., 1])
        k = np.argmin(dist, axis=1)
        idx = np.arange(len(pts))
        return dist[idx, k], k, t[idx, k]

    def side(self, pts: np.ndarray) -> np.ndarray:
        """Heaviside value: +1 above (left of travel) the crack, -1 below."""
        pts = np.atleast_2d(pts)
        _, k, t = self.closest(pts)
        d = self.vertices[1:] - self.vertices[:-1]
        normal = np.column_stack([-d[:, 1], d[:, 0]])
        normal /= np.hypot(normal[:, 0], normal[:, 1])[:, None]
        nrm = normal[k].copy()
        # at an interior vertex use the averaged (pseudo) normal
        at_end = (t >= 1.0) & (k + 1 < len(d))
        nrm[at_end] = normal[k[at_end]] + normal[k[at_end] + 1]
        at_start = (t <= 0.0) & (k > 0)
        nrm[at_start] = normal[k[at_start]] + normal[k[at_start] - 1]
        a = self.vertices[k]
        proj = a + t[:, None] * d[k]
        s = np.sum((pts - proj) * nrm, axis=1)
        return np.where(s >= 0, 1.0, -1.0)

    def perturb_off_mesh(self, mesh: StructuredMesh, tol: float = 1e-8, shift: float = 1e-6):
        """Nudge vertices that sit on mesh lines by ``shift`` element sizes.

        Keeps tips and crack faces off nodes and element edges, which would
        otherwise make the cut classification ambiguous.
        """
        v = self.vertices
        for axis, hsz, ext in ((0, mesh.hx, mesh.length), (1, mesh.hy, mesh.height)):
            frac = v[:, axis] / hsz
            near = np.abs(frac - np.round(frac)) * hsz < tol
            # vertices on the outer boundary stay put along the normal axis
            on_boundary = (np.abs(v[:, axis]) < tol) | (np.abs(v[:, axis] - ext) < tol)
            near &= ~on_boundary
            v[near, axis] += shift * hsz
        self.vertices = v


def clip_segment(p: np.ndarray, q: np.ndarray, box) -> tuple[float, float] | None:
    """Liang-Barsky clip of segment p->q to an axis-aligned box.

    Returns the parameter interval (t0, t1) inside the box, or None.
    """
    x0, y0, x1, y1 = box
    d = q - p
    t0, t1 = 0.0, 1.0
    for pk, qk in (
        (-d[0], p[0] - x0),
        (d[0], x1 - p[0]),
        (-d[1], p[1] - y0),
        (d[1], y1 - p[1]),
    ):
        if pk == 0:
            if qk < 0:
                return None
            continue
        r = qk / pk
        if pk < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    if t1 - t0 <= 0:
        return None
    return t0, t1


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def point_in_box(p: np.ndarray, box, tol: float = 0.0) -> bool:
    x0, y0, x1, y1 = box
    return x0 - tol <= p[0] <= x1 + tol and y0 - tol <= p[1] <= y1 + tol
