"""Heaviside and crack-tip enrichment of a structured mesh.

Node classification, sub-cell quadrature for cut elements and the shifted
enriched basis used by the solver and the SIF extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crack import CrackPolyline, clip_segment, point_in_box
from .mesh import StructuredMesh, gauss_legendre_2d

# degree-2 triangle rule: barycentric points, weights summing to 1
TRI3 = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.full(3, 1 / 3),
)

# degree-5 Dunavant rule
_a1, _b1 = 0.059715871789770, 0.470142064105115
_a2, _b2 = 0.797426985353087, 0.101286507323456
TRI7 = (
    np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [_a1, _b1, _b1],
            [_b1, _a1, _b1],
            [_b1, _b1, _a1],
            [_a2, _b2, _b2],
            [_b2, _a2, _b2],
            [_b2, _b2, _a2],
        ]
    ),
    np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3),
)

# Heaviside enrichment is dropped when one side of a nodal support is
# smaller than this fraction of the support area.
AREA_TOL = 1e-4


def branch_functions(x: np.ndarray, y: np.ndarray, frame) -> tuple[np.ndarray, np.ndarray]:
    """Crack-tip branch functions and their global gradients.

    Args:
        x, y: point coordinates (arrays of equal shape).
        frame: (x_tip, y_tip, angle) of the tip coordinate system.

    Returns:
        values with shape (..., 4) and gradients with shape (..., 2, 4).
    """
    xt, yt, ang = frame
    c, s = np.cos(ang), np.sin(ang)
    dx, dy = x - xt, y - yt
    xl = c * dx + s * dy
    yl = -s * dx + c * dy
    r = np.hypot(xl, yl)
    th = np.arctan2(yl, xl)
    sr = np.sqrt(r)
    s2, c2 = np.sin(th / 2), np.cos(th / 2)
    st, ct = np.sin(th), np.cos(th)
    s32, c32 = np.sin(1.5 * th), np.cos(1.5 * th)
    vals = np.stack([sr * s2, sr * c2, sr * st * s2, sr * st * c2], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 0.5 / sr
    dxl = np.stack([-k * s2, k * c2, -k * s32 * st, -k * c32 * st], axis=-1)
    dyl = np.stack([k * c2, k * s2, k * (s2 + s32 * ct), k * (c2 + c32 * ct)], axis=-1)
    gx = dxl * c - dyl * s
    gy = dxl * s + dyl * c
    return vals, np.stack([gx, gy], axis=-2)


def _perimeter_coord(p, box) -> float:
    """Counter-clockwise arc length of a boundary point from the lower-left corner."""
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    tol = 1e-12 * max(w, h)
    if abs(p[1] - y0) <= tol:
        return p[0] - x0
    if abs(p[0] - x1) <= tol:
        return w + (p[1] - y0)
    if abs(p[1] - y1) <= tol:
        return w + h + (x1 - p[0])
    return 2 * w + h + (y1 - p[1])


def _corners(box):
    x0, y0, x1, y1 = box
    return [np.array([x0, y0]), np.array([x1, y0]), np.array([x1, y1]), np.array([x0, y1])]


def _boundary_walk(s_from: float, s_to: float | None, box) -> list[np.ndarray]:
    """Corners met walking counter-clockwise from perimeter coord s_from to s_to.

    ``s_to=None`` walks one full lap back to the start.
    """
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    cs = [0.0, w, w + h, 2 * w + h]
    P = 2 * (w + h)
    span = P if s_to is None else (s_to - s_from) % P
    out = []
    for c_s, c in sorted(zip(cs, _corners(box)), key=lambda z: (z[0] - s_from) % P):
        d = (c_s - s_from) % P
        if 0 < d < span:
            out.append(c)
    return out


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def triangulate(poly: np.ndarray) -> list[np.ndarray]:
    """Ear-clipping triangulation of a simple polygon."""
    pts = [np.asarray(p, float) for p in poly]
    if polygon_area(np.array(pts)) < 0:
        pts = pts[::-1]
    tris = []
    idx = list(range(len(pts)))
    guard = 0
    while len(idx) > 3 and guard < 10 * len(pts) ** 2:
        guard += 1
        n = len(idx)
        for k in range(n):
            a, b, c = pts[idx[k - 1]], pts[idx[k]], pts[idx[(k + 1) % n]]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0:
                continue
            inside = False
            for m in idx:
                if m in (idx[k - 1], idx[k], idx[(k + 1) % n]):
                    continue
                if _in_triangle(pts[m], a, b, c):
                    inside = True
                    break
            if not inside:
                tris.append(np.array([a, b, c]))
                idx.pop(k)
                break
        else:
            # only degenerate (collinear) ears remain; drop the flattest vertex
            idx.pop(1)
    if len(idx) == 3:
        tri = np.array([pts[i] for i in idx])
        if abs(polygon_area(tri)) > 0:
            tris.append(tri)
    return tris


def _in_triangle(p, a, b, c) -> bool:
    def cr(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    return cr(a, b, p) >= 0 and cr(b, c, p) >= 0 and cr(c, a, p) >= 0


def triangle_points(tri: np.ndarray, rule) -> tuple[np.ndarray, np.ndarray]:
    bary, w = rule
    pts = bary @ tri
    area = abs(polygon_area(tri))
    return pts, w * area


@dataclass
class ElementCut:
    kind: str  # "split" or "tip"
    chain: np.ndarray  # crack points inside the element, ordered along the crack
    tip: str | None = None
    polygons: list[np.ndarray] = field(default_factory=list)  # split: the two sides
    triangles: list[np.ndarray] = field(default_factory=list)


@dataclass
class EnrichedMesh:
    """Mesh plus crack with enriched-node sets and sub-cell quadrature.

    Attributes:
        heaviside_nodes: sorted node ids carrying jump DOFs a_I.
        tip_nodes: sorted node ids carrying the four branch DOFs b_I.
        node_tip: tip id ("start"/"end") each tip node is attached to.
        cuts: crack-intersected elements with their sub-triangulation.
        frames: tip id -> (x_tip, y_tip, angle).
    """

    mesh: StructuredMesh
    crack: CrackPolyline
    heaviside_nodes: np.ndarray
    tip_nodes: np.ndarray
    node_tip: dict[int, str]
    cuts: dict[int, ElementCut]
    frames: dict[str, tuple[float, float, float]]

    def __post_init__(self):
        n = self.mesh.n_nodes
        self.h_index = {int(k): i for i, k in enumerate(self.heaviside_nodes)}
        self.t_index = {int(k): i for i, k in enumerate(self.tip_nodes)}
        self.n_std = n
        self.h_offset = 2 * n
        self.t_offset = 2 * n + 2 * len(self.heaviside_nodes)
        self.n_dofs = 2 * (n + len(self.heaviside_nodes) + 4 * len(self.tip_nodes))
        enriched = set(self.h_index) | set(self.t_index)
        mask = np.isin(self.mesh.elements, list(enriched)).any(axis=1) if enriched else None
        self.enriched_elements = (
            np.flatnonzero(mask) if mask is not None else np.array([], dtype=int)
        )
        self._h_node_sign = {
            k: float(self.crack.side(self.mesh.nodes[k])[0]) for k in self.h_index
        }
        self._phi_node = {}
        for k in self.t_index:
            x, y = self.mesh.nodes[k]
            v, _ = branch_functions(np.array([x]), np.array([y]), self.frames[self.node_tip[k]])
            self._phi_node[k] = v[0]

    def element_dofs(self, e: int) -> np.ndarray:
        """Global DOFs for element ``e`` paired as (x, y) per scalar basis function."""
        pairs = []
        for n in self.mesh.elements[e]:
            pairs.append((2 * n, 2 * n + 1))
        for n in self.mesh.elements[e]:
            if n in self.h_index:
                b = self.h_offset + 2 * self.h_index[n]
                pairs.append((b, b + 1))
        for n in self.mesh.elements[e]:
            if n in self.t_index:
                b = self.t_offset + 8 * self.t_index[n]
                pairs.extend((b + 2 * a, b + 2 * a + 1) for a in range(4))
        return np.array(pairs, dtype=int)

    def basis(self, e: int, pts: np.ndarray, hsign: np.ndarray | None = None):
        """Scalar basis values (npts, nf) and gradients (npts, 2, nf) on element ``e``.

        ``hsign`` gives the Heaviside value at each point; when omitted it is
        evaluated from the crack geometry.
        """
        mesh = self.mesh
        pts = np.atleast_2d(pts)
        nat = mesh.to_natural(e, pts)
        N, dN = mesh.shape_gradients_physical(nat)
        conn = mesh.elements[e]
        vals = [N]
        grads = [dN]
        hn = [i for i, n in enumerate(conn) if n in self.h_index]
        if hn:
            if hsign is None:
                hsign = self.crack.side(pts)
            for i in hn:
                shift = hsign - self._h_node_sign[conn[i]]
                vals.append((N[:, i] * shift)[:, None])
                grads.append((dN[:, :, i] * shift[:, None])[:, :, None])
        tn = [i for i, n in enumerate(conn) if n in self.t_index]
        if tn:
            cache = {}
            for i in tn:
                tip = self.node_tip[conn[i]]
                if tip not in cache:
                    cache[tip] = branch_functions(pts[:, 0], pts[:, 1], self.frames[tip])
                phi, dphi = cache[tip]
                sphi = phi - self._phi_node[conn[i]]
                vals.append(N[:, i : i + 1] * sphi)
                grads.append(dN[:, :, i : i + 1] * sphi[:, None, :] + N[:, None, i : i + 1] * dphi)
        return np.concatenate(vals, axis=1), np.concatenate(grads, axis=2)

    def quadrature(self, e: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integration points, physical weights and Heaviside signs for element ``e``."""
        mesh = self.mesh
        conn = mesh.elements[e]
        has_tip = any(n in self.t_index for n in conn)
        cut = self.cuts.get(e)
        if cut is None:
            order = 4 if has_tip else 2
            nat, w = gauss_legendre_2d(order)
            pts = mesh.to_physical(e, nat)
            centre = mesh.to_physical(e, np.zeros((1, 2)))
            hs = np.full(len(pts), self.crack.side(centre)[0])
            return pts, w * mesh.hx * mesh.hy / 4, hs
        rule = TRI7 if (has_tip or cut.kind == "tip") else TRI3
        P, W, H = [], [], []
        for tri in cut.triangles:
            p, w = triangle_points(tri, rule)
            side = self.crack.side(tri.mean(axis=0, keepdims=True))[0]
            P.append(p)
            W.append(w)
            H.append(np.full(len(p), side))
        return np.vstack(P), np.concatenate(W), np.concatenate(H)

    def displacement(self, d: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Reconstruct the enriched displacement field at arbitrary points."""
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), 2))
        elems = self.mesh.locate(pts)
        for e in np.unique(elems):
            sel = elems == e
            F, _ = self.basis(e, pts[sel])
            dofs = self.element_dofs(e)
            out[sel, 0] = F @ d[dofs[:, 0]]
            out[sel, 1] = F @ d[dofs[:, 1]]
        return out

    def gradient(self, d: np.ndarray, e: int, pts: np.ndarray, hsign=None) -> np.ndarray:
        """Displacement gradient du_i/dx_j at points of element ``e``, shape (npts, 2, 2)."""
        _, G = self.basis(e, pts, hsign)
        dofs = self.element_dofs(e)
        ux = d[dofs[:, 0]]
        uy = d[dofs[:, 1]]
        grad = np.empty((len(np.atleast_2d(pts)), 2, 2))
        grad[:, 0, :] = G @ ux
        grad[:, 1, :] = G @ uy
        return grad


def _element_chains(mesh: StructuredMesh, crack: CrackPolyline) -> dict[int, np.ndarray]:
    """Ordered crack points (entry, interior vertices, exit) inside each cut element."""
    pieces: dict[int, list[tuple[int, float, float]]] = {}
    for k, (p, q) in enumerate(crack.segments):
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        i0 = max(int(np.floor(lo[0] / mesh.hx)) - 1, 0)
        i1 = min(int(np.floor(hi[0] / mesh.hx)) + 1, mesh.nx - 1)
        j0 = max(int(np.floor(lo[1] / mesh.hy)) - 1, 0)
        j1 = min(int(np.floor(hi[1] / mesh.hy)) + 1, mesh.ny - 1)
        for j in range(j0, j1 + 1):
            for i in range(i0, i1 + 1):
                e = j * mesh.nx + i
                t = clip_segment(p, q, mesh.element_box(e))
                if t is not None and (t[1] - t[0]) * np.hypot(*(q - p)) > 1e-12 * mesh.h:
                    pieces.setdefault(e, []).append((k, t[0], t[1]))
    chains = {}
    for e, ps in pieces.items():
        ps.sort()
        pts = []
        for k, t0, t1 in ps:
            p, q = crack.segments[k]
            a = p + t0 * (q - p)
            b = p + t1 * (q - p)
            if not pts or np.hypot(*(pts[-1] - a)) > 1e-12 * mesh.h:
                pts.append(a)
            pts.append(b)
        chains[e] = np.array(pts)
    return chains


def _cut_element(mesh: StructuredMesh, e: int, chain: np.ndarray, crack: CrackPolyline) -> ElementCut:
    box = mesh.element_box(e)
    for tip in crack.tips:
        tp = crack.tip(tip)
        if point_in_box(tp, box):
            # fan from the tip so no sub-triangle straddles the crack
            ends = [c for c in (chain[0], chain[-1]) if np.hypot(*(c - tp)) > 1e-12 * mesh.h]
            if not ends:
                raise ValueError(f"crack lies entirely inside element {e}")
            entry = ends[0]
            s0 = _perimeter_coord(entry, box)
            ring = [entry] + _boundary_walk(s0, None, box) + [entry]
            tris = []
            for a, b in zip(ring[:-1], ring[1:]):
                tri = np.array([tp, a, b])
                if abs(polygon_area(tri)) > 0:
                    tris.append(tri)
            return ElementCut("tip", chain, tip=tip, triangles=tris)
    start, end = chain[0], chain[-1]
    s_start = _perimeter_coord(start, box)
    s_end = _perimeter_coord(end, box)
    poly1 = np.array(list(chain) + _boundary_walk(s_end, s_start, box))
    poly2 = np.array(list(chain[::-1]) + _boundary_walk(s_start, s_end, box))
    tris = triangulate(poly1) + triangulate(poly2)
    return ElementCut("split", chain, polygons=[poly1, poly2], triangles=tris)


def enrich(
    mesh: StructuredMesh,
    crack: CrackPolyline,
    tip_radius: float | None = None,
    area_tol: float = AREA_TOL,
) -> EnrichedMesh:
    """Classify nodes and build sub-cell quadrature for ``crack`` on ``mesh``.

    Tip enrichment is topological (the nodes of each tip element) unless
    ``tip_radius`` is given, in which case every node within that distance
    of a tip is tip-enriched as well.
    """
    for t in crack.tips:
        if not point_in_box(crack.tip(t), (0, 0, mesh.length, mesh.height)):
            raise ValueError(f"crack tip {t} at {crack.tip(t)} lies outside the domain")
    crack.perturb_off_mesh(mesh)
    frames = {t: (*crack.tip(t), crack.tip_angle(t)) for t in crack.tips}
    chains = _element_chains(mesh, crack)
    if not chains:
        raise ValueError("crack does not intersect the mesh")
    cuts = {e: _cut_element(mesh, e, ch, crack) for e, ch in chains.items()}

    node_tip: dict[int, str] = {}
    for e, cut in cuts.items():
        if cut.kind == "tip":
            for n in mesh.elements[e]:
                node_tip[int(n)] = cut.tip
    if tip_radius is not None:
        for t in crack.tips:
            d = np.hypot(*(mesh.nodes - crack.tip(t)).T)
            for n in np.flatnonzero(d <= tip_radius):
                n = int(n)
                if n not in node_tip or d[n] < np.hypot(*(mesh.nodes[n] - crack.tip(node_tip[n]))):
                    node_tip[n] = t

    candidates = set()
    for e, cut in cuts.items():
        if cut.kind == "split":
            candidates.update(int(n) for n in mesh.elements[e])
    candidates -= set(node_tip)

    heaviside = []
    for n in sorted(candidates):
        a_plus = a_minus = 0.0
        for e in mesh.node_support(n):
            cut = cuts.get(e)
            if cut is not None and cut.kind == "split":
                for poly in cut.polygons:
                    area = abs(polygon_area(poly))
                    side = crack.side(_interior_point(poly))[0]
                    if side > 0:
                        a_plus += area
                    else:
                        a_minus += area
            elif cut is not None:
                continue
            else:
                centre = mesh.to_physical(e, np.zeros((1, 2)))
                if crack.side(centre)[0] > 0:
                    a_plus += mesh.hx * mesh.hy
                else:
                    a_minus += mesh.hx * mesh.hy
        total = a_plus + a_minus
        if total > 0 and min(a_plus, a_minus) / total >= area_tol:
            heaviside.append(n)

    tip_nodes = np.array(sorted(node_tip), dtype=int)
    return EnrichedMesh(
        mesh=mesh,
        crack=crack,
        heaviside_nodes=np.array(heaviside, dtype=int),
        tip_nodes=tip_nodes,
        node_tip=node_tip,
        cuts=cuts,
        frames=frames,
    )


def _interior_point(poly: np.ndarray) -> np.ndarray:
    """A point strictly inside a simple polygon (centroid of its largest ear)."""
    tris = triangulate(poly)
    best = max(tris, key=lambda t: abs(polygon_area(t)))
    return best.mean(axis=0, keepdims=True)
