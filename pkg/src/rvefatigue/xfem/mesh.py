"""Structured bilinear quadrilateral mesh on a rectangle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 2x2 Gauss rule on [-1, 1]^2
_G = 1.0 / np.sqrt(3.0)
GAUSS2 = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])
GAUSS2_W = np.ones(4)

# reference-node signs, counter-clockwise from the lower-left corner
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


def gauss_legendre_2d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product Gauss rule with ``n`` points per direction on [-1, 1]^2."""
    x, w = np.polynomial.legendre.leggauss(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def shape_functions(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Bilinear shape functions, shape (npts, 4)."""
    xi = np.atleast_1d(xi)[:, None]
    eta = np.atleast_1d(eta)[:, None]
    return 0.25 * (1 + _XI * xi) * (1 + _ETA * eta)


def shape_derivatives(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """d N / d(xi, eta), shape (npts, 2, 4)."""
    xi = np.atleast_1d(xi)[:, None]
    eta = np.atleast_1d(eta)[:, None]
    dxi = 0.25 * _XI * (1 + _ETA * eta)
    deta = 0.25 * _ETA * (1 + _XI * xi)
    return np.stack([dxi, deta], axis=1)


@dataclass
class StructuredMesh:
    """Rectangle [0, length] x [0, height] split into nx x ny equal quads.

    Node (i, j) has index ``j * (nx + 1) + i``; element (i, j) has index
    ``j * nx + i`` and connectivity counter-clockwise from its lower-left
    node.
    """

    length: float
    height: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("mesh needs at least one element per direction")
        self.hx = self.length / self.nx
        self.hy = self.height / self.ny
        xs = np.linspace(0.0, self.length, self.nx + 1)
        ys = np.linspace(0.0, self.height, self.ny + 1)
        X, Y = np.meshgrid(xs, ys)
        self.nodes = np.column_stack([X.ravel(), Y.ravel()])
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i, j = i.ravel(), j.ravel()
        n0 = j * (self.nx + 1) + i
        self.elements = np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @classmethod
    def with_element_size(cls, length: float, height: float, h: float) -> "StructuredMesh":
        return cls(length, height, max(1, round(length / h)), max(1, round(height / h)))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    def element_origin(self, e: int) -> np.ndarray:
        return self.nodes[self.elements[e, 0]]

    def element_box(self, e: int) -> tuple[float, float, float, float]:
        x0, y0 = self.element_origin(e)
        return x0, y0, x0 + self.hx, y0 + self.hy

    def to_natural(self, e: int, pts: np.ndarray) -> np.ndarray:
        """Map physical points inside element ``e`` to (xi, eta)."""
        x0, y0 = self.element_origin(e)
        pts = np.atleast_2d(pts)
        xi = 2 * (pts[:, 0] - x0) / self.hx - 1
        eta = 2 * (pts[:, 1] - y0) / self.hy - 1
        return np.column_stack([xi, eta])

    def to_physical(self, e: int, nat: np.ndarray) -> np.ndarray:
        x0, y0 = self.element_origin(e)
        nat = np.atleast_2d(nat)
        return np.column_stack(
            [x0 + (nat[:, 0] + 1) * self.hx / 2, y0 + (nat[:, 1] + 1) * self.hy / 2]
        )

    def locate(self, pts: np.ndarray) -> np.ndarray:
        """Element index containing each point (points on shared edges go up/right)."""
        pts = np.atleast_2d(pts)
        i = np.clip(np.floor(pts[:, 0] / self.hx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(pts[:, 1] / self.hy).astype(int), 0, self.ny - 1)
        return j * self.nx + i

    def node_support(self, n: int) -> list[int]:
        """Elements sharing node ``n``."""
        i, j = n % (self.nx + 1), n // (self.nx + 1)
        out = []
        for di in (-1, 0):
            for dj in (-1, 0):
                ei, ej = i + di, j + dj
                if 0 <= ei < self.nx and 0 <= ej < self.ny:
                    out.append(ej * self.nx + ei)
        return out

    def shape_gradients_physical(self, nat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Shape values (npts, 4) and physical gradients (npts, 2, 4)."""
        N = shape_functions(nat[:, 0], nat[:, 1])
        dN = shape_derivatives(nat[:, 0], nat[:, 1])
        dN[:, 0, :] *= 2.0 / self.hx
        dN[:, 1, :] *= 2.0 / self.hy
        return N, dN

    def boundary_nodes(self, side: str) -> np.ndarray:
        nx1 = self.nx + 1
        if side == "bottom":
            return np.arange(nx1)
        if side == "top":
            return np.arange(self.ny * nx1, (self.ny + 1) * nx1)
        if side == "left":
            return np.arange(0, (self.ny + 1) * nx1, nx1)
        if side == "right":
            return np.arange(self.nx, (self.ny + 1) * nx1, nx1)
        raise ValueError(f"unknown side {side!r}")

    def standard_stiffness(self, D: np.ndarray, thickness: float = 1.0) -> np.ndarray:
        """8x8 stiffness of one uncut element, dofs ordered (u0, v0, u1, v1, ...)."""
        N, dN = self.shape_gradients_physical(GAUSS2)
        detJ = self.hx * self.hy / 4
        K = np.zeros((8, 8))
        for g in range(len(GAUSS2)):
            B = np.zeros((3, 8))
            B[0, 0::2] = dN[g, 0]
            B[1, 1::2] = dN[g, 1]
            B[2, 0::2] = dN[g, 1]
            B[2, 1::2] = dN[g, 0]
            K += B.T @ D @ B * GAUSS2_W[g] * detJ * thickness
        return K
