"""Global assembly and linear solve for the enriched plate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .enrichment import EnrichedMesh
from .model import MacroModel


@dataclass
class Solution:
    emesh: EnrichedMesh
    model: MacroModel
    d: np.ndarray
    load: float

    def displacement(self, pts: np.ndarray) -> np.ndarray:
        return self.emesh.displacement(self.d, pts)

    def nodal_displacement(self) -> np.ndarray:
        """Standard nodal DOFs; shifted enrichments vanish at the nodes."""
        return self.d[: 2 * self.emesh.n_std].reshape(-1, 2)

    def element_stress(self, e: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stress (xx, yy, xy) at the integration points of element ``e``.

        Returns (points, weights, stress) so callers can average or integrate.
        """
        pts, w, hs = self.emesh.quadrature(e)
        grad = self.emesh.gradient(self.d, e, pts, hs)
        eps = np.column_stack([grad[:, 0, 0], grad[:, 1, 1], grad[:, 0, 1] + grad[:, 1, 0]])
        return pts, w, eps @ self.model.elasticity().T

    def von_mises(self) -> np.ndarray:
        """Element-averaged von Mises stress (plane stress or plane strain)."""
        mesh = self.emesh.mesh
        D = self.model.elasticity()
        u = self.nodal_displacement()
        # uncut elements: stress at the centre from the standard field
        _, dN = mesh.shape_gradients_physical(np.zeros((1, 2)))
        ue = u[mesh.elements]  # (ne, 4, 2)
        gxx = ue[:, :, 0] @ dN[0, 0]
        gyy = ue[:, :, 1] @ dN[0, 1]
        gxy = ue[:, :, 0] @ dN[0, 1] + ue[:, :, 1] @ dN[0, 0]
        sig = np.column_stack([gxx, gyy, gxy]) @ D.T
        for e in self.emesh.enriched_elements:
            _, w, s = self.element_stress(int(e))
            sig[e] = (w[:, None] * s).sum(axis=0) / w.sum()
        return _von_mises(sig, self.model)


def _von_mises(sig: np.ndarray, model: MacroModel) -> np.ndarray:
    sx, sy, txy = sig[:, 0], sig[:, 1], sig[:, 2]
    sz = model.poisson * (sx + sy) if model.mode == "plane_strain" else 0.0
    return np.sqrt(0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2) + 3 * txy**2)


def _enriched_element_matrix(emesh: EnrichedMesh, e: int, D: np.ndarray, t: float):
    pts, w, hs = emesh.quadrature(e)
    _, G = emesh.basis(e, pts, hs)
    nf = G.shape[2]
    B = np.zeros((len(pts), 3, 2 * nf))
    B[:, 0, 0::2] = G[:, 0]
    B[:, 1, 1::2] = G[:, 1]
    B[:, 2, 0::2] = G[:, 1]
    B[:, 2, 1::2] = G[:, 0]
    Ke = np.einsum("gik,ij,gjl,g->kl", B, D, B, w * t)
    dofs = emesh.element_dofs(e).reshape(-1)
    return dofs, Ke


def assemble(emesh: EnrichedMesh, model: MacroModel) -> sp.csr_matrix:
    mesh = emesh.mesh
    D = model.elasticity()
    Ke = mesh.standard_stiffness(D)
    standard = np.setdiff1d(np.arange(mesh.n_elements), emesh.enriched_elements)
    conn = mesh.elements[standard]
    dofs = np.empty((len(standard), 8), dtype=int)
    dofs[:, 0::2] = 2 * conn
    dofs[:, 1::2] = 2 * conn + 1
    rows = [np.repeat(dofs, 8, axis=1).ravel()]
    cols = [np.tile(dofs, (1, 8)).ravel()]
    vals = [np.tile(Ke.ravel(), len(standard))]
    for e in emesh.enriched_elements:
        edofs, Kee = _enriched_element_matrix(emesh, int(e), D, 1.0)
        n = len(edofs)
        rows.append(np.repeat(edofs, n))
        cols.append(np.tile(edofs, n))
        vals.append(Kee.ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(emesh.n_dofs, emesh.n_dofs),
    )
    return K.tocsr()


def traction_load(emesh: EnrichedMesh, stress: float) -> np.ndarray:
    """Consistent nodal forces for uniform tension on the top and bottom edges."""
    mesh = emesh.mesh
    f = np.zeros(emesh.n_dofs)
    for side, sign in (("top", 1.0), ("bottom", -1.0)):
        nodes = mesh.boundary_nodes(side)
        share = np.full(len(nodes), mesh.hx)
        share[[0, -1]] = mesh.hx / 2
        f[2 * nodes + 1] += sign * stress * share
    return f


def constrained_dofs(emesh: EnrichedMesh, model: MacroModel) -> np.ndarray:
    """Remove rigid-body modes only; the applied tractions are self-equilibrated."""
    mesh = emesh.mesh
    br = mesh.boundary_nodes("bottom")[-1]
    tr = mesh.boundary_nodes("top")[-1]
    return np.array([2 * br, 2 * br + 1, 2 * tr])


def assemble_solve(emesh: EnrichedMesh, model: MacroModel, load: float | None = None) -> Solution:
    """Solve K d = f for the enriched plate under remote tension ``load`` (MPa).

    ``load`` defaults to the model's peak traction q / thickness.
    """
    stress = model.traction if load is None else load
    if stress == 0:
        return Solution(emesh, model, np.zeros(emesh.n_dofs), 0.0)
    K = assemble(emesh, model)
    f = traction_load(emesh, stress)
    fixed = constrained_dofs(emesh, model)
    free = np.setdiff1d(np.arange(emesh.n_dofs), fixed)
    Kff = K[free][:, free].tocsc()
    try:
        uf = spla.spsolve(Kff, f[free])
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise np.linalg.LinAlgError(f"singular stiffness matrix: {exc}") from exc
    if not np.all(np.isfinite(uf)):
        raise np.linalg.LinAlgError("non-finite displacement solution")
    d = np.zeros(emesh.n_dofs)
    d[free] = uf
    return Solution(emesh, model, d, stress)
