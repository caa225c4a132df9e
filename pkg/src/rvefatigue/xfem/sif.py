"""Mixed-mode stress intensity factors by the domain interaction integral."""

from __future__ import annotations

import numpy as np

from .solver import Solution


def williams_fields(r, th, mode: int, mu: float, kappa: float):
    """Unit-K auxiliary crack-tip fields in the tip frame.

    Returns stress (..., 3) as (xx, yy, xy) and displacement gradient
    (..., 2, 2) with entry [i, j] = du_i/dx_j.
    """
    s2, c2 = np.sin(th / 2), np.cos(th / 2)
    s32, c32 = np.sin(1.5 * th), np.cos(1.5 * th)
    fs = 1.0 / np.sqrt(2 * np.pi * r)
    fu = 1.0 / (2 * mu) / np.sqrt(2 * np.pi)
    if mode == 1:
        sxx = fs * c2 * (1 - s2 * s32)
        syy = fs * c2 * (1 + s2 * s32)
        sxy = fs * s2 * c2 * c32
        g1 = c2 * (kappa - 1 + 2 * s2**2)
        g2 = s2 * (kappa + 1 - 2 * c2**2)
        dg1 = -0.5 * s2 * (kappa - 1 + 2 * s2**2) + 2 * s2 * c2**2
        dg2 = 0.5 * c2 * (kappa + 1 - 2 * c2**2) + 2 * c2 * s2**2
    else:
        sxx = -fs * s2 * (2 + c2 * c32)
        syy = fs * s2 * c2 * c32
        sxy = fs * c2 * (1 - s2 * s32)
        g1 = s2 * (kappa + 1 + 2 * c2**2)
        g2 = -c2 * (kappa - 1 - 2 * s2**2)
        dg1 = 0.5 * c2 * (kappa + 1 + 2 * c2**2) - 2 * c2 * s2**2
        dg2 = 0.5 * s2 * (kappa - 1 - 2 * s2**2) + 2 * s2 * c2**2
    sr = np.sqrt(r)
    ct, st = np.cos(th), np.sin(th)
    grad = np.empty(np.shape(r) + (2, 2))
    for i, (g, dg) in enumerate(((g1, dg1), (g2, dg2))):
        du_dr = fu * g / (2 * sr)
        du_dth = fu * sr * dg
        grad[..., i, 0] = ct * du_dr - st / r * du_dth
        grad[..., i, 1] = st * du_dr + ct / r * du_dth
    return np.stack([sxx, syy, sxy], axis=-1), grad


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])  # global -> local


def compute_sifs(
    sol: Solution, tip: str | None = None, radius_factor: float = 2.5
) -> tuple[float, float]:
    """(K_I, K_II) at one crack tip, in MPa*sqrt(mm).

    The domain is every element with nodes on both sides of a circle of
    radius ``radius_factor`` element sizes around the tip; the weight q is
    the bilinear interpolant of nodal indicators of that circle.
    """
    emesh, model = sol.emesh, sol.model
    mesh = emesh.mesh
    crack = emesh.crack
    tip = tip or crack.tips[-1]
    xt, yt, ang = emesh.frames[tip]
    rd = radius_factor * mesh.h
    if min(xt, yt, mesh.length - xt, mesh.height - yt) < rd:
        raise ValueError("interaction-integral domain crosses the plate boundary")
    for other in crack.tips:
        if other != tip and np.hypot(*(crack.tip(other) - (xt, yt))) < 2 * rd:
            raise ValueError("interaction-integral domain overlaps another crack tip")

    qn = (np.hypot(mesh.nodes[:, 0] - xt, mesh.nodes[:, 1] - yt) <= rd).astype(float)
    qe = qn[mesh.elements]
    ring = np.flatnonzero(qe.any(axis=1) & ~qe.all(axis=1))

    Q = _rotation(ang)
    D = model.elasticity()
    mu, kappa = model.mu, model.kappa
    I = np.zeros(2)
    for e in ring:
        pts, w, hs = emesh.quadrature(int(e))
        grad = emesh.gradient(sol.d, int(e), pts, hs)
        eps = np.column_stack([grad[:, 0, 0], grad[:, 1, 1], grad[:, 0, 1] + grad[:, 1, 0]])
        sv = eps @ D.T
        sig = np.empty((len(pts), 2, 2))
        sig[:, 0, 0], sig[:, 1, 1] = sv[:, 0], sv[:, 1]
        sig[:, 0, 1] = sig[:, 1, 0] = sv[:, 2]
        # to the tip frame
        sig_l = Q @ sig @ Q.T
        grad_l = Q @ grad @ Q.T
        nat = mesh.to_natural(int(e), pts)
        _, dN = mesh.shape_gradients_physical(nat)
        dq = dN @ qe[e]  # (npts, 2), global
        dq_l = dq @ Q.T
        rel = (pts - (xt, yt)) @ Q.T
        r = np.hypot(rel[:, 0], rel[:, 1])
        th = np.arctan2(rel[:, 1], rel[:, 0])
        for k, mode in enumerate((1, 2)):
            sa, ga = williams_fields(r, th, mode, mu, kappa)
            sig_a = np.empty((len(pts), 2, 2))
            sig_a[:, 0, 0], sig_a[:, 1, 1] = sa[:, 0], sa[:, 1]
            sig_a[:, 0, 1] = sig_a[:, 1, 0] = sa[:, 2]
            eps_a = 0.5 * (ga + np.swapaxes(ga, 1, 2))
            w_int = np.einsum("gij,gij->g", sig_l, eps_a)
            term = (
                np.einsum("gij,gi->gj", sig_l, ga[:, :, 0])
                + np.einsum("gij,gi->gj", sig_a, grad_l[:, :, 0])
            )
            term[:, 0] -= w_int
            I[k] += np.sum(np.einsum("gj,gj->g", term, dq_l) * w)
    Ep = model.effective_modulus
    return float(I[0] * Ep / 2), float(I[1] * Ep / 2)


def handbook_sent(model, a: float | None = None, stress: float | None = None) -> float:
    from .model import sent_correction

    a = model.a0 if a is None else a
    s = model.traction if stress is None else stress
    return sent_correction(a / model.length) * s * np.sqrt(np.pi * a)
