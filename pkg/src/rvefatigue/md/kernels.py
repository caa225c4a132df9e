"""Compiled inner loops: cell-list pair search and pair forces.

All loops run in a fixed order so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _min_image(d, box, periodic):
    for k in range(3):
        if periodic[k]:
            d[k] -= box[k] * np.rint(d[k] / box[k])


@njit(cache=True)
def build_pairs(pos, box, periodic, side, rlist):
    """Half list (i < j) of pairs closer than ``rlist``.

    Pairs with ``side[i] * side[j] == -1`` (opposite faces of a cut seam)
    are left out. Returns (first, second) index arrays.
    """
    n = pos.shape[0]
    lo = np.zeros(3)
    ncell = np.ones(3, dtype=np.int64)
    width = np.ones(3)
    for k in range(3):
        if periodic[k]:
            lo[k] = 0.0
            span = box[k]
        else:
            lo[k] = pos[:, k].min()
            span = pos[:, k].max() - lo[k] + 1e-9
        nc = int(span // rlist)
        if nc < 1:
            nc = 1
        ncell[k] = nc
        width[k] = span / nc
    cell = np.empty(n, dtype=np.int64)
    cidx = np.empty((n, 3), dtype=np.int64)
    for i in range(n):
        for k in range(3):
            x = pos[i, k] - lo[k]
            if periodic[k]:
                x = x - box[k] * np.floor(x / box[k])
            c = int(x // width[k])
            if c >= ncell[k]:
                c = ncell[k] - 1
            if c < 0:
                c = 0
            cidx[i, k] = c
        cell[i] = (cidx[i, 0] * ncell[1] + cidx[i, 1]) * ncell[2] + cidx[i, 2]
    order = np.argsort(cell, kind="mergesort")
    total = ncell[0] * ncell[1] * ncell[2]
    start = np.zeros(total + 1, dtype=np.int64)
    for i in range(n):
        start[cell[i] + 1] += 1
    for c in range(total):
        start[c + 1] += start[c]

    # per-axis neighbour offsets; a periodic axis with fewer than three
    # cells must not visit the same cell twice
    offs = np.zeros((3, 3), dtype=np.int64)
    noff = np.zeros(3, dtype=np.int64)
    for k in range(3):
        if ncell[k] >= 3 or not periodic[k]:
            offs[k, 0], offs[k, 1], offs[k, 2] = -1, 0, 1
            noff[k] = 3
        elif ncell[k] == 2:
            offs[k, 0], offs[k, 1] = 0, 1
            noff[k] = 2
        else:
            offs[k, 0] = 0
            noff[k] = 1

    cap = n * 32 + 16
    first = np.empty(cap, dtype=np.int64)
    second = np.empty(cap, dtype=np.int64)
    npair = 0
    r2max = rlist * rlist
    d = np.empty(3)
    for i in range(n):
        for a in range(noff[0]):
            cx = cidx[i, 0] + offs[0, a]
            if periodic[0]:
                cx %= ncell[0]
            elif cx < 0 or cx >= ncell[0]:
                continue
            for b in range(noff[1]):
                cy = cidx[i, 1] + offs[1, b]
                if periodic[1]:
                    cy %= ncell[1]
                elif cy < 0 or cy >= ncell[1]:
                    continue
                for g in range(noff[2]):
                    cz = cidx[i, 2] + offs[2, g]
                    if periodic[2]:
                        cz %= ncell[2]
                    elif cz < 0 or cz >= ncell[2]:
                        continue
                    c = (cx * ncell[1] + cy) * ncell[2] + cz
                    for s in range(start[c], start[c + 1]):
                        j = order[s]
                        if j <= i:
                            continue
                        if side[i] * side[j] == -1:
                            continue
                        for k in range(3):
                            d[k] = pos[j, k] - pos[i, k]
                        _min_image(d, box, periodic)
                        r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                        if r2 < r2max:
                            if npair == cap:
                                cap *= 2
                                f2 = np.empty(cap, dtype=np.int64)
                                s2 = np.empty(cap, dtype=np.int64)
                                f2[:npair] = first[:npair]
                                s2[:npair] = second[:npair]
                                first, second = f2, s2
                            first[npair] = i
                            second[npair] = j
                            npair += 1
    # canonical order, independent of cell layout
    key = first[:npair] * n + second[:npair]
    srt = np.argsort(key, kind="mergesort")
    return first[:npair][srt].copy(), second[:npair][srt].copy()


@njit(cache=True)
def pair_forces(pos, box, periodic, elem, first, second, D, alpha, r0, rc, e_rc, f_rc, want_virial):
    """Shifted-force Morse forces, energy and per-atom pair virial.

    The virial row of each atom holds (1/2) sum_j (r_j - r_i)_a f_ij_b in
    the order xx, yy, zz, xy, yz, zx, where f_ij is the force on i from j.
    Returns (forces, energy, virial, smallest pair distance).
    """
    n = pos.shape[0]
    f = np.zeros((n, 3))
    vir = np.zeros((n if want_virial else 1, 6))
    energy, rmin = _accumulate(pos, box, periodic, elem, first, second, D, alpha, r0, rc, e_rc, f_rc,
                               f, vir, want_virial)
    return f, energy, vir, rmin


@njit(cache=True)
def _accumulate(pos, box, periodic, elem, first, second, D, alpha, r0, rc, e_rc, f_rc, f, vir, want_virial):
    lx, ly, lz = box[0], box[1], box[2]
    px, py, pz = periodic[0], periodic[1], periodic[2]
    energy = 0.0
    rmin = np.inf
    for p in range(first.shape[0]):
        i = first[p]
        j = second[p]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        dz = pos[j, 2] - pos[i, 2]
        if px:
            dx -= lx * np.rint(dx / lx)
        if py:
            dy -= ly * np.rint(dy / ly)
        if pz:
            dz -= lz * np.rint(dz / lz)
        r2 = dx * dx + dy * dy + dz * dz
        a = elem[i]
        b = elem[j]
        cut = rc[a, b]
        if r2 >= cut * cut:
            continue
        r = np.sqrt(r2)
        if r < rmin:
            rmin = r
        al = alpha[a, b]
        dep = D[a, b]
        x = np.exp(-al * (r - r0[a, b]))
        energy += dep * (x * x - 2.0 * x) - e_rc[a, b] - (r - cut) * f_rc[a, b]
        g = (-2.0 * al * dep * (x * x - x) - f_rc[a, b]) / r
        fx = g * dx
        fy = g * dy
        fz = g * dz
        f[i, 0] += fx
        f[i, 1] += fy
        f[i, 2] += fz
        f[j, 0] -= fx
        f[j, 1] -= fy
        f[j, 2] -= fz
        if want_virial:
            w0 = 0.5 * dx * fx
            w1 = 0.5 * dy * fy
            w2 = 0.5 * dz * fz
            w3 = 0.5 * dx * fy
            w4 = 0.5 * dy * fz
            w5 = 0.5 * dz * fx
            vir[i, 0] += w0
            vir[i, 1] += w1
            vir[i, 2] += w2
            vir[i, 3] += w3
            vir[i, 4] += w4
            vir[i, 5] += w5
            vir[j, 0] += w0
            vir[j, 1] += w1
            vir[j, 2] += w2
            vir[j, 3] += w3
            vir[j, 4] += w4
            vir[j, 5] += w5
    return energy, rmin


@njit(cache=True)
def verlet_run(pos, vel, force, inv_m, mobile, anchors, direction, height, strains, dt, box, periodic,
               side, elem, first, second, ref, rlist, skin, D, alpha, r0, rc, e_rc, f_rc, min_sep):
    """Velocity-Verlet steps, one per entry of ``strains``, all in place.

    Fixed atoms (``mobile`` false) are placed at anchor + direction *
    strain * height / 2 along y at the end of each step. The pair list is
    rebuilt whenever an atom has moved more than half the skin since
    ``ref``. Returns (pair list, reference positions, status), status 0 on
    success, 1 on overlapping atoms and 2 on a non-finite state.
    """
    n = pos.shape[0]
    half_skin2 = (0.5 * skin) ** 2
    dummy = np.zeros((1, 6))
    for s in range(strains.shape[0]):
        for i in range(n):
            if mobile[i]:
                for k in range(3):
                    vel[i, k] += 0.5 * dt * force[i, k] * inv_m[i]
                    pos[i, k] += dt * vel[i, k]
            else:
                ty = anchors[i, 1] + direction[i] * 0.5 * strains[s] * height
                vel[i, 0] = (anchors[i, 0] - pos[i, 0]) / dt
                vel[i, 1] = (ty - pos[i, 1]) / dt
                vel[i, 2] = (anchors[i, 2] - pos[i, 2]) / dt
                pos[i, 0] = anchors[i, 0]
                pos[i, 1] = ty
                pos[i, 2] = anchors[i, 2]
            for k in range(3):
                if periodic[k]:
                    pos[i, k] -= box[k] * np.floor(pos[i, k] / box[k])
        rebuild = False
        for i in range(n):
            d2 = 0.0
            for k in range(3):
                d = pos[i, k] - ref[i, k]
                if periodic[k]:
                    d -= box[k] * np.rint(d / box[k])
                d2 += d * d
            if not d2 <= half_skin2:
                rebuild = True
                break
        if rebuild:
            for i in range(n):
                for k in range(3):
                    if not np.isfinite(pos[i, k]):
                        return first, second, ref, 2
            first, second = build_pairs(pos, box, periodic, side, rlist)
            ref = pos.copy()
        force[:, :] = 0.0
        _, rmin = _accumulate(pos, box, periodic, elem, first, second, D, alpha, r0, rc, e_rc, f_rc,
                              force, dummy, False)
        if rmin < min_sep:
            return first, second, ref, 1
        for i in range(n):
            if mobile[i]:
                for k in range(3):
                    vel[i, k] += 0.5 * dt * force[i, k] * inv_m[i]
                    if not np.isfinite(vel[i, k]):
                        return first, second, ref, 2
    return first, second, ref, 0
