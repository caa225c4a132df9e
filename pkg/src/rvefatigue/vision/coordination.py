"""Neighbour counting to separate crack-face atoms from bulk."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

BCC_FIRST_SHELL = np.sqrt(3.0) / 2.0  # in lattice constants
BCC_SECOND_SHELL = 1.0


def default_cutoff(lattice_constant: float) -> float:
    """Midway between the first and second BCC neighbour shells."""
    return 0.5 * (BCC_FIRST_SHELL + BCC_SECOND_SHELL) * lattice_constant


def coordination_numbers(
    positions: np.ndarray,
    cutoff: float,
    box: np.ndarray | None = None,
    periodic=(False, False, False),
) -> np.ndarray:
    """Neighbour count of every atom within ``cutoff``.

    Args:
        positions: (n, 3) coordinates.
        cutoff: neighbour radius.
        box: (3,) box lengths; needed for periodic directions, which run
            from 0 to the box length.
        periodic: per-axis periodicity flags.
    """
    if not cutoff > 0:
        raise ValueError("coordination cutoff must be positive")
    pos = np.atleast_2d(np.asarray(positions, dtype=float)).copy()
    if len(pos) == 0:
        return np.zeros(0, dtype=int)
    dims = pos.shape[1]
    sizes = np.empty(dims)
    for k in range(dims):
        if periodic[k]:
            if box is None:
                raise ValueError("box lengths required for periodic directions")
            sizes[k] = box[k]
            pos[:, k] %= box[k]
        else:
            # an open axis is embedded in a period far longer than the data
            lo = pos[:, k].min()
            pos[:, k] -= lo
            sizes[k] = pos[:, k].max() + 2 * cutoff + 1.0
    tree = cKDTree(pos, boxsize=sizes)
    counts = tree.query_ball_point(pos, cutoff, return_length=True)
    return np.asarray(counts, dtype=int) - 1


def coordination_filter(
    positions: np.ndarray,
    cutoff: float,
    threshold: int = 6,
    box: np.ndarray | None = None,
    periodic=(False, False, False),
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Mask of under-coordinated atoms (count < threshold).

    Atoms marked in ``exclude`` (fixed slabs, outer faces) are never
    flagged but still count as neighbours of others.
    """
    counts = coordination_numbers(positions, cutoff, box, periodic)
    mask = counts < threshold
    if exclude is not None:
        mask &= ~np.asarray(exclude, dtype=bool)
    return mask
