"""Pure numpy implementation of the hot accumulation kernels.

Mirrors ``nmtraj._fastkern``; selected at import time by
``nmtraj.kernels`` when the compiled extension is unavailable or when
``NMTRAJ_KERNELS=py`` is set.
"""

from __future__ import annotations

import numpy as np

BACKEND = "py"


def gram_matrix(
    disp: np.ndarray, pins: np.ndarray, form: np.ndarray, pin_tol: float
) -> np.ndarray:
    """Pairwise branch overlap matrix.

    G[p, q] = exp[-(1/2) (d_p - d_q)^T A (d_p - d_q)] if the pinned values of
    branches p and q agree entrywise within pin_tol, else 0.

    Parameters
    ----------
    disp : (B, m) array
        Branch displacements in live coordinates.
    pins : (B, k) array
        Branch pinned values (k may be 0).
    form : (m, m) array
        Quadratic form of the shared live Gaussian.
    """
    disp = np.ascontiguousarray(disp, dtype=float)
    pins = np.ascontiguousarray(pins, dtype=float)
    nb = disp.shape[0]
    if disp.shape[1] > 0:
        delta = disp[:, None, :] - disp[None, :, :]
        quad = np.einsum("pqi,ij,pqj->pq", delta, form, delta)
        g = np.exp(-0.5 * quad)
    else:
        g = np.ones((nb, nb))
    if pins.shape[1] > 0:
        match = (
            np.abs(pins[:, None, :] - pins[None, :, :]).max(axis=2) <= pin_tol
        )
        g = np.where(match, g, 0.0)
    return g


def mixture_grid(
    grid: np.ndarray, coef: np.ndarray, mu: np.ndarray, gamma: float
) -> np.ndarray:
    """Evaluate sum_p coef[p] * exp(-gamma * (y - mu[p])^2) on a grid.

    Cross-branch components can be negative; the total is a probability
    density, so the result is clamped at 0 to absorb rounding noise.
    """
    grid = np.asarray(grid, dtype=float)
    coef = np.asarray(coef, dtype=float)
    mu = np.asarray(mu, dtype=float)
    delta = grid[None, :] - mu[:, None]
    vals = coef @ np.exp(-gamma * delta * delta)
    return np.maximum(vals, 0.0)


def sample_mixture(
    coef: np.ndarray,
    mu: np.ndarray,
    gamma: float,
    lo: float,
    hi: float,
    points: int,
    u: float,
) -> float:
    """Inverse-CDF draw from the mixture density on a uniform grid.

    Builds the density on ``points`` nodes over [lo, hi], accumulates the
    trapezoid CDF, and inverts it at ``u`` (a uniform draw in [0, 1)) by
    linear interpolation.  Raises if the density has zero mass on the grid.
    """
    grid = np.linspace(lo, hi, points)
    pdf = mixture_grid(grid, coef, mu, gamma)
    dx = grid[1] - grid[0]
    cum = np.empty(points)
    cum[0] = 0.0
    np.cumsum(0.5 * dx * (pdf[1:] + pdf[:-1]), out=cum[1:])
    total = cum[-1]
    if total <= 0.0:
        raise ValueError("outcome density has zero mass on the sampling grid")
    target = u * total
    idx = min(max(int(np.searchsorted(cum, target, side="right")) - 1, 0), points - 2)
    seg = cum[idx + 1] - cum[idx]
    frac = (target - cum[idx]) / seg if seg > 0.0 else 0.0
    return float(grid[idx] + frac * dx)
