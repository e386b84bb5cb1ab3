"""Exact calculus of real multivariate Gaussian wavefunctions.

A wavefunction is represented by a quadratic form A (symmetric positive
definite) together with a caller-supplied displacement d:

    phi(x) = exp(log_scale) * exp[-(x - d)^T A (x - d)]

The form is dimensionless; displacements are kept outside the form so that
many wavefunctions sharing A (one per path-sum branch) can reuse the same
``GaussianForm``.  Everything here is real: complex quadratic forms are out
of scope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "NotPositiveDefinite",
    "GaussianForm",
    "normalization_constant",
    "log_normalization_constant",
    "overlap",
    "slice",
    "slice_many",
    "covariance",
    "sample_point",
    "householder_complement",
]

_SYM_TOL = 1e-12
_PD_REL_TOL = 1e-10


class NotPositiveDefinite(ValueError):
    """The supplied quadratic form does not define a normalizable state."""


@dataclass(frozen=True)
class GaussianForm:
    """Quadratic form of a real Gaussian wavefunction on ``dim`` coordinates.

    Parameters
    ----------
    form : (dim, dim) array
        Symmetric positive definite matrix A.  Symmetrized on construction;
        asymmetry beyond 1e-12 or a non-PD spectrum raises.
    log_scale : float
        Accumulated log prefactor from prior slicings (0 for fresh states).
    """

    form: np.ndarray
    log_scale: float = 0.0
    dim: int = field(init=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.form, dtype=float))
        if a.shape == (1, 0):  # atleast_2d artifact for empty input
            a = a.reshape(0, 0)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"form must be square, got shape {a.shape}")
        n = a.shape[0]
        if n > 0:
            asym = np.max(np.abs(a - a.T))
            scale = max(1.0, np.max(np.abs(a)))
            if asym > _SYM_TOL * scale:
                raise ValueError(f"form is not symmetric (max asymmetry {asym:.3e})")
            a = 0.5 * (a + a.T)
            evals = np.linalg.eigvalsh(a)
            if evals[0] <= _PD_REL_TOL * max(evals[-1], 0.0):
                raise NotPositiveDefinite(
                    f"form is not positive definite (eigenvalues in "
                    f"[{evals[0]:.3e}, {evals[-1]:.3e}])"
                )
        a.setflags(write=False)
        object.__setattr__(self, "form", a)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "log_scale", float(self.log_scale))


def _rescaled(g: GaussianForm, log_scale: float) -> GaussianForm:
    """Copy of an already-validated form with a new log_scale (no re-checks)."""
    new = object.__new__(GaussianForm)
    object.__setattr__(new, "form", g.form)
    object.__setattr__(new, "dim", g.dim)
    object.__setattr__(new, "log_scale", float(log_scale))
    return new


def log_normalization_constant(g: GaussianForm) -> float:
    """log c with c^2 = sqrt(det(2A)) / pi^(dim/2), so ``c*phi`` has unit norm."""
    if g.dim == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(2.0 * g.form)
    if sign <= 0:
        raise NotPositiveDefinite("det(2A) not positive")
    return 0.25 * logdet - 0.25 * g.dim * np.log(np.pi)


def normalization_constant(g: GaussianForm) -> float:
    """Positive c such that c^2 * integral exp[-2 x^T A x] dx = 1."""
    return float(np.exp(log_normalization_constant(g)))


def overlap(g: GaussianForm, d1: np.ndarray, d2: np.ndarray) -> float:
    """Overlap <phi(d1)|phi(d2)> of two normalized displaced copies of g.

    Equals exp[-(1/2) (d1-d2)^T A (d1-d2)]; symmetric, 1 iff d1 == d2.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != (g.dim,) or d2.shape != (g.dim,):
        raise ValueError(f"displacements must have length {g.dim}")
    delta = d1 - d2
    return float(np.exp(-0.5 * delta @ g.form @ delta))


def covariance(g: GaussianForm) -> np.ndarray:
    """Covariance matrix of the probability density |phi|^2: (4A)^(-1)."""
    if g.dim == 0:
        return np.zeros((0, 0))
    return np.linalg.inv(4.0 * g.form)


def householder_complement(direction: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane orthogonal to ``direction``.

    Columns 2..n of the Householder reflection that maps the direction onto
    (a sign multiple of) the first axis.  Reproducible across runs and
    platforms; the input must be a unit vector.
    """
    u = np.asarray(direction, dtype=float)
    n = u.shape[0]
    s = 1.0 if u[0] >= 0.0 else -1.0
    v = u.copy()
    v[0] += s
    h = np.eye(n) - (2.0 / (v @ v)) * np.outer(v, v)
    return h[:, 1:]


def _check_direction(direction: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(direction, dtype=float)
    if u.shape != (dim,):
        raise ValueError(f"direction must have length {dim}")
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"direction must be a unit vector (norm {norm!r})")
    return u


def slice_many(
    g: GaussianForm,
    direction: np.ndarray,
    values: np.ndarray,
    displacements: np.ndarray,
) -> tuple[GaussianForm, np.ndarray, np.ndarray]:
    """Condition ``phi(x - d)`` on the hyperplane direction.x = value, batched.

    All rows share the same direction (hence the same complement basis and
    Schur complement); ``values`` and ``displacements`` carry one entry per
    wavefunction.  Returns the restricted form on dim-1 coordinates, the
    per-row induced displacements in the complement basis, and per-row log
    weights (scalar exponent offset plus the prior log_scale).
    """
    u = _check_direction(direction, g.dim)
    values = np.atleast_1d(np.asarray(values, dtype=float))
    disp = np.atleast_2d(np.asarray(displacements, dtype=float))
    if disp.shape != (values.shape[0], g.dim):
        raise ValueError("displacements must be (n_values, dim)")

    basis = householder_complement(u)  # (dim, dim-1)
    a_u = g.form @ u
    beta = float(u @ a_u)
    b = basis.T @ a_u  # (dim-1,)
    m = basis.T @ g.form @ basis  # (dim-1, dim-1)
    if g.dim > 1:
        minv_b = np.linalg.solve(m, b)
        schur = beta - float(b @ minv_b)
    else:
        minv_b = np.zeros(0)
        schur = beta

    c = values - disp @ u  # (n,)
    d_new = disp @ basis - np.outer(c, minv_b)  # (n, dim-1)
    log_w = -schur * c * c + g.log_scale
    return GaussianForm(m), d_new, log_w


def slice(
    g: GaussianForm,
    direction: np.ndarray,
    value: float,
    d: np.ndarray,
) -> tuple[GaussianForm, np.ndarray, float]:
    """Restrict a displaced copy of g to the hyperplane direction.x = value.

    Parametrizing the hyperplane by the deterministic orthonormal complement
    basis (see :func:`householder_complement`), the restriction is again of
    the form exp[log_weight] * exp[-(xi - d')^T A' (xi - d')].

    Returns
    -------
    (g', d', log_weight)
        Restricted form on dim-1 coordinates, induced displacement, and the
        scalar exponent offset (including the prior log_scale).
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (g.dim,):
        raise ValueError(f"displacement must have length {g.dim}")
    g2, d2, lw = slice_many(g, direction, np.array([value]), d[None, :])
    return g2, d2[0], float(lw[0])


def sample_point(
    g: GaussianForm, d: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one point from the probability density |phi(x - d)|^2.

    The density is Gaussian with mean d and covariance (4A)^(-1).
    Deterministic given the generator state.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (g.dim,):
        raise ValueError(f"displacement must have length {g.dim}")
    if g.dim == 0:
        return np.zeros(0)
    z = rng.standard_normal(g.dim)
    # A = L L^T  =>  cov = (4A)^(-1) = (L^-T/2)(L^-T/2)^T
    chol = np.linalg.cholesky(g.form)
    return d + 0.5 * solve_triangular(chol.T, z, lower=False)
