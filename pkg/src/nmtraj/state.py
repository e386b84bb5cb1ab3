"""Path-sum joint state of system and meter chain, and its reductions.

A ``TotalState`` is a finite sum of branches

    |Psi> = exp(log_scale) * sum_p amp_p |sys_p> (x) |pins: v_p> (x) |g(d_p)>

where |g(d)> is the shared normalized live Gaussian displaced by d, and the
pinned directions carry delta-normalized position eigenkets with (possibly
branch-dependent) values v_p.  Squared delta factors common to all branch
pairs are dropped, so the squared norm of a conditioned state equals the
probability density of its measurement record.

Branch data is stored as stacked arrays (amplitudes, kets, displacements,
pinned values) for speed; ``TotalState.branches`` materializes the
per-branch view on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import kernels
from .gauss import GaussianForm

__all__ = [
    "PIN_TOL",
    "Branch",
    "TotalState",
    "DensityMatrix",
    "apply_interaction",
    "norm_squared",
    "reduced_density",
    "purity",
    "trace_distance",
]

PIN_TOL = 1e-9
_PRUNE_REL = 1e-16
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class Branch:
    """One path-sum term: amplitude, system ket, bath kick record, pin values.

    ``displacement`` lives in the original N bath coordinates but is kept
    inside the live (unpinned) subspace; kicks along pinned directions go
    into ``pinned_values`` instead.
    """

    amplitude: complex
    system_ket: np.ndarray
    displacement: np.ndarray
    pinned_values: np.ndarray


@dataclass(frozen=True)
class TotalState:
    """Branch sum with shared live Gaussian and pin geometry.

    Attributes
    ----------
    gaussian : GaussianForm
        Form of the live Gaussian, in the coordinates of ``live_basis``;
        its log_scale is the global log prefactor of the state.
    live_basis : (N, m) array
        Orthonormal columns spanning the live (unpinned) subspace.
    pin_directions : (k, N) array
        Ordered orthonormal pinned directions (rows).
    amps, kets, disps, pins : arrays
        Stacked branch data: (B,) complex amplitudes, (B, d) system kets,
        (B, N) displacements, (B, k) pinned values.
    step_clock : int
        Last completed interaction index.
    """

    gaussian: GaussianForm
    live_basis: np.ndarray
    pin_directions: np.ndarray
    amps: np.ndarray
    kets: np.ndarray
    disps: np.ndarray
    pins: np.ndarray
    step_clock: int
    n_bath: int

    @classmethod
    def from_branches(
        cls,
        gaussian: GaussianForm,
        live_basis: np.ndarray,
        pin_directions: np.ndarray,
        branches: list[Branch],
        step_clock: int,
        n_bath: int,
    ) -> "TotalState":
        n_pins = pin_directions.shape[0]
        return cls(
            gaussian=gaussian,
            live_basis=np.asarray(live_basis, dtype=float),
            pin_directions=np.asarray(pin_directions, dtype=float),
            amps=np.array([b.amplitude for b in branches], dtype=complex),
            kets=np.array([b.system_ket for b in branches], dtype=complex),
            disps=np.array([b.displacement for b in branches], dtype=float),
            pins=np.array(
                [b.pinned_values for b in branches], dtype=float
            ).reshape(len(branches), n_pins),
            step_clock=step_clock,
            n_bath=n_bath,
        )

    @cached_property
    def branches(self) -> list[Branch]:
        return [
            Branch(
                amplitude=complex(self.amps[p]),
                system_ket=self.kets[p],
                displacement=self.disps[p],
                pinned_values=self.pins[p],
            )
            for p in range(self.n_branches)
        ]

    @property
    def n_branches(self) -> int:
        return self.amps.shape[0]

    @property
    def n_pins(self) -> int:
        return self.pin_directions.shape[0]

    @cached_property
    def disps_live(self) -> np.ndarray:
        """Branch displacements in live-basis coordinates, (B, m)."""
        return self.disps @ self.live_basis


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian PSD matrix with its pre-normalization trace as weight."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        dev = np.max(np.abs(m - m.conj().T))
        tr = m.trace().real
        scale = max(1.0, abs(tr))
        if dev > 1e-10 * scale:
            raise ValueError(f"matrix not Hermitian (deviation {dev:.3e})")
        m = 0.5 * (m + m.conj().T)
        if m.shape[0] == 2:
            # analytic eigenvalue bound, cheaper than an eigensolve
            det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
            disc = max(tr * tr - 4.0 * det, 0.0)
            min_eval = 0.5 * (tr - np.sqrt(disc))
        else:
            min_eval = float(np.linalg.eigvalsh(m)[0])
        if min_eval < -1e-10 * scale:
            raise ValueError(f"matrix not PSD (min eigenvalue {min_eval:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def weight(self) -> float:
        return float(self.matrix.trace().real)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def normalized(self) -> "DensityMatrix":
        w = self.weight
        if w <= 0:
            raise ValueError("cannot normalize a zero-weight state")
        return DensityMatrix(self.matrix / w)


def _gram(st: TotalState) -> np.ndarray:
    return kernels.gram_matrix(st.disps_live, st.pins, st.gaussian.form, PIN_TOL)


def _reduced_matrix(st: TotalState) -> np.ndarray:
    """Unnormalized reduced system matrix, without DensityMatrix validation."""
    t = st.amps[:, None] * st.kets
    rho = t.T @ _gram(st) @ t.conj() * np.exp(2.0 * st.gaussian.log_scale)
    return 0.5 * (rho + rho.conj().T)


def _purity_of(matrix: np.ndarray) -> float:
    """Tr[m^2]/Tr[m]^2 for a raw Hermitian matrix."""
    tr = matrix.trace().real
    return float(np.einsum("ij,ji->", matrix, matrix).real) / tr**2


def norm_squared(st: TotalState) -> float:
    """Squared norm of the state; equals the accumulated record density for
    conditioned states (delta-normalization convention, see module doc)."""
    t = st.amps[:, None] * st.kets
    val = np.einsum("pq,pi,qi->", _gram(st), t.conj(), t).real
    return max(float(val), 0.0) * float(np.exp(2.0 * st.gaussian.log_scale))


def reduced_density(st: TotalState) -> DensityMatrix:
    """Reduced system density matrix (unnormalized; trace = norm squared)."""
    return DensityMatrix(_reduced_matrix(st))


def purity(rho: DensityMatrix) -> float:
    """Tr[rho^2] / Tr[rho]^2; equals 1 iff rank one."""
    if rho.weight <= 0:
        raise ValueError("purity of a zero-weight state is undefined")
    m = rho.matrix
    return float(np.einsum("ij,ji->", m, m).real) / rho.weight**2


def trace_distance(r1: DensityMatrix, r2: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of the normalized difference."""
    if r1.dim != r2.dim:
        raise ValueError("dimension mismatch")
    delta = r1.normalized().matrix - r2.normalized().matrix
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(delta))))


def _prune(st: TotalState) -> TotalState:
    """Drop branches whose weight is negligible against the running norm."""
    w = np.abs(st.amps) ** 2
    keep = w >= _PRUNE_REL * max(float(np.sum(w)), _TINY)
    if keep.all():
        return st
    return replace(
        st,
        amps=st.amps[keep],
        kets=st.kets[keep],
        disps=st.disps[keep],
        pins=st.pins[keep],
    )


def apply_interaction(
    st: TotalState,
    n: int,
    eigvals: np.ndarray,
    eigvecs: np.ndarray,
    kick_strength: float = 1.0,
) -> TotalState:
    """Kick meter n: split each branch over the coupling eigenbasis.

    Branch (amp, ket) splits into one sub-branch per eigenpair (lam_j, e_j)
    with amplitude amp * <e_j|ket> and system ket e_j; the bath picks up a
    displacement kick_strength * lam_j along coordinate n, resolved into its
    live component (added to the displacement) and pinned components (added
    to the pinned values).  Norm-preserving; increments the step clock.
    Sub-branches are ordered branch-major, eigenvalue-minor.
    """
    if n != st.step_clock + 1:
        raise ValueError(
            f"interaction {n} applied out of order (clock at {st.step_clock})"
        )
    if not 1 <= n <= st.n_bath:
        raise ValueError(f"step {n} out of range 1..{st.n_bath}")
    nb = st.n_branches
    d = eigvecs.shape[0]
    axis = np.zeros(st.n_bath)
    axis[n - 1] = 1.0
    pin_comp = st.pin_directions @ axis  # (k,)
    live_kick_unit = axis - st.pin_directions.T @ pin_comp
    lam = kick_strength * np.asarray(eigvals, dtype=float)

    overlaps = st.kets @ eigvecs.conj()  # (B, d): <e_j|ket_p>
    amps = (st.amps[:, None] * overlaps).reshape(nb * d)
    kets = np.broadcast_to(eigvecs.T[None, :, :], (nb, d, d)).reshape(nb * d, d)
    disps = (
        st.disps[:, None, :] + lam[None, :, None] * live_kick_unit[None, None, :]
    ).reshape(nb * d, st.n_bath)
    pins = (
        st.pins[:, None, :] + lam[None, :, None] * pin_comp[None, None, :]
    ).reshape(nb * d, st.n_pins)
    return _prune(
        replace(st, amps=amps, kets=kets, disps=disps, pins=pins, step_clock=n)
    )
