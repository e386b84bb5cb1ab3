"""Discrete apparatus-chain model construction.

The bath is a finite sequence of von Neumann meters at times tau_n = eps*n,
prepared jointly in an entangled Gaussian state whose quadratic form is the
discretized memory kernel, A[l, m] = eps^2 * alpha(tau_l - tau_m).  The
system kicks meter n once, at tau_n, with strength set by the coupling
operator rotated into the interaction picture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gauss import GaussianForm
from .state import Branch, TotalState

__all__ = [
    "AsymmetricKernelTable",
    "CorrelationKernel",
    "ChainConfig",
    "SystemSpec",
    "build_bath_matrix",
    "coupling_at_step",
    "retarded_coefficients",
    "initial_total_state",
]

_HERM_TOL = 1e-12


class AsymmetricKernelTable(ValueError):
    """Tabulated kernel values violate alpha(tau) = alpha(-tau)."""


@dataclass(frozen=True)
class CorrelationKernel:
    """Bath memory function alpha(tau), real and symmetric in tau.

    Variants: ``markov`` (delta-like, weight g^2), ``exponential``
    (g^2 exp(-gamma |tau|)), ``gaussian`` (g^2 exp(-tau^2 / (2 sigma^2))),
    and ``table`` (linear interpolation of sampled |tau| values, zero
    beyond the last sample).  The markov variant needs the chain step to
    realize the delta: alpha(0) = g^2/eps, so that eps * alpha sums to g^2.
    """

    kind: str
    g2: float = 1.0
    gamma: float | None = None
    sigma: float | None = None
    times: np.ndarray | None = None
    values: np.ndarray | None = None

    @classmethod
    def markov(cls, g2: float = 1.0) -> "CorrelationKernel":
        return cls(kind="markov", g2=float(g2))

    @classmethod
    def exponential(cls, g2: float, gamma: float) -> "CorrelationKernel":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return cls(kind="exponential", g2=float(g2), gamma=float(gamma))

    @classmethod
    def gaussian(cls, g2: float, sigma: float) -> "CorrelationKernel":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(kind="gaussian", g2=float(g2), sigma=float(sigma))

    @classmethod
    def table(cls, times, values) -> "CorrelationKernel":
        """Tabulated kernel. Times are folded to |tau|; conflicting values
        at mirrored times raise :class:`AsymmetricKernelTable`."""
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("times and values must be equal-length 1-D series")
        folded: dict[float, float] = {}
        for ti, vi in zip(np.abs(t), v):
            if ti in folded and abs(folded[ti] - vi) > 1e-12 * max(1.0, abs(vi)):
                raise AsymmetricKernelTable(
                    f"conflicting values at |tau| = {ti}: {folded[ti]} vs {vi}"
                )
            folded.setdefault(float(ti), float(vi))
        order = np.argsort(list(folded.keys()))
        tt = np.array(list(folded.keys()))[order]
        vv = np.array(list(folded.values()))[order]
        return cls(kind="table", times=tt, values=vv)

    def __post_init__(self):
        if self.kind not in ("markov", "exponential", "gaussian", "table"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.g2 < 0:
            raise ValueError("g2 must be nonnegative")

    def evaluate(self, tau, epsilon: float) -> np.ndarray:
        """alpha(tau), vectorized. ``epsilon`` realizes the markov delta as
        a bin of width eps: alpha(0) = g2/eps, zero elsewhere."""
        tau = np.abs(np.asarray(tau, dtype=float))
        if self.kind == "markov":
            return np.where(tau <= 1e-9 * epsilon, self.g2 / epsilon, 0.0)
        if self.kind == "exponential":
            return self.g2 * np.exp(-self.gamma * tau)
        if self.kind == "gaussian":
            return self.g2 * np.exp(-0.5 * (tau / self.sigma) ** 2)
        return np.interp(tau, self.times, self.values, right=0.0)


@dataclass(frozen=True)
class ChainConfig:
    """Chain discretization: step, apparatus count, kick strength."""

    epsilon: float = 1.0
    n_apparatus: int = 2
    kick_strength: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_apparatus < 1:
            raise ValueError("n_apparatus must be >= 1")

    @property
    def times(self) -> np.ndarray:
        """Interaction times tau_n = eps * n for n = 1..N."""
        return self.epsilon * np.arange(1, self.n_apparatus + 1)


@dataclass(frozen=True)
class SystemSpec:
    """Finite-dimensional system: Hamiltonian, coupling operator, initial ket."""

    hamiltonian: np.ndarray
    coupling: np.ndarray
    initial_ket: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        x = np.asarray(self.coupling, dtype=complex)
        psi = np.asarray(self.initial_ket, dtype=complex)
        d = h.shape[0]
        if d < 2 or h.shape != (d, d):
            raise ValueError("hamiltonian must be square with dim >= 2")
        if x.shape != (d, d):
            raise ValueError("coupling must match hamiltonian shape")
        if psi.shape != (d,):
            raise ValueError("initial_ket must be a d-vector")
        for name, op in (("hamiltonian", h), ("coupling", x)):
            dev = np.max(np.abs(op - op.conj().T))
            if dev > _HERM_TOL * max(1.0, np.max(np.abs(op))):
                raise ValueError(f"{name} is not Hermitian (deviation {dev:.3e})")
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > _HERM_TOL * 10:
            raise ValueError(f"initial_ket is not normalized (norm {nrm!r})")
        for arr in (h, x, psi):
            arr.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "coupling", x)
        object.__setattr__(self, "initial_ket", psi)
        object.__setattr__(self, "dim", d)


def build_bath_matrix(kernel: CorrelationKernel, cfg: ChainConfig) -> np.ndarray:
    """Bath quadratic form A[l, m] = eps^2 * alpha(tau_l - tau_m).

    Raises :class:`NotPositiveDefinite` if the kernel/step combination does
    not define a valid (normalizable) joint meter state.
    """
    t = cfg.times
    a = cfg.epsilon**2 * kernel.evaluate(t[:, None] - t[None, :], cfg.epsilon)
    a = 0.5 * (a + a.T)
    GaussianForm(a)  # PD validation
    return a


def coupling_at_step(
    system: SystemSpec, cfg: ChainConfig, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Spectral decomposition of the interaction-picture coupling at step n.

    X_n = exp(i H tau_n) X exp(-i H tau_n).  Eigenvalues are returned in
    ascending order; each eigenvector's phase is fixed so its first
    component of magnitude > 1e-12 is real positive.
    """
    if not 1 <= n <= cfg.n_apparatus:
        raise ValueError(f"step {n} out of range 1..{cfg.n_apparatus}")
    tau = cfg.epsilon * n
    energies, basis = np.linalg.eigh(system.hamiltonian)
    rot = (basis * np.exp(1j * energies * tau)) @ basis.conj().T
    xn = rot @ system.coupling @ rot.conj().T
    xn = 0.5 * (xn + xn.conj().T)
    evals, evecs = np.linalg.eigh(xn)
    for j in range(evecs.shape[1]):
        col = evecs[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            phase = col[idx[0]] / abs(col[idx[0]])
            evecs[:, j] = col / phase
    return evals, evecs


def retarded_coefficients(
    kernel: CorrelationKernel, cfg: ChainConfig, s: float
) -> np.ndarray:
    """Coefficient vector of the retarded observable at time s.

    z(s) = sum_k L_k x_k with L_k = 2 eps alpha(s - tau_k); note the scaled
    convention y = z/2 is applied at the strategy layer, not here.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    return 2.0 * cfg.epsilon * kernel.evaluate(s - cfg.times, cfg.epsilon)


def initial_total_state(
    system: SystemSpec, kernel: CorrelationKernel, cfg: ChainConfig
) -> TotalState:
    """Joint state at tau_0: product of the initial ket and the meter Gaussian."""
    a = build_bath_matrix(kernel, cfg)
    n = cfg.n_apparatus
    branch = Branch(
        amplitude=1.0 + 0.0j,
        system_ket=system.initial_ket.copy(),
        displacement=np.zeros(n),
        pinned_values=np.zeros(0),
    )
    return TotalState.from_branches(
        gaussian=GaussianForm(a),
        live_basis=np.eye(n),
        pin_directions=np.zeros((0, n)),
        branches=[branch],
        step_clock=0,
        n_bath=n,
    )
