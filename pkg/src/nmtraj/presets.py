"""Built-in example configuration: a qubit kicking two entangled meters.

The coupling is diag(+1, -1) and the Hamiltonian rotates the coupling
eigenbasis by an angle of pi/4 between consecutive kicks, so the step
couplings do not commute; commuting choices can mask the disturbance that
interleaved monitoring inflicts on entangled meters.
"""

from __future__ import annotations

import numpy as np

from .chain import ChainConfig, CorrelationKernel, SystemSpec

__all__ = ["example_system", "example_kernel", "example_chain"]


def example_system() -> SystemSpec:
    """Qubit with noncommuting step couplings."""
    return SystemSpec(
        hamiltonian=(np.pi / 4.0) * np.array([[0.0, 1.0], [1.0, 0.0]]),
        coupling=np.diag([1.0, -1.0]),
        initial_ket=np.array([1.0, 0.0]),
    )


def example_kernel(a: float = 0.5) -> CorrelationKernel:
    """Two-meter memory kernel with nearest-neighbor entanglement ``a``."""
    return CorrelationKernel.table([0.0, 1.0], [1.0, float(a)])


def example_chain(n_apparatus: int = 2) -> ChainConfig:
    return ChainConfig(epsilon=1.0, n_apparatus=n_apparatus, kick_strength=1.0)
