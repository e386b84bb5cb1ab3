"""Averaging engines and the statistics layer.

Two routes to the ensemble-averaged conditional state: Monte Carlo over
sampled records (per-trajectory seeded streams, batch-means errors) and
deterministic tensor quadrature over outcome space (trapezoid nodes on
adaptive per-measurement ranges).  Averages are taken over unnormalized
conditioned projectors against the outcome measure, which for sampled
records reduces to the plain mean of the normalized conditional states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import (
    ChainConfig,
    CorrelationKernel,
    SystemSpec,
    build_bath_matrix,
    coupling_at_step,
    initial_total_state,
    retarded_coefficients,
)
from .gauss import GaussianForm
from .measure import (
    Strategy,
    StrategyRunner,
    _slice_geometry,
    measure_linear,
    outcome_density,
    sample_outcome,
)
from .state import (
    Branch,
    DensityMatrix,
    TotalState,
    _purity_of,
    _reduced_matrix,
    apply_interaction,
    reduced_density,
    trace_distance,
)

__all__ = [
    "PurityStats",
    "EnsembleReport",
    "CovarianceReport",
    "StrategyComparison",
    "mc_average",
    "quadrature_average",
    "covariance_check",
    "purity_stats",
    "compare_strategies",
    "reference_density",
]

N_BATCHES = 16
PURITY_BINS = 20
MIXED_THRESHOLD = 1.0 - 1e-6


@dataclass(frozen=True)
class PurityStats:
    """Summary of per-record final purities."""

    mean: float
    min: float
    max: float
    histogram: np.ndarray  # counts (or weights) in PURITY_BINS bins on [0, 1]
    fraction_mixed: float  # fraction with purity < 1 - 1e-6
    n_samples: int

    @staticmethod
    def from_values(purities, weights=None) -> "PurityStats":
        p = np.asarray(purities, dtype=float)
        if p.size == 0:
            raise ValueError("no purity values")
        w = None if weights is None else np.asarray(weights, dtype=float)
        hist, _ = np.histogram(p, bins=PURITY_BINS, range=(0.0, 1.0), weights=w)
        if w is None:
            mean = float(np.mean(p))
            frac = float(np.mean(p < MIXED_THRESHOLD))
            lo, hi = float(np.min(p)), float(np.max(p))
        else:
            total = float(np.sum(w))
            mean = float(np.sum(w * p)) / total
            frac = float(np.sum(w[p < MIXED_THRESHOLD])) / total
            # extremes over nodes carrying non-negligible weight
            mask = w > 1e-12 * total
            lo, hi = float(np.min(p[mask])), float(np.max(p[mask]))
        return PurityStats(
            mean=mean,
            min=lo,
            max=hi,
            histogram=hist,
            fraction_mixed=frac,
            n_samples=int(p.size),
        )


@dataclass(frozen=True)
class EnsembleReport:
    """Ensemble average of a strategy against the unmeasured reference."""

    strategy: str
    mode: str  # "mc" or "quadrature"
    n_samples: int | None
    quadrature_spec: dict | None
    master_seed: int | None
    average_density: DensityMatrix  # normalized
    standard_error: float  # batch-means aggregate (0 for quadrature)
    reference_density: DensityMatrix  # normalized, unmeasured dynamics
    trace_distance_to_reference: float
    purity_stats: PurityStats
    total_mass: float  # integrated record density (should be ~ 1)


@dataclass(frozen=True)
class CovarianceReport:
    """Empirical covariance of sampled retarded-observable records."""

    empirical: np.ndarray
    expected: np.ndarray
    std_error: np.ndarray
    n_samples: int
    seed: int
    method: str

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical - self.expected)))

    @property
    def max_sigma_units(self) -> float:
        return float(
            np.max(np.abs(self.empirical - self.expected) / self.std_error)
        )

    @property
    def within_3sigma(self) -> bool:
        return bool(self.max_sigma_units <= 3.0)


@dataclass(frozen=True)
class StrategyComparison:
    """One row of the strategy comparison table.

    ``mean_purity`` refers to the final conditional state of each record;
    ``mean_checkpoint_purity`` averages each record's minimum purity over
    the protocol's checkpoint times, which exposes mid-chain entanglement
    with unmeasured meters even when the exhausted chain ends pure.
    """

    strategy: str
    mode: str
    n_samples: int
    master_seed: int
    mean_purity: float
    min_purity: float
    mean_checkpoint_purity: float
    fraction_mixed: float
    trace_distance_to_reference: float
    standard_error: float
    purity_histogram: np.ndarray


def _horizon(strategy: Strategy, cfg: ChainConfig) -> int:
    if strategy.kind == "all_at_once" and strategy.t_index is not None:
        return strategy.t_index
    return cfg.n_apparatus


def reference_density(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    horizon: int | None = None,
) -> DensityMatrix:
    """Unmeasured reduced state after ``horizon`` interactions, normalized."""
    n = horizon if horizon is not None else cfg.n_apparatus
    st = initial_total_state(system, kernel, cfg)
    for step in range(1, n + 1):
        evals, evecs = coupling_at_step(system, cfg, step)
        st = apply_interaction(st, step, evals, evecs, cfg.kick_strength)
    return reduced_density(st).normalized()


def mc_average(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    strategy: Strategy,
    n_samples: int,
    master_seed: int,
) -> EnsembleReport:
    """Monte Carlo ensemble average over sampled measurement records.

    Trajectory t uses the stream seeded by (master_seed, t).  The reported
    standard error aggregates elementwise batch-means errors (16 batches)
    in the Frobenius norm.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    runner = StrategyRunner(system, kernel, cfg, strategy)
    d = system.dim
    total = np.zeros((d, d), dtype=complex)
    n_batches = min(N_BATCHES, n_samples)
    batch_sums = np.zeros((n_batches, d, d), dtype=complex)
    batch_counts = np.zeros(n_batches, dtype=int)
    purities = np.empty(n_samples)
    for t in range(n_samples):
        rng = np.random.default_rng((master_seed, t))
        result = runner.run(rng=rng, purities="final")
        rho_hat = result.reduced.matrix / result.reduced.weight
        total += rho_hat
        b = t * n_batches // n_samples
        batch_sums[b] += rho_hat
        batch_counts[b] += 1
        purities[t] = result.purity_series[-1]
    mean = total / n_samples
    avg = DensityMatrix(0.5 * (mean + mean.conj().T)).normalized()

    if n_batches > 1:
        batch_means = batch_sums / batch_counts[:, None, None]
        resid = batch_means - mean[None, :, :]
        var = np.sum(np.abs(resid) ** 2, axis=0) / (n_batches - 1)
        std_err = float(np.sqrt(np.sum(var) / n_batches))
    else:
        std_err = float("nan")

    ref = reference_density(system, kernel, cfg, _horizon(strategy, cfg))
    return EnsembleReport(
        strategy=strategy.kind,
        mode="mc",
        n_samples=n_samples,
        quadrature_spec=None,
        master_seed=master_seed,
        average_density=avg,
        standard_error=std_err,
        reference_density=ref,
        trace_distance_to_reference=trace_distance(avg, ref),
        purity_stats=PurityStats.from_values(purities),
        total_mass=1.0,
    )


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    dx = grid[1] - grid[0]
    w = np.full(grid.shape, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def quadrature_average(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    strategy: Strategy,
    points_per_axis: int = 201,
    range_sigmas: float = 8.0,
) -> EnsembleReport:
    """Deterministic tensor-grid average of conditioned projectors.

    Each measurement axis gets a trapezoid grid adapted to the conditional
    outcome density at that node (mixture means padded by ``range_sigmas``
    component widths), so the integrand is resolved uniformly well at every
    level.  Feasible for at most 3 measurement events.
    """
    runner = StrategyRunner(system, kernel, cfg, strategy)
    n_measure = sum(1 for e in runner.events if e[0] == "measure")
    if n_measure > 3:
        raise ValueError(
            f"outcome dimension {n_measure} too large for tensor quadrature"
        )
    d = system.dim
    rho_sum = np.zeros((d, d), dtype=complex)
    leaf_purity: list[float] = []
    leaf_weight: list[float] = []

    def recurse(st: TotalState, idx: int, weight: float):
        nonlocal rho_sum
        while idx < len(runner.events) and runner.events[idx][0] == "kick":
            _, n, (evals, evecs) = runner.events[idx]
            st = apply_interaction(st, n, evals, evecs, cfg.kick_strength)
            idx += 1
        if idx == len(runner.events):
            rho = _reduced_matrix(st)
            rho_sum = rho_sum + weight * rho
            tr = float(rho.trace().real)
            if tr > 1e-300:
                leaf_purity.append(_purity_of(rho))
                leaf_weight.append(weight * tr)
            return
        _, coeffs, _tag, _time = runner.events[idx]
        geom = runner.geometry_for(idx, st)
        dens = outcome_density(st, coeffs, geometry=geom)
        grid = dens.grid(points_per_axis, range_sigmas)
        for y, w in zip(grid, _trapezoid_weights(grid)):
            recurse(measure_linear(st, coeffs, y, geometry=geom), idx + 1, weight * w)

    recurse(runner.initial, 0, 1.0)

    total_mass = float(rho_sum.trace().real)
    avg = DensityMatrix(0.5 * (rho_sum + rho_sum.conj().T)).normalized()
    ref = reference_density(system, kernel, cfg, _horizon(strategy, cfg))
    return EnsembleReport(
        strategy=strategy.kind,
        mode="quadrature",
        n_samples=None,
        quadrature_spec={
            "points_per_axis": points_per_axis,
            "range_sigmas": range_sigmas,
        },
        master_seed=None,
        average_density=avg,
        standard_error=0.0,
        reference_density=ref,
        trace_distance_to_reference=trace_distance(avg, ref),
        purity_stats=PurityStats.from_values(leaf_purity, leaf_weight),
        total_mass=total_mass,
    )


def _bare_bath_state(kernel: CorrelationKernel, cfg: ChainConfig) -> TotalState:
    """Meter chain with a trivial (uncoupled) one-dimensional system."""
    a = build_bath_matrix(kernel, cfg)
    n = cfg.n_apparatus
    branch = Branch(
        amplitude=1.0 + 0.0j,
        system_ket=np.array([1.0 + 0.0j]),
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


def covariance_check(
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    n_samples: int,
    seed: int,
    method: str = "measure",
) -> CovarianceReport:
    """Compare the covariance of sampled retarded-observable records with
    the memory kernel matrix alpha(tau_l - tau_m).

    ``method="measure"`` runs the full sequential measurement machinery on
    the bare (uncoupled) meter chain; ``method="direct"`` draws meter
    positions from the joint Gaussian and maps them through the observable
    coefficients (z = (2/eps) A x), which is the same distribution.
    """
    if method not in ("measure", "direct"):
        raise ValueError("method must be 'measure' or 'direct'")
    n = cfg.n_apparatus
    a = build_bath_matrix(kernel, cfg)
    expected = a / cfg.epsilon**2

    if method == "direct":
        rng = np.random.default_rng(seed)
        cov_x = np.linalg.inv(4.0 * a)
        x = rng.multivariate_normal(np.zeros(n), cov_x, size=n_samples)
        z = x @ (2.0 / cfg.epsilon * a).T
    else:
        st0 = _bare_bath_state(kernel, cfg)
        coeff_list = [
            retarded_coefficients(kernel, cfg, t) for t in cfg.times
        ]
        geometry: list = [None] * n
        z = np.empty((n_samples, n))
        for t in range(n_samples):
            rng = np.random.default_rng((seed, t))
            st = st0
            for l in range(n):
                if geometry[l] is None:
                    geometry[l] = _slice_geometry(st, coeff_list[l])
                y, st = sample_outcome(st, coeff_list[l], rng, geometry=geometry[l])
                z[t, l] = y

    emp = np.cov(z.T, ddof=1).reshape(n, n)
    # asymptotic error of Gaussian covariance estimates
    diag = np.diag(expected)
    std_err = np.sqrt(
        (np.outer(diag, diag) + expected**2) / max(n_samples - 1, 1)
    )
    return CovarianceReport(
        empirical=emp,
        expected=expected,
        std_error=std_err,
        n_samples=n_samples,
        seed=seed,
        method=method,
    )


def _sample_purities(
    runner: StrategyRunner, n_samples: int, master_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-record final purity and min-over-checkpoints purity."""
    if runner.strategy.kind == "none":
        result = runner.run(purities="final")
        return (
            np.array([result.purity_series[-1]]),
            np.array([min(result.checkpoint_purities)]),
        )
    finals = np.empty(n_samples)
    mins = np.empty(n_samples)
    for t in range(n_samples):
        rng = np.random.default_rng((master_seed, t))
        result = runner.run(rng=rng, purities="final")
        finals[t] = result.purity_series[-1]
        mins[t] = min(result.checkpoint_purities)
    return finals, mins


def purity_stats(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    strategy: Strategy,
    n_samples: int,
    master_seed: int,
) -> PurityStats:
    """Final conditional purity over sampled records."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    runner = StrategyRunner(system, kernel, cfg, strategy)
    finals, _ = _sample_purities(runner, n_samples, master_seed)
    return PurityStats.from_values(finals)


def compare_strategies(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    n_samples: int,
    master_seed: int,
    mode: str = "quadrature",
    points_per_axis: int = 121,
    range_sigmas: float = 8.0,
    strategies: tuple[Strategy, ...] | None = None,
) -> list[StrategyComparison]:
    """One comparison row per strategy (deterministic given the seeds).

    Averages use the requested mode; purity statistics always come from
    records drawn by the sampler itself, so mixedness fractions reflect the
    physical record distribution.
    """
    if strategies is None:
        strategies = (
            Strategy("none"),
            Strategy("after_interaction"),
            Strategy("all_at_once"),
            Strategy("monitoring"),
        )
    rows = []
    for strat in strategies:
        if mode == "quadrature":
            report = quadrature_average(
                system, kernel, cfg, strat, points_per_axis, range_sigmas
            )
        elif mode == "mc":
            report = mc_average(system, kernel, cfg, strat, n_samples, master_seed)
        else:
            raise ValueError("mode must be 'quadrature' or 'mc'")
        runner = StrategyRunner(system, kernel, cfg, strat)
        finals, mins = _sample_purities(runner, n_samples, master_seed)
        stats = PurityStats.from_values(finals)
        rows.append(
            StrategyComparison(
                strategy=strat.kind,
                mode=mode,
                n_samples=n_samples,
                master_seed=master_seed,
                mean_purity=stats.mean,
                min_purity=stats.min,
                mean_checkpoint_purity=float(np.mean(mins)),
                fraction_mixed=stats.fraction_mixed,
                trace_distance_to_reference=report.trace_distance_to_reference,
                standard_error=report.standard_error,
                purity_histogram=stats.histogram,
            )
        )
    return rows
