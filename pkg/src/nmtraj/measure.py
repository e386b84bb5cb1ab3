"""Measurement primitives and named measurement strategies.

Projective position readout and conditioning on linear position observables
(projector densities of rank > 1) are both realized as exact hyperplane
slicing of the shared live Gaussian.  The squared norm of a conditioned
state equals the probability density of its outcome record, so completeness
(integrating the density over outcomes returns the parent norm) holds by
construction and is verified in the tests.

Strategies
----------
``none``
    Interactions only; the reduced state is the unmeasured dynamics.
``after_interaction``
    Read out meter n's position right after kick n.  Never disturbs later
    kicks, but the conditional state stays entangled with unmeasured meters.
``all_at_once``
    Run kicks unmeasured, then condition jointly on all scaled retarded
    observables at the final time.  Leaves a pure conditional state.
``monitoring``
    Condition on the scaled retarded observable right after each kick.
    For entangled meters this touches coordinates that have not yet
    interacted, disturbing the subsequent evolution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf

from . import gauss, kernels
from .chain import (
    ChainConfig,
    CorrelationKernel,
    SystemSpec,
    coupling_at_step,
    initial_total_state,
    retarded_coefficients,
)
from .state import (
    PIN_TOL,
    DensityMatrix,
    TotalState,
    _prune,
    _purity_of,
    _reduced_matrix,
    apply_interaction,
    reduced_density,
)

__all__ = [
    "DegenerateMeasurement",
    "RecordEntry",
    "MeasurementRecord",
    "Strategy",
    "StrategyResult",
    "StrategyRunner",
    "OutcomeDensity",
    "measure_position",
    "measure_linear",
    "outcome_density",
    "sample_outcome",
    "run_strategy",
]

SAMPLER_POINTS = 4096
SAMPLER_RANGE_SIGMAS = 8.0
_TINY = np.finfo(float).tiny

STRATEGY_KINDS = ("none", "after_interaction", "all_at_once", "monitoring")
_STRATEGY_ALIASES = {"diosi_monitoring": "monitoring"}


class DegenerateMeasurement(ValueError):
    """The observable lies in the pinned subspace: its outcome is already
    determined.  ``forced_values`` holds the per-branch determined value."""

    def __init__(self, forced_values: np.ndarray):
        self.forced_values = np.asarray(forced_values, dtype=float)
        super().__init__(
            "observable is fully pinned; forced outcome(s) "
            f"{self.forced_values.tolist()}"
        )


@dataclass(frozen=True)
class RecordEntry:
    time: float
    observable: str
    outcome: float
    log_weight: float


@dataclass(frozen=True)
class MeasurementRecord:
    """Ordered measurement outcomes with their log weight-densities."""

    entries: tuple[RecordEntry, ...]
    strategy: str

    def __post_init__(self):
        times = [e.time for e in self.entries]
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("record times must be nondecreasing")
        if not all(np.isfinite(e.log_weight) for e in self.entries):
            raise ValueError("record log weights must be finite")

    def outcomes(self) -> np.ndarray:
        return np.array([e.outcome for e in self.entries])

    def replay_triples(self) -> list[tuple[int, str, float]]:
        """Record in the replay wire format: (step, tag, outcome)."""
        return [
            (int(e.observable[1:]), e.observable, e.outcome) for e in self.entries
        ]


@dataclass(frozen=True)
class Strategy:
    """Named measurement strategy; ``t_index`` bounds the all_at_once horizon."""

    kind: str
    t_index: int | None = None

    def __post_init__(self):
        kind = _STRATEGY_ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.t_index is not None and kind != "all_at_once":
            raise ValueError("t_index only applies to all_at_once")


@dataclass(frozen=True)
class StrategyResult:
    """One trajectory: record, final conditioned state and its reductions.

    ``purity_series`` holds the purity of the normalized conditional reduced
    state after each strategy event (kick or measurement, in order).
    ``checkpoint_purities`` picks out the protocol's checkpoint times: the
    state after all events scheduled at each distinct measurement time (for
    the unmeasured strategy, the final time).  Entanglement with meters that
    are not yet read out shows up here even when the exhausted chain leaves
    a pure state at the very end.
    """

    record: MeasurementRecord
    conditional_state: TotalState
    reduced: DensityMatrix
    purity_series: tuple[float, ...]
    checkpoint_purities: tuple[float, ...]
    reduced_series: tuple[np.ndarray, ...] | None = None


@dataclass(frozen=True)
class _SliceGeometry:
    """Branch-independent part of conditioning on L.x = y.

    Depends only on the state's pin/live geometry and the coefficient
    vector, so it can be reused across outcomes and across trajectories
    that share the same event sequence.
    """

    pin_coeffs: np.ndarray  # (k,)  components of L along pinned directions
    u_live: np.ndarray  # (m,)  unit live direction, live coordinates
    l_norm: float  # |live part of L|
    basis: np.ndarray  # (m, m-1) hyperplane complement basis
    minv_b: np.ndarray  # (m-1,)
    schur: float
    new_form: gauss.GaussianForm
    log_c_ratio: float  # log c_A - log c_A' - (1/2) log l_norm
    new_live_basis: np.ndarray  # (N, m-1)
    new_pin_directions: np.ndarray  # (k+1, N)


def _slice_geometry(st: TotalState, coeffs: np.ndarray) -> _SliceGeometry:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (st.n_bath,):
        raise ValueError(f"coefficient vector must have length {st.n_bath}")
    pin_coeffs = st.pin_directions @ coeffs
    live_emb = coeffs - st.pin_directions.T @ pin_coeffs
    u_full = st.live_basis.T @ live_emb
    l_norm = float(np.linalg.norm(u_full))
    if l_norm <= 1e-10 * max(np.linalg.norm(coeffs), 1e-300):
        raise DegenerateMeasurement(st.pins @ pin_coeffs)
    u_live = u_full / l_norm

    g = st.gaussian
    basis = gauss.householder_complement(u_live)
    a_u = g.form @ u_live
    beta = float(u_live @ a_u)
    b = basis.T @ a_u
    m = basis.T @ g.form @ basis
    if g.dim > 1:
        minv_b = np.linalg.solve(m, b)
        schur = beta - float(b @ minv_b)
    else:
        minv_b = np.zeros(0)
        schur = beta
    new_form = gauss.GaussianForm(m)
    log_c_ratio = (
        gauss.log_normalization_constant(g)
        - gauss.log_normalization_constant(new_form)
        - 0.5 * np.log(l_norm)
    )
    new_live_basis = st.live_basis @ basis
    u_emb = st.live_basis @ u_live
    new_pins = np.vstack([st.pin_directions, u_emb[None, :]])
    return _SliceGeometry(
        pin_coeffs=pin_coeffs,
        u_live=u_live,
        l_norm=l_norm,
        basis=basis,
        minv_b=minv_b,
        schur=schur,
        new_form=new_form,
        log_c_ratio=log_c_ratio,
        new_live_basis=new_live_basis,
        new_pin_directions=new_pins,
    )


def _branch_outcome_means(st: TotalState, geom: _SliceGeometry) -> np.ndarray:
    """Mean of the observable on each branch: pinned part + live center."""
    return st.pins @ geom.pin_coeffs + geom.l_norm * (st.disps_live @ geom.u_live)


def measure_linear(
    st: TotalState,
    coeffs: np.ndarray,
    outcome: float,
    geometry: _SliceGeometry | None = None,
) -> TotalState:
    """Condition on the linear position observable sum_k L_k x_k = outcome.

    The live part of L becomes a new pinned direction; each branch's live
    Gaussian is sliced at a branch-dependent constraint value (the pinned
    components of L contribute per-branch offsets).  The result is
    unnormalized: its squared norm is the outcome probability density.
    """
    geom = geometry if geometry is not None else _slice_geometry(st, coeffs)
    disp_live = st.disps_live
    offsets = st.pins @ geom.pin_coeffs
    values = (outcome - offsets) / geom.l_norm
    c = values - disp_live @ geom.u_live
    d_new = disp_live @ geom.basis - np.outer(c, geom.minv_b)
    raw = -geom.schur * c * c + st.gaussian.log_scale + geom.log_c_ratio
    shift = float(np.max(raw + np.log(np.abs(st.amps))))
    if not np.isfinite(shift):
        shift = float(np.max(raw))
    new_state = replace(
        st,
        gaussian=gauss._rescaled(geom.new_form, shift),
        live_basis=geom.new_live_basis,
        pin_directions=geom.new_pin_directions,
        amps=st.amps * np.exp(raw - shift),
        disps=d_new @ geom.new_live_basis.T,
        pins=np.hstack([st.pins, values[:, None]]),
    )
    return _prune(new_state)


def measure_position(st: TotalState, apparatus: int, outcome: float) -> TotalState:
    """Projective position readout of meter ``apparatus`` (1-based)."""
    if not 1 <= apparatus <= st.n_bath:
        raise ValueError(f"apparatus {apparatus} out of range 1..{st.n_bath}")
    coeffs = np.zeros(st.n_bath)
    coeffs[apparatus - 1] = 1.0
    try:
        return measure_linear(st, coeffs, outcome)
    except DegenerateMeasurement as exc:
        raise ValueError(f"coordinate {apparatus} is already pinned") from exc


@dataclass(frozen=True)
class OutcomeDensity:
    """Closed-form outcome density of a linear measurement.

    A signed mixture of equal-width Gaussians, one component per pin-matched
    branch pair:  p(y) = sum_j coef_j exp(-gamma (y - mu_j)^2) >= 0.
    """

    coef: np.ndarray
    mu: np.ndarray
    gamma: float

    @property
    def sigma(self) -> float:
        """Width of each mixture component."""
        return 1.0 / np.sqrt(2.0 * self.gamma)

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return kernels.mixture_grid(y, self.coef, self.mu, self.gamma)

    def integral(self) -> float:
        """Total mass; equals the parent state's squared norm."""
        return float(np.sum(self.coef)) * np.sqrt(np.pi / self.gamma)

    def cdf(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        sg = np.sqrt(self.gamma)
        parts = 0.5 * np.sqrt(np.pi / self.gamma) * (
            1.0 + erf(sg * (y[None, :] - self.mu[:, None]))
        )
        return self.coef @ parts

    def support(
        self, range_sigmas: float = SAMPLER_RANGE_SIGMAS
    ) -> tuple[float, float]:
        pad = range_sigmas * self.sigma
        return float(self.mu.min() - pad), float(self.mu.max() + pad)

    def grid(
        self,
        points: int = SAMPLER_POINTS,
        range_sigmas: float = SAMPLER_RANGE_SIGMAS,
    ) -> np.ndarray:
        lo, hi = self.support(range_sigmas)
        return np.linspace(lo, hi, points)

    def sample(
        self,
        rng: np.random.Generator,
        points: int = SAMPLER_POINTS,
        range_sigmas: float = SAMPLER_RANGE_SIGMAS,
    ) -> float:
        """Inverse-CDF draw on a fixed grid; deterministic given the rng state."""
        lo, hi = self.support(range_sigmas)
        return float(
            kernels.sample_mixture(
                self.coef, self.mu, self.gamma, lo, hi, points, rng.random()
            )
        )


def outcome_density(
    st: TotalState,
    coeffs: np.ndarray,
    geometry: _SliceGeometry | None = None,
) -> OutcomeDensity:
    """Exact density p(y) of outcomes of the observable sum_k L_k x_k.

    p(y) equals ``norm_squared(measure_linear(st, L, y))`` for every y, and
    integrates to the squared norm of ``st``.
    """
    geom = geometry if geometry is not None else _slice_geometry(st, coeffs)
    amps = st.amps
    kets = st.kets
    mu = _branch_outcome_means(st, geom)
    d2 = st.disps_live @ geom.basis  # (B, m-1)

    pair_amp = np.conj(amps)[:, None] * amps[None, :]
    sys_gram = kets.conj() @ kets.T  # <s_p|s_q>
    pin_match = kernels.gram_matrix(
        np.zeros((st.n_branches, 0)), st.pins, np.zeros((0, 0)), PIN_TOL
    )
    mu_diff = mu[:, None] - mu[None, :]
    delta = (
        d2[:, None, :]
        - d2[None, :, :]
        + mu_diff[:, :, None] * (geom.minv_b / geom.l_norm)[None, None, :]
    )
    quad = np.einsum("pqi,ij,pqj->pq", delta, geom.new_form.form, delta)
    log_coef = (
        -0.5 * quad
        - geom.schur * mu_diff**2 / (2.0 * geom.l_norm**2)
        + 2.0 * (st.gaussian.log_scale + geom.log_c_ratio)
    )
    coef = (pair_amp * sys_gram * pin_match).real * np.exp(log_coef)
    mu_bar = 0.5 * (mu[:, None] + mu[None, :])

    keep = np.abs(coef).ravel() > 0.0
    return OutcomeDensity(
        coef=np.ascontiguousarray(coef.ravel()[keep]),
        mu=np.ascontiguousarray(mu_bar.ravel()[keep]),
        gamma=2.0 * geom.schur / geom.l_norm**2,
    )


def sample_outcome(
    st: TotalState,
    coeffs: np.ndarray,
    rng: np.random.Generator,
    geometry: _SliceGeometry | None = None,
    points: int = SAMPLER_POINTS,
    range_sigmas: float = SAMPLER_RANGE_SIGMAS,
) -> tuple[float, TotalState]:
    """Draw an outcome from the exact density and condition on it."""
    geom = geometry if geometry is not None else _slice_geometry(st, coeffs)
    dens = outcome_density(st, coeffs, geometry=geom)
    y = dens.sample(rng, points=points, range_sigmas=range_sigmas)
    return y, measure_linear(st, coeffs, y, geometry=geom)


class StrategyRunner:
    """Reusable trajectory engine for one (system, kernel, chain, strategy).

    Precomputes the coupling eigensystems and observable coefficient
    vectors, and caches the per-event slice geometry after the first run
    (the geometry never depends on the sampled outcomes).
    """

    def __init__(
        self,
        system: SystemSpec,
        kernel: CorrelationKernel,
        cfg: ChainConfig,
        strategy: Strategy,
        points: int = SAMPLER_POINTS,
        range_sigmas: float = SAMPLER_RANGE_SIGMAS,
    ):
        self.system = system
        self.kernel = kernel
        self.cfg = cfg
        self.strategy = strategy
        self.points = points
        self.range_sigmas = range_sigmas
        self.initial = initial_total_state(system, kernel, cfg)
        self.events = self._build_events()
        self.checkpoint_indices = self._checkpoint_indices()
        self._geometry: dict[int, _SliceGeometry] = {}

    def _build_events(self) -> list[tuple]:
        kind = self.strategy.kind
        cfg = self.cfg
        n_total = cfg.n_apparatus
        times = cfg.times
        eig = {n: coupling_at_step(self.system, cfg, n) for n in range(1, n_total + 1)}

        def scaled_retarded(step: int) -> np.ndarray:
            return 0.5 * retarded_coefficients(self.kernel, cfg, times[step - 1])

        events: list[tuple] = []
        if kind == "none":
            for n in range(1, n_total + 1):
                events.append(("kick", n, eig[n]))
        elif kind == "after_interaction":
            for n in range(1, n_total + 1):
                events.append(("kick", n, eig[n]))
                coeffs = np.zeros(n_total)
                coeffs[n - 1] = 1.0
                events.append(("measure", coeffs, f"x{n}", times[n - 1]))
        elif kind == "all_at_once":
            horizon = self.strategy.t_index or n_total
            if not 1 <= horizon <= n_total:
                raise ValueError(f"t_index {horizon} out of range 1..{n_total}")
            for n in range(1, horizon + 1):
                events.append(("kick", n, eig[n]))
            for n in range(1, horizon + 1):
                events.append(
                    ("measure", scaled_retarded(n), f"y{n}", times[horizon - 1])
                )
        else:  # monitoring
            for n in range(1, n_total + 1):
                events.append(("kick", n, eig[n]))
                events.append(("measure", scaled_retarded(n), f"y{n}", times[n - 1]))
        return events

    def _checkpoint_indices(self) -> tuple[int, ...]:
        """Event indices closing each protocol checkpoint: the last event at
        every distinct measurement time (or the final kick if unmeasured)."""
        last_at_time: dict[float, int] = {}
        for idx, event in enumerate(self.events):
            if event[0] == "measure":
                last_at_time[event[3]] = idx
        if not last_at_time:
            return (len(self.events) - 1,)
        return tuple(sorted(last_at_time.values()))

    def geometry_for(self, idx: int, st: TotalState) -> _SliceGeometry:
        geom = self._geometry.get(idx)
        if geom is None:
            geom = _slice_geometry(st, self.events[idx][1])
            self._geometry[idx] = geom
        return geom

    def run(
        self,
        rng: np.random.Generator | None = None,
        record=None,
        purities: str = "all",
        collect_reduced: bool = False,
    ) -> StrategyResult:
        """One trajectory: sample outcomes with ``rng`` or replay ``record``
        (an ordered list of (step, tag, outcome) triples).

        ``purities`` controls the purity series: "all" evaluates it after
        every event, "final" only at checkpoints and the final event (the
        series then holds just those entries, in order).
        """
        if purities not in ("all", "final"):
            raise ValueError("purities must be 'all' or 'final'")
        replay = None
        if record is not None:
            replay = list(record)
            n_measure = sum(1 for e in self.events if e[0] == "measure")
            if len(replay) != n_measure:
                raise ValueError(
                    f"record has {len(replay)} entries, strategy needs {n_measure}"
                )
        st = self.initial
        entries: list[RecordEntry] = []
        purity_series: list[float] = []
        checkpoint_purities: list[float] = []
        reduced_series: list[np.ndarray] = []
        checkpoint_set = set(self.checkpoint_indices)
        m_idx = 0
        last = len(self.events) - 1
        for idx, event in enumerate(self.events):
            if event[0] == "kick":
                _, n, (evals, evecs) = event
                st = apply_interaction(
                    st, n, evals, evecs, kick_strength=self.cfg.kick_strength
                )
            else:
                _, coeffs, tag, time = event
                geom = self.geometry_for(idx, st)
                dens = outcome_density(st, coeffs, geometry=geom)
                if replay is not None:
                    step, rec_tag, outcome = replay[m_idx]
                    expected_step = int(tag[1:])
                    if int(step) != expected_step or (
                        isinstance(rec_tag, str) and rec_tag != tag
                    ):
                        raise ValueError(
                            f"record entry {m_idx} is ({step}, {rec_tag!r}), "
                            f"strategy expects ({expected_step}, {tag!r})"
                        )
                    y = float(outcome)
                else:
                    if rng is None:
                        raise ValueError("sampling a record requires an rng")
                    y = dens.sample(rng, self.points, self.range_sigmas)
                st = measure_linear(st, coeffs, y, geometry=geom)
                log_w = float(np.log(max(dens(y)[0], _TINY)))
                entries.append(RecordEntry(time, tag, y, log_w))
                m_idx += 1
            is_checkpoint = idx in checkpoint_set
            if purities == "all" or idx == last or is_checkpoint or collect_reduced:
                raw = _reduced_matrix(st)
                p = _purity_of(raw)
                purity_series.append(p)
                if is_checkpoint:
                    checkpoint_purities.append(p)
                if collect_reduced:
                    reduced_series.append(raw / raw.trace().real)
        reduced = reduced_density(st)
        return StrategyResult(
            record=MeasurementRecord(tuple(entries), self.strategy.kind),
            conditional_state=st,
            reduced=reduced,
            purity_series=tuple(purity_series),
            checkpoint_purities=tuple(checkpoint_purities),
            reduced_series=tuple(reduced_series) if collect_reduced else None,
        )


def run_strategy(
    system: SystemSpec,
    kernel: CorrelationKernel,
    cfg: ChainConfig,
    strategy: Strategy,
    rng: np.random.Generator | None = None,
    record=None,
) -> StrategyResult:
    """Run one trajectory of the given strategy (sampled or replayed)."""
    return StrategyRunner(system, kernel, cfg, strategy).run(rng=rng, record=record)
