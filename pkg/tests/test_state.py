"""Path-sum state: interactions, norms, reductions, purity, trace distance."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import nmtraj as nt
from nmtraj.chain import ChainConfig, CorrelationKernel, SystemSpec
from nmtraj.state import DensityMatrix
from oracles import TwoMeterOracle, trace_distance as oracle_td


def flat_qubit(psi0=(1.0, 1.0)):
    psi = np.asarray(psi0, dtype=complex)
    return SystemSpec(np.zeros((2, 2)), np.diag([1.0, -1.0]), psi / np.linalg.norm(psi))


def kicked(system, kernel, cfg, n_steps):
    st = nt.initial_total_state(system, kernel, cfg)
    for n in range(1, n_steps + 1):
        evals, evecs = nt.coupling_at_step(system, cfg, n)
        st = nt.apply_interaction(st, n, evals, evecs, cfg.kick_strength)
    return st


class TestApplyInteraction:
    def test_first_kick_branches(self):
        system = flat_qubit()
        kern = CorrelationKernel.table([0.0, 1.0], [1.0, 0.5])
        st = kicked(system, kern, ChainConfig(1.0, 2), 1)
        assert st.n_branches == 2
        assert_allclose(np.abs(st.amps), [1 / np.sqrt(2)] * 2)
        assert_allclose(sorted(st.disps[:, 0]), [-1.0, 1.0])
        assert_allclose(st.disps[:, 1], 0.0)
        assert_allclose(nt.norm_squared(st), 1.0, atol=1e-12)

    def test_second_kick_amplitude_chain(self, qubit, kernel_half, chain_cfg):
        st = kicked(qubit, kernel_half, chain_cfg, 2)
        assert st.n_branches == 4
        ev1, e1 = nt.coupling_at_step(qubit, chain_cfg, 1)
        ev2, e2 = nt.coupling_at_step(qubit, chain_cfg, 2)
        # branch (k-major, j-minor) amplitude is <e2_j|e1_k><e1_k|psi0>
        idx = 0
        for k in range(2):
            for j in range(2):
                expected = (e2[:, j].conj() @ e1[:, k]) * (
                    e1[:, k].conj() @ qubit.initial_ket
                )
                assert_allclose(st.amps[idx], expected, atol=1e-12)
                assert_allclose(st.kets[idx], e2[:, j], atol=1e-12)
                assert_allclose(
                    st.disps[idx], [ev1[k], ev2[j]], atol=1e-12
                )
                idx += 1

    def test_kick_on_pinned_coordinate_updates_pins(self):
        # at a = 0, reading out meter 1 pins the first axis; the second kick
        # is orthogonal to it and must leave pinned values untouched
        from nmtraj.measure import measure_position

        system = flat_qubit()
        kern = CorrelationKernel.table([0.0, 1.0], [1.0, 0.0])
        cfg = ChainConfig(1.0, 2)
        st = kicked(system, kern, cfg, 1)
        st = measure_position(st, 1, 0.4)
        pins_before = st.pins.copy()
        evals, evecs = nt.coupling_at_step(system, cfg, 2)
        st2 = nt.apply_interaction(st, 2, evals, evecs)
        # H = 0: branches stay in coupling eigenstates, no splitting survives
        assert st2.n_branches == st.n_branches
        assert_allclose(st2.pins, pins_before, atol=1e-15)
        assert_allclose(st2.disps[:, 1], st.disps[:, 1] + st2.kets @ [1, -1], atol=1e-12)

    def test_out_of_order_rejected(self, qubit, kernel_half, chain_cfg):
        st = nt.initial_total_state(qubit, kernel_half, chain_cfg)
        evals, evecs = nt.coupling_at_step(qubit, chain_cfg, 2)
        with pytest.raises(ValueError, match="out of order"):
            nt.apply_interaction(st, 2, evals, evecs)
        st = kicked(qubit, kernel_half, chain_cfg, 2)
        with pytest.raises(ValueError, match="out of (order|range)"):
            nt.apply_interaction(st, 3, evals, evecs)

    def test_unitarity_randomized(self):
        rng = np.random.default_rng(5)
        for _ in range(8):
            d = int(rng.integers(2, 5))
            n = int(rng.integers(1, 5))
            h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            h = 0.5 * (h + h.conj().T)
            x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            x = 0.5 * (x + x.conj().T)
            psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            system = SystemSpec(h, x, psi / np.linalg.norm(psi))
            kern = CorrelationKernel.exponential(1.0, float(rng.uniform(0.3, 2.0)))
            cfg = ChainConfig(float(rng.uniform(0.5, 1.5)), n,
                              float(rng.uniform(0.5, 1.5)))
            st = nt.initial_total_state(system, kern, cfg)
            for step in range(1, n + 1):
                evals, evecs = nt.coupling_at_step(system, cfg, step)
                st = nt.apply_interaction(st, step, evals, evecs, cfg.kick_strength)
                assert abs(nt.norm_squared(st) - 1.0) < 1e-12


class TestReducedDensity:
    def test_no_interactions(self, qubit, kernel_half, chain_cfg):
        st = nt.initial_total_state(qubit, kernel_half, chain_cfg)
        rho = nt.reduced_density(st)
        assert_allclose(
            rho.matrix,
            np.outer(qubit.initial_ket, qubit.initial_ket.conj()),
            atol=1e-14,
        )

    def test_unentangled_single_kick_coherence(self):
        # displacement +/-1 under a unit form damps coherences by exp(-2)
        system = flat_qubit((1.0, 1.0))
        kern = CorrelationKernel.table([0.0, 1.0], [1.0, 0.0])
        st = kicked(system, kern, ChainConfig(1.0, 2), 1)
        rho = nt.reduced_density(st)
        # eigenbasis of the coupling is the computational basis here
        assert_allclose(np.abs(rho.matrix[0, 1]), 0.5 * np.exp(-2.0), rtol=1e-12)
        # brute-force grid integration of the explicit joint wavefunction
        xs = np.linspace(-9, 9, 501)
        dx = xs[1] - xs[0]
        g1, g2 = np.meshgrid(xs, xs, indexing="ij")
        c2 = 2.0 / np.pi  # squared normalization of the 2-meter product state
        coh = (
            0.5 * c2
            * np.exp(-((g1 - 1) ** 2 + g2**2))
            * np.exp(-((g1 + 1) ** 2 + g2**2))
        ).sum() * dx * dx
        assert_allclose(np.abs(rho.matrix[0, 1]), coh, atol=1e-9)

    def test_two_kick_state_matches_grid_oracle(self, qubit, kernel_half, chain_cfg):
        st = kicked(qubit, kernel_half, chain_cfg, 2)
        rho = nt.reduced_density(st)
        oracle = TwoMeterOracle(qubit, 0.5).rho2(np.linspace(-9, 9, 401))
        assert oracle_td(rho.matrix, oracle) < 1e-6
        assert nt.trace_distance(rho, DensityMatrix(oracle)) < 1e-6

    def test_trace_equals_norm_squared(self, qubit, kernel_half, chain_cfg):
        st = kicked(qubit, kernel_half, chain_cfg, 2)
        assert_allclose(nt.reduced_density(st).weight, nt.norm_squared(st), atol=1e-12)


class TestPurity:
    def test_pure_projector(self):
        v = np.array([1.0, 1j]) / np.sqrt(2)
        assert_allclose(nt.purity(DensityMatrix(np.outer(v, v.conj()))), 1.0)

    def test_maximally_mixed(self):
        assert_allclose(nt.purity(DensityMatrix(0.5 * np.eye(2))), 0.5)

    def test_normalization_independent(self):
        m = np.diag([0.3, 0.1])
        assert_allclose(
            nt.purity(DensityMatrix(m)), nt.purity(DensityMatrix(m / m.trace()))
        )

    def test_monitored_record_value_frozen(self, qubit, kernel_half, chain_cfg):
        # frozen from the independent line oracle (record y1=0.3, y2=-0.2)
        from nmtraj.measure import Strategy, run_strategy

        res = run_strategy(
            qubit, kernel_half, chain_cfg, Strategy("monitoring"),
            record=[(1, "y1", 0.3), (2, "y2", -0.2)],
        )
        p = nt.purity(res.reduced)
        assert_allclose(p, 0.9863942482034741, atol=1e-10)
        assert p < 1.0 - 1e-3

    def test_zero_weight_rejected(self):
        with pytest.raises(ValueError):
            nt.purity(DensityMatrix(np.zeros((2, 2))))


class TestTraceDistance:
    def test_identical(self):
        m = DensityMatrix(np.diag([0.7, 0.3]))
        assert nt.trace_distance(m, m) == 0.0

    def test_orthogonal_pure_states(self):
        r1 = DensityMatrix(np.diag([1.0, 0.0]))
        r2 = DensityMatrix(np.diag([0.0, 1.0]))
        assert_allclose(nt.trace_distance(r1, r2), 1.0)

    def test_diagonal_case(self):
        r1 = DensityMatrix(np.diag([0.75, 0.25]))
        r2 = DensityMatrix(np.diag([0.5, 0.5]))
        assert_allclose(nt.trace_distance(r1, r2), 0.25)

    def test_metric_properties(self, rng):
        def random_rho():
            m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m = m @ m.conj().T
            return DensityMatrix(m / m.trace().real)

        a, b, c = random_rho(), random_rho(), random_rho()
        assert nt.trace_distance(a, b) == pytest.approx(nt.trace_distance(b, a))
        assert nt.trace_distance(a, c) <= (
            nt.trace_distance(a, b) + nt.trace_distance(b, c) + 1e-12
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            nt.trace_distance(
                DensityMatrix(np.eye(2) / 2), DensityMatrix(np.eye(3) / 3)
            )


class TestDensityMatrixValidation:
    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            DensityMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ValueError, match="PSD"):
            DensityMatrix(np.diag([1.0, -0.5]))

    def test_weight_is_trace(self):
        m = DensityMatrix(np.diag([0.4, 0.1]))
        assert_allclose(m.weight, 0.5)
        assert_allclose(m.normalized().weight, 1.0)
