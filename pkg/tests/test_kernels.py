"""Backend parity: compiled kernels against the numpy reference."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nmtraj.kernels import _pure

fastkern = pytest.importorskip(
    "nmtraj._fastkern", reason="compiled kernels not built"
)


def random_case(rng, nb, m, k):
    disp = rng.standard_normal((nb, m))
    pins = np.repeat(rng.standard_normal((nb // 2 + 1, k)), 2, axis=0)[:nb]
    pins += rng.choice([0.0, 5e-10], size=pins.shape)  # sub-tolerance jitter
    mat = rng.standard_normal((m, m))
    form = mat @ mat.T + m * np.eye(m)
    return disp, pins, form


class TestGramParity:
    @pytest.mark.parametrize("nb,m,k", [(1, 1, 0), (4, 2, 1), (9, 3, 2), (16, 2, 3)])
    def test_matches_pure(self, nb, m, k):
        rng = np.random.default_rng(nb * 100 + m * 10 + k)
        disp, pins, form = random_case(rng, nb, m, k)
        got = fastkern.gram_matrix(disp, pins, form, 1e-9)
        want = _pure.gram_matrix(disp, pins, form, 1e-9)
        assert_allclose(got, want, rtol=1e-14, atol=1e-300)

    def test_empty_live_space(self):
        rng = np.random.default_rng(0)
        pins = rng.standard_normal((3, 2))
        got = fastkern.gram_matrix(np.zeros((3, 0)), pins, np.zeros((0, 0)), 1e-9)
        want = _pure.gram_matrix(np.zeros((3, 0)), pins, np.zeros((0, 0)), 1e-9)
        assert_allclose(got, want)

    def test_pin_mismatch_zeroes_pairs(self):
        disp = np.zeros((2, 1))
        pins = np.array([[0.0], [1.0]])
        for impl in (fastkern, _pure):
            g = impl.gram_matrix(disp, pins, np.eye(1), 1e-9)
            assert g[0, 1] == 0.0 and g[1, 0] == 0.0 and g[0, 0] == 1.0


class TestMixtureParity:
    def test_matches_pure(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            p = int(rng.integers(1, 20))
            coef = rng.standard_normal(p)
            mu = rng.standard_normal(p) * 2.0
            gamma = float(rng.uniform(0.2, 4.0))
            grid = np.linspace(-8, 8, 1001)
            assert_allclose(
                fastkern.mixture_grid(grid, coef, mu, gamma),
                _pure.mixture_grid(grid, coef, mu, gamma),
                rtol=1e-13, atol=1e-300,
            )

    def test_clamps_negative_noise(self):
        grid = np.array([0.0])
        coef = np.array([-1.0])
        mu = np.array([0.0])
        for impl in (fastkern, _pure):
            assert impl.mixture_grid(grid, coef, mu, 1.0)[0] == 0.0


class TestSamplerParity:
    def test_matches_pure(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            p = int(rng.integers(1, 18))
            coef = rng.random(p)
            mu = rng.standard_normal(p)
            gamma = float(rng.uniform(0.3, 3.0))
            lo, hi = mu.min() - 8.0, mu.max() + 8.0
            u = float(rng.random())
            yc = fastkern.sample_mixture(coef, mu, gamma, lo, hi, 4096, u)
            yp = _pure.sample_mixture(coef, mu, gamma, lo, hi, 4096, u)
            # the compiled path uses a multiplicative recurrence; agreement
            # is limited by its accumulated rounding, far below grid spacing
            assert abs(yc - yp) < 1e-9

    def test_zero_mass_raises(self):
        for impl in (fastkern, _pure):
            with pytest.raises(ValueError, match="zero mass"):
                impl.sample_mixture(
                    np.array([0.0]), np.array([0.0]), 1.0, -1.0, 1.0, 64, 0.5
                )
