import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from degenkernel.grid import assemble_mode, build_grid
from degenkernel.model import ModelParams, sphere_area
from degenkernel.spectral import (DROP_LOG, ModeBank, SpectralError, apply_semigroup,
                                  apply_semigroup_modes, assemble_kernel, cache_key, ground_state,
                                  kernel_values, kmu_mode, kmu_mode_matrix, mode_kernel_at,
                                  solve_mode, spectral_gap, zonal, zonal_at_one)


class TestSolve:
    def test_invariants(self, small_bank):
        for ell in (0, 1, 3):
            b = small_bank[ell]
            assert b.M == b.op.M
            assert np.all(b.eigenvalues > 0)
            assert np.all(np.diff(b.eigenvalues) > 0)  # simple spectrum
            assert b.orthonormality_error() < 1e-10
            assert b.residual <= 1e-8 * b.eigenvalues[-1]

    def test_tail_refinement_is_eigen_consistent(self, small_bank):
        b = small_bank[0]
        R = b.op.stiffness_apply(b.vectors) - b.mass[:, None] * b.vectors * b.eigenvalues
        assert np.max(np.abs(R)) <= 1e-8 * b.eigenvalues[-1]

    def test_decaying_tail_resolved(self, small_bank):
        # the ground state keeps relative accuracy deep in its tail
        v = small_bank[0].vectors[:, 0]
        assert np.all(np.abs(v) > 0)
        assert np.min(np.abs(v)) < 1e-20

    def test_monotone_in_beta(self, small_grid):
        lam = [solve_mode(assemble_mode(ModelParams(3, 3.0, b), small_grid, 0)).eigenvalues[0]
               for b in (3.0, 4.0, 5.0)]
        assert np.all(np.diff(lam) > 0)

    def test_eigenvector_roundtrip(self, small_bank):
        b = small_bank[0]
        v = b.vectors[:, 0]
        t = 0.3
        assert np.allclose(apply_semigroup(b, t, v), np.exp(-b.eigenvalues[0] * t) * v,
                           atol=1e-12 * np.abs(v).max())


class TestCache:
    def test_cache_roundtrip(self, params, tmp_path, caplog):
        g = build_grid(20.0, 64, 1.5)
        b1 = ModeBank(params, g, cache_dir=tmp_path)[1]
        bank = ModeBank(params, g, cache_dir=tmp_path)
        with caplog.at_level("INFO", logger="degenkernel"):
            b2 = bank[1]
        assert bank.cache_hits == 1 and bank.solves == 0
        assert "eigensolve skipped" in caplog.text
        assert np.array_equal(b1.vectors, b2.vectors)
        assert np.array_equal(b1.eigenvalues, b2.eigenvalues)

    def test_env_var(self, params, tmp_path, monkeypatch):
        monkeypatch.setenv("DEGENKERNEL_CACHE_DIR", str(tmp_path))
        ModeBank(params, build_grid(20.0, 32, 1.5))[0]
        assert len(list(tmp_path.glob("mode-*.npz"))) == 1

    def test_key_distinguishes_inputs(self, params):
        g1, g2 = build_grid(20.0, 64, 1.5), build_grid(20.0, 65, 1.5)
        keys = {cache_key(params, g1, 0), cache_key(params, g2, 0), cache_key(params, g1, 1),
                cache_key(ModelParams(3, 3.0, 5.0), g1, 0),
                cache_key(params, g1, 0, laplacian_only=True)}
        assert len(keys) == 5


class TestModeKernel:
    def test_symmetry(self, small_bank):
        b = small_bank[1]
        for a, c in ((3, 50), (100, 7)):
            assert kmu_mode(b, 0.05, a, c) == kmu_mode(b, 0.05, c, a)
        K = kmu_mode_matrix(b, 0.05)
        assert np.array_equal(K, K.T)

    def test_rejects_nonpositive_time(self, small_bank):
        with pytest.raises(ValueError):
            kmu_mode(small_bank[0], 0.0, 1, 1)
        with pytest.raises(ValueError):
            apply_semigroup(small_bank[0], -1.0, np.ones(small_bank[0].M))

    def test_large_time_single_term(self, small_bank):
        b = small_bank[0]
        gap = b.eigenvalues[1] - b.eigenvalues[0]
        t = 31.0 / gap
        v = b.vectors[:, 0]
        for a, c in ((10, 20), (150, 40)):
            lead = np.exp(-b.eigenvalues[0] * t) * v[a] * v[c]
            assert kmu_mode(b, t, a, c) / lead == pytest.approx(1.0, abs=1e-6)

    def test_dropped_terms_are_negligible(self, small_bank):
        b = small_bank[0]
        t = 0.01
        n = b.kept(t)
        assert n < b.M
        assert b.eigenvalues[n] - b.eigenvalues[0] > DROP_LOG / t

    def test_mu_mass_decays(self, small_bank):
        b = small_bank[0]
        m = b.mass
        masses = [kmu_mode_matrix(b, t)[20] @ m for t in (0.01, 0.05, 0.2, 1.0)]
        assert np.all(np.diff(masses) < 0)

    def test_chapman_kolmogorov(self, small_bank):
        for ell in (0, 2):
            b = small_bank[ell]
            K1, K2, K3 = (kmu_mode_matrix(b, t) for t in (0.02, 0.05, 0.07))
            comp = K1 @ (b.mass[:, None] * K2)
            peak = np.abs(K3).max()
            assert np.max(np.abs(comp - K3)) <= 1e-8 * peak

    def test_semigroup_property(self, small_bank, rng):
        b = small_bank[0]
        f = rng.standard_normal(b.M)
        one = apply_semigroup(b, 0.07, f)
        two = apply_semigroup(b, 0.03, apply_semigroup(b, 0.04, f))
        assert np.max(np.abs(one - two)) <= 1e-10 * np.abs(one).max()

    def test_identity_at_zero(self, small_bank, rng):
        f = rng.standard_normal(small_bank[0].M)
        out = apply_semigroup(small_bank[0], 0.0, f)
        assert np.array_equal(out, f) and out is not f

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 5.0), st.integers(0, 2**32 - 1))
    def test_contraction(self, t, seed):
        bank = _bank()
        b = bank[0]
        f = np.random.default_rng(seed).standard_normal(b.M)
        norm = lambda u: np.sqrt(np.sum(b.mass * u * u))
        assert norm(apply_semigroup(b, t, f)) <= norm(f) * (1 + 1e-12)

    def test_mode_resolved_action(self, small_bank, rng):
        f = {0: rng.standard_normal(small_bank[0].M), 2: rng.standard_normal(small_bank[2].M)}
        out = apply_semigroup_modes(small_bank, 0.1, f)
        assert set(out) == {0, 2}
        assert np.allclose(out[2], apply_semigroup(small_bank[2], 0.1, f[2]))

    def test_off_node_matches_nodes(self, small_bank):
        b = small_bank[1]
        g = b.grid
        rx, ry = g.nodes[[5, 40]], g.nodes[[60, 40]]
        K = kmu_mode_matrix(b, 0.1)
        assert np.allclose(mode_kernel_at(b, 0.1, rx, ry), [K[5, 60], K[40, 40]], rtol=1e-12)

    def test_radius_out_of_range(self, small_bank):
        with pytest.raises(ValueError):
            mode_kernel_at(small_bank[0], 0.1, [25.0], [1.0])


class TestZonal:
    @pytest.mark.parametrize("N", [3, 4, 5, 6])
    def test_at_one(self, N):
        for ell in range(6):
            assert zonal(N, ell, 1.0) == pytest.approx(zonal_at_one(N, ell), rel=1e-12)

    def test_n3_legendre(self):
        c = np.linspace(-1, 1, 7)
        for ell in range(5):
            want = (2 * ell + 1) / (4 * np.pi) * special.eval_legendre(ell, c)
            assert np.allclose(zonal(3, ell, c), want)

    @pytest.mark.parametrize("N", [3, 4, 5])
    def test_reproducing_property(self, N):
        # int_{S^{N-1}} Z_l(x.y) Z_m(y.z) dy = delta_lm Z_l(x.z); for x = z this gives
        # |S^{N-2}| int_{-1}^{1} Z_l(c)^2 (1-c^2)^{(N-3)/2} dc = Z_l(1)
        c, w = special.roots_jacobi(40, (N - 3) / 2, (N - 3) / 2)
        for ell in range(6):
            for m in range(6):
                val = sphere_area(N - 1) * np.sum(w * zonal(N, ell, c) * zonal(N, m, c))
                want = zonal_at_one(N, ell) if ell == m else 0.0
                assert val == pytest.approx(want, abs=1e-10)

    def test_dimension_count(self):
        # harmonics of degree l on S^2: 2l + 1
        for ell in range(5):
            assert zonal_at_one(3, ell) * 4 * np.pi == pytest.approx(2 * ell + 1)


class TestKernel:
    def test_on_axis_is_radial_mode(self, small_bank):
        g = small_bank.grid
        ev = assemble_kernel(small_bank, 0.1, g.nodes[30], 0.0)
        k0 = mode_kernel_at(small_bank[0], 0.1, [g.nodes[30]], [0.0])[0]
        assert ev.value_kmu == pytest.approx(k0 / (4 * np.pi), rel=1e-14)
        assert ev.tail_bound == 0.0

    def test_k_relation(self, small_bank, params):
        g = small_bank.grid
        ev = assemble_kernel(small_bank, 0.2, g.nodes[40], g.nodes[60], 0.5)
        assert ev.value_k == pytest.approx(ev.value_kmu / params.diffusion(g.nodes[60]), rel=1e-14)
        assert ev.resolved

    def test_symmetric(self, small_bank):
        g = small_bank.grid
        rx = np.array([g.nodes[10], 1.234, 3.0])
        ry = np.array([2.5, g.nodes[80], 0.7])
        c = np.array([0.3, -0.4, 1.0])
        a, _ = kernel_values(small_bank, 0.1, rx, ry, c)
        b, _ = kernel_values(small_bank, 0.1, ry, rx, c)
        assert np.allclose(a, b, rtol=1e-8, atol=0)

    def test_positive(self, small_bank):
        g = small_bank.grid
        r = g.nodes[::30]
        X, Y = np.meshgrid(r, r)
        peak = None
        for c in (1.0, 0.0, -1.0):
            k, tail = kernel_values(small_bank, 0.1, X.ravel(), Y.ravel(), c)
            peak = np.abs(k).max() if peak is None else max(peak, np.abs(k).max())
            assert np.all(k >= -1e-8 * peak)

    def test_sub_markov(self, small_bank):
        # int k(t, x, y) dy = T(t) 1 (x)
        b = small_bank[0]
        for t in (1e-3, 0.01, 0.1, 1.0):
            assert apply_semigroup(b, t, np.ones(b.M)).max() <= 1 + 1e-6

    def test_sub_markov_by_quadrature(self, small_bank, params):
        # angular and radial quadrature of the assembled kernel against dy
        g = small_bank.grid
        c, w = np.polynomial.legendre.leggauss(24)
        x = g.nodes[100]
        ry = g.nodes
        RY, C = np.meshgrid(ry, c, indexing="ij")
        k, _ = kernel_values(small_bank, 0.05, np.full(RY.size, x), RY.ravel(), C.ravel(), l_max=40)
        k = k.reshape(RY.shape) / params.diffusion(RY)
        total = 2 * np.pi * np.sum(k * w[None, :], axis=1) @ (ry ** 2 * g.widths)
        assert total <= 1 + 1e-6
        # agrees with the spectral action on the constant function
        assert total == pytest.approx(apply_semigroup(small_bank[0], 0.05, np.ones(g.M))[100], rel=1e-3)

    def test_unresolved_tail_is_flagged(self, small_bank):
        g = small_bank.grid
        r = g.nodes[300]
        ev = assemble_kernel(small_bank, 1e-3, r, r, 1.0, l_max=2)
        assert not ev.resolved


class TestGroundState:
    def test_positive_and_normalized(self, small_bank):
        gs = ground_state(small_bank)
        assert np.all(gs.psi0 > 0)
        assert np.sum(gs.mass * gs.psi0 ** 2) == pytest.approx(1.0, rel=1e-12)
        assert gs.lambda0 == -gs.lambda1

    def test_rejects_wrong_mode(self, small_bank):
        with pytest.raises(SpectralError):
            ground_state(small_bank[1])

    def test_gap(self, small_bank):
        gap = spectral_gap(small_bank)
        b0, b1 = small_bank[0], small_bank[1]
        assert gap == pytest.approx(min(b0.eigenvalues[1], b1.eigenvalues[0]) - b0.eigenvalues[0])
        assert gap > 0


_BANK = {}


def _bank():
    if "b" not in _BANK:
        _BANK["b"] = ModeBank(ModelParams(3, 3.0, 4.0), build_grid(20.0, 200, 1.5), cache_dir=None)
    return _BANK["b"]
