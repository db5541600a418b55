import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pixel_rsma.channel import ScenarioConfig, draw_sample_set, draw_true_channel, substream
from pixel_rsma.em_model import index_to_coder
from pixel_rsma.rsma import RateReport, coded_rows, precoder_power, rates_from_rows
from pixel_rsma.sebo import SeboConfig
from pixel_rsma.wmmse import (OuterLoopConfig, _Surrogate, alternating_optimize,
                              antenna_coder_update, mmse_update, precoder_subproblem_solve,
                              wmmse_precoder)

from conftest import crand

seeds = st.integers(0, 2 ** 32 - 1)


def random_instance(seed, S=4, K=2, N=2):
    rng = np.random.default_rng(seed)
    return crand(rng, S, K, N), crand(rng, N, K + 1)


class TestMmseUpdate:
    def test_scalar_example(self):
        rows = np.ones((1, 1, 1), complex)
        P = np.array([[1.0, 0.0]])
        st_ = mmse_update(rows, P, 1.0)
        assert st_.eps_c[0, 0] == pytest.approx(0.5)
        assert st_.u_c[0, 0] == pytest.approx(2.0)
        assert st_.xi_c[0, 0] == pytest.approx(0.0, abs=1e-15)
        Rc, _ = rates_from_rows(rows, P, 1.0)
        assert st_.xi_hat_c[0] == pytest.approx(1 - Rc[0], abs=1e-15)

    def test_zero_precoder(self):
        st_ = mmse_update(np.ones((1, 2, 2)), np.zeros((2, 3)), 1.0)
        for a in (st_.eps_c, st_.eps_p, st_.u_c, st_.u_p, st_.xi_c, st_.xi_p):
            np.testing.assert_allclose(a, 1.0)

    @given(seeds, st.floats(0.01, 100))
    @settings(max_examples=100, deadline=None)
    def test_rate_identity(self, seed, sigma2):
        rows, P = random_instance(seed)
        state = mmse_update(rows, P, sigma2)
        Rc, Rp = rates_from_rows(rows, P, sigma2)
        assert np.abs(state.xi_hat_c - (1 - Rc)).max() <= 1e-9
        assert np.abs(state.xi_hat_p - (1 - Rp)).max() <= 1e-9

    def test_mmse_is_optimal_equalizer(self):
        rows, P = random_instance(7, S=1)
        state = mmse_update(rows, P, 1.0)
        z = rows[0] @ P

        def mse_c(g, k):
            return abs(g) ** 2 * (np.sum(np.abs(z[k]) ** 2) + 1) - 2 * (g * z[k, 0]).real + 1

        for k in range(2):
            g = state.g_c[0, k]
            base = mse_c(g, k)
            assert base == pytest.approx(state.eps_c[0, k], rel=1e-12)
            for d in (1e-3, 1e-3j, -1e-3):
                assert mse_c(g + d, k) >= base


class TestPrecoderSubproblem:
    def _state(self, seed, S=3, K=2, N=2, P_t=10.0):
        rows, P = random_instance(seed, S, K, N)
        P *= np.sqrt(P_t / precoder_power(P))
        return rows, P, mmse_update(rows, P, 1.0)

    @given(seeds)
    @settings(max_examples=40, deadline=None)
    def test_feasible_and_improving(self, seed):
        rows, P, state = self._state(seed)
        res = precoder_subproblem_solve(rows, state, 10.0, 1.0, P_prev=P)
        sur = _Surrogate(rows, state, 1.0, True)
        assert precoder_power(res.P) <= 10.0 * (1 + 1e-9)
        assert res.value <= sur.primal(P) + 1e-12
        assert res.gap >= -1e-8 and res.gap <= 1e-6 * max(1.0, abs(res.value))

    def test_warm_start_fixed_point(self):
        rows, P, state = self._state(3)
        first = precoder_subproblem_solve(rows, state, 10.0, 1.0)
        again = precoder_subproblem_solve(rows, state, 10.0, 1.0, P_prev=first.P)
        assert abs(again.value - first.value) <= 1e-8

    def test_scalar_grid_oracle(self):
        h = 0.8 - 0.6j
        rows = np.full((1, 1, 1), h)
        P_t = 4.0
        P0 = np.array([[1.0 + 0.5j, 0.3 - 0.2j]])
        state = mmse_update(rows, P0, 1.0)
        sur = _Surrogate(rows, state, 1.0, True)
        res = precoder_subproblem_solve(rows, state, P_t, 1.0)
        # optimal phases align each stream with its equalizer
        ph_c = np.exp(-1j * np.angle(state.g_c[0, 0] * h))
        ph_p = np.exp(-1j * np.angle(state.g_p[0, 0] * h))
        best = np.inf
        for r in np.linspace(0, np.sqrt(P_t), 401):
            for s in np.linspace(0, np.sqrt(max(P_t - r * r, 0.0)), 101):
                best = min(best, sur.primal(np.array([[r * ph_c, s * ph_p]])))
        assert res.value <= best + 1e-3
        assert res.value >= best - 1e-3

    def test_power_active_for_large_weights(self):
        rows, P, state = self._state(11, P_t=0.01)
        res = precoder_subproblem_solve(rows, state, 0.01, 1.0)
        assert precoder_power(res.P) == pytest.approx(0.01, abs=1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_against_convex_solver(self, seed):
        cp = pytest.importorskip("cvxpy")
        K = 2 + seed % 2
        rows, P, state = self._state(seed, S=4, K=K, N=3)
        sur = _Surrogate(rows, state, 1.0, True)
        res = precoder_subproblem_solve(rows, state, 10.0, 1.0)

        X = cp.Variable((3, K + 1), complex=True)
        terms_c, terms_p = [], []
        for k in range(K):
            Lc = np.linalg.cholesky(sur.a_c[k] + 1e-12 * np.eye(3)).conj().T
            Lp = np.linalg.cholesky(sur.a_p[k] + 1e-12 * np.eye(3)).conj().T
            quad_c = sum(cp.sum_squares(Lc @ X[:, i]) for i in range(K + 1))
            quad_p = sum(cp.sum_squares(Lp @ X[:, 1 + i]) for i in range(K))
            terms_c.append(quad_c - 2 * cp.real(sur.b_c[k].conj() @ X[:, 0]) + sur.const_c[k])
            terms_p.append(quad_p - 2 * cp.real(sur.b_p[k].conj() @ X[:, 1 + k])
                           + sur.const_p[k])
        prob = cp.Problem(cp.Minimize(cp.maximum(*terms_c) + sum(terms_p)),
                          [cp.sum_squares(X) <= 10.0])
        prob.solve()
        assert res.value <= prob.value + 1e-5 * max(1.0, abs(prob.value))

    def test_sdma_pins_common(self):
        rows, P, state = self._state(5)
        res = precoder_subproblem_solve(rows, state, 10.0, 1.0, common=False)
        assert np.all(res.P[:, 0] == 0)


class TestWmmsePrecoder:
    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_improves_objective(self, seed):
        rows, P = random_instance(seed, S=5)
        P *= np.sqrt(10.0 / precoder_power(P))
        before = RateReport(*rates_from_rows(rows, P, 1.0)).objective
        P2, obj, _ = wmmse_precoder(rows, P, 10.0, 1.0, max_iters=30)
        assert obj >= before - 1e-8
        assert precoder_power(P2) <= 10.0 * (1 + 1e-9)


def _samples(seed, bank, K=2, S=8, snr_db=20.0):
    cfg = ScenarioConfig.from_snr_db(snr_db, K=K, Q=bank.Q, S=S)
    H = draw_true_channel(cfg, bank.r, substream(seed, 1))
    return cfg, draw_sample_set(cfg, H, substream(seed, 2))


class TestCoderUpdate:
    def test_single_user_exhaustive(self, small_bank):
        cfg, samples = _samples(0, small_bank, K=1)
        P = np.array([[1.0, 2.0], [0.5j, -1.0]])
        coders = np.zeros((1, 6), np.uint8)
        res = antenna_coder_update(samples, small_bank, coders, P, 0, cfg.sigma2,
                                   SeboConfig(J=6, I=1, restarts=1))
        best = -np.inf
        for b in index_to_coder(np.arange(64), 6):
            rows = coded_rows(samples.samples, small_bank(b[None]))
            best = max(best, RateReport(*rates_from_rows(rows, P, 1.0)).objective)
        assert res.value == pytest.approx(best, rel=1e-12)

    def test_two_users_exhaustive(self, small_bank):
        cfg, samples = _samples(1, small_bank)
        P = np.array([[1.0, 2.0, 0.3], [0.5j, -1.0, 1.0]])
        coders = np.zeros((2, 6), np.uint8)
        res = antenna_coder_update(samples, small_bank, coders, P, 1, cfg.sigma2,
                                   SeboConfig(J=6, I=1, restarts=1))
        best = -np.inf
        for b in index_to_coder(np.arange(64), 6):
            B = coders.copy()
            B[1] = b
            rows = coded_rows(samples.samples, small_bank(B))
            Rc, Rp = rates_from_rows(rows, P, 1.0)
            best = max(best, min(Rc) + Rp[1])
        assert res.value == pytest.approx(best, rel=1e-12)

    def test_not_worse_than_incoming(self, small_bank):
        cfg, samples = _samples(2, small_bank)
        P = np.array([[1.0, 2.0, 0.3], [0.5j, -1.0, 1.0]])
        coders = np.array([[1, 0, 1, 0, 1, 0], [0, 1, 1, 0, 0, 1]], np.uint8)
        Rc, Rp = rates_from_rows(coded_rows(samples.samples, small_bank(coders)), P, 1.0)
        res = antenna_coder_update(samples, small_bank, coders, P, 0, cfg.sigma2,
                                   SeboConfig(J=2, I=2, restarts=1))
        assert res.value >= min(Rc) + Rp[0] - 1e-12


class TestAlternating:
    def test_zero_iterations(self, small_bank):
        cfg, samples = _samples(3, small_bank)
        res = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2,
                                   OuterLoopConfig(max_outer_iters=0))
        assert res.trace == [res.report.objective]
        assert np.all(res.coders == 0)

    @pytest.mark.parametrize("common", [True, False])
    def test_monotone_and_feasible(self, small_bank, common):
        cfg, samples = _samples(4, small_bank)
        res = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2,
                                   common=common, rng=np.random.default_rng(0))
        assert np.all(np.diff(res.step_trace) >= -1e-8)
        assert precoder_power(res.P) <= cfg.P_t * (1 + 1e-9)
        if not common:
            assert np.all(res.P[:, 0] == 0)

    def test_warm_start_converges_immediately(self, small_bank):
        cfg, samples = _samples(5, small_bank)
        first = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2,
                                     OuterLoopConfig(rel_tol=1e-6),
                                     rng=np.random.default_rng(0))
        again = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2,
                                     OuterLoopConfig(rel_tol=1e-4), init_P=first.P,
                                     init_B=first.coders, rng=np.random.default_rng(1))
        assert again.outer_iters == 1
        assert again.report.objective >= first.report.objective - 1e-8

    def test_rsma_from_sdma(self, small_bank):
        cfg, samples = _samples(6, small_bank)
        sdma = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2, common=False,
                                    rng=np.random.default_rng(0))
        rsma = alternating_optimize(samples, small_bank, cfg.P_t, cfg.sigma2,
                                    init_P=sdma.P, init_B=sdma.coders,
                                    rng=np.random.default_rng(0))
        assert rsma.report.objective >= sdma.report.objective - 1e-8
