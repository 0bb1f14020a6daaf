import math

import numpy as np
import pytest

from losmimo.channel import ChannelMatrix, PilotConfig
from losmimo.errors import ConfigError, SingularMatrixError, StatisticalValidityError
from losmimo.precoding import (
    LinkBudget,
    assemble_sinr,
    estimation_moments,
    inverse_trace,
    rate_per_user,
    sinr_per_user,
    zf_precoder,
    zf_required_power,
)


def random_channel(m, k, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return scale * (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k)))


def cofactor_trace_2x2(g):
    """Trace of the inverse of the literal 2 x 2 matrix G^T G* via the
    adjugate formula; independent of any linear-algebra routine."""
    h = g.T @ g.conj()
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    return ((h[0, 0] + h[1, 1]) / det).real


class TestZfPrecoder:
    def test_single_user_closed_form(self):
        g = random_channel(5, 1, seed=0)
        p = zf_precoder(g)
        norm_sq = float(np.sum(np.abs(g) ** 2))
        assert p.trace == pytest.approx(1.0 / norm_sq, rel=1e-12)
        np.testing.assert_allclose(
            p.matrix, g.conj() / math.sqrt(norm_sq), rtol=1e-12
        )

    def test_orthogonal_equal_norm_columns(self):
        c = 2.5
        g = np.zeros((6, 3), dtype=complex)
        g[0, 0] = g[2, 1] = g[4, 2] = math.sqrt(c)
        p = zf_precoder(g)
        assert p.trace == pytest.approx(3 / c, rel=1e-12)

    def test_trace_matches_cofactor_oracle(self):
        for seed in range(100):
            g = random_channel(4, 2, seed=seed)
            assert zf_precoder(g).trace == pytest.approx(
                cofactor_trace_2x2(g), rel=1e-10
            )

    def test_perfect_csi_diagonalization(self):
        g = random_channel(20, 5, seed=1)
        p = zf_precoder(g)
        v = g.T @ p.matrix
        np.testing.assert_allclose(
            v, np.eye(5) / math.sqrt(p.trace), rtol=0, atol=1e-8
        )

    def test_unit_normalization(self):
        g = random_channel(16, 6, seed=2)
        p = zf_precoder(g)
        assert float(np.sum(np.abs(p.matrix) ** 2)) == pytest.approx(1.0, abs=1e-10)

    def test_underdetermined_rejected(self):
        with pytest.raises(SingularMatrixError):
            zf_precoder(random_channel(2, 4, seed=3))

    def test_singular_matrix_carries_condition_estimate(self):
        g = np.ones((6, 3), dtype=complex)  # rank one
        g += 1e-14 * random_channel(6, 3, seed=4)
        with pytest.raises(SingularMatrixError) as err:
            zf_precoder(g)
        assert err.value.cond_estimate > 1e12

    def test_accepts_channel_matrix_wrapper(self):
        g = random_channel(8, 3, seed=5)
        assert zf_precoder(ChannelMatrix(g)).trace == pytest.approx(
            zf_precoder(g).trace
        )


class TestRequiredPower:
    BUDGET = LinkBudget(rho_dl=0.0, sigma2=1e-9, target_se=4.0)

    def test_zero_target_needs_no_power(self):
        g = random_channel(8, 2, seed=6)
        budget = LinkBudget(rho_dl=0.0, sigma2=1e-9, target_se=0.0)
        assert zf_required_power(g, budget) == 0.0

    def test_scalar_link(self):
        # one user whose |g|^2 equals the noise power: 1 W at 1 bit/s/Hz
        sigma2 = 3e-5
        g = np.array([[math.sqrt(sigma2)]], dtype=complex)
        budget = LinkBudget(rho_dl=0.0, sigma2=sigma2, target_se=1.0)
        assert zf_required_power(g, budget) == pytest.approx(1.0, rel=1e-12)

    def test_grid_sweep_oracle(self):
        # sweep rho over a fine grid and take the first level at which every
        # user's perfect-CSI SINR (from the literal coupling matrix) clears
        # the target
        g = random_channel(8, 2, seed=7, scale=1e-2)
        budget = LinkBudget(rho_dl=0.0, sigma2=1e-7, target_se=3.0)
        p = zf_precoder(g)
        v = g.T @ p.matrix
        gamma = 2.0**budget.target_se - 1.0
        grid = np.geomspace(1e-4, 1e2, 120_001)
        signal = np.abs(np.diagonal(v)) ** 2
        interference = (np.abs(v) ** 2).sum(axis=1) - signal
        sinr = grid[:, None] * signal / (
            budget.sigma2 + grid[:, None] * interference
        )
        feasible = np.all(sinr >= gamma, axis=1)
        oracle = grid[np.argmax(feasible)]
        assert zf_required_power(g, budget) == pytest.approx(oracle, rel=2e-4)

    def test_monotone_in_target(self):
        g = random_channel(8, 3, seed=8)
        powers = [
            zf_required_power(g, LinkBudget(0.0, 1e-9, se)) for se in (1.0, 2.0, 4.0)
        ]
        assert powers[0] < powers[1] < powers[2]

    def test_linear_in_noise(self):
        g = random_channel(8, 3, seed=9)
        p1 = zf_required_power(g, LinkBudget(0.0, 1e-9, 4.0))
        p2 = zf_required_power(g, LinkBudget(0.0, 2e-9, 4.0))
        assert p2 == pytest.approx(2 * p1, rel=1e-12)

    def test_scale_covariance(self):
        g = random_channel(10, 4, seed=10)
        s = 3.7
        assert inverse_trace(s * g) == pytest.approx(
            inverse_trace(g) / s**2, rel=1e-12
        )
        p1 = zf_required_power(g, self.BUDGET)
        p2 = zf_required_power(s * g, self.BUDGET)
        assert p2 == pytest.approx(p1 / s**2, rel=1e-12)


class TestSinr:
    def make_cfg(self, sigma2=1e-9, rho_ul=1e-3, tau_p=4):
        return PilotConfig(tau_p=tau_p, tau_c=10 * tau_p, rho_ul=rho_ul, sigma2=sigma2)

    def test_perfect_csi_limit(self):
        g = ChannelMatrix(random_channel(12, 4, seed=11, scale=1e-3))
        cfg = self.make_cfg(sigma2=0.0)
        budget = LinkBudget(rho_dl=2e-3, sigma2=1e-9, target_se=0.0)
        sinr = sinr_per_user(g, cfg, budget, 50, np.random.default_rng(0))
        expect = budget.rho_dl / (budget.sigma2 * inverse_trace(g))
        np.testing.assert_allclose(sinr, expect, rtol=1e-9)

    def test_zero_downlink_power(self):
        g = ChannelMatrix(random_channel(12, 4, seed=12, scale=1e-3))
        budget = LinkBudget(rho_dl=0.0, sigma2=1e-9, target_se=0.0)
        sinr = sinr_per_user(g, self.make_cfg(), budget, 50, np.random.default_rng(0))
        assert np.all(sinr == 0.0)

    def test_matches_independent_naive_implementation(self):
        # different generator family (MT19937), explicit per-draw loops, and
        # the literal textbook formulas throughout
        m, k, n = 8, 2, 100_000
        g = random_channel(m, k, seed=13, scale=1e-2)
        sigma2_pilot = 1e-6
        cfg = PilotConfig(tau_p=2, tau_c=20, rho_ul=1e-3, sigma2=sigma2_pilot)
        budget = LinkBudget(rho_dl=5e-4, sigma2=1e-7, target_se=0.0)

        rs = np.random.RandomState(1234)
        c = math.sqrt(sigma2_pilot / 2) / math.sqrt(cfg.rho_ul * cfg.tau_p)
        n_blocks, block = 10, n // 10
        block_sinr = np.empty((n_blocks, k))
        for b in range(n_blocks):
            vs = np.empty((block, k, k), dtype=complex)
            for i in range(block):
                w = rs.standard_normal((m, k)) + 1j * rs.standard_normal((m, k))
                gh = g + c * w
                h_lit = gh.T @ gh.conj()
                a = gh.conj() @ np.linalg.inv(h_lit)
                a /= math.sqrt(np.trace(np.linalg.inv(h_lit)).real)
                vs[i] = g.T @ a
            ev = vs.mean(axis=0)
            ea2 = (np.abs(vs) ** 2).mean(axis=0)
            sig = np.abs(np.diagonal(ev)) ** 2
            interf = ea2.sum(axis=1) - np.diagonal(ea2)
            var = np.diagonal(ea2) - sig
            block_sinr[b] = budget.rho_dl * sig / (
                budget.sigma2 + budget.rho_dl * (interf + var)
            )
        oracle = block_sinr.mean(axis=0)
        oracle_se = block_sinr.std(axis=0, ddof=1) / math.sqrt(n_blocks)

        ours_blocks = np.empty((n_blocks, k))
        rng = np.random.default_rng(77)
        for b in range(n_blocks):
            ours_blocks[b] = sinr_per_user(
                ChannelMatrix(g), cfg, budget, block, rng
            )
        ours = ours_blocks.mean(axis=0)
        ours_se = ours_blocks.std(axis=0, ddof=1) / math.sqrt(n_blocks)

        combined = np.sqrt(oracle_se**2 + ours_se**2)
        assert np.all(np.abs(ours - oracle) <= 3 * combined)

    def test_sinr_degrades_with_pilot_noise(self):
        # statistical monotonicity check over many user drops
        rng = np.random.default_rng(15)
        n_drops, k = 100, 3
        levels = [1e-8, 1e-7, 1e-6]
        means = np.empty((len(levels), n_drops))
        for d in range(n_drops):
            g = ChannelMatrix(
                1e-2 * (rng.standard_normal((12, k)) + 1j * rng.standard_normal((12, k)))
            )
            for j, s2 in enumerate(levels):
                cfg = self.make_cfg(sigma2=s2, tau_p=k)
                budget = LinkBudget(rho_dl=1e-3, sigma2=1e-7, target_se=0.0)
                sinr = sinr_per_user(g, cfg, budget, 400, np.random.default_rng(1000 + d))
                means[j, d] = sinr.mean()
        for j in range(len(levels) - 1):
            diff = means[j] - means[j + 1]
            slack = 3 * diff.std(ddof=1) / math.sqrt(n_drops)
            assert diff.mean() > -slack

    def test_discard_accounting(self):
        g = ChannelMatrix(random_channel(6, 2, seed=16, scale=1e-3))
        cfg = self.make_cfg(tau_p=2)
        _, _, n_used, discarded = estimation_moments(
            g, cfg, 64, np.random.default_rng(2)
        )
        assert n_used == 64 and discarded == 0

    def test_all_singular_draws_raise(self):
        # rank-one channel with zero pilot noise keeps every draw singular
        g = ChannelMatrix(np.ones((6, 2), dtype=complex))
        cfg = PilotConfig(tau_p=2, tau_c=20, rho_ul=1e-3, sigma2=0.0)
        with pytest.raises(StatisticalValidityError):
            estimation_moments(g, cfg, 16, np.random.default_rng(3))


class TestRatePerUser:
    CFG = PilotConfig(tau_p=200, tau_c=2000, rho_ul=1e-3, sigma2=1e-9)

    def test_zero_sinr(self):
        assert rate_per_user(np.zeros(3), self.CFG) == pytest.approx(0.0)

    def test_unit_prelog_limit(self):
        cfg = PilotConfig(tau_p=1, tau_c=10**9, rho_ul=1e-3, sigma2=1e-9)
        assert rate_per_user(np.array([15.0]), cfg)[0] == pytest.approx(4.0, rel=1e-6)

    def test_prelog_scales_rate(self):
        # tau_p / tau_c = 0.1: (1 - 0.1) * log2(16) = 3.6
        assert rate_per_user(np.array([15.0]), self.CFG)[0] == pytest.approx(
            3.6, rel=1e-12
        )

    def test_negative_sinr_rejected(self):
        with pytest.raises(ConfigError):
            rate_per_user(np.array([-0.1]), self.CFG)
