"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured figures. The campaign criteria run at desk
scale and take tens of minutes combined; run this module last."""

import json
import math
import time

import numpy as np
import pytest

from losmimo.antenna import C_LIGHT, design_patch, gain
from losmimo.channel import (
    ChannelMatrix,
    PilotConfig,
    estimate_channel,
    estimate_channel_despread,
    pilot_matrix,
)
from losmimo.cli import main
from losmimo.geometry import Room, TopologyKind, build_topology
from losmimo.montecarlo import DropSpec, run_power_campaign, run_rate_campaign
from losmimo.precoding import LinkBudget, zf_precoder
from losmimo.units import dbm_to_watt, watt_to_dbm

from conftest import TABLE1_SUBSTRATE

ROOM = Room(40.0, 40.0, 10.0)
SIGMA2_W = float(dbm_to_watt(-92.0))
RHO_UL_W = float(dbm_to_watt(0.0))


def report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def power_campaigns(table1_dims):
    """Criterion 5/6 workload: all seven deployments, 10^4 drops each."""
    budget = LinkBudget(rho_dl=0.0, sigma2=SIGMA2_W, target_se=4.0)
    pilot = PilotConfig(tau_p=200, tau_c=2000, rho_ul=RHO_UL_W, sigma2=SIGMA2_W)
    spec = DropSpec(k_count=200, n_drops=10_000, seed=20260808)
    results = {}
    t0 = time.perf_counter()
    for kind in TopologyKind:
        topology = build_topology(kind, ROOM, 512, table1_dims.lam)
        results[kind] = run_power_campaign(
            topology, table1_dims, spec, budget, pilot, use_estimates=True
        )
    return results, time.perf_counter() - t0


class TestCriterion1PatchDesign:
    def test_patch_design_matches_oracle(self):
        t0 = time.perf_counter()
        dims = design_patch(TABLE1_SUBSTRATE)
        elapsed = time.perf_counter() - t0

        # independent transcription of the design chain
        w = C_LIGHT / (2 * 2e9) * math.sqrt(2 / 11.2)
        eps_reff = 11.2 / 2 + 9.2 / 2 / math.sqrt(1 + 12 * 1.588e-3 / w)
        dl = 0.412 * 1.588e-3 * (eps_reff + 0.3) * (w / 1.588e-3 + 0.264) / (
            (eps_reff - 0.258) * (w / 1.588e-3 + 0.8)
        )
        l = C_LIGHT / (2 * 2e9 * math.sqrt(eps_reff)) - 2 * dl

        four_digits = (
            abs(dims.w - w) / w < 5e-5
            and abs(dims.eps_reff - eps_reff) / eps_reff < 5e-5
            and abs(dims.l - l) / l < 5e-5
            and abs(dims.delta_l - dl) / dl < 5e-5
        )
        quoted = (
            abs(dims.w - 31.69e-3) / 31.69e-3 < 5e-4
            and abs(dims.eps_reff - 9.235) / 9.235 < 5e-4
            and abs(dims.l - 23.33e-3) / 23.33e-3 < 5e-4
        )
        ok = four_digits and quoted and elapsed < 1.0
        report(
            1, ok,
            f"W={dims.w * 1e3:.4f} mm, eps_reff={dims.eps_reff:.4f}, "
            f"L={dims.l * 1e3:.4f} mm vs oracle, runtime {elapsed:.3f} s (< 1 s)",
        )


class TestCriterion2GainNormalization:
    def test_normalization_and_monte_carlo(self, table1_dims):
        t0 = time.perf_counter()
        theta = np.linspace(0, math.pi, 1501)
        phi = np.linspace(-math.pi / 2, math.pi / 2, 1501)
        g = gain(theta[:, None], phi[None, :], table1_dims)
        inner = np.trapezoid(g * np.sin(theta)[:, None], phi, axis=1)
        sphere_mean = float(np.trapezoid(inner, theta)) / (4 * math.pi)

        rng = np.random.default_rng(424242)
        n = 10_000_000
        th = rng.uniform(0, math.pi, n)
        ph = rng.uniform(-math.pi / 2, math.pi / 2, n)
        x = math.pi * table1_dims.x_len / table1_dims.lam * np.sin(th) * np.cos(ph)
        z = math.pi * table1_dims.w / table1_dims.lam * np.cos(th)
        vals = (np.sinc(x / math.pi) * np.sinc(z / math.pi)) ** 2 * np.sin(th) ** 3
        alpha_sq_mc = 4 * math.pi / (float(vals.mean()) * math.pi**2)
        alpha_sq = table1_dims.alpha**2
        mc_rel = abs(alpha_sq - alpha_sq_mc) / alpha_sq
        elapsed = time.perf_counter() - t0

        # half a unit in the third significant digit
        ok = abs(sphere_mean - 1.0) < 1e-4 and mc_rel < 1.6e-3 and elapsed < 60
        report(
            2, ok,
            f"(1/4pi) integral of G = {sphere_mean:.6f} (|err| < 1e-4), "
            f"alpha^2 quad {alpha_sq:.5f} vs 1e7-sample MC {alpha_sq_mc:.5f} "
            f"(rel {mc_rel:.2e}, 3 significant digits), runtime {elapsed:.1f} s (< 1 min)",
        )


class TestCriterion3ZfProperties:
    def test_zf_property_suite(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(31337)

        worst_trace = 0.0
        worst_norm = 0.0
        for _ in range(1000):
            g = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
            p = zf_precoder(g)
            h = g.T @ g.conj()
            det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
            oracle = ((h[0, 0] + h[1, 1]) / det).real
            worst_trace = max(worst_trace, abs(p.trace - oracle) / abs(oracle))
            worst_norm = max(
                worst_norm, abs(float(np.sum(np.abs(p.matrix) ** 2)) - 1.0)
            )

        worst_diag = 0.0
        for m, k in ((8, 2), (16, 4), (24, 6)):
            for _ in range(40):
                g = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
                p = zf_precoder(g)
                v = g.T @ p.matrix
                worst_diag = max(
                    worst_diag,
                    float(np.abs(v - np.eye(k) / math.sqrt(p.trace)).max()),
                )
        elapsed = time.perf_counter() - t0

        ok = (
            worst_trace < 1e-10
            and worst_norm < 1e-10
            and worst_diag < 1e-8
            and elapsed < 60
        )
        report(
            3, ok,
            f"cofactor-trace max rel err {worst_trace:.2e} (< 1e-10, 1000 instances), "
            f"normalization max err {worst_norm:.2e} (< 1e-10), "
            f"G^T A diagonalization max err {worst_diag:.2e} (< 1e-8), "
            f"runtime {elapsed:.1f} s (< 1 min)",
        )


class TestCriterion4LsEstimation:
    def test_ls_estimation_suite(self):
        t0 = time.perf_counter()
        m, k, n = 8, 4, 100_000
        rng = np.random.default_rng(99)
        g = ChannelMatrix(
            1e-3 * (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k)))
        )
        cfg = PilotConfig(tau_p=4, tau_c=40, rho_ul=1e-3, sigma2=1e-9)

        total = np.zeros((m, k), dtype=complex)
        total_sq = 0.0
        draw = np.random.default_rng(7)
        for _ in range(n):
            err = estimate_channel(g, cfg, draw).entries - g.entries
            total += err
            total_sq += float(np.sum(err.real**2 + err.imag**2))
        expect_var = cfg.sigma2 / (cfg.rho_ul * cfg.tau_p)
        var = total_sq / (n * m * k)
        var_rel = abs(var - expect_var) / expect_var
        bias_bound = 5 * math.sqrt(expect_var / n)
        max_bias = float(np.abs(total / n).max())

        w_p = math.sqrt(cfg.sigma2 / 2) * (
            rng.standard_normal((m, cfg.tau_p)) + 1j * rng.standard_normal((m, cfg.tau_p))
        )
        phi = pilot_matrix(cfg.tau_p, k)
        ref = estimate_channel_despread(g, cfg, pilot_noise=w_p).entries
        short = estimate_channel(g, cfg, noise=w_p @ phi).entries
        path_gap = float(np.abs(ref - short).max()) / float(np.abs(g.entries).max())
        elapsed = time.perf_counter() - t0

        ok = (
            var_rel < 0.01
            and max_bias <= bias_bound
            and path_gap < 1e-10
            and elapsed < 120
        )
        report(
            4, ok,
            f"error variance rel dev {var_rel:.4f} (< 0.01, 1e5 realizations), "
            f"max |bias| {max_bias:.2e} <= {bias_bound:.2e}, "
            f"explicit-pilot vs shortcut gap {path_gap:.2e} (< 1e-10), "
            f"runtime {elapsed:.1f} s (< 2 min)",
        )


class TestCriterion5PowerOrdering:
    def test_topology_ordering_at_median(self, power_campaigns):
        results, elapsed = power_campaigns
        med = {
            kind: float(watt_to_dbm(results[kind].median_power_w))
            for kind in TopologyKind
        }
        cand = med[TopologyKind.CANDELABRUM]
        others = {k: v for k, v in med.items() if k is not TopologyKind.CANDELABRUM}
        cand_margin = cand - max(others.values())
        pairs = [
            (TopologyKind.SINGLE_STRIP_1WALL, TopologyKind.SINGLE_STRIP_4WALLS),
            (TopologyKind.DOUBLE_STRIP_1WALL, TopologyKind.DOUBLE_STRIP_4WALLS),
            (TopologyKind.QUAD_STRIP_1WALL, TopologyKind.QUAD_STRIP_4WALLS),
        ]
        wall_margins = {
            one_wall.value: med[one_wall] - med[four_wall]
            for one_wall, four_wall in pairs
        }
        ok = (
            cand_margin >= 3.0
            and all(v >= 3.0 for v in wall_margins.values())
            and elapsed < 1800
        )
        medians = ", ".join(f"{k.value}={v:.2f}" for k, v in med.items())
        report(
            5, ok,
            f"median dBm: {medians}; candelabrum margin {cand_margin:.2f} dB, "
            f"4-wall vs 1-wall margins "
            + ", ".join(f"{k}={v:.2f} dB" for k, v in wall_margins.items())
            + f" (all >= 3 dB), runtime {elapsed / 60:.1f} min (< 30 min)",
        )


class TestCriterion6PowerAnchor:
    def test_quad_strip_median_near_anchor(self, power_campaigns):
        results, _ = power_campaigns
        med_dbm = float(
            watt_to_dbm(results[TopologyKind.QUAD_STRIP_4WALLS].median_power_w)
        )
        ok = -28.0 <= med_dbm <= -18.0
        report(
            6, ok,
            f"quad-strip-4walls median required power {med_dbm:.2f} dBm "
            f"within -23 dBm +/- 5 dB",
        )


class TestCriterion7RateSurface:
    def test_rate_surface_properties(self, table1_dims):
        t0 = time.perf_counter()
        topology = build_topology(
            TopologyKind.DOUBLE_STRIP_4WALLS, ROOM, 128, table1_dims.lam
        )
        pilot = PilotConfig(tau_p=20, tau_c=200, rho_ul=1e-3, sigma2=SIGMA2_W)
        spec = DropSpec(k_count=20, n_drops=500, seed=777)
        result = run_rate_campaign(
            topology, table1_dims, spec,
            rho_ul_grid_w=dbm_to_watt(np.array([-30.0, -20.0, -10.0, 0.0])),
            rho_dl_grid_w=dbm_to_watt(np.array([-40.0, -33.0, -26.0, -20.0])),
            pilot_base=pilot,
            percentile=0.999,
            n_realizations=200,
        )
        elapsed = time.perf_counter() - t0

        monotone = bool(np.all(np.diff(result.surface, axis=1) >= 0))
        top, second = result.surface[-1], result.surface[-2]
        saturation = float(np.abs(top - second).max() / np.abs(top).min())
        ok = monotone and saturation < 0.02 and elapsed < 1800
        report(
            7, ok,
            f"rate non-decreasing in rho_dl at every rho_ul: {monotone}; "
            f"top two rho_ul rows differ by {100 * saturation:.2f}% (< 2%); "
            f"surface range [{result.surface.min():.3f}, {result.surface.max():.3f}] "
            f"bit/s/Hz, runtime {elapsed / 60:.1f} min (< 30 min)",
        )


class TestCriterion8Reproducibility:
    def test_byte_identical_across_worker_counts(self, tmp_path):
        t0 = time.perf_counter()
        cfg = {
            "m_antennas": 64,
            "k_users": 8,
            "candelabrum": {"panels": 4, "grid": 4},
            "rho_ul_grid_dbm": [-20.0, 0.0],
            "rho_dl_grid_dbm": [-40.0, -30.0],
            "n_realizations": 40,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        power_name = "ccdf_quad-strip-4walls.csv"
        rate_name = "rate_surface_double-strip-4walls.csv"
        blobs = {}
        for workers in (1, 4, 8):
            out = tmp_path / f"w{workers}"
            assert main([
                "power-ccdf", "--config", str(cfg_path),
                "--topology", "quad-strip-4walls", "--seed", "5",
                "--drops", "40", "--workers", str(workers),
                "--out", str(out / "p"), "--no-figures",
            ]) == 0
            assert main([
                "rate-map", "--config", str(cfg_path),
                "--topology", "double-strip-4walls", "--seed", "5",
                "--drops", "8", "--workers", str(workers),
                "--out", str(out / "r"), "--no-figures",
            ]) == 0
            blobs[workers] = (
                (out / "p" / power_name).read_bytes(),
                (out / "r" / rate_name).read_bytes(),
            )
        elapsed = time.perf_counter() - t0
        ok = blobs[1] == blobs[4] == blobs[8]
        report(
            8, ok,
            f"power + rate campaign CSVs byte-identical for 1/4/8 workers, "
            f"runtime {elapsed:.1f} s",
        )
