"""Fast built-in property checks behind ``pixel-rsma selftest``."""

from __future__ import annotations

import numpy as np

from .channel import (ScenarioConfig, derive_effective_channel, draw_sample_set,
                      substream, synth_pixel_hardware, synth_virtual_scenario)
from .em_model import (PatternCoderBank, coded_channel_row, normalized_pattern_coder,
                       radiation_pattern, solve_port_currents)
from .rsma import coded_rows, rates_from_rows, rs_zf_svd_precoder
from .sebo import SeboConfig, brute_force, sebo_search
from .wmmse import mmse_update


def check_rate_wmmse_identity(trials=200, seed=1):
    worst = 0.0
    for t in range(trials):
        rng = substream(seed, t)
        S, K, N = 5, 2, 2
        rows = (rng.standard_normal((S, K, N)) + 1j * rng.standard_normal((S, K, N)))
        P = rng.standard_normal((N, K + 1)) + 1j * rng.standard_normal((N, K + 1))
        state = mmse_update(rows, P, 1.0)
        Rc, Rp = rates_from_rows(rows, P, 1.0)
        worst = max(worst, np.abs(state.xi_hat_c - (1 - Rc)).max(),
                    np.abs(state.xi_hat_p - (1 - Rp)).max())
    return worst <= 1e-9, f"max |xi - (1 - R)| = {worst:.2e}"


def check_path_equivalence(trials=20, seed=2):
    worst = 0.0
    for t in range(trials):
        cfg = ScenarioConfig(N=2, K=2, Q=5, Ns=8)
        rng = substream(seed, t)
        net, patterns = synth_pixel_hardware(cfg, rng)
        bank = PatternCoderBank(net, patterns)
        scen = synth_virtual_scenario(cfg, rng)
        H_e = derive_effective_channel(scen, bank.basis)
        b = rng.integers(0, 2, cfg.Q)
        w, i_A = normalized_pattern_coder(bank.basis, net, b)
        e = radiation_pattern(patterns, solve_port_currents(net, b, i_A))
        direct = e @ scen.H_v[0] @ scen.E_T
        coded = coded_channel_row(w, H_e[0])
        worst = max(worst, np.linalg.norm(direct - coded) / np.linalg.norm(direct))
    return worst <= 1e-10, f"max relative error = {worst:.2e}"


def check_sebo_exhaustive(trials=20, seed=3, Q=8):
    hits = 0
    for t in range(trials):
        rng = substream(seed, t)
        A = rng.standard_normal((Q, Q))
        c = rng.standard_normal(Q)

        def f(B):
            B = B.astype(float)
            return np.einsum("ni,ij,nj->n", B, A, B) + B @ c

        best = sebo_search(f, Q, SeboConfig(J=Q, I=1, restarts=1), rng=rng)
        hits += np.isclose(best.value, brute_force(f, Q)[1], rtol=0, atol=1e-12)
    return hits == trials, f"{hits}/{trials} exact"


def check_power_budget(trials=50, seed=4):
    cfg = ScenarioConfig.from_snr_db(20, Q=4, Ns=4)
    worst = -np.inf
    for t in range(trials):
        rng = substream(seed, t)
        H = rng.standard_normal((2, 5, 2)) + 1j * rng.standard_normal((2, 5, 2))
        samples = draw_sample_set(cfg, H, rng)
        W = np.eye(5)[:2].astype(complex)
        P = rs_zf_svd_precoder(coded_rows(samples.estimate, W), cfg.P_t, cfg.sigma2)
        worst = max(worst, np.sum(np.abs(P) ** 2) - cfg.P_t)
    return worst <= 1e-9, f"max power excess = {worst:.2e}"


CHECKS = {
    "rate-wmmse identity": check_rate_wmmse_identity,
    "channel path equivalence": check_path_equivalence,
    "sebo exhaustive optimum": check_sebo_exhaustive,
    "precoder power budget": check_power_budget,
}


def run(echo=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        passed, detail = check()
        ok &= bool(passed)
        echo(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return ok
