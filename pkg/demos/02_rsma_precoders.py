"""
Rate splitting with imperfect CSIT
==================================

Two single-antenna users, a two-antenna base station and a channel estimate
that gets better as transmit power grows. We compare zero-forcing SDMA with
the rate-splitting precoder that puts leftover power in a common stream.
"""

# %%
import numpy as np

from pixel_rsma.channel import (ScenarioConfig, draw_sample_set, draw_true_channel,
                                substream, synth_pixel_hardware)
from pixel_rsma.em_model import PatternCoderBank
from pixel_rsma.rsma import (coded_rows, precoder_power, rs_zf_svd_precoder,
                             sample_average_rates, sdma_zf_precoder)

hw = ScenarioConfig(Q=6, Ns=8)
bank = PatternCoderBank(*synth_pixel_hardware(hw, substream(1, 0)))

# All users keep their pixels open for now.
W = bank(np.zeros((2, hw.Q), np.uint8))

# %%
def average_rates(snr_db, draws=30):
    cfg = ScenarioConfig.from_snr_db(snr_db, Q=hw.Q, Ns=hw.Ns, S=50)
    sdma, rsma = [], []
    for n in range(draws):
        H = draw_true_channel(cfg, bank.r, substream(7, n, 0))
        samples = draw_sample_set(cfg, H, substream(7, n, 1))
        rows_hat = coded_rows(samples.estimate, W)
        P_sdma = sdma_zf_precoder(rows_hat, cfg.P_t)
        P_rsma = rs_zf_svd_precoder(rows_hat, cfg.P_t, cfg.sigma2)
        sdma.append(sample_average_rates(samples, W, P_sdma, cfg.sigma2).objective)
        rsma.append(sample_average_rates(samples, W, P_rsma, cfg.sigma2).objective)
    return np.mean(sdma), np.mean(rsma), precoder_power(P_rsma), cfg.P_t


for snr in (0, 10, 20, 30):
    s, r, used, budget = average_rates(snr)
    print(f"{snr:3d} dB  SDMA {s:6.3f}  RSMA {r:6.3f}  power used {used:8.2f}/{budget:.2f}")

# %%
# The common stream mops up interference that ZF cannot cancel, so the gap
# widens when the CSIT error is large relative to the signal.
