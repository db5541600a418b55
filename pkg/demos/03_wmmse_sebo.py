"""
Joint precoder and antenna coder optimization
=============================================

The alternating loop updates the precoder with a WMMSE step and then each
user's pixel coder with a block-exhaustive search. The objective can only go
up, which we check on the recorded trace.
"""

# %%
import numpy as np

from pixel_rsma.channel import (ScenarioConfig, draw_sample_set, draw_true_channel,
                                substream, synth_pixel_hardware)
from pixel_rsma.em_model import PatternCoderBank
from pixel_rsma.sebo import SeboConfig, brute_force, sebo_search
from pixel_rsma.wmmse import OuterLoopConfig, alternating_optimize

cfg = ScenarioConfig.from_snr_db(20.0, Q=8, Ns=12, S=20)
bank = PatternCoderBank(*synth_pixel_hardware(cfg, substream(3, 0)))
H = draw_true_channel(cfg, bank.r, substream(3, 1))
samples = draw_sample_set(cfg, H, substream(3, 2))

# %%
# First, the search on its own. A toy quadratic objective over 10 bits shows
# that block sweeps plus random kicks land on the brute-force optimum.
rng = np.random.default_rng(0)
A = rng.standard_normal((10, 10))


def toy(B):
    x = B.astype(float) * 2 - 1
    return np.einsum("bi,ij,bj->b", x, A, x)


best, best_val = brute_force(toy, 10)
found = sebo_search(toy, 10, SeboConfig(J=4, I=6, restarts=3), rng=rng)
print("brute force %.4f  sebo %.4f  (%d evaluations instead of 1024)"
      % (best_val, found.value, found.evaluations))

# %%
outer = OuterLoopConfig(max_outer_iters=10)
for common, name in ((False, "SDMA"), (True, "RSMA")):
    res = alternating_optimize(samples, bank, cfg.P_t, cfg.sigma2, outer,
                               SeboConfig(J=4, I=3), common=common,
                               rng=np.random.default_rng(0))
    steps = np.diff(res.step_trace)
    print(f"{name}: {res.trace[0]:.3f} -> {res.trace[-1]:.3f} bps/Hz in "
          f"{res.outer_iters} outer iterations, smallest step {steps.min():+.2e}")
    print("   coders:", ["".join(map(str, b)) for b in res.coders])
