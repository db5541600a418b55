"""
Trained coder codebooks
=======================

Searching over all 2^Q coders online is expensive. Instead we train a small
codebook offline with a Lloyd iteration and let each user pick a codeword
online. Bigger codebooks should do at least as well.
"""

# %%
import numpy as np

from pixel_rsma import harness
from pixel_rsma.codebook import online_select, random_codebook
from pixel_rsma.channel import draw_sample_set, draw_true_channel, substream

cfg = harness.parse_config("""
Q = 7
Ns = 10
S = 10
D = 20
lloyd_max_iters = 5
sebo_J = 4
sebo_I = 2
""")
bank = harness.build_hardware(cfg)
sc = harness.scenario(cfg, 20.0)

# %%
books = {}
for M in (2, 8):
    res = harness.train_codebook(cfg, 20.0, M)
    books[M] = res.codebook
    print(f"M={M}: training average sum-rate", " -> ".join(f"{v:.3f}" for v in res.trace))

# %%
# Online selection on fresh channels the codebook has never seen.
books["random 8"] = random_codebook(8, cfg["Q"], np.random.default_rng(5))
scores = {name: [] for name in books}
for n in range(15):
    H = draw_true_channel(sc, bank.r, substream(99, n, 0))
    samples = draw_sample_set(sc, H, substream(99, n, 1))
    for name, cb in books.items():
        sel = online_select(cb, samples, bank, sc.P_t, sc.sigma2,
                            rng=np.random.default_rng(n))
        scores[name].append(sel.report.objective)

for name, vals in scores.items():
    print(f"codebook {name!s:>8}: {np.mean(vals):.3f} bps/Hz")
