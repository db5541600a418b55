"""
Pixel antenna hardware and pattern coding
=========================================

A pixel antenna is one driven port surrounded by Q pixel ports that are
either shorted (coder bit 1) or left open (bit 0). Every coder gives a
different radiation pattern. Here we build a synthetic antenna, look at the
pattern basis and check how many distinct patterns the coders reach.
"""

# %%
import numpy as np

from pixel_rsma.channel import ScenarioConfig, substream, synth_pixel_hardware, HARDWARE
from pixel_rsma.em_model import (PatternCoderBank, index_to_coder, radiation_pattern,
                                 solve_port_currents)

cfg = ScenarioConfig(Q=8, Ns=16)
net, patterns = synth_pixel_hardware(cfg, substream(0, HARDWARE))
print("ports:", net.Q + 1, " pattern samples:", patterns.E_oc.shape)

# %%
# With every pixel open, only the driven port carries current.
i_open = solve_port_currents(net, np.zeros(net.Q, np.uint8))
print("all-open currents:", np.round(np.abs(i_open), 4))

# Shorting a few pixels spreads current over them.
coder = np.array([1, 0, 1, 1, 0, 0, 1, 0], np.uint8)
i_some = solve_port_currents(net, coder)
print("coded currents:   ", np.round(np.abs(i_some), 4))

# %%
# The pattern of a coder is a linear combination of the open-circuit
# patterns, so everything lives in an r-dimensional subspace.
bank = PatternCoderBank(net, patterns)
print("pattern space rank r =", bank.r)
print("singular values:", np.round(bank.basis.s, 3))

E = radiation_pattern(patterns, i_some)
print("pattern power over the sphere:", float(np.sum(np.abs(E) ** 2)))

# %%
# All 2^Q coders at once: pattern coders are unit norm (or zero when the
# coder radiates nothing).
W = bank(index_to_coder(np.arange(2 ** net.Q), net.Q))
norms = np.linalg.norm(W, axis=1)
print("unit-norm coders:", int(np.sum(np.isclose(norms, 1.0))), "of", len(W))

# How different are the reachable patterns? Look at pairwise correlation.
G = np.abs(W @ W.conj().T)
off = G[~np.eye(len(W), dtype=bool)]
print("median |<w_a, w_b>| between coders: %.3f" % np.median(off))
