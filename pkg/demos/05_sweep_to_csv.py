"""
A small SNR sweep written to CSV
================================

The harness runs independent channel realizations in worker processes and
reduces them in a fixed order, so results do not depend on the worker count.
This is the same path the ``pixel-rsma run`` command uses.
"""

# %%
import tempfile
from pathlib import Path

from pixel_rsma import harness

cfg = harness.parse_config("""
Q = 6
Ns = 8
S = 10
realizations = 6
snr_db = 0 10 20
scheme = conv-sdma-zf conv-rs-zf-svd
""")

rows = []
for spec in harness.spec_from_config(cfg):
    rows += harness.run_experiment(spec, workers=2)

# %%
out = Path(tempfile.mkdtemp()) / "sweep.csv"
harness.write_results(rows, out, timing=False)
print(out.read_text())

# %%
# Reading it back gives the same rows, up to the six printed decimals.
again = harness.read_results(out)
print(max(abs(a.sum_rate - b.sum_rate) for a, b in zip(rows, again)))
