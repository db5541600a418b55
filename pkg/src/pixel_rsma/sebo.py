"""
Successive exhaustive Boolean optimization (SEBO).

Maximizes a pseudo-Boolean function by sweeping fixed-size blocks of bits,
setting each block to its best assignment given the others, and escaping
local optima with random bit-flip kicks. A kick is kept only if the sweep
that follows it beats the incumbent.

Objectives are *batched*: they take an ``(n, Q)`` array of coders and return
``n`` values. Use :func:`batched` to wrap a scalar function.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = ["SeboConfig", "SeboResult", "sebo_search", "batched", "brute_force"]


@dataclass(frozen=True)
class SeboConfig:
    """Block size ``J``, iteration budget ``I`` and kick settings.

    ``flips_per_kick`` defaults to ``J``. ``restarts`` counts the starting
    points: the given initial coder, then uniformly random ones.
    """
    J: int = 8
    I: int = 5
    flips_per_kick: int | None = None
    restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.J <= 16:
            raise ValueError("J must lie in [1, 16]")
        if self.I < 1 or self.restarts < 1:
            raise ValueError("I and restarts must be >= 1")
        flips = self.J if self.flips_per_kick is None else self.flips_per_kick
        if not 1 <= flips <= self.J:
            raise ValueError("flips_per_kick must lie in [1, J]")
        object.__setattr__(self, "flips_per_kick", flips)


@dataclass
class SeboResult:
    coder: np.ndarray
    value: float
    evaluations: int


def batched(fn):
    """Turn ``fn(coder) -> float`` into a batched objective."""
    def wrapped(B):
        return np.array([fn(b) for b in B], dtype=float)
    return wrapped


def _assignments(length):
    return np.array(list(itertools.product((0, 1), repeat=length)), dtype=np.uint8)


def brute_force(objective, Q: int) -> tuple[np.ndarray, float]:
    """Exhaustive maximum over all ``2^Q`` coders (lexicographically first on ties)."""
    B = _assignments(Q)
    vals = np.asarray(objective(B), dtype=float)
    j = int(np.argmax(vals))
    return B[j], float(vals[j])


class _Counter:
    def __init__(self, objective):
        self.objective = objective
        self.calls = 0

    def __call__(self, B):
        self.calls += B.shape[0]
        return np.asarray(self.objective(B), dtype=float)


def _sweep(f, x, blocks, tables):
    fx = None
    for block, table in zip(blocks, tables):
        cands = np.repeat(x[None], table.shape[0], axis=0)
        cands[:, block] = table
        vals = f(cands)
        j = int(np.argmax(vals))
        x, fx = cands[j], float(vals[j])
    return x, fx


def sebo_search(objective, Q: int, cfg: SeboConfig = SeboConfig(), init=None,
                rng: np.random.Generator | None = None) -> SeboResult:
    """Maximize a batched pseudo-Boolean objective over ``{0,1}^Q``.

    Each block sweep evaluates the incumbent among its candidates, so the
    returned value is never below ``objective(init)``. With ``J >= Q`` a
    single sweep is a full exhaustive search.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    f = _Counter(objective)
    J = min(cfg.J, Q)
    blocks = [np.arange(lo, min(lo + J, Q)) for lo in range(0, Q, J)]
    tables = [_assignments(len(b)) for b in blocks]

    x0 = np.zeros(Q, np.uint8) if init is None else np.asarray(init, np.uint8).copy()
    best, best_val = x0, float(f(x0[None])[0])
    for restart in range(cfg.restarts):
        start = x0 if restart == 0 else rng.integers(0, 2, Q).astype(np.uint8)
        inc, inc_val = _sweep(f, start, blocks, tables)
        for _ in range(cfg.I - 1):
            kicked = inc.copy()
            flip = rng.choice(Q, size=min(cfg.flips_per_kick, Q), replace=False)
            kicked[flip] ^= 1
            cand, cand_val = _sweep(f, kicked, blocks, tables)
            if cand_val > inc_val:
                inc, inc_val = cand, cand_val
        if inc_val > best_val:
            best, best_val = inc, inc_val
    return SeboResult(best, best_val, f.calls)
