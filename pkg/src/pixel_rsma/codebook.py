"""
Offline max-rate codebook training and online codeword selection.

A codebook is a set of ``M`` antenna coders shared by all users. Training
runs Lloyd iterations on a set of channel-estimate tuples: each tuple goes to
the codeword with the highest sum-rate when every user adopts it, and each
codeword is then re-optimized by SEBO for the tuples assigned to it. Online,
the transmitter picks a codeword per user by scanning the codebook, one user
at a time, recomputing the zero-forcing precoder for every candidate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelSampleSet
from .em_model import PatternCoderBank, coder_to_index, index_to_coder
from .rsma import (DEFAULT_GRID_POINTS, RateReport, rates_from_rows, rs_zf_svd_batch,
                   sdma_zf_batch)
from .sebo import SeboConfig, sebo_search

__all__ = [
    "Codebook", "SumRateEvaluator", "LloydResult", "OnlineResult",
    "batch_sum_rates", "codeword_sum_rate", "random_codebook",
    "lloyd_partition", "lloyd_centroid_update", "lloyd_train", "online_select",
    "save_codebook", "load_codebook",
]

log = logging.getLogger(__name__)

PRECODERS = ("rsma", "sdma")


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.uint8)
        if cw.ndim != 2 or cw.shape[0] < 1:
            raise ValueError("codebook needs at least one codeword of shape (Q,)")
        if not np.isin(cw, (0, 1)).all():
            raise ValueError("codewords must be binary")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def Q(self) -> int:
        return self.codewords.shape[1]

    def __len__(self):
        return self.M


def batch_sum_rates(samples: ChannelSampleSet, W, P_t, sigma2, precoder="rsma",
                    grid_points=DEFAULT_GRID_POINTS):
    """Sum-rates for a batch of pattern-coder assignments.

    ``W`` is ``(n, K, r)``: one pattern coder per user for each of ``n``
    candidates. Each candidate gets its own precoder computed from the coded
    estimates (RS-ZF-SVD for ``"rsma"``, ZF for ``"sdma"``) and is scored by
    the sample-average objective. Returns the ``(n,)`` objectives and the
    ``(n, N, K+1)`` precoders.
    """
    est_rows = np.einsum("nkr,krd->nkd", W.conj(), samples.estimate)
    if precoder == "rsma":
        P, _ = rs_zf_svd_batch(est_rows, P_t, sigma2, grid_points)
    elif precoder == "sdma":
        P, _ = sdma_zf_batch(est_rows, P_t)
    else:
        raise ValueError(f"unknown precoder {precoder!r}")
    rows = np.einsum("nkr,ksrd->nskd", W.conj(), samples.samples)
    Rc, Rp = rates_from_rows(rows, P[:, None], sigma2)
    return Rc.min(-1) + Rp.sum(-1), P


def codeword_sum_rate(cw, samples: ChannelSampleSet, bank: PatternCoderBank, P_t, sigma2,
                      precoder="rsma", grid_points=DEFAULT_GRID_POINTS) -> float:
    """Sample-average sum-rate when every user adopts codeword ``cw``."""
    W = np.broadcast_to(bank(np.asarray(cw)[None])[:, None], (1, samples.K, bank.r))
    return float(batch_sum_rates(samples, W, P_t, sigma2, precoder, grid_points)[0][0])


class SumRateEvaluator:
    """Common-codeword sum-rates over a training set, memoized per (tuple, coder)."""

    def __init__(self, training_set, bank: PatternCoderBank, P_t, sigma2,
                 precoder="rsma", grid_points=DEFAULT_GRID_POINTS):
        if precoder not in PRECODERS:
            raise ValueError(f"unknown precoder {precoder!r}")
        self.training_set = list(training_set)
        self.bank = bank
        self.P_t, self.sigma2 = P_t, sigma2
        self.precoder, self.grid_points = precoder, grid_points
        self._cache = [dict() for _ in self.training_set]
        self.evaluations = 0

    @property
    def D(self) -> int:
        return len(self.training_set)

    def __call__(self, d: int, B) -> np.ndarray:
        B = np.atleast_2d(np.asarray(B, dtype=np.uint8))
        keys = np.atleast_1d(coder_to_index(B)).tolist()
        cache = self._cache[d]
        missing = sorted({key for key in keys if key not in cache})
        if missing:
            samples = self.training_set[d]
            W = self.bank(index_to_coder(np.array(missing), self.bank.Q))
            W = np.broadcast_to(W[:, None], (len(missing), samples.K, self.bank.r))
            vals, _ = batch_sum_rates(samples, W, self.P_t, self.sigma2,
                                      self.precoder, self.grid_points)
            cache.update(zip(missing, vals.tolist()))
            self.evaluations += len(missing)
        return np.array([cache[key] for key in keys])

    def matrix(self, codebook: Codebook) -> np.ndarray:
        """``(D, M)`` sum-rates of every codeword on every tuple."""
        return np.stack([self(d, codebook.codewords) for d in range(self.D)])

    def subset_objective(self, indices):
        """Batched objective: mean sum-rate over the given tuples."""
        indices = list(indices)

        def objective(B):
            return np.mean([self(d, B) for d in indices], axis=0)
        return objective


def random_codebook(M: int, Q: int, rng: np.random.Generator) -> Codebook:
    """``M`` distinct uniformly random coders."""
    if M > 2 ** Q:
        raise ValueError(f"cannot draw {M} distinct coders of length {Q}")
    idx = rng.choice(2 ** Q, size=M, replace=False)
    return Codebook(index_to_coder(idx, Q))


def lloyd_partition(codebook: Codebook, evaluator: SumRateEvaluator):
    """Assign each tuple to its best codeword (lowest index on ties).

    Returns the ``(D,)`` labels and the list of ``M`` index arrays.
    """
    labels = np.argmax(evaluator.matrix(codebook), axis=1)
    return labels, [np.flatnonzero(labels == m) for m in range(codebook.M)]


def _fresh_coder(taken: set, Q: int, rng):
    while True:
        c = rng.integers(0, 2, Q).astype(np.uint8)
        if coder_to_index(c) not in taken:
            return c


def lloyd_centroid_update(codebook: Codebook, partition, evaluator: SumRateEvaluator,
                          sebo_cfg: SeboConfig = SeboConfig(),
                          rng: np.random.Generator | None = None) -> Codebook:
    """Re-optimize each codeword for its cell with SEBO, warm-started at the old codeword.

    Empty cells are reseeded with random coders; duplicated codewords keep
    their first occurrence and the rest are replaced by random distinct coders.
    """
    if rng is None:
        rng = np.random.default_rng(sebo_cfg.seed)
    Q = codebook.Q
    new = codebook.codewords.copy()
    for m, cell in enumerate(partition):
        if len(cell):
            found = sebo_search(evaluator.subset_objective(cell), Q, sebo_cfg,
                                init=codebook.codewords[m], rng=rng)
            new[m] = found.coder
    taken = set()
    for m, cell in enumerate(partition):
        key = coder_to_index(new[m])
        if not len(cell) or key in taken:
            if 2 ** Q > len(new):
                new[m] = _fresh_coder(taken | set(coder_to_index(new).tolist()), Q, rng)
            key = coder_to_index(new[m])
        taken.add(key)
    return Codebook(new)


@dataclass
class LloydResult:
    codebook: Codebook
    trace: list = field(default_factory=list)
    labels: np.ndarray | None = None


def lloyd_train(evaluator: SumRateEvaluator, M: int, sebo_cfg: SeboConfig = SeboConfig(),
                tol: float = 1e-3, max_iters: int = 30,
                rng: np.random.Generator | None = None) -> LloydResult:
    """Train an ``M``-word codebook maximizing the training-set average sum-rate.

    ``trace`` holds the average of each tuple's best sum-rate over the
    codebook, starting from the random initial codebook; it never decreases.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if rng is None:
        rng = np.random.default_rng(sebo_cfg.seed)
    if evaluator.D < M:
        log.warning("training set (D=%d) is smaller than the codebook (M=%d)", evaluator.D, M)
    cb = random_codebook(M, evaluator.bank.Q, rng)
    rates = evaluator.matrix(cb)
    result = LloydResult(cb, [float(rates.max(1).mean())])
    for _ in range(max_iters):
        labels = np.argmax(rates, axis=1)
        partition = [np.flatnonzero(labels == m) for m in range(cb.M)]
        cb = lloyd_centroid_update(cb, partition, evaluator, sebo_cfg, rng)
        rates = evaluator.matrix(cb)
        avg = float(rates.max(1).mean())
        prev = result.trace[-1]
        result.trace.append(avg)
        if abs(avg - prev) < tol * max(abs(prev), 1e-12):
            break
    result.codebook = cb
    result.labels = np.argmax(rates, axis=1)
    return result


@dataclass
class OnlineResult:
    coders: np.ndarray
    P: np.ndarray
    report: RateReport
    trace: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    passes: int = 0


def online_select(codebook: Codebook, samples: ChannelSampleSet, bank: PatternCoderBank,
                  P_t, sigma2, precoder="rsma", max_passes=10, tol=1e-4,
                  rng: np.random.Generator | None = None,
                  grid_points=DEFAULT_GRID_POINTS) -> OnlineResult:
    """Per-user codeword selection with the precoder recomputed for every candidate.

    Coders start as uniform random draws from the codebook. Each pass visits
    users in order and scans all ``M`` codewords for the current user.
    ``evaluations[pass][k]`` counts the candidates scored for user ``k``.
    """
    if rng is None:
        rng = np.random.default_rng()
    K, M = samples.K, codebook.M
    cw = codebook.codewords
    W_cw = bank(cw)
    B = cw[rng.integers(0, M, size=K)].copy()

    def score(W):
        return batch_sum_rates(samples, W, P_t, sigma2, precoder, grid_points)

    vals, _ = score(bank(B)[None])
    obj = float(vals[0])
    result = OnlineResult(B, None, None, [obj])
    for _ in range(max_passes):
        start = obj
        counts = []
        for k in range(K):
            W = np.repeat(bank(B)[None], M, axis=0)
            W[:, k] = W_cw
            vals, _ = score(W)
            counts.append(M)
            j = int(np.argmax(vals))
            B[k] = cw[j]
            obj = float(vals[j])
            result.trace.append(obj)
        result.evaluations.append(counts)
        result.passes += 1
        if abs(obj - start) < tol * max(abs(start), 1e-12):
            break
    W = bank(B)
    _, P = score(W[None])
    result.coders, result.P = B, P[0]
    rows = np.einsum("kr,ksrd->skd", W.conj(), samples.samples)
    result.report = RateReport(*rates_from_rows(rows, result.P, sigma2))
    return result


# -- codebook files ----------------------------------------------------------

_CB_HEADER = "antenna-codebook v1"


def save_codebook(codebook: Codebook, path) -> None:
    lines = [f"{_CB_HEADER} Q={codebook.Q} M={codebook.M}"]
    lines += ["".join(map(str, row.tolist())) for row in codebook.codewords]
    Path(path).write_text("\n".join(lines) + "\n")


def load_codebook(path) -> Codebook:
    lines = Path(path).read_text().split()
    header = " ".join(lines[:4]) if len(lines) >= 4 else ""
    if not header.startswith(_CB_HEADER):
        raise ValueError(f"{path}: missing '{_CB_HEADER}' header")
    fields = dict(tok.split("=", 1) for tok in lines[2:4])
    Q, M = int(fields["Q"]), int(fields["M"])
    words = lines[4:]
    if len(words) != M or any(len(w) != Q or set(w) - {"0", "1"} for w in words):
        raise ValueError(f"{path}: expected {M} binary codewords of length {Q}")
    return Codebook(np.array([[int(c) for c in w] for w in words], dtype=np.uint8))
