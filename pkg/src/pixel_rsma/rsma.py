"""
One-layer rate-splitting signal model.

Precoders are ``(N, K+1)`` complex arrays with the common-stream precoder in
column 0 and user ``k``'s private precoder in column ``k+1``. Coded channel
rows are stacked as ``(..., K, N)`` arrays, one row per user; leading axes
index channel samples or candidate batches. SDMA is the special case with a
zero common precoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSampleSet
from .exceptions import DimensionMismatch, RankDeficient

__all__ = [
    "RateReport", "coded_rows", "stream_gains", "sinrs", "sinr_pair",
    "rates_from_rows", "sample_average_rates", "precoder_power",
    "rs_zf_svd_precoder", "rs_zf_svd_batch", "sdma_zf_precoder",
    "sdma_zf_batch", "DEFAULT_GRID_POINTS",
]

DEFAULT_GRID_POINTS = 101
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RateReport:
    """Per-user sample-average rates in bits/s/Hz."""
    common_rates: np.ndarray
    private_rates: np.ndarray

    @property
    def common_rate(self) -> float:
        """Rate of the common stream, limited by the weakest user."""
        return float(self.common_rates.min())

    @property
    def objective(self) -> float:
        return self.common_rate + float(self.private_rates.sum())


def precoder_power(P) -> float:
    return float(np.sum(np.abs(P) ** 2))


def coded_rows(H, W) -> np.ndarray:
    """Coded channel rows ``w_k^H H_k`` for every user and sample.

    ``H`` is ``(K, S, r, N)`` (or ``(K, r, N)``) and ``W`` is ``(K, r)``; the
    result is ``(S, K, N)`` (or ``(K, N)``).
    """
    H = np.asarray(H)
    W = np.asarray(W)
    if W.shape != (H.shape[0], H.shape[-2]):
        raise DimensionMismatch(f"pattern coders {W.shape} vs channels {H.shape}")
    if H.ndim == 3:
        return np.einsum("kr,krn->kn", W.conj(), H)
    return np.einsum("kr,ksrn->skn", W.conj(), H)


def stream_gains(rows, P) -> np.ndarray:
    """``|h_k p_i|^2`` with shape ``(..., K, K+1)``."""
    return np.abs(rows @ P) ** 2


def sinrs(rows, P, sigma2) -> tuple[np.ndarray, np.ndarray]:
    """Common- and private-stream SINRs of every user, each ``(..., K)``.

    The common stream sees all private streams as interference; the private
    stream of user ``k`` is decoded after the common stream is cancelled.
    """
    G = stream_gains(rows, P)
    K = G.shape[-2]
    if G.shape[-1] != K + 1:
        raise DimensionMismatch(f"precoder has {G.shape[-1]} columns for {K} users")
    priv = G[..., 1:]
    own = np.diagonal(priv, axis1=-2, axis2=-1)
    interference = np.where(np.eye(K, dtype=bool), 0.0, priv).sum(-1)
    gamma_c = G[..., 0] / (priv.sum(-1) + sigma2)
    gamma_p = own / (interference + sigma2)
    return gamma_c, gamma_p


def sinr_pair(h, P, sigma2, k) -> tuple[float, float]:
    """SINRs of user ``k`` (0-based) for the common and its private stream."""
    h = np.asarray(h).reshape(1, -1)
    P = np.asarray(P)
    g = np.abs(h @ P)[0] ** 2
    priv = g[1:]
    others = np.delete(priv, k)
    return (float(g[0] / (priv.sum() + sigma2)),
            float(priv[k] / (others.sum() + sigma2)))


def rates_from_rows(rows, P, sigma2) -> tuple[np.ndarray, np.ndarray]:
    """Sample-average common and private rates from ``(S, K, N)`` rows."""
    gamma_c, gamma_p = sinrs(rows, P, sigma2)
    return np.log2(1 + gamma_c).mean(axis=-2), np.log2(1 + gamma_p).mean(axis=-2)


def sample_average_rates(samples: ChannelSampleSet, W, P, sigma2) -> RateReport:
    """Sample-average rates for pattern coders ``W`` (``(K, r)``) and precoder ``P``.

    A user whose coder radiates nothing has a zero row in ``W`` and rate 0.
    """
    Rc, Rp = rates_from_rows(coded_rows(samples.samples, W), P, sigma2)
    return RateReport(Rc, Rp)


def _zf_parts(Hhat):
    """Dominant transmit direction, normalized ZF directions and a rank flag."""
    n, K, N = Hhat.shape
    u, s, vh = np.linalg.svd(Hhat, full_matrices=False)
    dominant = vh[:, 0, :].conj()
    ok = (K <= N) & (s[:, 0] > 0)
    ok &= s[:, -1] > RANK_TOL * s[:, 0]
    Z = np.zeros((n, N, K), dtype=complex)
    if ok.any():
        # right pseudo-inverse V diag(1/s) U^H
        Z[ok] = (vh[ok].conj().transpose(0, 2, 1) / s[ok][:, None, :]) @ u[ok].conj().transpose(0, 2, 1)
        Z[ok] /= np.linalg.norm(Z[ok], axis=1, keepdims=True)
    return dominant, Z, ok


def sdma_zf_batch(Hhat, P_t) -> tuple[np.ndarray, np.ndarray]:
    """Zero-forcing, equal-power SDMA precoders for ``(n, K, N)`` estimates.

    Returns the ``(n, N, K+1)`` precoders and the rank flag; rank-deficient
    entries get an all-zero precoder.
    """
    Hhat = np.asarray(Hhat, dtype=complex)
    n, K, N = Hhat.shape
    _, Z, ok = _zf_parts(Hhat)
    P = np.zeros((n, N, K + 1), dtype=complex)
    P[:, :, 1:] = np.sqrt(P_t / K) * Z
    return P, ok


def sdma_zf_precoder(estimates, P_t) -> np.ndarray:
    """Zero-forcing SDMA precoder with equal power on every private stream.

    Raises
    ------
    RankDeficient
        If the ``K x N`` estimate stack has rank below ``K``.
    """
    P, ok = sdma_zf_batch(np.asarray(estimates)[None], P_t)
    if not ok[0]:
        raise RankDeficient("channel estimates cannot be zero-forced")
    return P[0]


def rs_zf_svd_batch(Hhat, P_t, sigma2, grid_points=DEFAULT_GRID_POINTS,
                    min_share=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Batched RS-ZF-SVD precoders for ``(n, K, N)`` coded estimates.

    The common precoder follows the dominant right singular vector of the
    estimate stack, the private precoders are normalized ZF directions with
    equal power, and the common share ``t`` of ``P_t`` is the grid point
    maximizing the sum-rate on the estimate itself (ties go to smaller ``t``).
    Rank-deficient entries use ``t = 1``. Grid points below ``min_share``
    are skipped.

    Returns the ``(n, N, K+1)`` precoders and the rank flag.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    Hhat = np.asarray(Hhat, dtype=complex)
    n, K, N = Hhat.shape
    dominant, Z, ok = _zf_parts(Hhat)
    t = np.linspace(0.0, 1.0, grid_points)

    a = np.abs(np.einsum("nkd,nd->nk", Hhat, dominant)) ** 2
    Bm = np.abs(Hhat @ Z) ** 2
    own = np.diagonal(Bm, axis1=1, axis2=2)
    interference = np.where(np.eye(K, dtype=bool), 0.0, Bm).sum(-1)
    p_priv = (1 - t) * P_t / K
    # axes (n, grid, K)
    gamma_c = (t * P_t)[None, :, None] * a[:, None, :] / (
        p_priv[None, :, None] * Bm.sum(-1)[:, None, :] + sigma2)
    gamma_p = p_priv[None, :, None] * own[:, None, :] / (
        p_priv[None, :, None] * interference[:, None, :] + sigma2)
    obj = np.log2(1 + gamma_c).min(-1) + np.log2(1 + gamma_p).sum(-1)
    obj[:, t < min_share - 1e-12] = -np.inf
    best = np.where(ok, np.argmax(obj, axis=1), grid_points - 1)
    share = t[best]

    P = np.empty((n, N, K + 1), dtype=complex)
    P[:, :, 0] = np.sqrt(share * P_t)[:, None] * dominant
    P[:, :, 1:] = np.sqrt((1 - share) * P_t / K)[:, None, None] * Z
    return P, ok


def rs_zf_svd_precoder(estimates, P_t, sigma2, grid_points=DEFAULT_GRID_POINTS,
                       fallback=True, min_share=0.0) -> np.ndarray:
    """RS-ZF-SVD precoder for a ``(K, N)`` stack of coded channel estimates.

    With ``fallback=False`` a rank-deficient stack raises :class:`RankDeficient`
    instead of returning the all-common precoder.
    """
    P, ok = rs_zf_svd_batch(np.asarray(estimates)[None], P_t, sigma2, grid_points, min_share)
    if not ok[0] and not fallback:
        raise RankDeficient("channel estimates cannot be zero-forced")
    return P[0]
