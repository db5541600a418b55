"""
Synthetic scenarios, imperfect-CSIT channel estimates and SAA sample sets.

Every random quantity is drawn from a generator returned by :func:`substream`,
keyed by the experiment seed and integer indices (realization, purpose, ...).
Results therefore do not depend on how work is split across processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .em_model import ImpedanceNetwork, OpenCircuitPatterns, PatternBasis
from .exceptions import DimensionMismatch

__all__ = [
    "ScenarioConfig", "VirtualScenario", "ChannelSampleSet", "substream",
    "crandn", "synth_pixel_hardware", "synth_virtual_scenario",
    "derive_effective_channel", "draw_true_channel", "draw_sample_set",
]

# stream tags for substream()
HARDWARE, CHANNEL, ERRORS, TRAINING, ALGORITHM = range(5)


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@dataclass(frozen=True)
class ScenarioConfig:
    """System dimensions, power levels and CSIT quality for one operating point.

    ``error_variance`` is the per-entry variance of the CSIT error,
    ``beta * P_t ** -alpha``.
    """
    N: int = 2
    K: int = 2
    Q: int = 11
    Ns: int = 32
    P_t: float = 100.0
    sigma2: float = 1.0
    alpha: float = 0.5
    beta: float = 1.0
    S: int = 20
    seed: int = 0

    def __post_init__(self):
        for name in ("N", "K", "Q", "Ns", "S"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.P_t > 0 or not self.sigma2 > 0:
            raise ValueError("P_t and sigma2 must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma2: float = 1.0, **kwargs) -> "ScenarioConfig":
        return cls(P_t=sigma2 * 10.0 ** (snr_db / 10.0), sigma2=sigma2, **kwargs)

    @property
    def snr(self) -> float:
        return self.P_t / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(self.snr)

    @property
    def error_variance(self) -> float:
        return self.beta * self.P_t ** (-self.alpha)


@dataclass(frozen=True)
class VirtualScenario:
    """Beamspace description: per-user virtual channels and the transmit patterns.

    ``H_v`` has shape ``(K, 2Ns, 2Ns)`` and ``E_T`` shape ``(2Ns, N)``.
    """
    H_v: np.ndarray
    E_T: np.ndarray


@dataclass(frozen=True)
class ChannelSampleSet:
    """Channel estimate and ``S`` conditional error draws for every user.

    Attributes
    ----------
    estimate : (K, r, N) complex
    errors : (K, S, r, N) complex
    samples : (K, S, r, N) complex
        ``estimate[:, None] + errors``.
    """
    estimate: np.ndarray
    errors: np.ndarray
    samples: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.errors.ndim != 4 or self.errors.shape[0] != self.estimate.shape[0] \
                or self.errors.shape[2:] != self.estimate.shape[1:]:
            raise DimensionMismatch("errors must have shape (K, S) + estimate.shape[1:]")
        samples = self.estimate[:, None] + self.errors
        for a in (self.estimate, self.errors, samples):
            a.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def K(self) -> int:
        return self.estimate.shape[0]

    @property
    def S(self) -> int:
        return self.errors.shape[1]


def synth_pixel_hardware(cfg: ScenarioConfig, rng: np.random.Generator
                         ) -> tuple[ImpedanceNetwork, OpenCircuitPatterns]:
    """Random reciprocal, passive pixel-antenna network and open-circuit patterns.

    Stands in for full-wave simulation data. The real part of the assembled
    impedance matrix is shifted on its diagonal when needed so that all its
    eigenvalues are non-negative.
    """
    Q = cfg.Q
    A = rng.standard_normal((Q, Q))
    B = rng.standard_normal((Q, Q))
    Z_PP = (A + A.T) / 2 + 1j * (B + B.T) / 2
    z_PA = rng.standard_normal(Q) + 1j * rng.standard_normal(Q)
    z_AA = rng.standard_normal() + 1j * rng.standard_normal()
    Z = ImpedanceNetwork(z_AA, Z_PP, z_PA).full_matrix()
    lam_min = np.linalg.eigvalsh(Z.real).min()
    if lam_min < 0:
        Z = Z + (abs(lam_min) + 0.1) * np.eye(Q + 1)
    E_oc = crandn(rng, 2 * cfg.Ns, Q + 1)
    return ImpedanceNetwork.from_matrix(Z), OpenCircuitPatterns(E_oc)


def synth_virtual_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> VirtualScenario:
    H_v = crandn(rng, cfg.K, 2 * cfg.Ns, 2 * cfg.Ns)
    E_T = crandn(rng, 2 * cfg.Ns, cfg.N)
    E_T /= np.linalg.norm(E_T, axis=0)
    return VirtualScenario(H_v, E_T)


def derive_effective_channel(scen: VirtualScenario, basis: PatternBasis) -> np.ndarray:
    """Effective channels ``U^T H_v,k E_T``, shape ``(K, r, N)``."""
    if scen.H_v.shape[-1] != scen.E_T.shape[0] or scen.H_v.shape[-2] != basis.U.shape[0]:
        raise DimensionMismatch("virtual channel, transmit patterns and basis disagree")
    return basis.U.T @ scen.H_v @ scen.E_T


def draw_true_channel(cfg: ScenarioConfig, r: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. unit-variance effective channels, shape ``(K, r, N)``."""
    return crandn(rng, cfg.K, r, cfg.N)


def draw_sample_set(cfg: ScenarioConfig, H_true, rng: np.random.Generator) -> ChannelSampleSet:
    """Estimate and SAA sample set around a true effective channel.

    The estimate is the true channel minus one error draw; the ``S`` samples
    add fresh error draws to the estimate. All errors have per-entry variance
    ``cfg.error_variance``. Standard normal draws are scaled afterwards, so
    the same generator state gives the same realization at every SNR.
    """
    H_true = np.asarray(H_true, dtype=complex)
    if H_true.ndim != 3 or H_true.shape[0] != cfg.K or H_true.shape[2] != cfg.N:
        raise DimensionMismatch(f"true channel shape {H_true.shape} does not match config")
    K, r, N = H_true.shape
    sigma_e = np.sqrt(cfg.error_variance)
    estimate = np.empty_like(H_true)
    errors = np.empty((K, cfg.S, r, N), dtype=complex)
    for k in range(K):
        estimate[k] = H_true[k] - sigma_e * crandn(rng, r, N)
        errors[k] = sigma_e * crandn(rng, cfg.S, r, N)
    return ChannelSampleSet(estimate, errors)
