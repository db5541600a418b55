"""
Alternating optimization of precoders and antenna coders.

The precoder block is handled by WMMSE: for a fixed precoder the MMSE
equalizers and weights are closed-form, and for fixed equalizers and weights
the sample-averaged weighted MSEs are convex quadratics in the precoder. The
antenna-coder block is handled per user by SEBO.

The convex precoder step

    minimize    max_k psi_c,k(P) + sum_k psi_p,k(P)
    subject to  ||P||_F^2 <= P_t

is solved through its Lagrange dual over simplex weights ``lam`` on the
per-user common-stream terms. For fixed ``lam`` the minimizer is a
regularized inverse per stream, with the power multiplier found by a scalar
root search; the dual is concave in ``lam`` with gradient ``psi_c(P*(lam))``.

The weight terms use the natural logarithm, ``u*eps - ln(u)``, whose minimum
over ``u`` is attained at ``u = 1/eps``; this makes each surrogate a tight
majorizer of ``1 - ln(2) * rate`` and the WMMSE loop monotone in sum-rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .channel import ChannelSampleSet
from .em_model import PatternCoderBank
from .exceptions import RankDeficient, SolverStall, SolverStallWarning
from .rsma import (DEFAULT_GRID_POINTS, RateReport, coded_rows, rates_from_rows,
                   rs_zf_svd_precoder, sdma_zf_precoder)
from .sebo import SeboConfig, sebo_search

__all__ = [
    "WmmseState", "OuterLoopConfig", "SubproblemResult", "AlternatingResult",
    "mmse_update", "precoder_subproblem_solve", "wmmse_precoder",
    "antenna_coder_update", "alternating_optimize", "initial_precoder",
]


@dataclass(frozen=True)
class WmmseState:
    """MMSE equalizers, weights and MSEs, each of shape ``(S, K)``."""
    g_c: np.ndarray
    g_p: np.ndarray
    u_c: np.ndarray
    u_p: np.ndarray
    eps_c: np.ndarray
    eps_p: np.ndarray

    @property
    def xi_c(self):
        return self.u_c * self.eps_c - np.log2(self.u_c)

    @property
    def xi_p(self):
        return self.u_p * self.eps_p - np.log2(self.u_p)

    @property
    def xi_hat_c(self):
        return self.xi_c.mean(axis=0)

    @property
    def xi_hat_p(self):
        return self.xi_p.mean(axis=0)


@dataclass(frozen=True)
class OuterLoopConfig:
    rel_tol: float = 1e-4
    max_outer_iters: int = 50
    inner_tol: float = 1e-5
    inner_max_iters: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.inner_tol > 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer_iters < 0 or self.inner_max_iters < 1:
            raise ValueError("iteration budgets must be non-negative")


def mmse_update(rows, P, sigma2) -> WmmseState:
    """Optimal equalizers and weights for coded rows ``(S, K, N)`` and precoder ``P``.

    The common equalizer sees every stream; the private equalizer sees the
    private streams only (the common stream is cancelled first).
    """
    z = rows @ P
    G = np.abs(z) ** 2
    K = G.shape[-2]
    own_z = np.diagonal(z[..., 1:], axis1=-2, axis2=-1)
    own = np.abs(own_z) ** 2
    priv_total = G[..., 1:].sum(-1)
    interference = np.where(np.eye(K, dtype=bool), 0.0, G[..., 1:]).sum(-1)
    T_p = priv_total + sigma2
    T_c = T_p + G[..., 0]
    eps_c = T_p / T_c
    eps_p = (interference + sigma2) / T_p
    return WmmseState(
        g_c=z[..., 0].conj() / T_c, g_p=own_z.conj() / T_p,
        u_c=1.0 / eps_c, u_p=1.0 / eps_p, eps_c=eps_c, eps_p=eps_p)


@dataclass
class SubproblemResult:
    P: np.ndarray
    value: float
    gap: float
    lam: np.ndarray
    kept_previous: bool = False


class _Surrogate:
    """Convex quadratic surrogates built from fixed equalizers and weights."""

    def __init__(self, rows, state: WmmseState, sigma2, common):
        S = rows.shape[0]
        hh = rows.conj()[..., :, None] * rows[..., None, :]
        wc = state.u_c * np.abs(state.g_c) ** 2
        wp = state.u_p * np.abs(state.g_p) ** 2
        self.a_c = np.einsum("sk,sknm->knm", wc, hh) / S
        self.a_p = np.einsum("sk,sknm->knm", wp, hh) / S
        self.b_c = np.einsum("sk,skn->kn", state.u_c * state.g_c.conj(), rows.conj()) / S
        self.b_p = np.einsum("sk,skn->kn", state.u_p * state.g_p.conj(), rows.conj()) / S
        self.const_c = (wc * sigma2 + state.u_c - np.log(state.u_c)).mean(0)
        self.const_p = (wp * sigma2 + state.u_p - np.log(state.u_p)).mean(0)
        self.common = common
        self.K = rows.shape[1]

    def terms(self, P):
        """``psi_c`` and ``psi_p`` (each ``(K,)``) at precoder ``P``."""
        quad_c = np.einsum("ni,knm,mi->k", P.conj(), self.a_c, P).real
        quad_p = np.einsum("ni,knm,mi->k", P[:, 1:].conj(), self.a_p, P[:, 1:]).real
        lin_c = (self.b_c.conj() @ P[:, 0]).real
        lin_p = np.einsum("kn,nk->k", self.b_p.conj(), P[:, 1:]).real
        return (quad_c - 2 * lin_c + self.const_c,
                quad_p - 2 * lin_p + self.const_p)

    def primal(self, P):
        psi_c, psi_p = self.terms(P)
        return (psi_c.max() if self.common else 0.0) + psi_p.sum()

    def lagrangian_minimizer(self, lam, P_t):
        N = self.a_c.shape[-1]
        if self.common:
            A_c = np.tensordot(lam, self.a_c, 1)
            b_c = lam @ self.b_c
            A_p = A_c + self.a_p.sum(0)
        else:
            A_c, b_c = np.zeros((N, N)), np.zeros(N)
            A_p = self.a_p.sum(0)
        A = np.stack([A_c, A_p])
        A = (A + A.conj().transpose(0, 2, 1)) / 2
        D, V = np.linalg.eigh(A)
        D = np.maximum(D, 0.0)
        C_c = V[0].conj().T @ b_c
        C_p = V[1].conj().T @ self.b_p.T
        energy = np.concatenate([np.abs(C_c) ** 2, (np.abs(C_p) ** 2).sum(1)])
        d = np.concatenate([D[0], D[1]])
        active = energy > 0

        def power(mu):
            with np.errstate(divide="ignore"):
                return np.sum(energy[active] / (d[active] + mu) ** 2)

        mu = 0.0
        if power(0.0) > P_t:
            hi = np.sqrt(energy.sum() / P_t)

            def phi(m):
                p = power(m)
                return (1.0 / np.sqrt(p) if np.isfinite(p) else 0.0) - 1.0 / np.sqrt(P_t)

            mu = brentq(phi, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)

        def coeffs(C, Dv):
            den = Dv + mu
            den = den[:, None] if C.ndim == 2 else den
            with np.errstate(divide="ignore", invalid="ignore"):
                out = C / den
            return np.where(np.abs(C) > 0, out, 0.0)

        P = np.empty((N, self.K + 1), dtype=complex)
        P[:, 0] = V[0] @ coeffs(C_c, D[0]) if self.common else 0.0
        P[:, 1:] = V[1] @ coeffs(C_p, D[1])
        pw = np.sum(np.abs(P) ** 2)
        if pw > P_t:
            P *= np.sqrt(P_t / pw)
        return P


def _maximize_dual(sur: _Surrogate, P_t):
    K = sur.K

    def evaluate(lam):
        P = sur.lagrangian_minimizer(lam, P_t)
        psi_c, psi_p = sur.terms(P)
        return P, lam @ psi_c + psi_p.sum(), psi_c

    if not sur.common or K == 1:
        lam = np.ones(K) if sur.common else np.zeros(K)
        return (lam,) + evaluate(lam)[:2]

    if K == 2:
        def slope(t):
            return np.subtract(*evaluate(np.array([t, 1 - t]))[2])

        if slope(0.0) <= 0:
            t = 0.0
        elif slope(1.0) >= 0:
            t = 1.0
        else:
            t = brentq(slope, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        lam = np.array([t, 1 - t])
        return (lam,) + evaluate(lam)[:2]

    def neg(lam):
        _, val, grad = evaluate(lam)
        return -val, -grad

    res = minimize(neg, np.full(K, 1.0 / K), jac=True, method="SLSQP",
                   bounds=[(0, 1)] * K,
                   constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1,
                                 "jac": lambda l: np.ones(K)}],
                   options={"ftol": 1e-15, "maxiter": 500})
    lam = np.clip(res.x, 0, None)
    lam /= lam.sum()
    return (lam,) + evaluate(lam)[:2]


def precoder_subproblem_solve(rows, state: WmmseState, P_t, sigma2, P_prev=None,
                              common=True) -> SubproblemResult:
    """Minimize the convex WMMSE surrogate over the power ball.

    If the dual solution is worse than ``P_prev`` on the surrogate, ``P_prev``
    is returned instead, so the step never increases the surrogate.
    ``gap`` is the duality gap of the returned dual solution.

    Raises
    ------
    SolverStall
        If the dual solution is worse than ``P_prev`` by more than 1e-8
        (relative); the caller should keep ``P_prev``.
    """
    sur = _Surrogate(rows, state, sigma2, common)
    lam, P, dual = _maximize_dual(sur, P_t)
    value = sur.primal(P)
    gap = value - dual
    if P_prev is not None:
        prev_value = sur.primal(P_prev)
        if value > prev_value:
            if value - prev_value > 1e-8 * max(1.0, abs(prev_value)):
                raise SolverStall(f"surrogate rose by {value - prev_value:.3e}")
            return SubproblemResult(np.array(P_prev), prev_value, gap, lam, True)
    return SubproblemResult(P, value, gap, lam)


def _objective(rows, P, sigma2):
    return RateReport(*rates_from_rows(rows, P, sigma2)).objective


def wmmse_precoder(rows, P0, P_t, sigma2, common=True, tol=1e-5, max_iters=200):
    """Run WMMSE iterations from ``P0`` until the sum-rate settles.

    Returns the precoder, its objective and the number of iterations.
    """
    P = np.array(P0, dtype=complex)
    if not common:
        P[:, 0] = 0.0
    obj = _objective(rows, P, sigma2)
    for it in range(1, max_iters + 1):
        state = mmse_update(rows, P, sigma2)
        try:
            P_new = precoder_subproblem_solve(rows, state, P_t, sigma2, P, common).P
        except SolverStall as exc:
            warnings.warn(str(exc), SolverStallWarning)
            break
        obj_new = _objective(rows, P_new, sigma2)
        if obj_new < obj:
            break
        done = obj_new - obj <= tol * max(abs(obj), 1e-12)
        P, obj = P_new, obj_new
        if done:
            break
    return P, obj, it


def _user_objective(samples: ChannelSampleSet, bank, P, sigma2, k, others_min):
    H_k = samples.samples[k]
    K = P.shape[1] - 1
    mask = np.ones(K, bool)
    mask[k] = False

    def objective(B):
        h = np.einsum("nr,srd->nsd", bank(B).conj(), H_k)
        G = np.abs(h @ P) ** 2
        priv = G[..., 1:]
        own = priv[..., k]
        total = priv.sum(-1)
        gamma_c = G[..., 0] / (total + sigma2)
        gamma_p = own / (priv[..., mask].sum(-1) + sigma2)
        Rc = np.log2(1 + gamma_c).mean(-1)
        Rp = np.log2(1 + gamma_p).mean(-1)
        return np.minimum(Rc, others_min) + Rp

    return objective


def antenna_coder_update(samples: ChannelSampleSet, bank: PatternCoderBank, coders, P,
                         k: int, sigma2, cfg: SeboConfig = SeboConfig(), rng=None):
    """SEBO update of user ``k``'s coder with the others fixed.

    The objective is ``min(Rc_k(b), min_{j != k} Rc_j) + Rp_k(b)``; the other
    users' common rates are computed once before the search.
    """
    coders = np.asarray(coders, dtype=np.uint8)
    Rc, _ = rates_from_rows(coded_rows(samples.samples, bank(coders)), P, sigma2)
    others = np.delete(Rc, k)
    others_min = others.min() if others.size else np.inf
    objective = _user_objective(samples, bank, P, sigma2, k, others_min)
    return sebo_search(objective, bank.Q, cfg, init=coders[k], rng=rng)


def initial_precoder(estimate_rows, P_t, sigma2, common=True):
    """Starting precoder for the alternating loop.

    RSMA starts from RS-ZF-SVD with at least one grid step of common power,
    since WMMSE cannot revive a common stream that starts at zero. SDMA starts
    from ZF, or matched filtering if the estimates cannot be zero-forced.
    """
    if common:
        return rs_zf_svd_precoder(estimate_rows, P_t, sigma2,
                                  min_share=1.0 / (DEFAULT_GRID_POINTS - 1))
    try:
        return sdma_zf_precoder(estimate_rows, P_t)
    except RankDeficient:
        K, N = estimate_rows.shape
        P = np.zeros((N, K + 1), dtype=complex)
        P[:, 1:] = estimate_rows.conj().T
        pw = np.sum(np.abs(P) ** 2)
        return P * np.sqrt(P_t / pw) if pw > 0 else P


@dataclass
class AlternatingResult:
    P: np.ndarray
    coders: np.ndarray
    report: RateReport
    trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    outer_iters: int = 0
    inner_iters: int = 0


def alternating_optimize(samples: ChannelSampleSet, bank: PatternCoderBank, P_t, sigma2,
                         cfg: OuterLoopConfig = OuterLoopConfig(),
                         sebo_cfg: SeboConfig = SeboConfig(),
                         init_P=None, init_B=None, common=True,
                         rng: np.random.Generator | None = None) -> AlternatingResult:
    """Alternate WMMSE precoder updates with per-user SEBO coder updates.

    Defaults start from all-zero coders and the RS-ZF-SVD (RSMA) or ZF (SDMA)
    precoder on the coded estimates. With ``common=False`` the common stream
    is pinned to zero throughout.

    ``trace`` holds the objective at the start and after every outer
    iteration; ``step_trace`` additionally records every block update.
    """
    K = samples.K
    if rng is None:
        rng = np.random.default_rng(sebo_cfg.seed)
    B = np.zeros((K, bank.Q), np.uint8) if init_B is None else np.array(init_B, np.uint8)
    rows = coded_rows(samples.samples, bank(B))
    if init_P is None:
        est_rows = coded_rows(samples.estimate, bank(B))
        P = initial_precoder(est_rows, P_t, sigma2, common)
    else:
        P = np.array(init_P, dtype=complex)
    if not common:
        P[:, 0] = 0.0

    obj = _objective(rows, P, sigma2)
    result = AlternatingResult(P, B, None, [obj], [obj])
    for it in range(cfg.max_outer_iters):
        P, _, n_inner = wmmse_precoder(rows, P, P_t, sigma2, common,
                                       cfg.inner_tol, cfg.inner_max_iters)
        result.inner_iters += n_inner
        result.step_trace.append(_objective(rows, P, sigma2))
        for k in range(K):
            found = antenna_coder_update(samples, bank, B, P, k, sigma2, sebo_cfg, rng)
            B[k] = found.coder
            rows = coded_rows(samples.samples, bank(B))
            result.step_trace.append(_objective(rows, P, sigma2))
        new_obj = result.step_trace[-1]
        result.trace.append(new_obj)
        result.outer_iters = it + 1
        converged = abs(new_obj - obj) < cfg.rel_tol * max(abs(obj), 1e-12)
        obj = new_obj
        if converged:
            break
    result.P, result.coders = P, B
    result.report = RateReport(*rates_from_rows(rows, P, sigma2))
    return result
