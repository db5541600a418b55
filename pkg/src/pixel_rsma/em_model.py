"""
Multiport-network model of a switch-reconfigurable pixel antenna.

A pixel antenna with ``Q`` RF switches is a ``(Q+1)``-port network: port 0 is
the antenna port and ports ``1..Q`` are the pixel ports. An antenna coder
``b`` in ``{0,1}^Q`` sets each pixel port to a short circuit (``b_q = 0``) or an
open circuit (``b_q = 1``). The coder determines the port currents, which in
turn weight the open-circuit port patterns into the radiated pattern.

Arrays follow one convention throughout the package: coders are ``uint8``
arrays of shape ``(Q,)`` or ``(n, Q)``, currents are complex vectors of length
``Q+1`` with the antenna-port current first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (DimensionMismatch, SingularSubnetwork, ZeroMatrix,
                         ZeroPattern)

__all__ = [
    "ImpedanceNetwork", "OpenCircuitPatterns", "PatternBasis",
    "PatternCoderBank", "solve_port_currents", "coded_currents",
    "radiation_pattern", "pattern_basis", "normalized_pattern_coder",
    "coded_channel_row", "coder_to_index", "index_to_coder",
    "read_antenna_file", "write_antenna_file",
]

SINGULAR_TOL = 1e-12
ZERO_PATTERN_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-6


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ImpedanceNetwork:
    """Impedance description of one pixel antenna.

    Parameters
    ----------
    z_AA : complex
        Self-impedance of the antenna port.
    Z_PP : (Q, Q) complex array
        Self-impedance matrix of the pixel ports. Must be symmetric.
    z_PA : (Q,) complex array
        Trans-impedance between the antenna port and each pixel port.
    """
    z_AA: complex
    Z_PP: np.ndarray
    z_PA: np.ndarray

    def __post_init__(self):
        Z_PP = _frozen(self.Z_PP)
        z_PA = _frozen(np.ravel(self.z_PA))
        if Z_PP.ndim != 2 or Z_PP.shape[0] != Z_PP.shape[1] or Z_PP.shape[0] < 1:
            raise DimensionMismatch(f"Z_PP must be square with Q >= 1, got {Z_PP.shape}")
        if z_PA.shape != (Z_PP.shape[0],):
            raise DimensionMismatch(
                f"z_PA has length {z_PA.size}, expected {Z_PP.shape[0]}")
        scale = max(np.abs(Z_PP).max(), 1.0)
        if np.abs(Z_PP - Z_PP.T).max() > 1e-9 * scale:
            raise ValueError("Z_PP is not symmetric (network must be reciprocal)")
        object.__setattr__(self, "Z_PP", Z_PP)
        object.__setattr__(self, "z_PA", z_PA)
        object.__setattr__(self, "z_AA", complex(self.z_AA))

    @property
    def Q(self) -> int:
        return self.Z_PP.shape[0]

    def full_matrix(self) -> np.ndarray:
        """The assembled ``(Q+1) x (Q+1)`` impedance matrix."""
        Z = np.empty((self.Q + 1, self.Q + 1), dtype=complex)
        Z[0, 0] = self.z_AA
        Z[0, 1:] = self.z_PA
        Z[1:, 0] = self.z_PA
        Z[1:, 1:] = self.Z_PP
        return Z

    @classmethod
    def from_matrix(cls, Z) -> "ImpedanceNetwork":
        Z = np.asarray(Z, dtype=complex)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1] or Z.shape[0] < 2:
            raise DimensionMismatch(f"impedance matrix must be square, >= 2x2, got {Z.shape}")
        return cls(Z[0, 0], Z[1:, 1:], Z[1:, 0])


@dataclass(frozen=True)
class OpenCircuitPatterns:
    """Open-circuit radiation patterns ``E_oc`` of all ports.

    ``E_oc`` has shape ``(2*Ns, Q+1)``; column 0 is the antenna-port pattern.
    Rows stack both polarizations over ``Ns`` angular samples.
    """
    E_oc: np.ndarray

    def __post_init__(self):
        E = _frozen(self.E_oc)
        if E.ndim != 2 or E.shape[1] < 2:
            raise DimensionMismatch(f"E_oc must be 2-D with Q+1 >= 2 columns, got {E.shape}")
        if E.shape[0] % 2:
            raise DimensionMismatch("E_oc row count must be even (two polarizations)")
        object.__setattr__(self, "E_oc", E)

    @property
    def Q(self) -> int:
        return self.E_oc.shape[1] - 1

    @property
    def Ns(self) -> int:
        return self.E_oc.shape[0] // 2


@dataclass(frozen=True)
class PatternBasis:
    """Truncated SVD ``E_oc = U @ diag(s) @ V^H`` of rank ``r``."""
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def r(self) -> int:
        return self.s.size

    @property
    def S(self) -> np.ndarray:
        return np.diag(self.s)


def _check_coder(coder, Q):
    b = np.asarray(coder)
    if b.shape[-1] != Q:
        raise DimensionMismatch(f"coder length {b.shape[-1]} does not match Q={Q}")
    if not np.isin(b, (0, 1)).all():
        raise ValueError("antenna coder entries must be 0 or 1")
    return b.astype(np.uint8)


def solve_port_currents(net: ImpedanceNetwork, coder, i_A: complex = 1.0) -> np.ndarray:
    """Port currents for one antenna coder.

    Open-circuited pixel ports are removed from the network and carry exactly
    zero current. The short-circuited ports solve
    ``Z_PP[closed, closed] @ i_closed = -z_PA[closed] * i_A``.

    Raises
    ------
    SingularSubnetwork
        If the closed-port submatrix has reciprocal condition number below
        1e-12.
    """
    b = _check_coder(coder, net.Q)
    if not np.isfinite(i_A):
        raise ValueError("i_A must be finite")
    i = np.zeros(net.Q + 1, dtype=complex)
    i[0] = i_A
    closed = np.flatnonzero(b == 0)
    if closed.size:
        Z = net.Z_PP[np.ix_(closed, closed)]
        sv = np.linalg.svd(Z, compute_uv=False)
        if sv[-1] <= SINGULAR_TOL * sv[0]:
            raise SingularSubnetwork(f"closed-port submatrix singular for coder {b.tolist()}")
        i[1 + closed] = np.linalg.solve(Z, -net.z_PA[closed] * i_A)
    return i


def coded_currents(net: ImpedanceNetwork, coders) -> tuple[np.ndarray, np.ndarray]:
    """Batched port currents at ``i_A = 1`` for an ``(n, Q)`` array of coders.

    Open ports are handled by replacing their rows and columns with identity
    and zeroing their right-hand side, which is equivalent to eliminating them.

    Returns
    -------
    currents : (n, Q+1) complex array
    ok : (n,) bool array
        False where the closed-port submatrix is singular; those rows are zero.
    """
    B = _check_coder(np.atleast_2d(coders), net.Q)
    n, Q = B.shape
    closed = B == 0
    both = closed[:, :, None] & closed[:, None, :]
    M = np.where(both, net.Z_PP[None], np.eye(Q)[None])
    rhs = np.where(closed, -net.z_PA[None], 0.0)
    sv = np.linalg.svd(M, compute_uv=False)
    ok = sv[:, -1] > SINGULAR_TOL * sv[:, 0]
    currents = np.zeros((n, Q + 1), dtype=complex)
    currents[:, 0] = 1.0
    if ok.any():
        currents[ok, 1:] = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    currents[~ok] = 0.0
    return currents, ok


def radiation_pattern(patterns: OpenCircuitPatterns, currents) -> np.ndarray:
    """Unnormalized radiated pattern ``E_oc @ i``."""
    i = np.asarray(currents, dtype=complex)
    if i.shape != (patterns.Q + 1,):
        raise DimensionMismatch(
            f"got {i.shape[0] if i.ndim else 0} currents for {patterns.Q + 1} ports")
    return patterns.E_oc @ i


def pattern_basis(patterns: OpenCircuitPatterns, tol: float = DEFAULT_RANK_TOL) -> PatternBasis:
    """Rank-revealing SVD of the open-circuit pattern matrix.

    Singular values at or below ``tol`` times the largest are discarded; the
    number kept is the effective aerial degrees of freedom ``r``.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    U, s, Vh = np.linalg.svd(patterns.E_oc, full_matrices=False)
    if s[0] == 0.0:
        raise ZeroMatrix("open-circuit pattern matrix is identically zero")
    r = int(np.count_nonzero(s > tol * s[0]))
    return PatternBasis(_frozen(U[:, :r]), _frozen(s[:r], float), _frozen(Vh[:r].conj().T))


def normalized_pattern_coder(basis: PatternBasis, net: ImpedanceNetwork,
                             coder) -> tuple[np.ndarray, float]:
    """Unit-norm pattern coder ``w = S V^T i*`` and the antenna current that yields it.

    The antenna-port current is taken real and positive.

    Raises
    ------
    ZeroPattern
        If the coder's pattern has norm below 1e-12 in the retained basis.
    """
    if basis.V.shape[0] != net.Q + 1:
        raise DimensionMismatch("basis and network have different port counts")
    i = solve_port_currents(net, coder, 1.0)
    w = basis.s * (basis.V.T @ i.conj())
    norm = np.linalg.norm(w)
    if norm < ZERO_PATTERN_TOL:
        raise ZeroPattern(f"coder {np.asarray(coder).tolist()} radiates nothing")
    return w / norm, 1.0 / norm


def coded_channel_row(w, H_e) -> np.ndarray:
    """Channel row ``w^H @ H_e`` seen through the coded pattern."""
    w = np.asarray(w)
    H_e = np.asarray(H_e)
    if H_e.ndim != 2 or w.shape != (H_e.shape[0],):
        raise DimensionMismatch(f"pattern coder {w.shape} vs effective channel {H_e.shape}")
    return w.conj() @ H_e


def coder_to_index(coders) -> np.ndarray | int:
    """Integer label of a coder; bit 0 is most significant so integer order is lexicographic."""
    B = np.asarray(coders, dtype=np.int64)
    weights = 1 << np.arange(B.shape[-1] - 1, -1, -1, dtype=np.int64)
    idx = B @ weights
    return int(idx) if np.ndim(idx) == 0 else idx


def index_to_coder(index, Q: int) -> np.ndarray:
    idx = np.asarray(index, dtype=np.int64)
    shifts = np.arange(Q - 1, -1, -1, dtype=np.int64)
    return ((idx[..., None] >> shifts) & 1).astype(np.uint8)


class PatternCoderBank:
    """Maps antenna coders to unit-norm pattern coders for one antenna design.

    For ``Q <= table_max_q`` the pattern coders of all ``2^Q`` coders are
    computed once and looked up by index. Coders that radiate nothing, or
    whose closed-port network is singular, map to the zero vector, which makes
    every rate through them zero.
    """

    def __init__(self, net: ImpedanceNetwork, patterns: OpenCircuitPatterns,
                 tol: float = DEFAULT_RANK_TOL, table_max_q: int = 16):
        if patterns.Q != net.Q:
            raise DimensionMismatch("network and patterns disagree on Q")
        self.net = net
        self.patterns = patterns
        self.basis = pattern_basis(patterns, tol)
        self.Q = net.Q
        self.r = self.basis.r
        self._table = None
        if self.Q <= table_max_q:
            self._table = self._compute(index_to_coder(np.arange(2 ** self.Q), self.Q))

    def _compute(self, B):
        W = np.zeros((B.shape[0], self.r), dtype=complex)
        for start in range(0, B.shape[0], 4096):
            chunk = B[start:start + 4096]
            currents, ok = coded_currents(self.net, chunk)
            w = (currents.conj() @ self.basis.V) * self.basis.s
            norms = np.linalg.norm(w, axis=1)
            good = ok & (norms >= ZERO_PATTERN_TOL)
            W[start:start + chunk.shape[0]][good] = w[good] / norms[good, None]
        return W

    def __call__(self, coders) -> np.ndarray:
        """Pattern coders, shape ``coders.shape[:-1] + (r,)``."""
        B = np.asarray(coders, dtype=np.uint8)
        lead = B.shape[:-1]
        flat = B.reshape(-1, self.Q)
        if self._table is not None:
            W = self._table[coder_to_index(flat)]
        else:
            W = self._compute(flat)
        return W.reshape(lead + (self.r,))

    def all_coders(self) -> np.ndarray:
        if self.Q > 20:
            raise ValueError("refusing to enumerate more than 2^20 coders")
        return np.array(list(itertools.product((0, 1), repeat=self.Q)), dtype=np.uint8)


# -- antenna data files -------------------------------------------------------

_ANTENNA_HEADER = "pixel-antenna v1"


def _format_row(row):
    return " ".join(f"{z.real!r} {z.imag!r}" for z in row.tolist())


def write_antenna_file(path, net: ImpedanceNetwork, patterns: OpenCircuitPatterns) -> None:
    if net.Q != patterns.Q:
        raise DimensionMismatch("network and patterns disagree on Q")
    lines = [f"{_ANTENNA_HEADER} Q={net.Q} Ns={patterns.Ns}"]
    lines += [_format_row(row) for row in net.full_matrix()]
    lines += [_format_row(row) for row in patterns.E_oc]
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_row(line, ncols, lineno):
    vals = line.split()
    if len(vals) != 2 * ncols:
        raise DimensionMismatch(
            f"line {lineno}: expected {ncols} complex entries, got {len(vals) / 2:g}")
    x = np.array([float(v) for v in vals])
    return x[0::2] + 1j * x[1::2]


def read_antenna_file(path) -> tuple[ImpedanceNetwork, OpenCircuitPatterns]:
    """Parse an antenna data file (measured, full-wave, or synthetic)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(_ANTENNA_HEADER):
        raise ValueError(f"{path}: missing '{_ANTENNA_HEADER}' header")
    fields = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    try:
        Q, Ns = int(fields["Q"]), int(fields["Ns"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed header {lines[0]!r}") from exc
    if len(lines) - 1 != (Q + 1) + 2 * Ns:
        raise DimensionMismatch(
            f"{path}: expected {(Q + 1) + 2 * Ns} matrix rows, found {len(lines) - 1}")
    rows = [_parse_row(ln, Q + 1, n + 2) for n, ln in enumerate(lines[1:])]
    Z = np.array(rows[:Q + 1])
    if not np.array_equal(Z[0, 1:], Z[1:, 0]):
        raise ValueError(f"{path}: impedance matrix is not reciprocal")
    return ImpedanceNetwork.from_matrix(Z), OpenCircuitPatterns(np.array(rows[Q + 1:]))
