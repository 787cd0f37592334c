"""Generator matrices in the Fock basis.

For a purely dissipative single oscillator the k-th off-diagonal family
``rho^(k)_n = <n|rho|n+k>`` evolves on its own, ``d/dt rho^(k) = M^(k) rho^(k)``.
This module assembles the banded matrices ``M^(k)`` and, as an independent
brute-force reference, the full Liouvillian of two oscillators coupled by
photon exchange ``J (a1^dagger a2 + a1 a2^dagger)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionTooLarge
from .model import GAIN, LOSS, ChannelSet, FockTruncation, falling, validate_channels

DENSE_LIMIT = 200
MAX_BLOCK_DIM = 200_000
MAX_FULL_DIM = 4_000_000


@dataclass(frozen=True)
class GeneratorBlock:
    """Real matrix ``M^(k)`` acting on ``rho^(k)_n`` for n = 0..n_max-k."""

    k: int
    matrix: sp.csr_matrix
    n_max: int
    lower: int
    upper: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def banded(self) -> np.ndarray:
        """LAPACK band storage ``ab[upper + i - j, j] = M[i, j]`` for solve_banded."""
        m = self.matrix.tocoo()
        ab = np.zeros((self.lower + self.upper + 1, self.dim))
        ab[self.upper + m.row - m.col, m.col] = m.data
        return ab

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()


def _assemble(channels: ChannelSet, n_max: int, k: int) -> GeneratorBlock:
    dim = n_max + 1 - k
    if dim < 1:
        raise ValueError(f"coherence index k={k} exceeds n_max={n_max}")
    n = np.arange(dim, dtype=float)
    rows, cols, vals = [], [], []

    decay = channels.total_weight(n, n_max) + channels.total_weight(n + k, n_max)
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(-0.5 * decay)

    lower = upper = 0
    for c in channels:
        if c.rate == 0:
            continue
        p = c.power
        if c.direction == LOSS:
            # rho_{n+p, n+p+k} -> rho_{n, n+k}
            src = np.arange(dim - p)
            amp = np.sqrt(falling(src + p, p) * falling(src + p + k, p))
            rows.append(src)
            cols.append(src + p)
            upper = max(upper, p)
        else:
            # rho_{n-p, n-p+k} -> rho_{n, n+k}
            src = np.arange(p, dim)
            amp = np.sqrt(falling(src, p) * falling(src + k, p))
            rows.append(src)
            cols.append(src - p)
            lower = max(lower, p)
        vals.append(c.rate * amp)

    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    m.sum_duplicates()
    return GeneratorBlock(k=k, matrix=m, n_max=n_max, lower=lower, upper=upper)


def build_diagonal_generator(channels: ChannelSet, trunc: FockTruncation) -> GeneratorBlock:
    """Classical rate matrix for the populations ``P_n``.

    Row n reads ``dP_n/dt = -G_n P_n + A_{n+1} P_{n+1} + B_{n-2} P_{n-2} +
    C_{n+3} P_{n+3}`` for the canonical channels. Gain transitions that would
    leave the truncated space are dropped together with their outflow, so
    every column sums to zero.
    """
    validate_channels(channels)
    return _assemble(channels, trunc.n_max, 0)


def build_offdiagonal_generator(channels: ChannelSet, trunc: FockTruncation, k: int) -> GeneratorBlock:
    """``M^(k)`` for the coherences ``<n|rho|n+k>``; ``k = 0`` gives the rate matrix."""
    if k < 0:
        raise ValueError("k must be non-negative")
    validate_channels(channels)
    return _assemble(channels, trunc.n_max, int(k))


def dump_matrix_market(block: GeneratorBlock, path) -> None:
    scipy.io.mmwrite(
        str(path),
        block.matrix.tocoo(),
        comment=f"generator block k={block.k} n_max={block.n_max}",
        precision=17,
    )


# ---------------------------------------------------------------------------
# two coupled oscillators


def ladder(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1, format="csr")


def _channel_operator(a: sp.csr_matrix, power: int, direction: str) -> sp.csr_matrix:
    base = a if direction == LOSS else a.T.tocsr()
    op = base
    for _ in range(power - 1):
        op = op @ base
    return op.tocsr()


@dataclass(frozen=True)
class TwoModeLiouvillian:
    """Liouvillian restricted to elements ``<n1,n2|rho|m1,m2>`` with
    ``(n1 + n2) - (m1 + m2) = q``.

    ``basis`` has one row ``(n1, n2, m1, m2)`` per vector component.
    """

    q: int
    J: float
    n_max: int
    matrix: sp.csr_matrix
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def coherence_order(self) -> np.ndarray:
        """``p = n1 - m1`` of every basis element."""
        return self.basis[:, 0] - self.basis[:, 2]

    @property
    def population_mask(self) -> np.ndarray:
        b = self.basis
        return (b[:, 0] == b[:, 2]) & (b[:, 1] == b[:, 3])


def full_two_mode_liouvillian(channels: ChannelSet, J: float, n_max: int) -> sp.csr_matrix:
    """Superoperator on row-major ``vec(rho)`` of the two-mode Fock space.

    ``vec(A rho B) = (A kron B^T) vec(rho)``.
    """
    d = n_max + 1
    full = d**4
    if full > MAX_FULL_DIM:
        raise DimensionTooLarge(f"two-mode Liouville space of dimension {full} is too large")
    a = ladder(n_max)
    eye = sp.identity(d, format="csr")
    a1 = sp.kron(a, eye, format="csr")
    a2 = sp.kron(eye, a, format="csr")
    ident = sp.identity(d * d, format="csr")

    h = J * (a1.T @ a2 + a1 @ a2.T)
    L = -1j * (sp.kron(h, ident) - sp.kron(ident, h.T))
    for aj in (a1, a2):
        for c in channels:
            if c.rate == 0:
                continue
            C = _channel_operator(aj, c.power, c.direction)
            CdC = (C.T @ C).tocsr()
            L = L + c.rate * (
                sp.kron(C, C) - 0.5 * sp.kron(CdC, ident) - 0.5 * sp.kron(ident, CdC.T)
            )
    return L.tocsr()


def two_mode_basis(n_max: int) -> np.ndarray:
    d = n_max + 1
    idx = np.arange(d**4)
    return np.stack(np.unravel_index(idx, (d, d, d, d)), axis=1)


def build_two_mode_liouvillian(
    channels: ChannelSet, J: float, trunc: FockTruncation, q: int = 0
) -> TwoModeLiouvillian:
    """Exact coupled-oscillator generator on the conserved block ``q``.

    Photon exchange conserves ``n1 + n2`` and every dissipator shifts bra and
    ket by the same amount, so ``q`` labels invariant subspaces.
    """
    validate_channels(channels)
    n_max = trunc.n_max
    basis = two_mode_basis(n_max)
    sel = np.nonzero(basis[:, 0] + basis[:, 1] - basis[:, 2] - basis[:, 3] == q)[0]
    if sel.size > MAX_BLOCK_DIM:
        raise DimensionTooLarge(f"q={q} block has dimension {sel.size} > {MAX_BLOCK_DIM}")
    full = full_two_mode_liouvillian(channels, J, n_max)
    block = full[sel][:, sel].tocsr()
    return TwoModeLiouvillian(q=q, J=float(J), n_max=n_max, matrix=block, basis=basis[sel])


__all__ = [
    "GAIN",
    "LOSS",
    "DENSE_LIMIT",
    "GeneratorBlock",
    "TwoModeLiouvillian",
    "build_diagonal_generator",
    "build_offdiagonal_generator",
    "build_two_mode_liouvillian",
    "dump_matrix_market",
    "full_two_mode_liouvillian",
    "two_mode_basis",
]
