"""Steady-state photon statistics, Wigner functions and FP/B/LC classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import GridTooSmall, NullSpaceDegenerate
from .generator import DENSE_LIMIT, GeneratorBlock, build_diagonal_generator
from .model import ChannelSet, FockTruncation, NumberDistribution, suggest_truncation

FIXED_POINT = "FP"
BISTABLE = "B"
LIMIT_CYCLE = "LC"

# Minimum probability mass carried by each peak for a bimodal P_n to count as bistable.
DEFAULT_PEAK_MASS = 1e-6
DEFAULT_TROUGH_RATIO = 1.0


def count_closed_classes(block: GeneratorBlock) -> int:
    """Number of closed communicating classes of the jump graph.

    Equals the dimension of the null space of a rate matrix.
    """
    m = block.matrix.tocoo()
    off = (m.row != m.col) & (m.data > 0)
    # edge j -> i whenever M[i, j] > 0
    adj = sp.coo_matrix(
        (np.ones(off.sum()), (m.col[off], m.row[off])), shape=block.matrix.shape
    ).tocsr()
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    src, dst = adj.nonzero()
    crossing = labels[src] != labels[dst]
    leaves[np.unique(labels[src[crossing]])] = False
    return int(leaves.sum())


def _null_vector_gth(block: GeneratorBlock) -> np.ndarray:
    """Stationary vector by state reduction from the top of the ladder.

    Eliminating level k folds every path through it into direct rates
    between the remaining lower levels. Only sums and products of
    non-negative rates occur, so each entry of the result carries a small
    relative error even deep in the tail where P_n is far below machine
    epsilon times max P_n.
    """
    n = block.dim
    w = max(block.lower, block.upper)
    m = block.matrix.tocoo()
    off = m.row != m.col
    # q[j, i - j + w] = rate of the jump j -> i
    q = np.zeros((n, 2 * w + 1))
    q[m.col[off], m.row[off] - m.col[off] + w] = m.data[off]
    out_total = np.zeros(n)
    for k in range(n - 1, 0, -1):
        lo = max(0, k - w)
        down = q[k, lo - k + w : w].copy()
        tot = down.sum()
        if not tot > 0:
            raise NullSpaceDegenerate(f"level {k} cannot reach lower levels")
        out_total[k] = tot
        for i in range(lo, k):
            up = q[i, k - i + w]
            if up == 0.0:
                continue
            q[i, lo - i + w : k - i + w] += up * down / tot
            q[i, w] = 0.0
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        lo = max(0, k - w)
        inflow = x[lo:k] @ q[np.arange(lo, k), k - np.arange(lo, k) + w]
        x[k] = inflow / out_total[k]
    return x


def _null_vector_dense(block: GeneratorBlock) -> np.ndarray:
    mat = block.dense()
    w, v = sla.eig(mat)
    order = np.argsort(np.abs(w))
    scale = np.abs(mat).max()
    if w.size > 1 and abs(w[order[1]]) < 1e-10 * max(scale, 1.0):
        raise NullSpaceDegenerate(f"second eigenvalue {w[order[1]]:.3e} is numerically zero")
    return np.real(v[:, order[0]])


def _null_vector_banded(block: GeneratorBlock, max_iter: int = 50) -> np.ndarray:
    ab = block.banded()
    scale = np.abs(ab).max()
    shift = 1e-14 * scale
    ab[block.upper] += shift
    x = np.full(block.dim, 1.0 / block.dim)
    for _ in range(max_iter):
        x = sla.solve_banded((block.lower, block.upper), ab, x)
        x /= x.sum()
        if np.abs(block.matrix @ x).max() <= 1e-12 * scale:
            break
    return x


def solve_steady_state(
    block: GeneratorBlock,
    *,
    tail_tolerance: float = 1e-12,
    check_tail: bool = True,
    method: str = "reduction",
) -> NumberDistribution:
    """Normalised zero-eigenvalue vector of the population generator.

    Parameters
    ----------
    block
        The k = 0 generator block.
    tail_tolerance, check_tail
        Raise :class:`TruncationUnsafe` when ``P[n_max]`` reaches the tolerance.
    method
        ``"reduction"`` (default) eliminates levels one by one and keeps full
        relative accuracy in the tail. ``"eig"`` uses a dense
        eigendecomposition and ``"inverse"`` shifted inverse iteration on the
        band storage; both have absolute errors of order
        ``eps * max|M| / gap`` and serve as cross-checks.
    """
    if block.k != 0:
        raise ValueError("steady state needs the k=0 block")
    if count_closed_classes(block) > 1:
        raise NullSpaceDegenerate("the jump graph has more than one closed class")
    if method == "reduction":
        x = _null_vector_gth(block)
    elif method == "eig" or (method == "auto" and block.dim < DENSE_LIMIT):
        x = _null_vector_dense(block)
    elif method in ("inverse", "auto"):
        x = _null_vector_banded(block)
    else:
        raise ValueError(f"unknown method {method!r}")
    x = x / x.sum()
    x[(x < 0) & (x > -1e-14)] = 0.0
    if x.min() < 0:
        raise ArithmeticError(f"{method} solve produced P_n = {x.min():.3e}; use method='reduction'")
    dist = NumberDistribution.normalized(x)
    if check_tail:
        FockTruncation(block.n_max, tail_tolerance).check_tail(dist.p)
    return dist


def moments(p: NumberDistribution | np.ndarray) -> tuple[float, float]:
    """Mean photon number and variance ``<n^2> - <n>^2``."""
    p = np.asarray(getattr(p, "p", p), dtype=float)
    n = np.arange(p.size)
    mean = float(n @ p)
    mu2 = float(((n - mean) ** 2) @ p)
    return mean, mu2


# ---------------------------------------------------------------------------
# classification


def local_maxima(p: np.ndarray) -> list[int]:
    """Strict local maxima on the integer lattice; plateaus report their lowest n."""
    p = np.asarray(p, dtype=float)
    starts = np.concatenate(([0], np.nonzero(np.diff(p) != 0)[0] + 1))
    vals = p[starts]
    peaks = []
    for i, s in enumerate(starts):
        left = vals[i - 1] if i > 0 else -np.inf
        right = vals[i + 1] if i + 1 < len(vals) else -np.inf
        if vals[i] > left and vals[i] > right:
            peaks.append(int(s))
    return peaks


@dataclass(frozen=True)
class Peak:
    position: int
    height: float
    mass: float


def find_peaks(p, trough_ratio: float = DEFAULT_TROUGH_RATIO) -> list[Peak]:
    """Local maxima of P_n after merging neighbours not separated by a deep trough.

    Two adjacent peaks stay separate only when the minimum between them is at
    most ``trough_ratio`` times the smaller peak height.
    """
    p = np.asarray(getattr(p, "p", p), dtype=float)
    peaks = local_maxima(p)
    merged = True
    while merged and len(peaks) > 1:
        merged = False
        for i in range(len(peaks) - 1):
            a, b = peaks[i], peaks[i + 1]
            trough = p[a : b + 1].min()
            if trough > trough_ratio * min(p[a], p[b]):
                keep = a if p[a] >= p[b] else b
                peaks[i : i + 2] = [keep]
                merged = True
                break
    # basin edges: each trough belongs to the peak on its left
    edges = [a + int(np.argmin(p[a : b + 1])) + 1 for a, b in zip(peaks[:-1], peaks[1:])]
    edges = [0, *edges, p.size]
    return [
        Peak(pos, float(p[pos]), float(p[edges[i] : edges[i + 1]].sum()))
        for i, pos in enumerate(peaks)
    ]


def classify(
    p,
    peak_mass: float = DEFAULT_PEAK_MASS,
    trough_ratio: float = DEFAULT_TROUGH_RATIO,
) -> str:
    """Label a phase-symmetric state as fixed point, bistable or limit cycle.

    FP: the only significant peak of P_n sits at n = 0. LC: the only
    significant peak sits away from the vacuum. B: both kinds are present,
    each carrying at least ``peak_mass`` of probability.
    """
    peaks = [pk for pk in find_peaks(p, trough_ratio) if pk.mass >= peak_mass]
    has_vacuum = any(pk.position == 0 for pk in peaks)
    has_ring = any(pk.position > 0 for pk in peaks)
    if has_vacuum and has_ring:
        return BISTABLE
    if has_ring:
        return LIMIT_CYCLE
    return FIXED_POINT


# ---------------------------------------------------------------------------
# Wigner function


def wigner_radial(p, r) -> np.ndarray:
    """W(|alpha| = r) of a Fock-diagonal state, ``sum_n P_n W_n(r)``.

    ``W_n(r) = (2/pi) (-1)^n exp(-2 r^2) L_n(4 r^2)``, evaluated with the
    Laguerre three-term recurrence under running rescaling so that large n
    and large r neither overflow nor underflow.
    """
    p = np.asarray(getattr(p, "p", p), dtype=float)
    r = np.asarray(r, dtype=float)
    x = 4.0 * r * r
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    logscale = np.zeros_like(x)
    acc = p[0] * cur
    for n in range(1, p.size):
        nxt = ((2 * n - 1 - x) * cur - (n - 1) * prev) / n
        prev, cur = cur, nxt
        acc = acc + (p[n] if n % 2 == 0 else -p[n]) * cur
        big = np.abs(cur) > 1e150
        if big.any():
            prev[big] *= 1e-150
            cur[big] *= 1e-150
            acc[big] *= 1e-150
            logscale[big] += 150 * np.log(10.0)
    return (2.0 / np.pi) * acc * np.exp(logscale - x / 2.0)


@dataclass(frozen=True)
class WignerGrid:
    extent: float
    resolution: int
    axis: np.ndarray
    values: np.ndarray  # values[i, j] = W(alpha_r = axis[j], alpha_i = axis[i])

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def normalization(self) -> float:
        return float(self.values.sum() * self.spacing**2)


def default_extent(p) -> float:
    p = np.asarray(getattr(p, "p", p), dtype=float)
    cdf = np.cumsum(p)
    n_hi = int(np.searchsorted(cdf, 1.0 - 1e-10))
    return float(np.sqrt(min(n_hi, p.size - 1) + 1.0) + 4.0)


def wigner_from_diagonal(p, extent: float | None = None, resolution: int = 201) -> WignerGrid:
    """Wigner function on a square ``[-extent, extent]^2`` grid.

    Values are computed from the radius only, so the grid is rotationally
    symmetric to rounding. Raises :class:`GridTooSmall` when the function at
    the grid edge exceeds 1e-6 of its maximum.
    """
    p = np.asarray(getattr(p, "p", p), dtype=float)
    auto = extent is None
    if auto:
        extent = default_extent(p)
    while True:
        axis = np.linspace(-extent, extent, resolution)
        rr = np.hypot(axis[None, :], axis[:, None])
        radii, inverse = np.unique(rr, return_inverse=True)
        w_r = wigner_radial(p, radii)
        values = w_r[inverse].reshape(rr.shape)
        peak = np.abs(values).max()
        edge = abs(wigner_radial(p, np.array([extent]))[0])
        if edge <= 1e-6 * peak:
            return WignerGrid(float(extent), resolution, axis, values)
        if not auto:
            raise GridTooSmall(f"W at the grid edge is {edge / peak:.2e} of its maximum")
        extent *= 1.5


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyStateReport:
    distribution: NumberDistribution
    mean_n: float
    mu2: float
    classification: str
    tail_mass: float


def steady_state_report(
    channels: ChannelSet,
    trunc: FockTruncation | None = None,
    peak_mass: float = DEFAULT_PEAK_MASS,
) -> SteadyStateReport:
    if trunc is None:
        trunc = suggest_truncation(channels)
    block = build_diagonal_generator(channels, trunc)
    dist = solve_steady_state(block, tail_tolerance=trunc.tail_tolerance)
    mean, mu2 = moments(dist)
    return SteadyStateReport(dist, mean, mu2, classify(dist, peak_mass), dist.tail_mass)
