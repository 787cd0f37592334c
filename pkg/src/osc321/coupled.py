"""Relative-phase locking of two identical oscillators coupled by photon exchange.

The coupled steady state is organised by the relative coherence order p: the
family ``rho^(p)_{n,m} = <n+p, m| rho |n, m+p>`` collects all elements in
which oscillator 1 carries p more quanta in the ket than in the bra and
oscillator 2 the reverse. Uncoupled dissipation keeps each family separate;
the exchange term ``J (a1^dagger a2 + a1 a2^dagger)`` links p to p +/- 1.
Sums over each family are the cosine Fourier coefficients of the
relative-phase distribution ``P(phi)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveSingular, NegativeDensity, NullSpaceDegenerate
from .generator import build_offdiagonal_generator, build_two_mode_liouvillian
from .model import ChannelSet, FockTruncation, validate_channels
from .steady import solve_steady_state

MAX_ORDER = 4
WARN_J = 1e-2
MAX_J = 1e-1
ODD_TOLERANCE = 1e-12
DEFAULT_RESOLUTION = 720


@dataclass(frozen=True)
class TwoModeBlockFamily:
    """Leading-order ``rho^(p)_{n,m}``; ``values[n, m]`` for n, m = 0..n_max-p."""

    p: int
    values: np.ndarray
    order_in_J: int

    @property
    def total(self) -> complex:
        return complex(self.values.sum())


def _coupling_scale(channels: ChannelSet) -> float:
    k2 = channels.kappa2
    return k2 if k2 > 0 else max(c.rate for c in channels)


def exchange_source(prev: np.ndarray, p: int, J: float) -> np.ndarray:
    """Contribution of family ``p-1`` to the equation of motion of family ``p``.

    ``prev`` has shape ``(d+1, d+1)`` and the result ``(d, d)``.
    """
    d = prev.shape[0] - 1
    n = np.arange(d)[:, None]
    m = np.arange(d)[None, :]
    return -1j * J * (
        np.sqrt((n + p) * (m + 1)) * prev[:d, 1:]
        - np.sqrt((n + 1) * (m + p)) * prev[1:, :d]
    )


def _solve_family(M: np.ndarray, source: np.ndarray) -> np.ndarray:
    # M X + X M^T = -source, split into real and imaginary parts because the
    # LAPACK Sylvester driver is called with real coefficient matrices.
    with np.errstate(all="raise"):
        try:
            x = sla.solve_sylvester(M, M.T, -source.real) + 1j * sla.solve_sylvester(
                M, M.T, -source.imag
            )
        except (FloatingPointError, sla.LinAlgError) as exc:
            raise LinearSolveSingular(str(exc)) from exc
    resid = np.abs(M @ x + x @ M.T + source).max()
    scale = max(np.abs(source).max(), np.finfo(float).tiny)
    if not np.isfinite(resid) or resid > 1e-8 * scale * max(1.0, np.abs(M).max()):
        raise LinearSolveSingular(f"family solve residual {resid:.3e}")
    return x


def perturbative_blocks(
    channels: ChannelSet,
    trunc: FockTruncation,
    J: float,
    p_max: int = MAX_ORDER,
    *,
    check_tail: bool = True,
) -> list[TwoModeBlockFamily]:
    """Leading-order coherence families ``p = 0..p_max`` of the coupled steady state.

    Family 0 is the product ``P_n P_m`` of the uncoupled steady states. Each
    higher family solves ``M^(p) X + X M^(p)T = -S_p`` where ``S_p`` is the
    exchange source built from family ``p-1``, so family p is exactly of
    order ``J^p``. Feedback from family ``p+1`` into family p enters at
    relative order ``J^2`` and is dropped.
    """
    validate_channels(channels)
    if not 0 <= p_max <= MAX_ORDER:
        raise ValueError(f"p_max must lie in 0..{MAX_ORDER}")
    rel = abs(J) / _coupling_scale(channels)
    if rel > MAX_J:
        raise ValueError(f"J/kappa2 = {rel:.3g} is outside the weak-coupling regime (<= {MAX_J})")
    if rel > WARN_J:
        warnings.warn(f"J/kappa2 = {rel:.3g}: higher-order corrections may be significant", stacklevel=2)
    if p_max > trunc.n_max:
        raise ValueError("p_max cannot exceed n_max")

    P = solve_steady_state(
        build_offdiagonal_generator(channels, trunc, 0),
        tail_tolerance=trunc.tail_tolerance,
        check_tail=check_tail,
    ).p
    prev = np.outer(P, P).astype(complex)
    out = [TwoModeBlockFamily(0, prev, 0)]
    for p in range(1, p_max + 1):
        if J == 0:
            x = np.zeros((prev.shape[0] - 1,) * 2, dtype=complex)
        else:
            M = build_offdiagonal_generator(channels, trunc, p).dense()
            x = _solve_family(M, exchange_source(prev, p, J))
        out.append(TwoModeBlockFamily(p, x, p))
        prev = x
    return out


@dataclass(frozen=True)
class FourierCoefficients:
    """``F_k = Re sum rho^(k)``; odd orders are zero by symmetry."""

    values: dict
    odd_residual: float = 0.0
    odd_verified: bool = True

    def __getitem__(self, k: int) -> float:
        return self.values.get(k, 0.0)

    def items(self):
        return self.values.items()


def fourier_coefficients(blocks, k_max: int | None = None) -> FourierCoefficients:
    """Cosine coefficients of ``P(phi)`` from coherence families.

    ``blocks`` is a list of :class:`TwoModeBlockFamily` or a mapping
    ``k -> complex family sum``. Odd coefficients are reported as exact
    zeros; the largest odd magnitude actually present is kept in
    ``odd_residual`` and ``odd_verified`` is False when it exceeds 1e-12.
    """
    if isinstance(blocks, dict):
        sums = {int(k): complex(v) for k, v in blocks.items()}
    else:
        sums = {b.p: b.total for b in blocks}
    if k_max is None:
        k_max = max(sums)
    values, odd = {}, 0.0
    for k in range(1, k_max + 1):
        s = sums.get(k, 0.0)
        if k % 2:
            odd = max(odd, abs(s.real))
            values[k] = 0.0
        else:
            values[k] = float(s.real)
    return FourierCoefficients(values, odd, odd <= ODD_TOLERANCE)


PI_PERIODIC = "pi"
HALF_PI_PERIODIC = "pi/2"
MIXED = "mixed"
UNIFORM = "uniform"


def periodicity_class(F2: float, F4: float, dominance: float = 10.0) -> str:
    """``pi`` when F2 dominates, ``pi/2`` when F4 dominates, by the given factor."""
    a2, a4 = abs(F2), abs(F4)
    if a2 == 0 and a4 == 0:
        return UNIFORM
    if a2 >= dominance * a4:
        return PI_PERIODIC
    if a4 >= dominance * a2:
        return HALF_PI_PERIODIC
    return MIXED


@dataclass(frozen=True)
class PhaseDistribution:
    fourier: dict
    phi: np.ndarray
    density: np.ndarray
    periodicity: str
    extras: dict = field(default_factory=dict)

    @property
    def peak_to_peak(self) -> float:
        return float(self.density.max() - self.density.min())

    @property
    def normalization(self) -> float:
        return float(self.density.mean() * 2 * np.pi)


def phase_distribution(fourier, resolution: int = DEFAULT_RESOLUTION) -> PhaseDistribution:
    """Sample ``P(phi) = 1/(2 pi) + (1/pi) sum_k F_k cos(k phi)`` on ``[0, 2 pi)``.

    Raises :class:`NegativeDensity` if the truncated series dips below -1e-10.
    """
    coeffs = dict(fourier.items()) if hasattr(fourier, "items") else dict(fourier)
    phi = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    dens = np.full(resolution, 1.0 / (2 * np.pi))
    for k, f in sorted(coeffs.items()):
        if f:
            dens += f * np.cos(k * phi) / np.pi
    if dens.min() < -1e-10:
        raise NegativeDensity(f"P(phi) reaches {dens.min():.3e}; coupling too strong for the series")
    period = periodicity_class(coeffs.get(2, 0.0), coeffs.get(4, 0.0))
    return PhaseDistribution({int(k): float(v) for k, v in coeffs.items()}, phi, dens, period)


def low_occupation_analytic(
    kappa1: float,
    kappa2: float,
    J: float,
    P0: float,
    P1: float,
    P2: float,
    resolution: int = DEFAULT_RESOLUTION,
) -> PhaseDistribution:
    """Closed-form ``P(phi)`` when only the three lowest Fock levels are occupied.

    ``F_2 = 2 J^2 (P1^2 - P0 P2) / ((kappa1 + 7 kappa2)(2 kappa1 + 13 kappa2))``.
    A thermal-like ratio ``P1^2 = P0 P2`` gives a flat distribution; excess
    weight in P2 (as produced by two-photon gain) puts the peaks at pi/2 and
    3 pi/2.
    """
    total = P0 + P1 + P2
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"P0 + P1 + P2 = {total!r}; the three-level limit needs it to be 1")
    f2 = 2 * J * J * (P1 * P1 - P0 * P2) / ((kappa1 + 7 * kappa2) * (2 * kappa1 + 13 * kappa2))
    return phase_distribution({2: f2}, resolution)


# ---------------------------------------------------------------------------
# exact reference


@dataclass(frozen=True)
class OracleSolution:
    family_sums: dict
    residual: float
    dim: int


def oracle_family_sums(
    channels: ChannelSet, J: float, trunc: FockTruncation, k_max: int = MAX_ORDER
) -> OracleSolution:
    """Exact steady state of the coupled master equation on the balanced q = 0 block.

    Family p is of order ``J^|p|``; rescaling each unknown by ``J^|p|`` before
    the sparse solve keeps the small high-order coherences from drowning in
    the rounding error of the populations. One population equation is
    replaced by the trace condition.
    """
    L = build_two_mode_liouvillian(channels, J, trunc, q=0)
    order = L.coherence_order
    if J == 0:
        scale = np.ones(L.dim)
    else:
        scale = np.abs(float(J)) ** np.abs(order).astype(float)
    A = (sp.diags(1.0 / scale) @ L.matrix @ sp.diags(scale)).tolil()
    pops = np.nonzero(L.population_mask)[0]
    row = pops[0]
    A[row, :] = 0.0
    A[row, pops] = 1.0
    rhs = np.zeros(L.dim, dtype=complex)
    rhs[row] = 1.0
    A = A.tocsc()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            y = spla.spsolve(A, rhs)
    except (spla.MatrixRankWarning, RuntimeError) as exc:
        raise NullSpaceDegenerate(f"coupled steady state is not unique: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise NullSpaceDegenerate("coupled steady-state solve produced non-finite values")
    x = y * scale
    resid = float(np.abs(L.matrix @ x).max())
    sums = {k: complex(x[order == k].sum()) for k in range(0, k_max + 1)}
    return OracleSolution(sums, resid, L.dim)


def oracle_phase_distribution(
    channels: ChannelSet,
    J: float,
    trunc: FockTruncation,
    resolution: int = DEFAULT_RESOLUTION,
    k_max: int = MAX_ORDER,
) -> PhaseDistribution:
    sol = oracle_family_sums(channels, J, trunc, k_max)
    fc = fourier_coefficients({k: v for k, v in sol.family_sums.items() if k > 0}, k_max)
    dist = phase_distribution(fc, resolution)
    dist.extras.update(residual=sol.residual, dim=sol.dim, odd_residual=fc.odd_residual)
    return dist


@dataclass(frozen=True)
class CoupledReport:
    F2: float
    F4: float
    periodicity: str
    odd_verified: bool

    def scaled(self, J: float) -> tuple[float, float]:
        """``(F2 / J^2, F4 / J^4)``."""
        return self.F2 / J**2, self.F4 / J**4


def coupled_report(channels: ChannelSet, trunc: FockTruncation, J: float, **kw) -> CoupledReport:
    fc = fourier_coefficients(perturbative_blocks(channels, trunc, J, **kw))
    return CoupledReport(fc[2], fc[4], periodicity_class(fc[2], fc[4]), fc.odd_verified)


__all__ = [
    "TwoModeBlockFamily",
    "FourierCoefficients",
    "PhaseDistribution",
    "perturbative_blocks",
    "fourier_coefficients",
    "phase_distribution",
    "periodicity_class",
    "low_occupation_analytic",
    "oracle_family_sums",
    "oracle_phase_distribution",
    "coupled_report",
]
