"""Slow relaxation rates of the generator blocks and derived timescales."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import EigNotConverged
from .generator import DENSE_LIMIT, GeneratorBlock, build_offdiagonal_generator
from .model import ChannelSet, FockTruncation, suggest_truncation

DEFAULT_N_EIGS = 6
GAP_TOLERANCE = 1e-12


def _rank(w: np.ndarray) -> np.ndarray:
    """Sort by descending real part, ties broken by ascending imaginary part."""
    order = np.lexsort((w.imag, -w.real))
    return w[order]


def leading_eigenvalues(block: GeneratorBlock, n_eigs: int = DEFAULT_N_EIGS) -> np.ndarray:
    """The ``n_eigs`` eigenvalues of ``block`` with the largest real parts.

    Blocks smaller than ``DENSE_LIMIT`` are diagonalised densely. Larger ones
    use ARPACK in shift-invert mode about a small positive shift, asking for a
    few spare modes so that the ranking by real part is not distorted by
    eigenvalues that are close to the shift only through their imaginary part.
    """
    n = block.dim
    if n < DENSE_LIMIT or n <= n_eigs + 8:
        w = sla.eigvals(block.dense())
        return _rank(w)[:n_eigs]
    scale = abs(block.matrix).max()
    sigma = 1e-8 * scale
    nev = min(n - 2, 2 * n_eigs + 4)
    try:
        # fixed start vector: ARPACK otherwise seeds itself randomly
        w = spla.eigs(
            block.matrix.tocsc(),
            k=nev,
            sigma=sigma,
            which="LM",
            return_eigenvectors=False,
            tol=1e-13,
            v0=np.full(n, 1.0 / math.sqrt(n)),
        )
    except (spla.ArpackNoConvergence, spla.ArpackError, RuntimeError) as exc:
        raise EigNotConverged(f"shift-invert eigensolve failed for k={block.k}: {exc}") from exc
    return _rank(np.asarray(w))[:n_eigs]


def _drop_stationary(w: np.ndarray, scale: float) -> np.ndarray:
    i = int(np.argmin(np.abs(w)))
    if abs(w[i]) > 1e-8 * max(scale, 1.0):
        raise EigNotConverged(f"no zero eigenvalue in the k=0 block (closest {w[i]:.3e})")
    return np.delete(w, i)


@dataclass(frozen=True)
class SpectralReport:
    """Slow eigenvalues of ``M^(k)``; for k = 0 the stationary zero is excluded."""

    k: int
    leading_eigs: np.ndarray
    tau: float


def _report(channels: ChannelSet, trunc: FockTruncation, k: int, n_eigs: int) -> SpectralReport:
    block = build_offdiagonal_generator(channels, trunc, k)
    w = leading_eigenvalues(block, n_eigs + (1 if k == 0 else 0))
    if k == 0:
        w = _drop_stationary(w, abs(block.matrix).max())
    if w.size == 0:
        raise EigNotConverged(f"block k={k} has no eigenvalue to report")
    lead = w[0].real
    tau = -1.0 / float(lead) if lead < 0 else math.inf
    return SpectralReport(k=k, leading_eigs=w, tau=tau)


def slowest_timescales(
    channels: ChannelSet,
    trunc: FockTruncation | None = None,
    k_list=(0, 1, 2),
    n_eigs: int = DEFAULT_N_EIGS,
) -> list[SpectralReport]:
    """``tau_k = -1 / Re(lambda_0^(k))`` for each requested coherence order k.

    Times are in the units of the channel rates (1/kappa2 for the canonical
    model).
    """
    if trunc is None:
        trunc = suggest_truncation(channels)
    return [_report(channels, trunc, int(k), n_eigs) for k in k_list]


@dataclass(frozen=True)
class MetastabilityReport:
    """``ratio = Re(lambda2 - lambda1) / Re(lambda1 - lambda0)`` of the k = 0 block.

    ``lambda0`` is the stationary eigenvalue (zero) and ``lambda1``,
    ``lambda2`` the two slowest decaying modes. A large ratio means the first
    decaying mode is well separated from the rest of the spectrum.
    """

    ratio: float
    lambda0: float
    lambda1: float
    lambda2: float
    degenerate_gap: bool = field(default=False)


def metastability_ratio(
    channels: ChannelSet, trunc: FockTruncation | None = None
) -> MetastabilityReport:
    if trunc is None:
        trunc = suggest_truncation(channels)
    block = build_offdiagonal_generator(channels, trunc, 0)
    if block.dim < 4:
        raise EigNotConverged("need at least four eigenvalues for the ratio")
    w = leading_eigenvalues(block, DEFAULT_N_EIGS)
    rest = _drop_stationary(w, abs(block.matrix).max())
    l0, l1, l2 = 0.0, float(rest[0].real), float(rest[1].real)
    gap = l0 - l1
    if gap < GAP_TOLERANCE:
        return MetastabilityReport(math.inf, l0, l1, l2, degenerate_gap=True)
    return MetastabilityReport((l1 - l2) / gap, l0, l1, l2)


@dataclass(frozen=True)
class PhaseDiffusion:
    """Numerical phase-diffusion rate ``1/tau_1`` next to the large-amplitude estimate."""

    numerical: float
    analytic: float
    extrapolated: bool

    @property
    def ratio(self) -> float:
        return self.numerical / self.analytic


def phase_diffusion_constant(
    channels: ChannelSet, trunc: FockTruncation | None = None
) -> PhaseDiffusion:
    """Compare ``1/tau_1`` with ``5 kappa2 / 4``.

    The closed form holds when the oscillator is deep in its limit cycle,
    ``kappa1/kappa2 < 0.1`` and ``kappa3/kappa2 < 0.1``; outside that regime
    the comparison is flagged as extrapolated. For channel sets without
    two-photon gain the analytic value is NaN.
    """
    (rep,) = slowest_timescales(channels, trunc, k_list=(1,))
    k2 = channels.kappa2
    analytic = 1.25 * k2 if k2 > 0 else math.nan
    strong_gain = channels.is_canonical and k2 > 0 and channels.kappa1 / k2 < 0.1 and channels.kappa3 / k2 < 0.1
    return PhaseDiffusion(1.0 / rep.tau, analytic, extrapolated=not strong_gain)
