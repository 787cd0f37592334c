"""Semiclassical (mean-field) analysis of the single and coupled oscillators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidRates


@dataclass(frozen=True)
class MeanFieldSolution:
    """Fixed points ``n = |alpha|^2`` of the radial mean-field flow."""

    n0: float
    n_plus: float | None
    n_minus: float | None
    stable_n0: bool
    stable_n_plus: bool
    stable_n_minus: bool
    bistable: bool

    @property
    def n_plus_physical(self) -> bool:
        return self.n_plus is not None and self.n_plus >= 0


def _radial_poly(n, k1, k2, k3):
    # rdot / r as a function of n = r^2
    return -1.5 * k3 * n**2 + k2 * n + (2 * k2 - 0.5 * k1)


def radial_slope(n: float, k1: float, k2: float, k3: float) -> float:
    """``d(rdot)/dr`` at a nonzero fixed point ``r = sqrt(n)``."""
    return n * (2 * k2 - 6 * k3 * n)


def mf_fixed_points(kappa1: float, kappa2: float, kappa3: float) -> MeanFieldSolution:
    """Fixed points and their stability for the radial flow :func:`mf_flow`.

    Parameters
    ----------
    kappa1, kappa2, kappa3
        One-photon loss, two-photon gain and three-photon loss rates.

    Returns
    -------
    MeanFieldSolution
        ``n_plus``/``n_minus`` are ``None`` when complex. ``bistable`` holds
        when the vacuum and the ``n_plus`` branch are both stable, i.e.
        ``0 < (3 k3/k2)(k1/k2 - 4) < 1``.
    """
    k1, k2, k3 = (float(v) for v in (kappa1, kappa2, kappa3))
    if not (k2 > 0 and k3 > 0 and k1 >= 0) or not all(map(math.isfinite, (k1, k2, k3))):
        raise InvalidRates(f"need kappa1 >= 0, kappa2 > 0, kappa3 > 0 (got {k1}, {k2}, {k3})")
    x = (3 * k3 / k2) * (k1 / k2 - 4)
    upper = bistable_window(k3, k2)[1]
    # decide the upper edge on kappa1/kappa2 itself so it matches bistable_window bit for bit
    below_upper = k1 / k2 < upper
    disc = max(1 - x, 0.0) if below_upper else 1 - x
    stable_n0 = k1 / k2 > 4
    if disc < 0 or (disc == 0 and not below_upper):
        n_plus = n_minus = None
    else:
        root = math.sqrt(disc)
        n_plus = (k2 / (3 * k3)) * (1 + root)
        n_minus = (k2 / (3 * k3)) * (1 - root)
    stable_plus = n_plus is not None and below_upper
    stable_minus = (
        n_minus is not None and n_minus > 0 and radial_slope(n_minus, k1, k2, k3) < 0
    )
    return MeanFieldSolution(
        n0=0.0,
        n_plus=n_plus,
        n_minus=n_minus,
        stable_n0=stable_n0,
        stable_n_plus=bool(stable_plus),
        stable_n_minus=bool(stable_minus),
        bistable=bool(stable_n0 and stable_plus),
    )


def bistable_window(kappa3: float, kappa2: float = 1.0) -> tuple[float, float]:
    """Open interval of ``kappa1/kappa2`` with mean-field bistability."""
    return 4.0, 4.0 + kappa2 / (3.0 * kappa3)


def mf_flow(r, kappa1: float, kappa2: float, kappa3: float):
    """Radial velocity ``rdot`` of the single-oscillator amplitude ``r = |alpha|``."""
    r = np.asarray(r, dtype=float)
    return _radial_poly(r * r, kappa1, kappa2, kappa3) * r


# ---------------------------------------------------------------------------
# coupled oscillators


def coupled_mf_rhs(alpha: complex, beta: complex, kappa1, kappa2, kappa3, J):
    """Time derivatives of the two coherent amplitudes under photon exchange ``J``."""

    def single(z):
        n = abs(z) ** 2
        return (-0.5 * kappa1 + kappa2 * (2 + n) - 1.5 * kappa3 * n * n) * z

    return single(alpha) - 1j * J * beta, single(beta) - 1j * J * alpha


def integrate_coupled_mf(
    alpha0: complex,
    beta0: complex,
    kappa1: float,
    kappa2: float,
    kappa3: float,
    J: float,
    t_final: float,
    n_samples: int = 201,
    rtol: float = 1e-9,
    atol: float = 1e-12,
):
    """Integrate :func:`coupled_mf_rhs` with an adaptive 8th-order Runge-Kutta scheme.

    Returns
    -------
    t : ndarray
    alpha, beta : complex ndarrays sampled at ``t``
    """

    def rhs(_t, y):
        a = y[0] + 1j * y[1]
        b = y[2] + 1j * y[3]
        da, db = coupled_mf_rhs(a, b, kappa1, kappa2, kappa3, J)
        return [da.real, da.imag, db.real, db.imag]

    t_eval = np.linspace(0.0, t_final, n_samples)
    y0 = [alpha0.real, alpha0.imag, beta0.real, beta0.imag]
    sol = solve_ivp(rhs, (0.0, t_final), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.t, sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def relative_phase(alpha, beta):
    """``arg(alpha) - arg(beta)`` wrapped to ``(-pi, pi]``."""
    return np.angle(np.asarray(alpha) * np.conj(beta))


def sum_difference_rhs(r: float, R: float, phi: float, kappa1, kappa2, kappa3, J):
    """``(phidot, rdot)`` in the amplitude difference ``r``, sum ``R`` and phase ``phi``.

    Exact for the mean-field equations with ``|alpha| = (R + r)/2`` and
    ``|beta| = (R - r)/2``.
    """
    phidot = 4 * J * r * R / (R * R - r * r) * math.cos(phi)
    rdot = (
        r * (2 * kappa2 - 0.5 * kappa1)
        + 0.25 * kappa2 * r * (3 * R * R + r * r)
        - (3 * kappa3 / 32) * r * (5 * R**4 + 10 * R * R * r * r + r**4)
        - J * R * math.sin(phi)
    )
    return phidot, rdot


@dataclass(frozen=True)
class PseudoPotential:
    """``U(phi) = -amplitude * cos(2 phi)`` governing slow relative-phase motion."""

    J: float
    kappa3: float
    R: float
    amplitude: float

    def __call__(self, phi):
        return -self.amplitude * np.cos(2 * np.asarray(phi, dtype=float))

    def force(self, phi):
        """Reduced flow ``phidot = -dU/dphi``."""
        return -2 * self.amplitude * np.sin(2 * np.asarray(phi, dtype=float))

    def sample(self, resolution: int = 360) -> tuple[np.ndarray, np.ndarray]:
        phi = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
        return phi, self(phi)

    def valid(self, kappa2: float = 1.0, r: float = 0.0) -> bool:
        """Weak coupling and small amplitude difference, the regime of the reduction."""
        return self.J / kappa2 < 0.1 and abs(r) < 0.05 * self.R


def pseudo_potential(J: float, kappa3: float, R: float) -> PseudoPotential:
    """Relative-phase potential with amplitude ``16 J^2 / (15 kappa3 R^4)``.

    The reduced flow is ``phidot = -dU/dphi = -(2 J^2 / Gamma) sin 2phi``
    where ``Gamma`` is the relaxation rate of ``r``. With the large-``R``
    estimate ``Gamma = 15 kappa3 R^4 / 32`` this gives twice the amplitude
    above; with the exact linear rate of :func:`sum_difference_rhs` at the
    limit cycle, ``Gamma ~ 3 kappa3 R^4 / 16``, it gives five times. The
    shape and the minima at 0 and pi are the same in all three cases.
    """
    if J < 0 or not kappa3 > 0 or not R > 0:
        raise InvalidRates("need J >= 0, kappa3 > 0, R > 0")
    amp = 16.0 * J * J / (15.0 * kappa3 * R**4)
    return PseudoPotential(float(J), float(kappa3), float(R), amp)
