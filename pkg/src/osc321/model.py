"""Oscillator model: dissipative channels, Fock truncation, number distributions.

Rates are dimensionless. For the canonical two-photon-gain model every rate is
expressed in units of the gain rate kappa2, so ``ChannelSet.canonical(k1, k3)``
means kappa1/kappa2 = k1 and kappa3/kappa2 = k3.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelError, NegativeRate, NoStabilizingLoss, TruncationUnsafe

GAIN = "gain"
LOSS = "loss"
MIN_NMAX = 10


@dataclass(frozen=True)
class Channel:
    """One Lindblad channel ``rate * D[C]`` with ``C = a**power`` (loss) or
    ``C = (a^dagger)**power`` (gain)."""

    rate: float
    power: int
    direction: str

    def __post_init__(self):
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "power", int(self.power))
        if self.power not in (1, 2, 3):
            raise ChannelError(f"channel power must be 1, 2 or 3, got {self.power}")
        if self.direction not in (GAIN, LOSS):
            raise ChannelError(f"direction must be 'gain' or 'loss', got {self.direction!r}")

    @property
    def shift(self) -> int:
        """Change of photon number produced by one jump."""
        return self.power if self.direction == GAIN else -self.power

    @property
    def label(self) -> str:
        return f"{self.direction}{self.power}"

    def occupation_weight(self, n, n_max: int) -> np.ndarray:
        """``<n|C^dagger C|n>`` for truncated ladder operators.

        Gain out of levels with ``n + power > n_max`` is removed, matching the
        truncated matrix product ``(a^dagger)^p`` restricted to the cutoff.
        """
        n = np.asarray(n, dtype=float)
        if self.direction == LOSS:
            return falling(n, self.power)
        w = falling(n + self.power, self.power)
        return np.where(n + self.power <= n_max, w, 0.0)

    def to_dict(self) -> dict:
        return {"rate": self.rate, "power": self.power, "direction": self.direction}


def falling(n, k: int) -> np.ndarray:
    """Falling factorial ``n (n-1) ... (n-k+1)``, zero whenever ``n < k``."""
    n = np.asarray(n, dtype=float)
    out = np.ones_like(n)
    for j in range(k):
        out = out * (n - j)
    return np.where(n >= k, out, 0.0)


@dataclass(frozen=True)
class ChannelSet:
    channels: tuple[Channel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))

    @classmethod
    def canonical(cls, kappa1: float, kappa3: float, kappa2: float = 1.0) -> "ChannelSet":
        """The one-photon-loss / two-photon-gain / three-photon-loss oscillator."""
        return cls(
            (
                Channel(kappa1, 1, LOSS),
                Channel(kappa2, 2, GAIN),
                Channel(kappa3, 3, LOSS),
            )
        )

    @classmethod
    def from_absolute(cls, kappa1: float, kappa2: float, kappa3: float) -> "ChannelSet":
        """Build the canonical set from absolute rates, rescaled so kappa2 = 1."""
        if not kappa2 > 0:
            raise ChannelError("absolute-rate constructor needs kappa2 > 0")
        return cls.canonical(kappa1 / kappa2, kappa3 / kappa2, 1.0)

    @classmethod
    def thermal(cls, nbar: float, gamma: float = 1.0) -> "ChannelSet":
        """One-photon loss and gain in the ratio (nbar + 1) : nbar."""
        return cls((Channel(gamma * (nbar + 1.0), 1, LOSS), Channel(gamma * nbar, 1, GAIN)))

    @classmethod
    def van_der_pol(cls, gamma1: float, gamma2: float) -> "ChannelSet":
        """Quantum van der Pol: one-photon gain, two-photon loss."""
        return cls((Channel(gamma1, 1, GAIN), Channel(gamma2, 2, LOSS)))

    def rate(self, power: int, direction: str) -> float:
        """Total rate of all channels with the given power and direction."""
        return sum(c.rate for c in self.channels if c.power == power and c.direction == direction)

    @property
    def kappa1(self) -> float:
        return self.rate(1, LOSS)

    @property
    def kappa2(self) -> float:
        return self.rate(2, GAIN)

    @property
    def kappa3(self) -> float:
        return self.rate(3, LOSS)

    @property
    def is_canonical(self) -> bool:
        return all((c.power, c.direction) in {(1, LOSS), (2, GAIN), (3, LOSS)} for c in self.channels)

    @property
    def max_gain_power(self) -> int:
        return max((c.power for c in self.channels if c.direction == GAIN and c.rate > 0), default=0)

    @property
    def max_loss_power(self) -> int:
        return max((c.power for c in self.channels if c.direction == LOSS and c.rate > 0), default=0)

    def total_weight(self, n, n_max: int) -> np.ndarray:
        """``sum_c rate_c <n|C_c^dagger C_c|n>`` on the truncated space."""
        n = np.asarray(n, dtype=float)
        out = np.zeros_like(n)
        for c in self.channels:
            out = out + c.rate * c.occupation_weight(n, n_max)
        return out

    def to_dict(self) -> dict:
        return {"channels": [c.to_dict() for c in self.channels]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelSet":
        try:
            items = data["channels"]
            return cls(tuple(Channel(d["rate"], d["power"], d["direction"]) for d in items))
        except (KeyError, TypeError) as exc:
            raise ChannelError(f"malformed channel set: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ChannelSet":
        return cls.from_dict(json.loads(text))

    def __iter__(self):
        return iter(self.channels)

    def __len__(self):
        return len(self.channels)


def validate_channels(channels: ChannelSet) -> ChannelSet:
    """Return ``channels`` unchanged if they admit a normalisable steady state.

    Gain of power g must be outrun by a loss of higher power. A loss of equal
    power with a strictly larger rate also bounds the occupation (thermal
    bath), so that case is accepted as well.
    """
    for c in channels:
        if not (c.rate >= 0) or math.isinf(c.rate):
            raise NegativeRate(f"rate of channel {c.label} is {c.rate}")
    if not any(c.direction == LOSS and c.rate > 0 for c in channels):
        raise NoStabilizingLoss("no loss channel with positive rate")
    g = channels.max_gain_power
    if g:
        if channels.max_loss_power > g:
            return channels
        gain_rate = channels.rate(g, GAIN)
        if channels.max_loss_power == g and channels.rate(g, LOSS) > gain_rate:
            return channels
        raise NoStabilizingLoss(
            f"gain of power {g} needs a loss of higher power (or a stronger loss of equal power)"
        )
    return channels


@dataclass(frozen=True)
class FockTruncation:
    n_max: int
    tail_tolerance: float = 1e-12

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def check_tail(self, p: np.ndarray) -> float:
        """Raise :class:`TruncationUnsafe` when ``P[n_max]`` exceeds the tolerance."""
        tail = float(p[-1])
        if not tail < self.tail_tolerance:
            raise TruncationUnsafe(
                f"P[n_max={self.n_max}] = {tail:.3e} exceeds tolerance {self.tail_tolerance:.1e}",
                tail_mass=tail,
            )
        return tail


@dataclass(frozen=True)
class NumberDistribution:
    """Photon-number probabilities ``P_n`` for n = 0..n_max."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("distribution must be a non-empty vector")
        if p.min() < -1e-14:
            raise ValueError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"distribution not normalised (sum = {total!r})")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def normalized(cls, weights) -> "NumberDistribution":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum())

    @property
    def n_max(self) -> int:
        return self.p.size - 1

    @property
    def tail_mass(self) -> float:
        return float(self.p[-1])

    def __len__(self):
        return self.p.size

    def __getitem__(self, item):
        return self.p[item]


def suggest_truncation(
    channels: ChannelSet,
    tail_tolerance: float = 1e-12,
    max_n: int = 4000,
) -> FockTruncation:
    """Pick ``n_max`` large enough that the steady state's cutoff weight is negligible.

    The starting guess for the canonical model is
    ``ceil(3 n_plus + 10 sqrt(n_plus)) + 10`` with n_plus the mean-field
    limit-cycle occupation. The guess is then certified by solving for the
    steady state and grown by half until the top three levels all hold less
    than ``tail_tolerance``.
    """
    from .meanfield import mf_fixed_points
    from .generator import build_diagonal_generator
    from .steady import solve_steady_state

    validate_channels(channels)
    n_max = MIN_NMAX
    if channels.max_gain_power == 0:
        return FockTruncation(n_max, tail_tolerance)
    if channels.is_canonical and channels.kappa3 > 0 and channels.kappa2 > 0:
        sol = mf_fixed_points(channels.kappa1, channels.kappa2, channels.kappa3)
        if sol.n_plus is not None and sol.n_plus > 0:
            n_plus = sol.n_plus
            n_max = max(n_max, math.ceil(3 * n_plus + 10 * math.sqrt(n_plus)) + 10)

    while True:
        trunc = FockTruncation(n_max, tail_tolerance)
        block = build_diagonal_generator(channels, trunc)
        p = solve_steady_state(block, check_tail=False).p
        if p[-3:].max() < tail_tolerance:
            return trunc
        if n_max >= max_n:
            raise TruncationUnsafe(
                f"no safe truncation up to n_max={max_n} (tail {p[-1]:.3e})", tail_mass=float(p[-1])
            )
        n_max = min(max_n, math.ceil(1.5 * n_max))
