"""Quantum-jump unravelling of the single-oscillator master equation.

Between jumps a state evolves under ``H_eff = -(i/2) sum_c rate_c L_c^dagger L_c``,
which is diagonal in the Fock basis, so the no-jump propagator is an exact
elementwise exponential. Jumps are sampled with the norm-threshold
(waiting-time) rule; a fixed-step Bernoulli scheme is kept as a
cross-check. Random numbers come from Philox counter-based streams keyed by
``(seed, run_id)``, so every trajectory is reproducible on its own and an
ensemble gives identical results however it is scheduled.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import _jumpkernel as kern
from .errors import NotBimodal, StateEscapedTruncation
from .model import ChannelSet, FockTruncation, falling, validate_channels

CHUNK = 1 << 16
GUARD_LEVELS = 3
WAITING_TIME = "waiting_time"
FIXED_STEP = "fixed_step"


def rng_for(seed: int, run_id: int = 0) -> np.random.Generator:
    """Independent Philox stream for trajectory ``run_id`` of ensemble ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(run_id),))
    return np.random.Generator(np.random.Philox(ss))


def rate_table(channels: ChannelSet, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """``rates[c, n] = rate_c <n|L_c^dagger L_c|n>`` and the photon-number shift of each channel."""
    n = np.arange(n_max + 1, dtype=float)
    rates = np.array([c.rate * c.occupation_weight(n, n_max) for c in channels])
    shifts = np.array([c.shift for c in channels], dtype=np.int64)
    return rates, shifts


@dataclass
class JumpRecord:
    """Event list of one trajectory.

    ``times[i]`` is the time of jump i, ``channels[i]`` the index of the
    channel in the :class:`ChannelSet`, and ``n_expect[i]`` the mean photon
    number right after it. For Fock-state trajectories ``n_expect`` is the
    photon number itself and ``<n>(t)`` is piecewise constant.
    """

    seed: int
    run_id: int
    t_final: float
    n_initial: float
    times: np.ndarray
    channels: np.ndarray
    n_expect: np.ndarray
    channel_labels: tuple = ()
    method: str = WAITING_TIME
    fock: bool = True

    @property
    def events(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.channels.tolist()))

    def jump_counts(self, t_start: float = 0.0) -> np.ndarray:
        sel = self.times >= t_start
        return np.bincount(self.channels[sel], minlength=len(self.channel_labels))

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints ``(t, <n>(t))`` of the piecewise-constant mean photon number."""
        t = np.concatenate(([0.0], self.times))
        n = np.concatenate(([self.n_initial], self.n_expect))
        return t, n

    def time_average_n(self, t_start: float = 0.0, t_end: float | None = None) -> float:
        """Time average of ``<n>(t)`` over ``[t_start, t_end]``."""
        t_end = self.t_final if t_end is None else t_end
        t, n = self.samples()
        edges = np.clip(np.concatenate((t, [self.t_final])), t_start, t_end)
        return float(np.dot(np.diff(edges), n) / (t_end - t_start))

    def state_at(self, t: float) -> float:
        t_, n = self.samples()
        return float(n[np.searchsorted(t_, t, side="right") - 1])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "channel"])
            for t, c in zip(self.times.tolist(), self.channels.tolist()):
                w.writerow([repr(t), c])


# ---------------------------------------------------------------------------
# general pure states


def norm_squared(amplitudes: np.ndarray, decay: np.ndarray, t: float) -> float:
    """``||exp(-i H_eff t) psi||^2`` with ``decay[n] = sum_c rate_c <n|L_c^dag L_c|n>``."""
    return float(np.sum(np.abs(amplitudes) ** 2 * np.exp(-decay * t)))


def norm_decay_rate(amplitudes: np.ndarray, decay: np.ndarray) -> float:
    """``-d||psi||^2/dt`` at t = 0, equal to ``sum_c rate_c <psi|L_c^dag L_c|psi>``."""
    return float(np.sum(np.abs(amplitudes) ** 2 * decay))


def apply_jump(amplitudes: np.ndarray, power: int, shift: int) -> np.ndarray:
    """Apply ``a**power`` (shift < 0) or ``(a^dagger)**power`` (shift > 0) in a truncated space."""
    d = amplitudes.size
    n = np.arange(d, dtype=float)
    out = np.zeros_like(amplitudes)
    if shift < 0:
        out[: d - power] = amplitudes[power:] * np.sqrt(falling(n[power:], power))
    else:
        out[power:] = amplitudes[: d - power] * np.sqrt(falling(n[power:], power))
    return out


def _general_trajectory(psi, channels, trunc, t_final, rng, guard, max_events):
    rates, shifts = rate_table(channels, trunc.n_max)
    decay = rates.sum(axis=0)
    n = np.arange(trunc.n_max + 1)
    t = 0.0
    psi = psi / np.linalg.norm(psi)
    times, chans, n_exp = [], [], []
    while len(times) < max_events:
        if np.count_nonzero(psi) == 1:
            break
        u = 1.0 - rng.random()
        # norm decays monotonically from 1 towards the weight of stationary levels
        floor = float(np.sum(np.abs(psi[decay == 0]) ** 2))
        if u <= floor or norm_squared(psi, decay, t_final - t) > u:
            break
        hi = 1.0
        while norm_squared(psi, decay, hi) > u:
            hi *= 2.0
        dt = brentq(lambda s: norm_squared(psi, decay, s) - u, 0.0, hi, xtol=1e-14, rtol=1e-15)
        t += dt
        psi = psi * np.exp(-0.5 * decay * dt)
        weights = (np.abs(psi) ** 2) @ rates.T
        c = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
        c = min(c, len(weights) - 1)
        psi = apply_jump(psi, channels.channels[c].power, int(shifts[c]))
        psi /= np.linalg.norm(psi)
        prob = np.abs(psi) ** 2
        times.append(t)
        chans.append(c)
        n_exp.append(float(prob @ n))
        if prob[guard:].sum() > 1e-6:
            return times, chans, n_exp, psi, True
    return times, chans, n_exp, psi, False


def _fock_walk(n0, t0, channels, trunc, t_final, rng, guard, method, dt, max_events):
    rates, shifts = rate_table(channels, trunc.n_max)
    cap = 1 << 16
    times = np.empty(cap)
    chans = np.empty(cap, dtype=np.int8)
    n_after = np.empty(cap, dtype=np.int64)
    count = 0
    n, t = int(n0), float(t0)
    if method == FIXED_STEP:
        n_steps = int(round(t_final / dt))
        step = int(round(t0 / dt))
    while True:
        if count == times.size:
            if count >= max_events:
                raise RuntimeError(f"trajectory exceeded {max_events} events")
            cap = min(2 * cap, max_events)
            times = np.resize(times, cap)
            chans = np.resize(chans, cap)
            n_after = np.resize(n_after, cap)
        u = rng.random(CHUNK)
        if method == FIXED_STEP:
            n, step, c, _, status = kern.fixed_step_walk(
                n, step, n_steps, dt, rates, shifts, u, guard,
                times[count:], chans[count:], n_after[count:],
            )
        else:
            n, t, c, _, status = kern.waiting_time_walk(
                n, t, t_final, rates, shifts, u, guard,
                times[count:], chans[count:], n_after[count:],
            )
        count += c
        if status in (kern.FINISHED, kern.ESCAPED):
            break
    return times[:count], chans[:count], n_after[:count].astype(float), status == kern.ESCAPED


def run_trajectory(
    channels: ChannelSet,
    trunc: FockTruncation,
    t_final: float,
    seed: int,
    run_id: int = 0,
    initial=0,
    method: str = WAITING_TIME,
    dt: float | None = None,
    max_events: int = 50_000_000,
) -> JumpRecord:
    """Simulate one quantum-jump trajectory.

    Parameters
    ----------
    channels, trunc
        Model and Fock cutoff. Reaching the top ``3`` levels aborts the run.
    t_final
        Length of the trajectory in units of the channel rates.
    seed, run_id
        Key of the random stream; equal keys give bit-identical records.
    initial
        Integer Fock state (default vacuum) or an amplitude vector.
    method
        ``"waiting_time"`` draws exact jump times from the norm decay;
        ``"fixed_step"`` performs a Bernoulli trial every ``dt``.

    Raises
    ------
    StateEscapedTruncation
        The state came within three levels of ``n_max``. The partial record
        is attached as ``exc.record``.
    """
    validate_channels(channels)
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    if method not in (WAITING_TIME, FIXED_STEP):
        raise ValueError(f"unknown method {method!r}")
    if method == FIXED_STEP:
        if dt is None or not dt > 0:
            raise ValueError("fixed_step needs a positive dt")
        if not isinstance(initial, (int, np.integer)):
            raise ValueError("fixed_step supports Fock initial states only")
    rng = rng_for(seed, run_id)
    guard = trunc.n_max + 1 - GUARD_LEVELS
    labels = tuple(c.label for c in channels)

    times, chans, n_exp = [], [], []
    fock = True
    if isinstance(initial, (int, np.integer)):
        n_start = int(initial)
        if not 0 <= n_start < guard:
            raise ValueError(f"initial Fock state {n_start} outside the safe range 0..{guard - 1}")
        n_initial = float(n_start)
        t_now = 0.0
        escaped = False
    else:
        psi = np.zeros(trunc.n_max + 1, dtype=complex)
        amp = np.asarray(initial, dtype=complex)
        psi[: amp.size] = amp
        prob = np.abs(psi) ** 2 / np.sum(np.abs(psi) ** 2)
        n_initial = float(prob @ np.arange(psi.size))
        times, chans, n_exp, psi, escaped = _general_trajectory(
            psi, channels, trunc, t_final, rng, guard, max_events
        )
        t_now = times[-1] if times else 0.0
        nz = np.flatnonzero(psi)
        fock = nz.size == 1
        if not escaped and fock and t_now < t_final:
            n_start = int(nz[0])
        else:
            t_now = t_final
    if t_now < t_final and not escaped:
        ft, fc, fn, escaped = _fock_walk(
            n_start, t_now, channels, trunc, t_final, rng, guard, method, dt, max_events
        )
        times = np.concatenate((np.asarray(times, dtype=float), ft))
        chans = np.concatenate((np.asarray(chans, dtype=np.int8), fc))
        n_exp = np.concatenate((np.asarray(n_exp, dtype=float), fn))
    record = JumpRecord(
        seed=int(seed),
        run_id=int(run_id),
        t_final=float(t_final),
        n_initial=n_initial,
        times=np.asarray(times, dtype=float),
        channels=np.asarray(chans, dtype=np.int8),
        n_expect=np.asarray(n_exp, dtype=float),
        channel_labels=labels,
        method=method,
        fock=fock,
    )
    if escaped:
        exc = StateEscapedTruncation(
            f"trajectory reached the top {GUARD_LEVELS} levels below n_max={trunc.n_max}"
        )
        exc.record = record
        raise exc
    return record


# ---------------------------------------------------------------------------
# ensembles


def config_hash(config: dict) -> str:
    """Git-style blob hash of the canonical JSON encoding of ``config``."""
    body = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class EnsembleResult:
    seed: int
    t_final: float
    burn_in: float
    mean_n: np.ndarray  # per-trajectory time average after burn-in
    jump_counts: np.ndarray  # (runs, channels), counted after burn-in
    manifest: dict = field(default_factory=dict)

    @property
    def ensemble_mean(self) -> float:
        return float(self.mean_n.mean())

    @property
    def standard_error(self) -> float:
        return float(self.mean_n.std(ddof=1) / math.sqrt(self.mean_n.size))


def _ensemble_member(args):
    channels, trunc, t_final, seed, run_id, burn_in = args
    rec = run_trajectory(channels, trunc, t_final, seed, run_id)
    return rec.time_average_n(burn_in), rec.jump_counts(burn_in)


def run_ensemble(
    channels: ChannelSet,
    trunc: FockTruncation,
    n_runs: int,
    t_final: float,
    seed: int,
    burn_in: float = 0.0,
    jobs: int = 1,
    out_dir=None,
) -> EnsembleResult:
    """Independent vacuum-start trajectories ``run_id = 0..n_runs-1``.

    Results do not depend on ``jobs``. With ``out_dir`` a manifest JSON
    (parameters, seeds, config hash) is written next to the per-run results.
    """
    if not 0 <= burn_in < t_final:
        raise ValueError("burn_in must lie in [0, t_final)")
    tasks = [(channels, trunc, t_final, seed, r, burn_in) for r in range(n_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_ensemble_member, tasks, chunksize=max(1, n_runs // (4 * jobs))))
    else:
        results = [_ensemble_member(t) for t in tasks]
    mean_n = np.array([r[0] for r in results])
    counts = np.array([r[1] for r in results])
    config = {
        "channels": channels.to_dict(),
        "n_max": trunc.n_max,
        "t_final": t_final,
        "burn_in": burn_in,
        "n_runs": n_runs,
        "seed": seed,
    }
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "run_ids": list(range(n_runs)),
        "rng": "Philox keyed by SeedSequence(seed, spawn_key=(run_id,))",
    }
    result = EnsembleResult(seed, t_final, burn_in, mean_n, counts, manifest)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ensemble_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        with open(out / "ensemble_runs.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run_id", "mean_n", *[c.label for c in channels]])
            for r, (m, cnt) in enumerate(zip(mean_n, counts)):
                w.writerow([r, repr(float(m)), *cnt.tolist()])
    return result


# ---------------------------------------------------------------------------
# intermittency


@dataclass
class IntermittencyStats:
    window: float
    times: np.ndarray  # window start times
    counts: np.ndarray  # jumps per window
    bimodal: bool
    threshold: float | None = None
    low_level: float | None = None
    high_level: float | None = None
    dwell_times_high: list = field(default_factory=list)
    dwell_times_low: list = field(default_factory=list)

    @property
    def activity_series(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.counts.tolist()))

    @property
    def mean_dwell_high(self) -> float:
        return float(np.mean(self.dwell_times_high)) if self.dwell_times_high else math.nan

    @property
    def mean_dwell_low(self) -> float:
        return float(np.mean(self.dwell_times_low)) if self.dwell_times_low else math.nan

    def switching_time(self) -> float:
        """Relaxation time of a two-state telegraph process with the observed dwell means."""
        h, lo = self.mean_dwell_high, self.mean_dwell_low
        return h * lo / (h + lo)


def _otsu(x: np.ndarray) -> float:
    """Threshold maximising the between-class variance of the values ``x``."""
    v = np.unique(x)
    if v.size < 2:
        return math.nan
    cuts = 0.5 * (v[1:] + v[:-1])
    best, best_cut = -1.0, math.nan
    xs = np.sort(x)
    csum = np.cumsum(xs)
    total = csum[-1]
    for cut in cuts:
        k = np.searchsorted(xs, cut)
        w0, w1 = k / xs.size, 1 - k / xs.size
        m0 = csum[k - 1] / k
        m1 = (total - csum[k - 1]) / (xs.size - k)
        var = w0 * w1 * (m0 - m1) ** 2
        if var > best:
            best, best_cut = var, cut
    return best_cut


def _runs(high: np.ndarray):
    change = np.flatnonzero(np.diff(high.astype(np.int8))) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [high.size]))
    return [(bool(high[s]), int(e - s)) for s, e in zip(starts, ends)]


def intermittency_stats(
    record: JumpRecord,
    window: float,
    t_start: float = 0.0,
    min_class_fraction: float = 0.05,
    separation: float = 6.0,
    contrast: float = 0.2,
    raise_unimodal: bool = True,
) -> IntermittencyStats:
    """Segment a jump record into high- and low-activity periods.

    Jumps are counted in windows of length ``window``. The counts are split
    in two classes by Otsu's method on ``log(1 + count)``. The histogram is
    called bimodal when each class holds at least ``min_class_fraction`` of
    the windows, the class medians differ by more than ``separation``
    Poisson standard deviations of the upper one, and the lower median is at
    most ``contrast`` times the upper one. The last condition separates a
    quiet/active alternation from a single broad activity level. Windows are then labelled
    against the midpoint of the two medians and consecutive equal labels form
    dwell periods.

    Raises :class:`NotBimodal` (with the unsegmented stats as ``exc.stats``)
    unless ``raise_unimodal`` is False.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    n_win = int((record.t_final - t_start) / window)
    if n_win < 100:
        raise ValueError(f"record spans only {n_win} windows; need at least 100")
    edges = t_start + window * np.arange(n_win + 1)
    counts, _ = np.histogram(record.times, bins=edges)
    stats = IntermittencyStats(window, edges[:-1], counts, bimodal=False)

    y = np.log1p(counts)
    cut = _otsu(y)
    ok = False
    if math.isfinite(cut):
        low, high = counts[y < cut], counts[y >= cut]
        frac = min(low.size, high.size) / counts.size
        lo_c, hi_c = float(np.median(low)), float(np.median(high))
        ok = (
            frac >= min_class_fraction
            and hi_c - lo_c > separation * math.sqrt(hi_c + 1.0)
            and lo_c <= contrast * hi_c
        )
    if not ok:
        if raise_unimodal:
            exc = NotBimodal("windowed jump counts are not bimodal")
            exc.stats = stats
            raise exc
        return stats

    threshold = 0.5 * (lo_c + hi_c)
    labels = counts > threshold
    stats.bimodal = True
    stats.threshold = threshold
    stats.low_level, stats.high_level = lo_c, hi_c
    for is_high, length in _runs(labels):
        (stats.dwell_times_high if is_high else stats.dwell_times_low).append(length * window)
    return stats
