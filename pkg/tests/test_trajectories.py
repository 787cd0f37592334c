import json
import math

import numpy as np
import pytest
from scipy import stats

from osc321 import (
    GAIN,
    LOSS,
    Channel,
    ChannelSet,
    FockTruncation,
    build_diagonal_generator,
    intermittency_stats,
    run_ensemble,
    run_trajectory,
    solve_steady_state,
    suggest_truncation,
)
from osc321.errors import NotBimodal, StateEscapedTruncation
from osc321.trajectories import apply_jump, norm_decay_rate, norm_squared, rate_table

FP_POINT = ChannelSet.canonical(100.0, 0.1)
SMALL_POINT = ChannelSet.canonical(10**0.5, 0.1)


def test_single_photon_decay_is_exponential():
    cs = ChannelSet((Channel(1.0, 1, LOSS),))
    tr = FockTruncation(10)
    t = np.array([run_trajectory(cs, tr, 1e3, seed=11, run_id=i, initial=1).times[0] for i in range(5000)])
    assert stats.kstest(t, "expon").pvalue > 0.01


def test_superposition_jumps_with_half_probability():
    cs = ChannelSet((Channel(1.0, 1, LOSS),))
    tr = FockTruncation(10)
    psi = np.array([1.0, 1.0]) / math.sqrt(2)
    recs = [run_trajectory(cs, tr, 200.0, seed=3, run_id=i, initial=psi) for i in range(4000)]
    jumped = np.array([r.times.size for r in recs])
    assert set(jumped) <= {0, 1}
    frac = jumped.mean()
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / jumped.size)
    # given that it jumps, the waiting time is still Exp(kappa1)
    t = np.array([r.times[0] for r in recs if r.times.size])
    assert stats.kstest(t, "expon").pvalue > 0.01


def test_determinism():
    tr = suggest_truncation(SMALL_POINT)
    a = run_trajectory(SMALL_POINT, tr, 20.0, seed=5, run_id=2)
    b = run_trajectory(SMALL_POINT, tr, 20.0, seed=5, run_id=2)
    c = run_trajectory(SMALL_POINT, tr, 20.0, seed=5, run_id=3)
    assert a.times.tobytes() == b.times.tobytes()
    assert a.channels.tobytes() == b.channels.tobytes()
    assert a.events != c.events


def test_norm_decay_identity():
    """d||psi||^2/dt = -sum_c rate_c <psi|L_c^dag L_c|psi> between jumps."""
    cs = ChannelSet.canonical(0.7, 0.2)
    rates, _ = rate_table(cs, 20)
    decay = rates.sum(axis=0)
    rng = np.random.default_rng(0)
    psi = np.zeros(21, dtype=complex)
    psi[:7] = rng.normal(size=7) + 1j * rng.normal(size=7)
    psi /= np.linalg.norm(psi)
    h = 1e-6
    for t in (0.0, 0.05, 0.3):
        evolved = psi * np.exp(-0.5 * decay * t)
        expect = sum(c.rate * np.vdot(phi, phi).real for c in cs for phi in [apply_jump(evolved, c.power, c.shift)])
        deriv = (norm_squared(psi, decay, t + h) - norm_squared(psi, decay, t - h)) / (2 * h)
        assert norm_decay_rate(evolved, decay) == pytest.approx(expect, rel=1e-12)
        assert -deriv == pytest.approx(expect, rel=1e-8)


def test_fixed_point_pair_ratio():
    rec = run_trajectory(FP_POINT, FockTruncation(20), 300.0, seed=1)
    counts = rec.jump_counts()
    assert counts[2] < 0.01 * counts[1]
    assert counts[0] / counts[1] == pytest.approx(2.0, rel=0.05)


def test_fixed_step_agrees_with_waiting_time():
    tr = FockTruncation(20)
    w = run_trajectory(FP_POINT, tr, 200.0, seed=2).jump_counts()
    f = run_trajectory(FP_POINT, tr, 200.0, seed=2, method="fixed_step", dt=1e-4).jump_counts()
    for a, b in zip(w[:2], f[:2]):
        assert abs(a - b) < 4 * math.sqrt(a + b)


def test_fixed_step_requires_dt():
    with pytest.raises(ValueError):
        run_trajectory(FP_POINT, FockTruncation(20), 1.0, seed=0, method="fixed_step")


def test_ensemble_matches_steady_state_distribution():
    tr = suggest_truncation(SMALL_POINT)
    p = solve_steady_state(build_diagonal_generator(SMALL_POINT, tr)).p
    n_runs, t_final = 600, 15.0
    final = np.array(
        [run_trajectory(SMALL_POINT, tr, t_final, seed=21, run_id=i).state_at(t_final) for i in range(n_runs)],
        dtype=int,
    )
    observed = np.bincount(final, minlength=p.size).astype(float)
    expected = n_runs * p
    # merge sparse bins from the top until each bin expects at least 5 counts
    obs_b, exp_b, o, e = [], [], 0.0, 0.0
    for oi, ei in zip(observed[::-1], expected[::-1]):
        o, e = o + oi, e + ei
        if e >= 5:
            obs_b.append(o)
            exp_b.append(e)
            o = e = 0.0
    obs_b[-1] += o
    exp_b[-1] += e
    res = stats.chisquare(obs_b, exp_b)
    assert res.pvalue > 0.01


def test_ensemble_runner_outputs(tmp_path):
    tr = FockTruncation(20)
    a = run_ensemble(FP_POINT, tr, 8, 5.0, seed=4, burn_in=1.0, out_dir=tmp_path)
    b = run_ensemble(FP_POINT, tr, 8, 5.0, seed=4, burn_in=1.0, jobs=2)
    assert np.array_equal(a.mean_n, b.mean_n)
    assert np.array_equal(a.jump_counts, b.jump_counts)
    manifest = json.loads((tmp_path / "ensemble_manifest.json").read_text())
    assert manifest["config_hash"] == a.manifest["config_hash"]
    assert manifest["run_ids"] == list(range(8))
    lines = (tmp_path / "ensemble_runs.csv").read_text().splitlines()
    assert lines[0] == "run_id,mean_n,loss1,gain2,loss3" and len(lines) == 9


def test_escape_is_reported_with_partial_record():
    with pytest.raises(StateEscapedTruncation) as ei:
        run_trajectory(ChannelSet.canonical(0.1, 0.01), FockTruncation(30), 50.0, seed=0)
    rec = ei.value.record
    assert rec.times.size > 0 and rec.n_expect.max() >= 27


def test_fixed_point_is_not_bimodal():
    rec = run_trajectory(FP_POINT, FockTruncation(20), 100.0, seed=6)
    with pytest.raises(NotBimodal) as ei:
        intermittency_stats(rec, window=0.5)
    assert ei.value.stats.counts.size == 200


def test_limit_cycle_is_not_bimodal():
    cs = ChannelSet.canonical(1.0, 0.1)
    rec = run_trajectory(cs, suggest_truncation(cs), 60.0, seed=6)
    with pytest.raises(NotBimodal):
        intermittency_stats(rec, window=0.2, t_start=5.0)


def test_bistable_point_switches_on_the_slow_timescale():
    from osc321 import slowest_timescales

    cs = ChannelSet.canonical(10**1.25, 10**-1.75)
    tr = suggest_truncation(cs)
    rec = run_trajectory(cs, tr, 400.0, seed=1)
    st = intermittency_stats(rec, window=0.05, t_start=5.0)
    assert st.bimodal
    assert st.mean_dwell_high > 4 * st.window and st.mean_dwell_low > 4 * st.window
    tau0 = slowest_timescales(cs, tr, k_list=(0,))[0].tau
    assert 0.1 < st.switching_time() / tau0 < 10


def test_vdp_walk_stays_inside_cutoff():
    cs = ChannelSet((Channel(1.0, 1, GAIN), Channel(1.0, 2, LOSS)))
    rec = run_trajectory(cs, FockTruncation(30), 10.0, seed=0)
    assert rec.times.size > 0 and rec.n_expect.max() < 28
