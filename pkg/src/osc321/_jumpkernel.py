"""Compiled inner loops for Fock-state quantum-jump trajectories.

A trajectory that starts in a Fock state stays in one: the no-jump evolution
is diagonal in the number basis and every jump operator maps ``|n>`` to a
multiple of ``|n +/- power>``. The waiting time until the next jump is then
exponential with rate ``sum_c rates[c, n]``, which these kernels sample
directly from a buffer of uniforms supplied by the caller.

Status codes: 0 uniforms exhausted, 1 reached t_final, 2 entered the guard
band below the cutoff, 3 event buffer full.
"""

import numba
import numpy as np

UNIFORMS_EXHAUSTED = 0
FINISHED = 1
ESCAPED = 2
BUFFER_FULL = 3


@numba.njit(cache=True)
def waiting_time_walk(n, t, t_final, rates, shifts, u, guard, times, chans, n_after):
    n_channels = rates.shape[0]
    count = 0
    i = 0
    while i + 1 < u.shape[0]:
        total = 0.0
        for c in range(n_channels):
            total += rates[c, n]
        if total <= 0.0:
            return n, t_final, count, i, FINISHED
        dt = -np.log(1.0 - u[i]) / total
        i += 1
        if t + dt > t_final:
            return n, t_final, count, i, FINISHED
        if count >= times.shape[0]:
            return n, t, count, i - 1, BUFFER_FULL
        t += dt
        r = u[i] * total
        i += 1
        chosen = n_channels - 1
        acc = 0.0
        for c in range(n_channels):
            acc += rates[c, n]
            if r < acc:
                chosen = c
                break
        n += shifts[chosen]
        times[count] = t
        chans[count] = chosen
        n_after[count] = n
        count += 1
        if n >= guard:
            return n, t, count, i, ESCAPED
    return n, t, count, i, UNIFORMS_EXHAUSTED


@numba.njit(cache=True)
def fixed_step_walk(n, step, n_steps, dt, rates, shifts, u, guard, times, chans, n_after):
    """Bernoulli sampling on a uniform time grid: at most one jump per step."""
    n_channels = rates.shape[0]
    count = 0
    i = 0
    while step < n_steps and i + 1 < u.shape[0]:
        total = 0.0
        for c in range(n_channels):
            total += rates[c, n]
        x = u[i]
        i += 1
        step += 1
        if x < total * dt:
            if count >= times.shape[0]:
                return n, step - 1, count, i - 1, BUFFER_FULL
            r = u[i] * total
            i += 1
            chosen = n_channels - 1
            acc = 0.0
            for c in range(n_channels):
                acc += rates[c, n]
                if r < acc:
                    chosen = c
                    break
            n += shifts[chosen]
            times[count] = step * dt
            chans[count] = chosen
            n_after[count] = n
            count += 1
            if n >= guard:
                return n, step, count, i, ESCAPED
    if step >= n_steps:
        return n, step, count, i, FINISHED
    return n, step, count, i, UNIFORMS_EXHAUSTED
