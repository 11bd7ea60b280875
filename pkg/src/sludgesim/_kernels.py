"""jit-compiled inner loops.

All drivers draw variates from the numpy Generator passed in, strictly in the
order (uniform for the regime switch, normal for X, normal for S) -- three
variates per step on every branch, so coupled runs stay aligned and a Python
re-implementation drawing in the same order reproduces the kernels bitwise.

Biomass is carried as ln X (exactly positive; x == 0 is the absorbed state,
flagged by ``alive``). Substrate is integrated in levels and projected onto
``[floor, inf)``; the number of projections is counted and reported.
"""

import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)

# log of the largest double: ln X above this overflows exp() to inf, which
# counts as a non-finite biomass coordinate even though ln X itself is finite.
LN_MAX = 709.782712893384


@njit(**_OPTS)
def pick_regime(i, u, rates, dt):
    """Next regime after one step: j != i with probability rates[j]*dt."""
    acc = 0.0
    for j in range(rates.shape[0]):
        if j != i:
            acc += rates[j] * dt
            if u < acc:
                return j
    return i


@njit(**_OPTS)
def sx_step(s, lnx, alive, i, dt, sqdt, z_x, z_s,
            S0, inv_theta, washout, K_S, k_m, k_d, Y, s1, s2, floor):
    """One Euler step of (S, ln X) in regime i; returns (s, lnx, floored)."""
    x = math.exp(lnx) if alive else 0.0
    uptake = k_m[i] * s / (K_S + s)
    if alive:
        lnx = lnx + (uptake * Y[i] - k_d[i] - washout
                     - 0.5 * s2[i] * s2[i]) * dt + s2[i] * sqdt * z_x
    s_new = s + ((S0 - s) * inv_theta - uptake * x) * dt + s1[i] * s * sqdt * z_s
    floored = s_new < floor
    if floored:
        s_new = floor
    return s_new, lnx, floored


@njit(**_OPTS)
def drive_path(gen, n_steps, g0, dt, s, lnx, alive, i,
               S0, inv_theta, washout, K_S, k_m, k_d, Y, s1, s2,
               q_off, floor, stride, out_s, out_x, out_reg):
    """Advance ``n_steps`` of the full (or boundary, when not alive) system.

    Records the post-step state at every global index divisible by ``stride``
    (global index of step k is g0 + k + 1). Returns
    (s, lnx, i, n_floored, bad_step); bad_step >= 0 flags a non-finite state.
    """
    sqdt = math.sqrt(dt)
    n_floored = 0
    for k in range(n_steps):
        u = gen.random()
        z_x = gen.standard_normal()
        z_s = gen.standard_normal()
        i = pick_regime(i, u, q_off[i], dt)
        s, lnx, fl = sx_step(s, lnx, alive, i, dt, sqdt, z_x, z_s,
                             S0, inv_theta, washout, K_S,
                             k_m, k_d, Y, s1, s2, floor)
        if fl:
            n_floored += 1
        if not (math.isfinite(s) and (not alive or (math.isfinite(lnx) and lnx <= LN_MAX))):
            return s, lnx, i, n_floored, g0 + k + 1
        g = g0 + k + 1
        if g % stride == 0:
            r = g // stride
            out_s[r] = s
            out_x[r] = math.exp(lnx) if alive else 0.0
            out_reg[r] = i
    return s, lnx, i, n_floored, -1


@njit(**_OPTS)
def drive_coupled(gen, n_steps, g0, dt, s, lnx, alive, s_hat, i,
                  S0, inv_theta, washout, K_S, k_m, k_d, Y, s1, s2,
                  q_off, floor, stride,
                  out_s, out_x, out_reg, out_shat):
    """Full system and boundary system on shared draws and regime path."""
    sqdt = math.sqrt(dt)
    n_floored = 0
    for k in range(n_steps):
        u = gen.random()
        z_x = gen.standard_normal()
        z_s = gen.standard_normal()
        i = pick_regime(i, u, q_off[i], dt)
        s, lnx, fl = sx_step(s, lnx, alive, i, dt, sqdt, z_x, z_s,
                             S0, inv_theta, washout, K_S,
                             k_m, k_d, Y, s1, s2, floor)
        s_hat, _, fl2 = sx_step(s_hat, 0.0, False, i, dt, sqdt, z_x, z_s,
                                S0, inv_theta, washout, K_S,
                                k_m, k_d, Y, s1, s2, floor)
        if fl or fl2:
            n_floored += 1
        if not (math.isfinite(s) and math.isfinite(s_hat)
                and (not alive or (math.isfinite(lnx) and lnx <= LN_MAX))):
            return s, lnx, s_hat, i, n_floored, g0 + k + 1
        g = g0 + k + 1
        if g % stride == 0:
            r = g // stride
            out_s[r] = s
            out_x[r] = math.exp(lnx) if alive else 0.0
            out_reg[r] = i
            out_shat[r] = s_hat
    return s, lnx, s_hat, i, n_floored, -1


@njit(**_OPTS)
def drive_lambda_batches(gen, n_burn, n_avg, dt, s, i,
                         S0, inv_theta, washout, K_S, k_m, k_d, Y, s1, s2,
                         q_off, floor, kmY, growth_const,
                         g_sums, s_sums, counts):
    """Boundary-process ergodic accumulation for the persistence threshold.

    Burns in ``n_burn`` steps, then accumulates the growth-rate integrand
    kmY[i]*s/(K_S+s) + growth_const[i] and the substrate level over ``n_avg``
    steps into len(g_sums) contiguous batches. Returns (s, i, n_floored,
    bad_step).
    """
    sqdt = math.sqrt(dt)
    n_batches = g_sums.shape[0]
    n_floored = 0
    lnx = 0.0
    for k in range(n_burn + n_avg):
        u = gen.random()
        z_x = gen.standard_normal()
        z_s = gen.standard_normal()
        i = pick_regime(i, u, q_off[i], dt)
        s, lnx, fl = sx_step(s, lnx, False, i, dt, sqdt, z_x, z_s,
                             S0, inv_theta, washout, K_S,
                             k_m, k_d, Y, s1, s2, floor)
        if fl:
            n_floored += 1
        if not math.isfinite(s):
            return s, i, n_floored, k + 1
        if k >= n_burn:
            b = (k - n_burn) * n_batches // n_avg
            g_sums[b] += kmY[i] * s / (K_S + s) + growth_const[i]
            s_sums[b] += s
            counts[b] += 1
    return s, i, n_floored, -1


@njit(**_OPTS)
def drive_stats_batches(gen, n_burn, n_avg, dt, s, lnx, alive, i,
                        S0, inv_theta, washout, K_S, k_m, k_d, Y, s1, s2,
                        q_off, floor, y_hat, one_plus_p,
                        s_sums, x_sums, m_sums, occ, counts):
    """Full-system long-run accumulation of S, X, (y_hat*S+X)^(1+p), occupancy."""
    sqdt = math.sqrt(dt)
    n_batches = s_sums.shape[0]
    n_floored = 0
    for k in range(n_burn + n_avg):
        u = gen.random()
        z_x = gen.standard_normal()
        z_s = gen.standard_normal()
        i = pick_regime(i, u, q_off[i], dt)
        s, lnx, fl = sx_step(s, lnx, alive, i, dt, sqdt, z_x, z_s,
                             S0, inv_theta, washout, K_S,
                             k_m, k_d, Y, s1, s2, floor)
        if fl:
            n_floored += 1
        if not (math.isfinite(s) and (not alive or (math.isfinite(lnx) and lnx <= LN_MAX))):
            return s, lnx, i, n_floored, k + 1
        if k >= n_burn:
            b = (k - n_burn) * n_batches // n_avg
            x = math.exp(lnx) if alive else 0.0
            s_sums[b] += s
            x_sums[b] += x
            m_sums[b] += (y_hat * s + x) ** one_plus_p
            occ[i] += 1
            counts[b] += 1
    return s, lnx, i, n_floored, -1
