"""Compiled inner loops shared by the field, enumeration and sampling code.

Observables are passed to the chains as ``(code, idx, pattern)`` triples:
code 0 = spin at idx[0], 1 = product over idx, 2 = indicator that
spins[idx] == pattern, 3 = mean spin over the whole free set.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OBS_SPIN = 0
OBS_PRODUCT = 1
OBS_PATTERN = 2
OBS_MAGNETIZATION = 3


@njit(cache=True)
def truncated_fields(ctx, ctx_offset, positions, table, cutoff):
    """Frozen-spin field at each free position, summed pairwise outward.

    ``ctx[j - ctx_offset]`` is the frozen spin at lattice site j (0 when the
    site is free or carries no spin).  Each distance d contributes
    ``table[d] * (left + right)`` so mirror-image spins of opposite sign
    cancel to an exact zero.
    """
    out = np.empty(positions.size)
    for a in range(positions.size):
        x = positions[a] - ctx_offset
        acc = 0.0
        for d in range(1, cutoff + 1):
            acc += table[d] * (ctx[x - d] + ctx[x + d])
        out[a] = acc
    return out


@njit(cache=True)
def pair_energy(positions, spins, table):
    e = 0.0
    n = positions.size
    for a in range(n):
        sa = spins[a]
        for b in range(a + 1, n):
            e -= table[positions[b] - positions[a]] * sa * spins[b]
    return e


@njit(cache=True)
def coupling_matrix(positions, table):
    n = positions.size
    J = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            c = table[abs(positions[b] - positions[a])]
            J[a, b] = c
            J[b, a] = c
    return J


@njit(cache=True)
def observe(spins, code, idx, pattern):
    if code == OBS_SPIN:
        return float(spins[idx[0]])
    if code == OBS_PRODUCT:
        p = 1.0
        for k in range(idx.size):
            p *= spins[idx[k]]
        return p
    if code == OBS_PATTERN:
        for k in range(idx.size):
            if spins[idx[k]] != pattern[k]:
                return 0.0
        return 1.0
    s = 0.0
    for k in range(spins.size):
        s += spins[k]
    return s / spins.size


@njit(cache=True)
def metropolis_accept(beta, delta_e):
    """Acceptance probability min(1, exp(-beta * delta_e))."""
    if delta_e <= 0.0:
        return 1.0
    return np.exp(-beta * delta_e)


@njit(cache=True, nogil=True)
def metropolis_chain(spins, J, fields, beta, rng, sweeps, burn_in, measure_every,
                     code, idx, pattern, out):
    """Random-site single-spin-flip Metropolis with incremental local fields.

    ``spins`` is updated in place; one sweep is ``n`` attempted flips.
    Returns the number of accepted flips.
    """
    n = spins.size
    local = fields.copy()
    for a in range(n):
        for b in range(n):
            local[a] += J[a, b] * spins[b]
    accepted = 0
    k = 0
    for sweep in range(sweeps):
        for _ in range(n):
            a = rng.integers(0, n)
            de = 2.0 * spins[a] * local[a]
            if de <= 0.0 or rng.random() < metropolis_accept(beta, de):
                s_new = -spins[a]
                spins[a] = s_new
                accepted += 1
                step = 2.0 * s_new
                for b in range(n):
                    local[b] += step * J[b, a]
        if sweep >= burn_in and (sweep + 1 - burn_in) % measure_every == 0:
            out[k] = observe(spins, code, idx, pattern)
            k += 1
    return accepted


@njit(cache=True, nogil=True)
def cluster_chain(spins, positions, site_index, span_lo, cum, fields, p_ghost, rng,
                  sweeps, burn_in, measure_every, code, idx, pattern, out, clusters_per_sweep):
    """Single-cluster updates with cumulative-bond jumps and a ghost spin.

    ``cum[r] = sum_{k<=r} 2 beta J(k)`` over lattice distance r; the next
    activated bond distance after ``a`` is the smallest r with
    ``cum[r] - cum[a] >= -log(U)``.  Candidates that land on non-free sites
    are dropped, which leaves the bond law on free pairs unchanged.
    A cluster that bonds to the ghost (field) spin is left unflipped.

    Measurements must sit at fixed update counts (a stopping rule based on
    cluster sizes biases them), so after burn-in a sweep is exactly
    ``clusters_per_sweep`` clusters.  If that is 0 it is fixed at the end of
    burn-in as the mean number of clusters needed to visit ``n`` sites
    (burn-in sweeps grow clusters until ``n`` sites have been visited), or
    ``n`` when there is no burn-in.
    Returns (number of clusters, total cluster size, clusters per sweep).
    """
    n = spins.size
    stamp = np.zeros(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    members = np.empty(n, dtype=np.int64)
    span_hi = span_lo + site_index.size - 1
    rmax = cum.size - 1
    generation = 0
    n_clusters = 0
    total_size = 0
    k = 0
    cps = clusters_per_sweep
    if cps <= 0 and burn_in == 0:
        cps = n
    for sweep in range(sweeps):
        if sweep == burn_in and cps <= 0:
            cps = max(1, int(round(n_clusters / burn_in)))
        adaptive = sweep < burn_in and cps <= 0
        visited = 0
        done = 0
        while (adaptive and visited < n) or (not adaptive and done < cps):
            done += 1
            generation += 1
            seed = rng.integers(0, n)
            s0 = spins[seed]
            stamp[seed] = generation
            stack[0] = seed
            top = 1
            size = 0
            ghost = False
            while top > 0:
                top -= 1
                i = stack[top]
                members[size] = i
                size += 1
                if s0 * fields[i] > 0.0 and rng.random() < p_ghost[i]:
                    ghost = True
                    break
                p = positions[i]
                for direction in (1, -1):
                    if direction == 1:
                        reach = span_hi - p
                    else:
                        reach = p - span_lo
                    if reach > rmax:
                        reach = rmax
                    a = 0
                    while True:
                        target = cum[a] - np.log(1.0 - rng.random())
                        if target > cum[reach]:
                            break
                        r = np.searchsorted(cum, target)
                        if r <= a:
                            r = a + 1
                        if r > reach:
                            break
                        j = site_index[p + direction * r - span_lo]
                        if j >= 0 and stamp[j] != generation and spins[j] == s0:
                            stamp[j] = generation
                            stack[top] = j
                            top += 1
                        a = r
            if not ghost:
                for m in range(size):
                    spins[members[m]] = -s0
            visited += size
            n_clusters += 1
            total_size += size
        if sweep >= burn_in and (sweep + 1 - burn_in) % measure_every == 0:
            out[k] = observe(spins, code, idx, pattern)
            k += 1
    return n_clusters, total_size, cps


@njit(cache=True)
def enumerate_energies(J, fields, start, stop):
    """Energies -sum_{a<b} J_ab s_a s_b - sum_a f_a s_a of states start..stop-1.

    Bit a of the state index is the spin of free site a (1 -> +1).
    """
    n = fields.size
    out = np.empty(stop - start)
    s = np.empty(n)
    for t in range(start, stop):
        for a in range(n):
            s[a] = 1.0 if (t >> a) & 1 else -1.0
        e = 0.0
        for a in range(n):
            acc = 0.0
            for b in range(a + 1, n):
                acc += J[a, b] * s[b]
            e -= s[a] * (acc + fields[a])
        out[t - start] = e
    return out


@njit(cache=True)
def enumerate_observable(n, code, idx, pattern, start, stop):
    out = np.empty(stop - start)
    s = np.empty(n, dtype=np.int64)
    for t in range(start, stop):
        for a in range(n):
            s[a] = 1 if (t >> a) & 1 else -1
        out[t - start] = observe(s, code, idx, pattern)
    return out
