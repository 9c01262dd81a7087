"""Seeded Markov-chain sampling of constrained finite-volume Gibbs measures.

Two samplers share one setup: random-site Metropolis with incremental local
fields, and single-cluster updates for long-range bonds with a ghost spin
carrying the site-dependent field.  Error bars come from batch means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exact import state_energies
from .lattice import FrozenConstraint, ModelParams, coupling_table, field_profile
from .observables import Observable

RNG_ALGORITHM = "numpy-PCG64-SeedSequence"
ALGORITHMS = ("metropolis", "cluster")
MIN_BATCHES = 20
_U64 = 2 ** 64


@dataclass(frozen=True)
class ChainConfig:
    """Chain length and schedule; one sweep is one update attempt per free site."""

    sweeps: int
    burn_in: int = 0
    seed: int = 0
    algorithm: str = "cluster"
    measure_every: int = 1
    n_batches: int = 50

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if not 0 <= self.burn_in < self.sweeps:
            raise ValueError("need 0 <= burn_in < sweeps")
        if self.measure_every < 1:
            raise ValueError("measure_every must be positive")
        if not 0 <= self.seed < _U64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.n_batches < MIN_BATCHES:
            raise ValueError(f"at least {MIN_BATCHES} batches are required")
        if self.n_samples < self.n_batches:
            raise ValueError(f"{self.n_samples} samples cannot fill {self.n_batches} batches")

    @property
    def n_samples(self) -> int:
        return (self.sweeps - self.burn_in) // self.measure_every

    def with_seed(self, seed: int) -> "ChainConfig":
        return ChainConfig(self.sweeps, self.burn_in, seed, self.algorithm,
                           self.measure_every, self.n_batches)


@dataclass(frozen=True)
class Estimate:
    """Sample mean with batch-means standard error.

    ``autocorr_hint`` is the integrated autocorrelation time implied by the
    ratio of batch-means to naive variance (0.5 for independent samples).
    Exact values carry ``std_error = 0`` and ``n_samples = 0``.
    """

    mean: float
    std_error: float
    n_samples: int
    autocorr_hint: float = 0.5
    method: str = "exact"
    mean_cluster_size: float = math.nan

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0, 0.0, "exact")

    def minus(self, other: "Estimate") -> "Estimate":
        """Difference of two independent estimates."""
        return Estimate(self.mean - other.mean, math.hypot(self.std_error, other.std_error),
                        min(self.n_samples, other.n_samples),
                        max(self.autocorr_hint, other.autocorr_hint),
                        self.method if self.method == other.method else "mixed")

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_error


def batch_means(samples: np.ndarray, n_batches: int = 50) -> tuple[float, float, float]:
    """Mean, batch-means standard error and autocorrelation hint of a time series.

    Samples beyond the last full batch are kept in the mean but not in the
    error estimate.
    """
    x = np.asarray(samples, dtype=np.float64)
    if n_batches < MIN_BATCHES:
        raise ValueError(f"at least {MIN_BATCHES} batches are required")
    if x.size < n_batches:
        raise ValueError("fewer samples than batches")
    size = x.size // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    stderr = float(means.std(ddof=1) / math.sqrt(n_batches))
    var = float(x.var(ddof=1)) if x.size > 1 else 0.0
    hint = 0.5 * stderr ** 2 * x.size / var if var > 0 else 0.5
    return float(x.mean()), stderr, hint


def chain_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Generator for one chain; ``spawn_key`` splits one base seed into independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def _initial_spins(n: int, init, rng: np.random.Generator) -> np.ndarray:
    if isinstance(init, str):
        if init == "random":
            return np.where(rng.random(n) < 0.5, -1, 1).astype(np.int64)
        if init in ("plus", "minus"):
            return np.full(n, 1 if init == "plus" else -1, dtype=np.int64)
        raise ValueError(f"unknown initial state {init!r}")
    spins = np.array(init, dtype=np.int64)
    if spins.shape != (n,) or np.any(np.abs(spins) != 1):
        raise ValueError("initial state must hold one +-1 spin per free site")
    return spins


def _setup(params, constraint, observable, chain, init, rng):
    fields = np.asarray(field_profile(params, constraint).values)
    spins = _initial_spins(len(constraint.free_sites), init, rng)
    code, idx, pattern = observable.bind(constraint.free_sites)
    out = np.empty(chain.n_samples)
    return fields, spins, (code, idx, pattern), out


def _estimate(out, chain, method, cluster_size=math.nan) -> Estimate:
    mean, err, hint = batch_means(out, chain.n_batches)
    return Estimate(mean, err, out.size, hint, method, cluster_size)


def metropolis_run(params: ModelParams, constraint: FrozenConstraint, observable: Observable,
                   chain: ChainConfig, init="random", rng: np.random.Generator | None = None,
                   return_samples: bool = False):
    """Single-spin-flip Metropolis estimate of the constrained expectation.

    Flipping free site i costs ``2 s_i (sum_j J_ij s_j + field_i)``; the local
    sums are kept up to date so each accepted flip costs O(n).
    """
    rng = chain_rng(chain.seed) if rng is None else rng
    fields, spins, obs, out = _setup(params, constraint, observable, chain, init, rng)
    pos = constraint.positions
    J = _kernels.coupling_matrix(pos, coupling_table(params.alpha, max(1, int(pos[-1] - pos[0]))))
    _kernels.metropolis_chain(spins, J, fields, params.beta, rng, chain.sweeps, chain.burn_in,
                              chain.measure_every, *obs, out)
    est = _estimate(out, chain, "metropolis")
    return (est, out) if return_samples else est


def bond_table(params: ModelParams, rmax: int) -> np.ndarray:
    """Cumulative bond weights ``cum[r] = sum_{k<=r} 2 beta k**-alpha``."""
    table = coupling_table(params.alpha, max(1, rmax))
    return np.cumsum(2.0 * params.beta * table)


def cluster_run(params: ModelParams, constraint: FrozenConstraint, observable: Observable,
                chain: ChainConfig, init="random", rng: np.random.Generator | None = None,
                return_samples: bool = False, clusters_per_sweep: int = 0):
    """Long-range single-cluster estimate of the constrained expectation.

    Aligned free spins at distance r bond with probability
    ``1 - exp(-2 beta r**-alpha)``; a spin aligned with its field bonds to the
    ghost with probability ``1 - exp(-2 beta |field|)``, and clusters holding
    a ghost bond stay put.  ``clusters_per_sweep = 0`` calibrates the sweep
    length during burn-in so that a sweep touches about one site per free spin.
    """
    rng = chain_rng(chain.seed) if rng is None else rng
    fields, spins, obs, out = _setup(params, constraint, observable, chain, init, rng)
    p_ghost = -np.expm1(-2.0 * params.beta * np.abs(fields))
    if p_ghost.size and np.all(p_ghost == 1.0):
        raise ValueError("every free site is pinned to the ghost spin (fields too large for "
                         "the cluster sampler at this beta); use metropolis or exact evaluation")
    pos = constraint.positions
    lo = int(pos[0])
    span = int(pos[-1]) - lo
    site_index = np.full(span + 1, -1, dtype=np.int64)
    site_index[pos - lo] = np.arange(pos.size)
    cum = bond_table(params, span)
    n_clusters, total, _ = _kernels.cluster_chain(spins, pos, site_index, lo, cum, fields,
                                                  p_ghost, rng, chain.sweeps, chain.burn_in,
                                                  chain.measure_every, *obs, out,
                                                  clusters_per_sweep)
    est = _estimate(out, chain, "cluster", total / max(n_clusters, 1))
    return (est, out) if return_samples else est


def sample(params: ModelParams, constraint: FrozenConstraint, observable: Observable,
           chain: ChainConfig, init="random", rng: np.random.Generator | None = None) -> Estimate:
    run = metropolis_run if chain.algorithm == "metropolis" else cluster_run
    return run(params, constraint, observable, chain, init=init, rng=rng)


def two_run_gap(params: ModelParams, constraint_a: FrozenConstraint,
                constraint_b: FrozenConstraint, observable: Observable, chain: ChainConfig,
                init="random") -> tuple[Estimate, Estimate, Estimate]:
    """Independent chains under two constraints on the same free sites, and their difference.

    Chain A uses spawn key 0 of the base seed and chain B spawn key 1.
    """
    if constraint_a.free_sites != constraint_b.free_sites:
        raise ValueError("both constraints must share the same free sites")
    est_a = sample(params, constraint_a, observable, chain, init, chain_rng(chain.seed, 0))
    est_b = sample(params, constraint_b, observable, chain, init, chain_rng(chain.seed, 1))
    return est_a, est_b, est_a.minus(est_b)


def metropolis_transition_matrix(params: ModelParams,
                                 constraint: FrozenConstraint) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix of random-site Metropolis and the exact Gibbs weights.

    States are indexed as in the exact enumeration.  Returns ``(P, pi)``.
    """
    n = len(constraint.free_sites)
    energies, _ = state_energies(params, constraint)
    logw = -params.beta * energies
    pi = np.exp(logw - logw.max())
    pi /= pi.sum()
    size = 1 << n
    P = np.zeros((size, size))
    for t in range(size):
        for a in range(n):
            u = t ^ (1 << a)
            P[t, u] = _kernels.metropolis_accept(params.beta, energies[u] - energies[t]) / n
        P[t, t] = 1.0 - P[t].sum()
    return P, pi
