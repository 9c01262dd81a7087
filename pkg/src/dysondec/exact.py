"""Brute-force finite-volume Gibbs kernels.

All 2**n states of the free spins are enumerated (n <= cap) and weighted
with log-sum-exp, so results stay finite at large beta.  These are the
ground truth for consistency, monotonicity and sampler checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .lattice import (FrozenConstraint, ModelParams, coupling_table, field_profile,
                      hamiltonian_bc)
from .observables import Observable

ENUMERATION_CAP = 20
BOUNDARY_PATTERN_CAP = 12


class EnumerationCapError(ValueError):
    """The requested volume has too many free spins to enumerate."""


@dataclass(frozen=True)
class KernelQuery:
    """Free volume and boundary (``constraint``), observable, and truncation.

    ``cutoff=None`` closes the tail analytically; an integer truncates the
    frozen-spin sums at that distance and reports the energy error bound.
    """

    constraint: FrozenConstraint
    observable: Observable = field(default_factory=Observable.spin)
    cutoff: int | None = None
    cap: int = ENUMERATION_CAP

    def __post_init__(self):
        n = len(self.constraint.free_sites)
        if n > self.cap:
            raise EnumerationCapError(
                f"{n} free spins exceed the enumeration cap of {self.cap}; use a sampler")
        self.observable.bind(self.constraint.free_sites)

    @classmethod
    def interval(cls, lo: int, hi: int, tail_rule: str = "none",
                 observable: Observable | None = None, **kw) -> "KernelQuery":
        return cls(FrozenConstraint.interval(lo, hi, tail_rule),
                   observable or Observable.spin(0), **kw)

    @property
    def volume(self) -> tuple[int, ...]:
        return self.constraint.free_sites


@dataclass(frozen=True)
class ExactResult:
    expectation: float
    log_partition: float
    tail_bound: float = 0.0


def _check_cap(n: int, cap: int = ENUMERATION_CAP) -> None:
    if n > cap:
        raise EnumerationCapError(f"{n} free spins exceed the enumeration cap of {cap}")


def _fields(params: ModelParams, constraint: FrozenConstraint,
            cutoff: int | None) -> tuple[np.ndarray, float]:
    if cutoff is None:
        return np.asarray(field_profile(params, constraint).values), 0.0
    prof = field_profile(params, constraint, cutoff=cutoff, closed=False)
    # the bound from hamiltonian_bc is the one the energies carry
    _, bound = hamiltonian_bc(params, np.ones(len(constraint.free_sites), dtype=np.int64),
                              constraint, cutoff)
    return np.asarray(prof.values), bound


def state_energies(params: ModelParams, constraint: FrozenConstraint,
                   cutoff: int | None = None) -> tuple[np.ndarray, float]:
    """Energy of every free-spin state (bit a of the index = spin of free site a)."""
    n = len(constraint.free_sites)
    _check_cap(n)
    fields, bound = _fields(params, constraint, cutoff)
    pos = constraint.positions
    J = _kernels.coupling_matrix(pos, coupling_table(params.alpha, int(pos[-1] - pos[0]) or 1))
    return _kernels.enumerate_energies(J, fields, 0, 1 << n), bound


def gibbs_exact(params: ModelParams, query: KernelQuery) -> ExactResult:
    """Expectation of the observable under the finite-volume Gibbs kernel."""
    energies, bound = state_energies(params, query.constraint, query.cutoff)
    n = len(query.constraint.free_sites)
    code, idx, pattern = query.observable.bind(query.constraint.free_sites)
    f = _kernels.enumerate_observable(n, code, idx, pattern, 0, 1 << n)
    logw = -params.beta * energies
    log_z = float(logsumexp(logw))
    w = np.exp(logw - logw.max())
    # normalise by the weights' own sum and clip away rounding beyond the range of f
    expectation = float(np.clip(np.dot(w, f) / w.sum(), f.min(), f.max()))
    return ExactResult(expectation, log_z, bound)


def _bits(n: int) -> np.ndarray:
    """(2**n, n) matrix of spins, row t = state t."""
    t = np.arange(1 << n, dtype=np.int64)[:, None]
    return np.where((t >> np.arange(n)) & 1, 1.0, -1.0)


def _conditional_expectations(beta: float, J: np.ndarray, field_rows: np.ndarray,
                              f_rows: np.ndarray) -> np.ndarray:
    """Kernel expectations for a batch of boundary fields on the same small volume.

    ``field_rows[c]`` is the field vector under boundary c and ``f_rows[c, t]``
    the observable in state t under that boundary.
    """
    k = J.shape[0]
    spins = _bits(k)
    internal = -0.5 * np.einsum("ta,ab,tb->t", spins, J, spins)
    logw = -beta * (internal[None, :] - field_rows @ spins.T)
    logw -= logsumexp(logw, axis=1, keepdims=True)
    return np.sum(np.exp(logw) * f_rows, axis=1)


def dlr_check(params: ModelParams, inner: Sequence[int], outer: Sequence[int],
              constraint: FrozenConstraint, observable: Observable,
              cutoff: int | None = None) -> float:
    """Residual ``|gamma_outer(gamma_inner f) - gamma_outer f|`` at boundary ``constraint``.

    ``inner`` and ``outer`` are inclusive intervals; the free sites of
    ``constraint`` are replaced by ``outer``.  The inner kernel is built
    from scratch for every configuration of ``outer \\ inner``.
    """
    ilo, ihi = inner
    olo, ohi = outer
    if not (olo <= ilo <= ihi <= ohi) or (ilo, ihi) == (olo, ohi):
        raise ValueError("inner must be a proper sub-interval of outer")
    n = ohi - olo + 1
    _check_cap(n)
    outer_c = constraint.with_free_sites(range(olo, ohi + 1))

    energies, _ = state_energies(params, outer_c, cutoff)
    code, idx, pattern = observable.bind(outer_c.free_sites)
    f = _kernels.enumerate_observable(n, code, idx, pattern, 0, 1 << n)
    logw = -params.beta * energies
    w = np.exp(logw - logsumexp(logw))
    direct = float(np.dot(w, f))

    # split outer states into (inner part, rest part)
    a_in = np.arange(ilo - olo, ihi - olo + 1)
    a_rest = np.setdiff1d(np.arange(n), a_in)
    t = np.arange(1 << n, dtype=np.int64)
    tau = np.zeros_like(t)
    for j, a in enumerate(a_in):
        tau |= ((t >> a) & 1) << j
    rest = np.zeros_like(t)
    for j, a in enumerate(a_rest):
        rest |= ((t >> a) & 1) << j
    k, m = a_in.size, a_rest.size
    f_rows = np.empty((1 << m, 1 << k))
    f_rows[rest, tau] = f

    # inner fields: boundary of outer seen at the inner sites, plus the rest spins
    inner_c = FrozenConstraint(outer_c.frozen, tuple(range(ilo, ihi + 1)), outer_c.tail_rule)
    base = _fields(params, inner_c.with_frozen({s: 1 for s in outer_c.free_sites
                                                if not ilo <= s <= ihi}), cutoff)[0]
    table = coupling_table(params.alpha, n)
    sites = np.arange(olo, ohi + 1)
    J_cross = table[np.abs(sites[a_in][:, None] - sites[a_rest][None, :])]
    rest_spins = _bits(m)
    field_rows = (base - J_cross.sum(axis=1))[None, :] + rest_spins @ J_cross.T
    J_in = _kernels.coupling_matrix(sites[a_in].astype(np.int64), table)
    g = _conditional_expectations(params.beta, J_in, field_rows, f_rows)
    composed = float(np.dot(w, g[rest]))
    return abs(composed - direct)


def boundary_expectations(params: ModelParams, volume: Sequence[int], observable: Observable,
                          boundary_sites: Sequence[int], tail_rule: str = "none",
                          cutoff: int | None = None) -> np.ndarray:
    """Kernel expectation for every spin pattern on ``boundary_sites``.

    Entry p corresponds to the pattern whose bit j gives the spin (1 -> +1)
    at ``boundary_sites[j]``; every other outside site follows ``tail_rule``.
    """
    vol = tuple(int(s) for s in volume)
    bsites = np.array(sorted(boundary_sites), dtype=np.int64)
    if bsites.size > BOUNDARY_PATTERN_CAP:
        raise EnumerationCapError(
            f"{bsites.size} boundary spins exceed the pattern cap of {BOUNDARY_PATTERN_CAP}")
    _check_cap(len(vol))
    if set(vol) & set(bsites.tolist()):
        raise ValueError("boundary sites overlap the volume")
    c_plus = FrozenConstraint({int(b): 1 for b in bsites}, vol, tail_rule)
    c_minus = FrozenConstraint({int(b): -1 for b in bsites}, vol, tail_rule)
    f_plus = _fields(params, c_plus, cutoff)[0]
    f_minus = _fields(params, c_minus, cutoff)[0]
    base = 0.5 * (f_plus + f_minus)
    pos = c_plus.positions
    span = max(int(pos[-1] - pos[0]), int(np.max(np.abs(pos[:, None] - bsites[None, :]))))
    table = coupling_table(params.alpha, span)
    J_cross = table[np.abs(pos[:, None] - bsites[None, :])]
    field_rows = base[None, :] + _bits(bsites.size) @ J_cross.T
    J = _kernels.coupling_matrix(pos, table)
    code, idx, pattern = observable.bind(vol)
    f = _kernels.enumerate_observable(len(vol), code, idx, pattern, 0, 1 << len(vol))
    f_rows = np.broadcast_to(f, (field_rows.shape[0], f.size))
    return _conditional_expectations(params.beta, J, field_rows, f_rows)


def monotonicity_check(params: ModelParams, volume: Sequence[int], observable: Observable,
                       boundary_window: Sequence[int], tail_rule: str = "none",
                       tol: float = 1e-12) -> int:
    """Number of ordered boundary pairs ``w <= w'`` with ``E[f|w] > E[f|w'] + tol``."""
    if not observable.increasing:
        raise ValueError(f"observable {observable} is not increasing")
    values = boundary_expectations(params, volume, observable, boundary_window, tail_rule)
    masks = np.arange(values.size)
    violations = 0
    for upper in masks:
        below = (masks & ~upper) == 0
        violations += int(np.count_nonzero(values[below] > values[upper] + tol))
    return violations


def finite_volume_mu_plus(params: ModelParams, volume: Sequence[int],
                          observable: Observable | None = None) -> float:
    """Exact kernel expectation on the interval ``volume`` with the all-plus boundary."""
    lo, hi = volume
    return gibbs_exact(params, KernelQuery.interval(lo, hi, "all-plus", observable)).expectation


def finite_volume_mu_minus(params: ModelParams, volume: Sequence[int],
                           observable: Observable | None = None) -> float:
    """Exact kernel expectation on the interval ``volume`` with the all-minus boundary."""
    lo, hi = volume
    return gibbs_exact(params, KernelQuery.interval(lo, hi, "all-minus", observable)).expectation
