"""Decimation, the alternating/annulus probe geometry, and the size laws around it.

Two index spaces appear here.  Image ("primed") sites i live on the
decimated lattice; original sites x live on the full chain.  The only map
between them is ``x = 2 i``; nothing is rescaled implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .lattice import (ALTERNATING, NONE, FrozenConstraint, ModelParams, SpinWindow,
                      parse_tail_rule, pair_energy)


def decimate(window: SpinWindow) -> SpinWindow:
    """Image configuration ``w'_i = w_{2i}`` on every i with 2i in the window."""
    lo = -(-window.offset // 2)
    hi = (window.stop - 1) // 2
    if hi < lo:
        raise ValueError("window covers no even site; the decimated window would be empty")
    return SpinWindow(lo, tuple(window[2 * i] for i in range(lo, hi + 1)))


def alternating_sign(i: int) -> int:
    """``(-1)**i`` on the image lattice."""
    return -1 if i % 2 else 1


@dataclass(frozen=True)
class ProbeGeometry:
    """Central image interval [-L, L], annulus out to N, and the free odd window.

    Original even sites 2i with 1 <= |i| <= L carry ``(-1)**i``; those with
    L < |i| <= N carry ``annulus_sign``.  Free sites are the odd sites in
    [-(2N + margin), 2N + margin] plus the origin.
    """

    L: int
    N: int
    annulus_sign: int = 1
    window_margin: int | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be a positive integer")
        if self.N <= self.L:
            raise ValueError(f"the annulus needs N > L (got L={self.L}, N={self.N})")
        if self.annulus_sign not in (-1, 1):
            raise ValueError("annulus_sign must be +1 or -1")
        if self.window_margin is None:
            object.__setattr__(self, "window_margin", 2 * self.N)
        if self.window_margin < 1:
            raise ValueError("window_margin must be positive")

    @property
    def half_width(self) -> int:
        return 2 * self.N + self.window_margin

    @property
    def free_sites(self) -> tuple[int, ...]:
        w = self.half_width
        first = -w if w % 2 else -w + 1
        return tuple(sorted((*range(first, w + 1, 2), 0)))

    @property
    def n_free(self) -> int:
        return len(self.free_sites)

    def flipped(self) -> "ProbeGeometry":
        return ProbeGeometry(self.L, self.N, -self.annulus_sign, self.window_margin)


def probe_frozen_spins(geometry: ProbeGeometry) -> dict[int, int]:
    """Original-lattice frozen spins of the probe constraint."""
    frozen = {}
    for i in range(1, geometry.N + 1):
        for j in (i, -i):
            frozen[2 * j] = alternating_sign(j) if i <= geometry.L else geometry.annulus_sign
    return frozen


def build_probe_constraint(geometry: ProbeGeometry,
                           tail_rule: str = "alternating-even") -> FrozenConstraint:
    """Constraint for the conditional law of the origin given the image pattern.

    Beyond the annulus the even sites (and odd sites outside the free window)
    follow ``tail_rule``; the default continues the alternating pattern.
    """
    return FrozenConstraint(probe_frozen_spins(geometry), geometry.free_sites, tail_rule)


def alternating_constraint(half_width: int, odd_tail: str = NONE) -> FrozenConstraint:
    """Every even site alternates; odd sites in [-half_width, half_width] are free.

    ``odd_tail`` (none, plus or minus) fixes the odd sites outside the window.
    """
    first = -half_width if half_width % 2 else -half_width + 1
    free = tuple(range(first, half_width + 1, 2))
    return FrozenConstraint({}, free, f"even={ALTERNATING},odd={odd_tail}")


def is_pure_alternating(constraint: FrozenConstraint) -> bool:
    """True if every even site follows ``(-1)**(x/2)`` and all free sites are odd."""
    even, _ = parse_tail_rule(constraint.tail_rule)
    if even != ALTERNATING or any(s % 2 == 0 for s in constraint.free_sites):
        return False
    return all(s % 2 == 0 and v == alternating_sign(s // 2) for s, v in constraint.frozen.items())


@dataclass(frozen=True)
class RescaledModel:
    """Odd-sublattice model left over once the alternating even spins are frozen.

    Odd site ``x = 2k + 1`` becomes site k of a Dyson chain whose couplings
    are scaled by ``scale = 2**-alpha``; the frozen spins contribute no field.
    """

    params: ModelParams
    scale: float
    field: float = 0.0

    @property
    def equivalent_params(self) -> ModelParams:
        """Unscaled Dyson chain with the same Gibbs weights (beta absorbs the scale)."""
        return ModelParams(self.params.alpha, self.params.beta * self.scale,
                           self.params.h / self.scale)

    @staticmethod
    def to_image(x: int) -> int:
        if x % 2 == 0:
            raise ValueError(f"site {x} is not odd")
        return (x - 1) // 2

    @staticmethod
    def from_image(k: int) -> int:
        return 2 * k + 1

    def hamiltonian(self, sites, spins) -> float:
        """Energy of image-lattice spins: scaled pair energy minus the field term."""
        sites = np.asarray(sites, dtype=np.int64)
        spins = np.asarray(spins)
        order = np.argsort(sites)
        e = self.scale * pair_energy(self.params.alpha, sites[order], spins[order])
        return e - (self.params.h + self.field) * float(np.sum(spins))


def constrained_model_rescale(params: ModelParams,
                              constraint: FrozenConstraint | None = None) -> RescaledModel:
    """Rescaled odd-site model; refuses constraints that are not purely alternating."""
    if constraint is not None and not is_pure_alternating(constraint):
        raise ValueError("rescaling holds only for the pure alternating constraint "
                         "(an annulus or other frozen pattern is present)")
    return RescaledModel(params, 2.0 ** -params.alpha)


def choose_N(alpha: float, L: int) -> int:
    """Annulus size ``ceil(L**(1/(alpha-1)))`` that keeps the boundary bound O(1).

    Values within 1e-9 (relative) of an integer are rounded to it, so that
    exact powers are not pushed up by floating-point error.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"the annulus law needs 1 < alpha <= 2 (got {alpha}); "
                         "outside that range supply N directly")
    if L < 1:
        raise ValueError("L must be a positive integer")
    value = float(L) ** (1.0 / (alpha - 1.0))
    nearest = round(value)
    if abs(value - nearest) <= 1e-9 * max(1.0, value):
        return int(nearest)
    return int(math.ceil(value))


def boundary_bound(alpha: float, L: int, N: int) -> float:
    """``2 L N**(1-alpha) / (alpha-1)``: energy change from spins beyond N seen by [-L, L]."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if N < L:
        raise ValueError(f"need N >= L (got L={L}, N={N})")
    return 2.0 * L * float(N) ** (1.0 - alpha) / (alpha - 1.0)


def exact_boundary_sum(alpha: float, L: int, N: int) -> float:
    """Worst-case ``sup |H(s|w1) - H(s|w2)|`` over boundaries agreeing on [-N, N].

    Each pair (x, y) with |x| <= L and |y| > N can change by ``2|x-y|**-alpha``,
    and all of them can do so at once.
    """
    x = np.arange(-L, L + 1)
    right = zeta(alpha, N + 1 - x)
    left = zeta(alpha, N + 1 + x)
    return float(2.0 * np.sum(right + left))


def homogeneous_field_F(alpha: float, L: int) -> float:
    """``2 sum_{k >= L} (2k+1)**-alpha`` in closed form."""
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if L < 0:
        raise ValueError("L must be non-negative")
    return float(2.0 * 2.0 ** -alpha * zeta(alpha, L + 0.5))
