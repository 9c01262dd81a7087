"""Dyson-Ising chain: couplings, configurations, Hamiltonians, frozen-spin fields.

Energies here are beta-free; inverse temperature only enters the kernels.
The interaction is ``J(r) = r**-alpha`` between every pair of sites at
distance r, plus an optional homogeneous field ``h``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.special import zeta

from . import _kernels

# Per-parity tail components.
NONE, PLUS, MINUS, ALTERNATING = "none", "plus", "minus", "alternating"
_COMPONENT_SPIN = {NONE: 0, PLUS: 1, MINUS: -1}

_NAMED_TAILS = {
    "none": (NONE, NONE),
    "all-plus": (PLUS, PLUS),
    "all-minus": (MINUS, MINUS),
    "alternating-even": (ALTERNATING, NONE),
}
_TAIL_NAMES = {v: k for k, v in _NAMED_TAILS.items()}
TAIL_RULES = tuple(_NAMED_TAILS)


def parse_tail_rule(rule: str) -> tuple[str, str]:
    """Split a tail rule into its (even-site, odd-site) components.

    Besides the four named rules, ``"even=<c>,odd=<c>"`` with components
    none/plus/minus (and alternating for the even sites) is accepted.
    Alternating even sites carry ``(-1)**i`` at site ``2i``.
    """
    if rule in _NAMED_TAILS:
        return _NAMED_TAILS[rule]
    parts = dict(p.split("=", 1) for p in rule.replace(" ", "").split(",") if "=" in p)
    if set(parts) != {"even", "odd"} or rule.count("=") != 2:
        raise ValueError(f"unknown tail rule {rule!r}; expected one of {TAIL_RULES} "
                         "or 'even=<c>,odd=<c>'")
    even, odd = parts["even"], parts["odd"]
    if even not in (NONE, PLUS, MINUS, ALTERNATING) or odd not in (NONE, PLUS, MINUS):
        raise ValueError(f"bad tail rule component in {rule!r}")
    return even, odd


def canonical_tail_rule(rule: str) -> str:
    comps = parse_tail_rule(rule)
    return _TAIL_NAMES.get(comps, f"even={comps[0]},odd={comps[1]}")


def tail_spins(rule: str, sites: np.ndarray) -> np.ndarray:
    """Spin the tail rule assigns to each site (0 where it assigns none)."""
    even, odd = parse_tail_rule(rule)
    sites = np.asarray(sites, dtype=np.int64)
    out = np.zeros(sites.shape, dtype=np.int8)
    is_even = (sites & 1) == 0
    if even == ALTERNATING:
        half = sites[is_even] >> 1
        out[is_even] = np.where(half & 1, -1, 1)
    else:
        out[is_even] = _COMPONENT_SPIN[even]
    out[~is_even] = _COMPONENT_SPIN[odd]
    return out


@dataclass(frozen=True)
class ModelParams:
    """Decay exponent ``alpha``, inverse temperature ``beta``, field ``h``."""

    alpha: float
    beta: float
    h: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "h"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.alpha <= 1.0:
            raise ValueError(
                f"alpha must exceed 1 so that sum_r r^-alpha converges, got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def dyson_regime(self) -> bool:
        """True for 1 < alpha <= 2, where the zero-field chain orders at low T."""
        return self.alpha <= 2.0

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SpinWindow:
    """Spins on the contiguous sites ``offset .. offset + len - 1``."""

    offset: int
    spins: tuple[int, ...]

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spins)
        if any(s not in (-1, 1) for s in spins):
            raise ValueError("spins must be -1 or +1")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "spins", spins)

    @classmethod
    def from_function(cls, lo: int, hi: int, f) -> "SpinWindow":
        return cls(lo, tuple(f(i) for i in range(lo, hi + 1)))

    @classmethod
    def uniform(cls, lo: int, hi: int, spin: int) -> "SpinWindow":
        return cls(lo, (spin,) * (hi - lo + 1))

    def __len__(self) -> int:
        return len(self.spins)

    def __contains__(self, site: int) -> bool:
        return self.offset <= site < self.offset + len(self.spins)

    def __getitem__(self, site: int) -> int:
        if site not in self:
            raise IndexError(f"site {site} outside window [{self.offset}, {self.stop})")
        return self.spins[site - self.offset]

    @property
    def stop(self) -> int:
        return self.offset + len(self.spins)

    @property
    def sites(self) -> range:
        return range(self.offset, self.stop)

    def as_array(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int64)

    def flipped(self) -> "SpinWindow":
        return SpinWindow(self.offset, tuple(-s for s in self.spins))

    def shifted(self, k: int) -> "SpinWindow":
        return SpinWindow(self.offset + k, self.spins)


@dataclass(frozen=True, eq=False)
class FieldProfile:
    """Effective field (energy units) at each free site."""

    sites: np.ndarray
    values: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        if len(self.sites) != len(self.values):
            raise ValueError("one field value per site required")

    def __getitem__(self, site: int) -> float:
        k = int(np.searchsorted(self.sites, site))
        if k == len(self.sites) or self.sites[k] != site:
            raise KeyError(site)
        return float(self.values[k])

    @property
    def window(self) -> tuple[int, int]:
        return int(self.sites[0]), int(self.sites[-1])


@dataclass(frozen=True)
class FrozenConstraint:
    """Free sites, explicitly frozen spins, and a rule for everything else.

    Every site that is neither free nor in ``frozen`` takes its spin from
    ``tail_rule`` (possibly no spin at all).  Beyond the hull of the free
    and frozen sites the tail rule is therefore the whole story, which is
    what lets tails be summed in closed form.
    """

    frozen: Mapping[int, int]
    free_sites: tuple[int, ...]
    tail_rule: str = "none"

    def __post_init__(self):
        frozen = {int(k): int(v) for k, v in sorted(dict(self.frozen).items())}
        if any(v not in (-1, 1) for v in frozen.values()):
            raise ValueError("frozen spins must be -1 or +1")
        free = tuple(sorted({int(s) for s in self.free_sites}))
        if not free:
            raise ValueError("a constraint needs at least one free site")
        clash = set(free) & set(frozen)
        if clash:
            raise ValueError(f"sites both free and frozen: {sorted(clash)[:5]}")
        object.__setattr__(self, "frozen", MappingProxyType(frozen))
        object.__setattr__(self, "free_sites", free)
        object.__setattr__(self, "tail_rule", canonical_tail_rule(self.tail_rule))

    def __hash__(self):
        return hash((tuple(self.frozen.items()), self.free_sites, self.tail_rule))

    @classmethod
    def interval(cls, lo: int, hi: int, tail_rule: str = "none",
                 frozen: Mapping[int, int] | None = None) -> "FrozenConstraint":
        """All sites of [lo, hi] free except those listed in ``frozen``."""
        frozen = dict(frozen or {})
        return cls(frozen, tuple(s for s in range(lo, hi + 1) if s not in frozen), tail_rule)

    @property
    def free_window(self) -> tuple[int, int]:
        return self.free_sites[0], self.free_sites[-1]

    @property
    def hull(self) -> tuple[int, int]:
        lo, hi = self.free_window
        if self.frozen:
            keys = list(self.frozen)
            lo, hi = min(lo, keys[0]), max(hi, keys[-1])
        return lo, hi

    @property
    def positions(self) -> np.ndarray:
        return np.array(self.free_sites, dtype=np.int64)

    def frozen_extent(self) -> int:
        """Largest distance from a free site to an explicitly frozen one."""
        if not self.frozen:
            return 0
        keys = list(self.frozen)
        lo, hi = self.free_window
        return max(abs(keys[-1] - lo), abs(hi - keys[0]))

    def closure_cutoff(self) -> int:
        """Smallest cutoff beyond which every site, seen from any free site, is a tail site."""
        lo, hi = self.hull
        flo, fhi = self.free_window
        return max(1, fhi - lo, hi - flo)

    def spin_at(self, site: int) -> int:
        if site in self.frozen:
            return self.frozen[site]
        if site in self._free_set:
            return 0
        return int(tail_spins(self.tail_rule, np.array([site]))[0])

    @property
    def _free_set(self) -> frozenset:
        return frozenset(self.free_sites)

    def context(self, lo: int, hi: int) -> np.ndarray:
        """Frozen spins on sites lo..hi; free sites and spinless sites read 0."""
        sites = np.arange(lo, hi + 1, dtype=np.int64)
        ctx = tail_spins(self.tail_rule, sites)
        for s, v in self.frozen.items():
            if lo <= s <= hi:
                ctx[s - lo] = v
        free = self.positions
        free = free[(free >= lo) & (free <= hi)]
        ctx[free - lo] = 0
        return ctx

    def with_tail(self, tail_rule: str) -> "FrozenConstraint":
        return FrozenConstraint(self.frozen, self.free_sites, tail_rule)

    def with_free_sites(self, free_sites: Iterable[int]) -> "FrozenConstraint":
        free = set(free_sites)
        frozen = {k: v for k, v in self.frozen.items() if k not in free}
        return FrozenConstraint(frozen, tuple(free), self.tail_rule)

    def with_frozen(self, extra: Mapping[int, int]) -> "FrozenConstraint":
        """Freeze additional sites (free ones among them stop being free)."""
        frozen = dict(self.frozen)
        frozen.update(extra)
        free = tuple(s for s in self.free_sites if s not in extra)
        return FrozenConstraint(frozen, free, self.tail_rule)

    def flipped(self) -> "FrozenConstraint":
        even, odd = parse_tail_rule(self.tail_rule)
        if ALTERNATING in (even, odd):
            raise ValueError("the alternating tail has no spin-flipped counterpart rule")
        swap = {PLUS: MINUS, MINUS: PLUS, NONE: NONE}
        rule = f"even={swap[even]},odd={swap[odd]}"
        return FrozenConstraint({k: -v for k, v in self.frozen.items()}, self.free_sites, rule)

    def shifted(self, k: int) -> "FrozenConstraint":
        """Translate by k sites; k must be even when the tail rule is parity dependent."""
        even, odd = parse_tail_rule(self.tail_rule)
        if k % 2 and even != odd:
            raise ValueError("odd shifts change a parity-dependent tail rule")
        if even == ALTERNATING and k % 4:
            raise ValueError("alternating tails are only invariant under shifts by 4")
        return FrozenConstraint({s + k: v for s, v in self.frozen.items()},
                                tuple(s + k for s in self.free_sites), self.tail_rule)


Configuration = Union[SpinWindow, Mapping[int, int], Sequence[int], np.ndarray]


def coupling(params: ModelParams, r: int) -> float:
    """Pair coupling ``r**-alpha`` at lattice distance r >= 1."""
    if int(r) != r or r < 1:
        raise ValueError(f"coupling distance must be a positive integer, got {r}")
    return float(r) ** -params.alpha


@lru_cache(maxsize=64)
def coupling_table(alpha: float, rmax: int) -> np.ndarray:
    """``table[r] = r**-alpha`` for r = 1..rmax, with ``table[0] = 0``."""
    r = np.arange(rmax + 1, dtype=np.float64)
    r[0] = 1.0
    table = r ** -alpha
    table[0] = 0.0
    table.flags.writeable = False
    return table


def tail_sum(alpha: float, cutoff: int) -> float:
    """``sum_{r > cutoff} r**-alpha`` (Hurwitz zeta)."""
    return float(zeta(alpha, cutoff + 1))


def parity_tail_sum(alpha: float, cutoff: int, parity: int) -> float:
    """``sum_{r > cutoff, r = parity mod 2} r**-alpha``."""
    start = cutoff + 1 if (cutoff + 1) % 2 == parity % 2 else cutoff + 2
    return float(2.0 ** -alpha * zeta(alpha, start / 2.0))


def alternating_tail_sum(alpha: float, start: int) -> float:
    """``sum_{k >= start} (-1)**k k**-alpha`` for start >= 1."""
    sign = -1.0 if start % 2 else 1.0
    return float(sign * 2.0 ** -alpha * (zeta(alpha, start / 2.0) - zeta(alpha, (start + 1) / 2.0)))


def pair_energy(alpha: float, positions: np.ndarray, spins: np.ndarray) -> float:
    """``-sum_{a<b} |p_a - p_b|**-alpha s_a s_b`` over sorted positions."""
    positions = np.asarray(positions, dtype=np.int64)
    spins = np.asarray(spins, dtype=np.float64)
    if positions.size < 2:
        return 0.0
    table = coupling_table(alpha, int(positions[-1] - positions[0]))
    return float(_kernels.pair_energy(positions, spins, table))


def hamiltonian_free(params: ModelParams, window: SpinWindow) -> float:
    """Free-boundary energy of the window: exact double sum plus field term."""
    if len(window) == 0:
        raise ValueError("empty window")
    s = window.as_array()
    return pair_energy(params.alpha, np.arange(window.offset, window.stop), s) - params.h * float(s.sum())


def _free_spins(constraint: FrozenConstraint, sigma: Configuration) -> np.ndarray:
    """Spins of the constraint's free sites, in site order."""
    if isinstance(sigma, SpinWindow):
        if tuple(sigma.sites) != constraint.free_sites:
            raise ValueError("window sites must coincide with the free sites of the constraint")
        return sigma.as_array()
    if isinstance(sigma, Mapping):
        if set(sigma) != set(constraint.free_sites):
            raise ValueError("configuration must cover exactly the free sites")
        arr = np.array([sigma[s] for s in constraint.free_sites], dtype=np.int64)
    else:
        arr = np.asarray(sigma, dtype=np.int64)
        if arr.shape != (len(constraint.free_sites),):
            raise ValueError("configuration length differs from the number of free sites")
    if np.any(np.abs(arr) != 1):
        raise ValueError("spins must be -1 or +1")
    return arr


@lru_cache(maxsize=32)
def _truncated_fields(alpha: float, constraint: FrozenConstraint, cutoff: int) -> np.ndarray:
    pos = constraint.positions
    lo, hi = int(pos[0]) - cutoff, int(pos[-1]) + cutoff
    ctx = constraint.context(lo, hi)
    out = _kernels.truncated_fields(ctx, lo, pos, coupling_table(alpha, cutoff), cutoff)
    out.flags.writeable = False
    return out


def truncation_bound(alpha: float, constraint: FrozenConstraint, cutoff: int) -> float:
    """Bound on the energy error from dropping tail spins beyond ``cutoff``."""
    if parse_tail_rule(constraint.tail_rule) == (NONE, NONE):
        return 0.0
    return len(constraint.free_sites) * 2.0 * tail_sum(alpha, cutoff)


def effective_field(params: ModelParams, constraint: FrozenConstraint, site: int,
                    cutoff: int) -> float:
    """Field felt at a free site: frozen spins within ``cutoff`` plus ``h``.

    Spins at distance d on either side are added as one pair before being
    accumulated, outward from the site.
    """
    if site not in constraint._free_set:
        raise ValueError(f"site {site} is not free")
    if cutoff < 1:
        raise ValueError("cutoff must be a positive integer")
    ctx = constraint.context(site - cutoff, site + cutoff)
    table = coupling_table(params.alpha, cutoff)
    value = _kernels.truncated_fields(ctx, site - cutoff, np.array([site], dtype=np.int64),
                                      table, cutoff)[0]
    return float(value + params.h)


def tail_remainder(alpha: float, constraint: FrozenConstraint, site: int, cutoff: int) -> float:
    """Exact field from tail-rule spins at distance > cutoff from ``site``.

    Requires ``cutoff >= constraint.closure_cutoff()`` so that everything
    beyond the cutoff is governed by the tail rule alone.  Mirror pairs of
    alternating even spins seen from an odd site cancel, giving exactly 0.
    """
    if cutoff < constraint.closure_cutoff():
        raise ValueError("cutoff does not reach past the explicitly stored region")
    even, odd = parse_tail_rule(constraint.tail_rule)
    total = 0.0
    # Sites of parity p sit at distances r with r = p - site (mod 2).
    for parity, comp in ((0, even), (1, odd)):
        spin = _COMPONENT_SPIN.get(comp, 0)
        if spin:
            total += 2.0 * spin * parity_tail_sum(alpha, cutoff, (parity - site) % 2)
    if even == ALTERNATING and site % 2 == 0:
        sign = -1.0 if (site // 2) % 2 else 1.0
        total += 2.0 * sign * 2.0 ** -alpha * alternating_tail_sum(alpha, cutoff // 2 + 1)
    return total


def field_profile(params: ModelParams, constraint: FrozenConstraint, cutoff: int | None = None,
                  closed: bool = True) -> FieldProfile:
    """Effective fields of all free sites.

    With ``closed=True`` the tail beyond the cutoff is added in closed form
    and ``tail_bound`` is 0; otherwise the sum is truncated and the bound
    on the dropped part is reported.
    """
    need = constraint.closure_cutoff() if closed else max(1, constraint.frozen_extent())
    cutoff = need if cutoff is None else int(cutoff)
    if cutoff < need:
        raise ValueError(f"cutoff {cutoff} is smaller than the required extent {need}")
    values = np.array(_truncated_fields(params.alpha, constraint, cutoff)) + params.h
    if closed:
        values += np.array([tail_remainder(params.alpha, constraint, s, cutoff)
                            for s in constraint.free_sites])
        bound = 0.0
    else:
        bound = truncation_bound(params.alpha, constraint, cutoff)
    values.flags.writeable = False
    return FieldProfile(constraint.positions, values, bound)


def hamiltonian_bc(params: ModelParams, sigma: Configuration, constraint: FrozenConstraint,
                   cutoff: int) -> tuple[float, float]:
    """Energy of the free spins given the frozen/tail spins, truncated at ``cutoff``.

    Returns ``(energy, tail_bound)`` where ``tail_bound`` bounds the change
    from including tail spins beyond the cutoff.
    """
    cutoff = int(cutoff)
    if cutoff < max(1, constraint.frozen_extent()):
        raise ValueError(f"cutoff {cutoff} does not cover the explicitly frozen spins "
                         f"(extent {constraint.frozen_extent()})")
    s = _free_spins(constraint, sigma)
    fields = _truncated_fields(params.alpha, constraint, cutoff)
    energy = (pair_energy(params.alpha, constraint.positions, s)
              - float(np.dot(fields, s)) - params.h * float(s.sum()))
    return energy, truncation_bound(params.alpha, constraint, cutoff)


@dataclass(frozen=True)
class FieldBoundsReport:
    """Extremes of the effective field over the odd free sites of a probe geometry.

    ``central_*`` covers odd sites with |x| < 2L, ``annulus_*`` odd sites with
    2L < |x| < 2N.  Both are computed with the origin pinned to its
    alternating value +1; ``origin_field`` is the field at the (free) origin.
    """

    L: int
    N: int
    central_min: float
    central_max: float
    annulus_min: float
    annulus_max: float
    origin_field: float

    @property
    def central_positive(self) -> bool:
        return self.central_min > 0.0

    @property
    def central_negative(self) -> bool:
        return self.central_max < 0.0


def field_bounds_check(params: ModelParams, L: int, N: int, constraint: FrozenConstraint,
                       cutoff: int | None = None) -> FieldBoundsReport:
    """Signs and sizes of the fields the frozen even spins induce on odd sites."""
    if not N > L >= 1:
        raise ValueError("need N > L >= 1")
    origin = field_profile(params, constraint, cutoff)[0] if 0 in constraint._free_set else math.nan
    pinned = constraint.with_frozen({0: 1}) if 0 in constraint._free_set else constraint
    prof = field_profile(params, pinned, cutoff)
    x = prof.sites
    odd = (x % 2) != 0
    central = prof.values[odd & (np.abs(x) < 2 * L)]
    annulus = prof.values[odd & (np.abs(x) > 2 * L) & (np.abs(x) < 2 * N)]
    if central.size == 0 or annulus.size == 0:
        raise ValueError("constraint has no free odd sites in the central interval or annulus")
    return FieldBoundsReport(L, N, float(central.min()), float(central.max()),
                             float(annulus.min()), float(annulus.max()), float(origin))
