"""Closed set of local observables, serializable as short strings.

``spin:0``, ``product:0,2``, ``pattern:0=+,1=-`` and ``magnetization``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

_CODES = {
    "spin": _kernels.OBS_SPIN,
    "product": _kernels.OBS_PRODUCT,
    "pattern": _kernels.OBS_PATTERN,
    "magnetization": _kernels.OBS_MAGNETIZATION,
}


def _spin_token(v: str) -> int:
    v = v.strip()
    return {"+": 1, "-": -1}.get(v) or int(v)


@dataclass(frozen=True)
class Observable:
    """A local function of the free spins.

    ``sites`` are lattice indices; ``pattern`` (pattern observables only)
    holds the required spin at each of them.
    """

    kind: str
    sites: tuple[int, ...] = ()
    pattern: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in _CODES:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "pattern", tuple(int(s) for s in self.pattern))
        if self.kind == "spin" and len(self.sites) != 1:
            raise ValueError("spin observable takes exactly one site")
        if self.kind in ("product", "pattern") and not self.sites:
            raise ValueError(f"{self.kind} observable needs at least one site")
        if self.kind == "pattern":
            if len(self.pattern) != len(self.sites) or any(s not in (-1, 1) for s in self.pattern):
                raise ValueError("pattern needs one +-1 value per site")
        elif self.pattern:
            raise ValueError("only pattern observables carry a pattern")
        if self.kind == "magnetization" and self.sites:
            raise ValueError("magnetization averages over all free sites")

    @classmethod
    def spin(cls, site: int = 0) -> "Observable":
        return cls("spin", (site,))

    @classmethod
    def product(cls, *sites: int) -> "Observable":
        return cls("product", sites)

    @classmethod
    def indicator(cls, assignment: dict[int, int]) -> "Observable":
        items = sorted(assignment.items())
        return cls("pattern", tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def magnetization(cls) -> "Observable":
        return cls("magnetization")

    @classmethod
    def parse(cls, text: str) -> "Observable":
        text = text.strip()
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        try:
            if kind == "spin":
                return cls.spin(int(arg))
            if kind == "product":
                return cls.product(*(int(a) for a in arg.split(",")))
            if kind == "pattern":
                pairs = [a.split("=") for a in arg.split(",")]
                return cls.indicator({int(s): _spin_token(v)
                                      for s, v in pairs})
            if kind == "magnetization" and not arg:
                return cls.magnetization()
        except ValueError as exc:
            raise ValueError(f"malformed observable {text!r}: {exc}") from None
        raise ValueError(f"malformed observable {text!r}")

    def __str__(self) -> str:
        if self.kind == "magnetization":
            return "magnetization"
        if self.kind == "pattern":
            return "pattern:" + ",".join(f"{s}={'+' if v > 0 else '-'}"
                                         for s, v in zip(self.sites, self.pattern))
        return f"{self.kind}:" + ",".join(map(str, self.sites))

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    @property
    def sup_norm(self) -> float:
        return 1.0

    @property
    def increasing(self) -> bool:
        """Coordinatewise nondecreasing in the spins."""
        if self.kind in ("spin", "magnetization"):
            return True
        if self.kind == "pattern":
            return all(v == 1 for v in self.pattern)
        return len(self.sites) == 1

    def bind(self, free_sites) -> tuple[int, np.ndarray, np.ndarray]:
        """Kernel arguments ``(code, idx, pattern)`` for the given free-site ordering."""
        lookup = {int(s): a for a, s in enumerate(free_sites)}
        missing = [s for s in self.sites if s not in lookup]
        if missing:
            raise ValueError(f"observable support {missing} is not among the free sites")
        idx = np.array([lookup[s] for s in self.sites] or [0], dtype=np.int64)
        pattern = np.array(self.pattern or (0,), dtype=np.int64)
        return self.code, idx, pattern

    def evaluate(self, spins: dict[int, int]) -> float:
        """Pure-Python evaluation on a site -> spin map (reference implementation)."""
        if self.kind == "spin":
            return float(spins[self.sites[0]])
        if self.kind == "product":
            return float(np.prod([spins[s] for s in self.sites]))
        if self.kind == "pattern":
            return float(all(spins[s] == v for s, v in zip(self.sites, self.pattern)))
        return float(np.mean(list(spins.values())))
