"""Experiments built on the constrained measures.

* the discontinuity probe: conditional spin at the origin under plus and
  minus annuli around the alternating image pattern, with tail overrides;
* the hidden-transition scan of the odd sublattice under alternating evens;
* high-field uniqueness and alpha > 2 controls.

Independent chains fan out over a thread pool when ``workers > 1``; the
compiled chains release the GIL.  Each job carries its own seed stream, so
results do not depend on the worker count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .constraints import (ProbeGeometry, alternating_constraint, boundary_bound,
                          build_probe_constraint, choose_N, constrained_model_rescale)
from .exact import ENUMERATION_CAP, KernelQuery, gibbs_exact
from .lattice import FrozenConstraint, ModelParams
from .mcmc import ChainConfig, Estimate, chain_rng, sample
from .observables import Observable

DEFAULT_TAIL = "alternating-even"
OVERRIDE_TAILS = ("all-plus", "all-minus")
DEFAULT_MAX_FREE_SITES = 1025


@dataclass(frozen=True)
class TailVariant:
    tail_rule: str
    M_plus: Estimate
    M_minus: Estimate


@dataclass(frozen=True)
class ProbeResult:
    """Conditional origin spin under both annulus signs and its tail robustness.

    ``capped`` is set when the annulus had to be shrunk below the size law
    to fit the free-site budget, in which case the large-L behaviour is not
    being tested.
    """

    geometry: ProbeGeometry
    params: ModelParams
    chain: ChainConfig | None
    M_plus: Estimate
    M_minus: Estimate
    gap: Estimate
    boundary_bound_value: float
    tail_variants: tuple[TailVariant, ...] = ()
    capped: bool = False

    @property
    def method(self) -> str:
        return self.M_plus.method

    def tail_shifts(self) -> list[tuple[str, int, float, float]]:
        """``(tail_rule, sign, |shift|, combined std_error)`` per variant and annulus sign."""
        rows = []
        for v in self.tail_variants:
            for sign, base, other in ((1, self.M_plus, v.M_plus), (-1, self.M_minus, v.M_minus)):
                d = base.minus(other)
                rows.append((v.tail_rule, sign, abs(d.mean), d.std_error))
        return rows

    def tails_robust(self, k: float = 3.0) -> bool:
        return all(shift < self.boundary_bound_value + k * err
                   for _, _, shift, err in self.tail_shifts())


@dataclass(frozen=True)
class ScanPoint:
    """One scan coordinate: estimates under the upper and lower boundary and their gap."""

    value: float
    L: int
    upper: Estimate
    lower: Estimate
    gap: Estimate
    probe: ProbeResult | None = None


@dataclass(frozen=True)
class ScanResult:
    axis: str
    points: tuple[ScanPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.axis not in ("beta", "L", "alpha", "volume"):
            raise ValueError(f"unknown scan axis {self.axis!r}")
        pts = tuple(sorted(self.points, key=lambda p: (p.value, p.L)))
        object.__setattr__(self, "points", pts)

    def series(self, L: int | None = None) -> list[ScanPoint]:
        return [p for p in self.points if L is None or p.L == L]


def _run_jobs(jobs: Sequence[Callable[[], object]], workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def _measure(params: ModelParams, constraint: FrozenConstraint, observable: Observable,
             chain: ChainConfig | None, stream: tuple[int, ...], exact: bool) -> Estimate:
    if exact:
        return Estimate.exact(gibbs_exact(params, KernelQuery(constraint, observable)).expectation)
    if chain is None:
        raise ValueError(f"{len(constraint.free_sites)} free sites exceed the enumeration cap "
                         "and no chain configuration was given")
    return sample(params, constraint, observable, chain, rng=chain_rng(chain.seed, *stream))


def _use_exact(n_free: int, exact: bool | None) -> bool:
    if exact is None:
        return n_free <= ENUMERATION_CAP
    if exact and n_free > ENUMERATION_CAP:
        raise ValueError(f"{n_free} free sites exceed the enumeration cap of {ENUMERATION_CAP}")
    return exact


def discontinuity_probe(params: ModelParams, geometry: ProbeGeometry,
                        chain: ChainConfig | None = None,
                        tail_variants: Iterable[str] = OVERRIDE_TAILS,
                        exact: bool | None = None, capped: bool = False,
                        workers: int = 1, default_tail: str = DEFAULT_TAIL) -> ProbeResult:
    """Origin spin under plus and minus annuli, and under overridden tails.

    Exact enumeration is used when the free window fits the cap (unless
    ``exact=False``).  Chain streams: key (2k, s) for tail variant k (0 is
    the default tail) and annulus sign index s.
    """
    if params.dyson_regime and geometry.N < choose_N(params.alpha, geometry.L):
        warnings.warn(f"N={geometry.N} is below the size law N(L)="
                      f"{choose_N(params.alpha, geometry.L)}", stacklevel=2)
    use_exact = _use_exact(geometry.n_free, exact)
    obs = Observable.spin(0)
    tails = [default_tail, *tail_variants]
    jobs = []
    for k, tail in enumerate(tails):
        for s, geo in enumerate((geometry if geometry.annulus_sign > 0 else geometry.flipped(),
                                 geometry.flipped() if geometry.annulus_sign > 0 else geometry)):
            c = build_probe_constraint(geo, tail)
            jobs.append(lambda c=c, key=(2 * k, s): _measure(params, c, obs, chain, key, use_exact))
    results = _run_jobs(jobs, workers)
    m_plus, m_minus = results[0], results[1]
    variants = tuple(TailVariant(t, results[2 * k], results[2 * k + 1])
                     for k, t in enumerate(tails) if k > 0)
    return ProbeResult(geometry, params, None if use_exact else chain, m_plus, m_minus,
                       m_plus.minus(m_minus), boundary_bound(params.alpha, geometry.L, geometry.N),
                       variants, capped)


def ladder_geometry(alpha: float, L: int, max_free_sites: int = DEFAULT_MAX_FREE_SITES,
                    N: int | None = None) -> tuple[ProbeGeometry, bool]:
    """Geometry for one rung: N from the size law (at least L+1), default margin 2N.

    If the free window would exceed ``max_free_sites`` the annulus is
    shrunk to fit and the returned flag is True.
    """
    if N is None:
        N = max(choose_N(alpha, L), L + 1)
    largest = (max_free_sites - 1) // 4  # 4N + 1 free sites at margin 2N
    capped = N > largest
    if capped:
        N = largest
    if N <= L:
        raise ValueError(f"a budget of {max_free_sites} free sites leaves no annulus at L={L}")
    return ProbeGeometry(L, N), capped


def probe_ladder(params: ModelParams, L_list: Sequence[int], chain: ChainConfig | None,
                 max_free_sites: int = DEFAULT_MAX_FREE_SITES, N_of_L=None,
                 tail_variants: Iterable[str] = OVERRIDE_TAILS, exact: bool | None = None,
                 workers: int = 1) -> ScanResult:
    """Discontinuity probe at each L; ``N_of_L`` overrides the size law."""
    points = []
    for L in L_list:
        geo, capped = ladder_geometry(params.alpha, L, max_free_sites,
                                      None if N_of_L is None else N_of_L(L))
        r = discontinuity_probe(params, geo, chain, tail_variants, exact, capped, workers)
        points.append(ScanPoint(L, L, r.M_plus, r.M_minus, r.gap, r))
    return ScanResult("L", tuple(points))


def hidden_transition_point(params: ModelParams, L: int, chain: ChainConfig | None,
                            exact: bool | None = None, rescaled: bool = False,
                            stream: int = 0) -> ScanPoint:
    """Odd-sublattice magnetization under plus and minus odd tails, evens alternating.

    The free window holds the odd sites with |x| <= 2L + 1.  With
    ``rescaled=True`` the same quantity is computed on the equivalent
    unconstrained chain (image sites k = -L-1 .. L, couplings scaled by
    ``2**-alpha``) instead.
    """
    obs = Observable.magnetization()
    if rescaled:
        model = constrained_model_rescale(params)
        p = model.equivalent_params
        upper = FrozenConstraint.interval(-L - 1, L, "all-plus")
        lower = FrozenConstraint.interval(-L - 1, L, "all-minus")
    else:
        p = params
        upper = alternating_constraint(2 * L + 1, "plus")
        lower = alternating_constraint(2 * L + 1, "minus")
    use_exact = _use_exact(len(upper.free_sites), exact)
    up = _measure(p, upper, obs, chain, (stream, 0), use_exact)
    lo = _measure(p, lower, obs, chain, (stream, 1), use_exact)
    return ScanPoint(params.beta, L, up, lo, up.minus(lo))


def hidden_transition_scan(params: ModelParams, betas: Sequence[float], L_list: Sequence[int],
                           chain: ChainConfig | None, exact: bool | None = None,
                           rescaled: bool = False, workers: int = 1) -> ScanResult:
    """Odd-sublattice magnetization gap across temperatures and window sizes."""
    jobs = []
    for a, beta in enumerate(betas):
        for b, L in enumerate(L_list):
            p = params.replace(beta=beta)
            jobs.append(lambda p=p, L=L, k=a * len(L_list) + b:
                        hidden_transition_point(p, L, chain, exact, rescaled, k))
    return ScanResult("beta", tuple(_run_jobs(jobs, workers)))


def uniqueness_control(params: ModelParams, half_widths: Sequence[int],
                       chain: ChainConfig | None, observable: Observable | None = None,
                       exact: bool | None = None, workers: int = 1) -> ScanResult:
    """Origin spin on [-W, W] under all-plus and all-minus boundaries for each W."""
    if params.h == 0.0:
        raise ValueError("the uniqueness control needs a nonzero field h")
    obs = observable or Observable.spin(0)

    def point(k: int, W: int) -> ScanPoint:
        upper = FrozenConstraint.interval(-W, W, "all-plus")
        lower = FrozenConstraint.interval(-W, W, "all-minus")
        use_exact = _use_exact(2 * W + 1, exact)
        up = _measure(params, upper, obs, chain, (k, 0), use_exact)
        lo = _measure(params, lower, obs, chain, (k, 1), use_exact)
        return ScanPoint(W, W, up, lo, up.minus(lo))

    jobs = [lambda k=k, W=W: point(k, W) for k, W in enumerate(half_widths)]
    return ScanResult("volume", tuple(_run_jobs(jobs, workers)))


def alpha_control(params: ModelParams, L_list: Sequence[int], chain: ChainConfig | None,
                  N_factor: int = 4, max_free_sites: int = DEFAULT_MAX_FREE_SITES,
                  exact: bool | None = None, workers: int = 1) -> ScanResult:
    """The probe outside the Dyson regime, with user-chosen ``N = N_factor * L``."""
    if params.alpha <= 2.0:
        raise ValueError("the alpha control is meant for alpha > 2")
    return probe_ladder(params, L_list, chain, max_free_sites, lambda L: N_factor * L,
                        exact=exact, workers=workers)


def alpha_scan(base: ModelParams, alphas: Sequence[float], L: int, N: int,
               chain: ChainConfig | None, exact: bool | None = None,
               workers: int = 1) -> ScanResult:
    """Probe gap at fixed geometry across decay exponents."""
    geo = ProbeGeometry(L, N)
    points = []
    for a in alphas:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = discontinuity_probe(base.replace(alpha=a), geo, chain, (), exact, workers=workers)
        points.append(ScanPoint(a, L, r.M_plus, r.M_minus, r.gap, r))
    return ScanResult("alpha", tuple(points))
