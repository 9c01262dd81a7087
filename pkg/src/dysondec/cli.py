"""Command-line front end: flat key-value configs in, CSV or JSON out.

``dysondec <command> [--config PATH] [--seed U64] [--out PATH] [--format csv|json]``

Every output starts with a ``#`` block holding the fully resolved config
(so the file reproduces itself), the RNG and a build identifier.  Exit
codes: 0 success, 1 contract or invariant violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import platform
import sys
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numba
import numpy as np

from . import __version__
from .constraints import (ProbeGeometry, alternating_constraint, boundary_bound,
                          build_probe_constraint, choose_N, exact_boundary_sum)
from .exact import (EnumerationCapError, KernelQuery, dlr_check, gibbs_exact,
                    monotonicity_check)
from .lattice import FrozenConstraint, ModelParams, canonical_tail_rule, field_profile
from .mcmc import ALGORITHMS, RNG_ALGORITHM, ChainConfig, sample
from .observables import Observable
from .probe import (DEFAULT_MAX_FREE_SITES, DEFAULT_TAIL, OVERRIDE_TAILS, ProbeResult,
                    discontinuity_probe, hidden_transition_scan, ladder_geometry)

COMMANDS = ("exact", "sample", "probe", "scan", "check")
FORMATS = ("csv", "json")
SEEDED = ("sample", "probe", "scan")
EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2

PROBE_COLUMNS = ("L", "N", "annulus_sign", "tail_rule", "M_mean", "M_stderr", "gap_mean",
                 "gap_stderr", "boundary_bound", "sweeps", "seed")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending line when there is one."""


def build_id() -> str:
    return (f"dysondec-{__version__} python-{platform.python_version()} "
            f"numpy-{np.__version__} numba-{numba.__version__}")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; ``chain`` is set whenever a seed is known."""

    command: str
    model: ModelParams
    geometry: ProbeGeometry | None = None
    chain: ChainConfig | None = None
    output_path: str = "-"
    format: str = "csv"
    observable: Observable = field(default_factory=Observable.spin)
    volume: tuple[int, int] = (-2, 2)
    boundary: str = "none"
    tail_rule: str = DEFAULT_TAIL
    tail_variants: tuple[str, ...] = OVERRIDE_TAILS
    L_list: tuple[int, ...] = ()
    betas: tuple[float, ...] = ()
    max_free_sites: int = DEFAULT_MAX_FREE_SITES
    exact: str = "auto"
    check_instances: int = 50
    workers: int = 1


def _int(v: str) -> int:
    return int(v, 0)


def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"{v!r} is not finite")
    return x


def _choice(options) -> Callable[[str], str]:
    def parse(v: str) -> str:
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _list(item) -> Callable[[str], tuple]:
    return lambda v: tuple(item(x) for x in v.split(",") if x.strip()) if v.strip() else ()


def _tail(v: str) -> str:
    return canonical_tail_rule(v)


def _tails(v: str) -> tuple[str, ...]:
    return tuple(canonical_tail_rule(x) for x in v.split(";") if x.strip())


def _interval(v: str) -> tuple[int, int]:
    lo, hi = (int(x) for x in v.split(","))
    if hi < lo:
        raise ValueError("interval must read lo,hi with lo <= hi")
    return lo, hi


_KEYS: dict[str, Callable[[str], Any]] = {
    "command": _choice(COMMANDS),
    "alpha": _float, "beta": _float, "h": _float,
    "L": _int, "N": _int, "annulus_sign": _int, "window_margin": _int,
    "sweeps": _int, "burn_in": _int, "seed": _int, "algorithm": _choice(ALGORITHMS),
    "measure_every": _int, "n_batches": _int,
    "output_path": str, "format": _choice(FORMATS),
    "observable": Observable.parse, "volume": _interval, "boundary": _tail,
    "tail_rule": _tail, "tail_variants": _tails,
    "L_list": _list(_int), "betas": _list(_float),
    "max_free_sites": _int, "exact": _choice(("auto", "yes", "no")),
    "check_instances": _int, "workers": _int,
}
_CHAIN_DEFAULTS = {"sweeps": 20000, "burn_in": 2000, "algorithm": "cluster",
                   "measure_every": 1, "n_batches": 50}


def _read_pairs(text: str) -> dict[str, tuple[int, str]]:
    pairs: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} "
                              f"(first set on line {pairs[key][0]})")
        pairs[key] = (lineno, value)
    return pairs


def parse_config(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Validate a flat ``key = value`` document; ``overrides`` win over file keys."""
    pairs = _read_pairs(text)
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"command line: unknown key {key!r}")
        pairs[key] = (0, value)
    values: dict[str, Any] = {}
    for key, (lineno, raw) in pairs.items():
        where = f"line {lineno}" if lineno else "command line"
        try:
            values[key] = _KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None

    def where(key: str) -> str:
        if key not in pairs:
            return "config"
        return f"line {pairs[key][0]}" if pairs[key][0] else "command line"

    end = f"line {len(text.splitlines()) + 1} (end of input)"
    if values.get("command") == "check":
        # the suites carry their own corpus; the model only feeds the header
        values.setdefault("alpha", 1.5)
        values.setdefault("beta", 5.0)
    for key in ("command", "alpha", "beta"):
        if key not in values:
            raise ConfigError(f"{end}: missing required key {key!r}")
    command = values["command"]
    try:
        model = ModelParams(values["alpha"], values["beta"], values.get("h", 0.0))
    except ValueError as exc:
        key = "alpha" if "alpha" in str(exc) else "beta" if "beta" in str(exc) else "h"
        hint = " (couplings r^-alpha are only summable for alpha > 1)" if key == "alpha" else ""
        raise ConfigError(f"{where(key)}: {exc}{hint}") from None

    geometry = None
    if "L" in values:
        L = values["L"]
        N = values.get("N")
        if N is None:
            try:
                N = max(choose_N(model.alpha, L), L + 1)
            except ValueError as exc:
                raise ConfigError(f"{where('L')}: {exc}") from None
        try:
            geometry = ProbeGeometry(L, N, values.get("annulus_sign", 1),
                                     values.get("window_margin"))
        except ValueError as exc:
            raise ConfigError(f"{where('L')}: {exc}") from None
    elif any(k in values for k in ("N", "annulus_sign", "window_margin")):
        raise ConfigError(f"{where('N')}: geometry keys need L")
    if command == "probe" and geometry is None and not values.get("L_list"):
        raise ConfigError(f"{end}: command 'probe' needs L or L_list")
    if command == "scan" and not values.get("betas"):
        raise ConfigError(f"{end}: command 'scan' needs betas")

    chain = None
    if "seed" in values:
        kw = {k: values.get(k, d) for k, d in _CHAIN_DEFAULTS.items()}
        try:
            chain = ChainConfig(seed=values["seed"], **kw)
        except ValueError as exc:
            raise ConfigError(f"{where('seed')}: {exc}") from None
    elif command in SEEDED:
        raise ConfigError(f"{end}: command {command!r} needs a seed (config key or --seed)")

    extras = {k: values[k] for k in ("output_path", "format", "observable", "volume", "boundary",
                                     "tail_rule", "tail_variants", "L_list", "betas",
                                     "max_free_sites", "exact", "check_instances", "workers")
              if k in values}
    if extras.get("workers", 1) < 1 or extras.get("check_instances", 1) < 1:
        raise ConfigError(f"{where('workers')}: workers and check_instances must be positive")
    return RunConfig(command, model, geometry, chain, **extras)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def config_items(config: RunConfig) -> list[tuple[str, str]]:
    """Resolved ``(key, value)`` pairs, defaults included, in a fixed order."""
    items = [("command", config.command), ("alpha", _fmt(config.model.alpha)),
             ("beta", _fmt(config.model.beta)), ("h", _fmt(config.model.h))]
    g = config.geometry
    if g is not None:
        items += [("L", str(g.L)), ("N", str(g.N)), ("annulus_sign", str(g.annulus_sign)),
                  ("window_margin", str(g.window_margin))]
    c = config.chain
    if c is not None:
        items += [("sweeps", str(c.sweeps)), ("burn_in", str(c.burn_in)), ("seed", str(c.seed)),
                  ("algorithm", c.algorithm), ("measure_every", str(c.measure_every)),
                  ("n_batches", str(c.n_batches))]
    items += [("output_path", config.output_path), ("format", config.format),
              ("observable", str(config.observable)), ("volume", _fmt(config.volume)),
              ("boundary", config.boundary), ("tail_rule", config.tail_rule),
              ("tail_variants", ";".join(config.tail_variants)),
              ("L_list", _fmt(config.L_list)), ("betas", _fmt(config.betas)),
              ("max_free_sites", str(config.max_free_sites)), ("exact", config.exact),
              ("check_instances", str(config.check_instances)), ("workers", str(config.workers))]
    return items


def emit_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_items(config))


# ---------------------------------------------------------------- commands

def _exact_flag(config: RunConfig) -> bool | None:
    return {"auto": None, "yes": True, "no": False}[config.exact]


def _single_constraint(config: RunConfig) -> tuple[FrozenConstraint, str]:
    if config.geometry is not None:
        return build_probe_constraint(config.geometry, config.tail_rule), config.tail_rule
    lo, hi = config.volume
    return FrozenConstraint.interval(lo, hi, config.boundary), config.boundary


def _run_exact(config: RunConfig):
    c, rule = _single_constraint(config)
    r = gibbs_exact(config.model, KernelQuery(c, config.observable))
    cols = ("free_lo", "free_hi", "n_free", "boundary", "observable", "expectation",
            "log_partition", "tail_bound")
    lo, hi = c.free_window
    return cols, [(lo, hi, len(c.free_sites), rule, str(config.observable), r.expectation,
                   r.log_partition, r.tail_bound)]


def _run_sample(config: RunConfig):
    c, rule = _single_constraint(config)
    e = sample(config.model, c, config.observable, config.chain)
    cols = ("free_lo", "free_hi", "n_free", "boundary", "observable", "algorithm", "mean",
            "std_error", "n_samples", "autocorr_hint", "sweeps", "seed")
    lo, hi = c.free_window
    return cols, [(lo, hi, len(c.free_sites), rule, str(config.observable),
                   config.chain.algorithm, e.mean, e.std_error, e.n_samples, e.autocorr_hint,
                   config.chain.sweeps, config.chain.seed)]


def _probe_rows(r: ProbeResult, default_tail: str, seed: int) -> list[tuple]:
    sweeps = r.chain.sweeps if r.chain is not None else 0  # 0 marks exact enumeration
    g = r.geometry
    rows = []
    sets = [(default_tail, r.M_plus, r.M_minus)]
    sets += [(v.tail_rule, v.M_plus, v.M_minus) for v in r.tail_variants]
    for tail, mp, mm in sets:
        gap = mp.minus(mm)
        for sign, m in ((1, mp), (-1, mm)):
            rows.append((g.L, g.N, sign, tail, m.mean, m.std_error, gap.mean, gap.std_error,
                         r.boundary_bound_value, sweeps, seed))
    return rows


def _run_probe(config: RunConfig):
    if config.geometry is not None:
        geos = [(config.geometry, False)]
    else:
        geos = [ladder_geometry(config.model.alpha, L, config.max_free_sites)
                for L in config.L_list]
    variants = tuple(t for t in config.tail_variants if t != config.tail_rule)
    rows = []
    for geo, capped in geos:
        r = _probe_with_tail(config, geo, variants, capped)
        rows += _probe_rows(r, config.tail_rule, config.chain.seed)
    return PROBE_COLUMNS, rows


def _probe_with_tail(config, geo, variants, capped) -> ProbeResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the size-law warning is expected for user-set N
        return discontinuity_probe(config.model, geo, config.chain, variants,
                                   _exact_flag(config), capped, config.workers,
                                   config.tail_rule)


def _run_scan(config: RunConfig):
    Ls = config.L_list or ((config.geometry.L,) if config.geometry else (4,))
    scan = hidden_transition_scan(config.model, config.betas, Ls, config.chain,
                                  _exact_flag(config), workers=config.workers)
    cols = ("beta", "L", "M_plus_mean", "M_plus_stderr", "M_minus_mean", "M_minus_stderr",
            "gap_mean", "gap_stderr", "sweeps", "seed")
    rows = [(p.value, p.L, p.upper.mean, p.upper.std_error, p.lower.mean, p.lower.std_error,
             p.gap.mean, p.gap.std_error, config.chain.sweeps, config.chain.seed)
            for p in scan.points]
    return cols, rows


def check_suites(seed: int = 0, n_instances: int = 50) -> list[tuple[str, int, int]]:
    """Invariant suites: ``(name, passed, total)`` for each."""
    rng = np.random.default_rng(seed)
    results = []

    passed = 0
    for _ in range(n_instances):
        alpha = float(rng.choice([1.3, 1.5, 2.0, 3.0]))
        beta = float(rng.choice([0.2, 1.0, 5.0]))
        n = int(rng.integers(3, 11))
        lo = -int(rng.integers(0, n))
        a = int(rng.integers(lo, lo + n - 1))
        b = int(rng.integers(a, lo + n - 1))
        frozen = {s: int(rng.choice([-1, 1])) for s in range(lo - 6, lo + n + 6)
                  if not lo <= s < lo + n}
        c = FrozenConstraint(frozen, tuple(range(lo, lo + n)),
                             str(rng.choice(["none", "all-plus", "all-minus", "alternating-even"])))
        p = ModelParams(alpha, beta, float(rng.normal(scale=0.5)))
        obs = Observable.spin(int(rng.integers(a, b + 1)))
        passed += dlr_check(p, (a, b), (lo, lo + n - 1), c, obs) < 1e-10
    results.append(("dlr", passed, n_instances))

    mono = [((0,), (-2, -1, 1, 2), 1.5, 1.0, "none"),
            ((0,), (-2, -1, 1, 2), 1.5, 0.0, "none"),
            ((-1, 0, 1), tuple(range(-7, -1)) + tuple(range(2, 8)), 1.5, 1.0, "all-plus"),
            ((-1, 0, 1), tuple(range(-7, -1)) + tuple(range(2, 8)), 2.0, 5.0, "all-minus"),
            ((0, 1), tuple(range(-6, 0)) + tuple(range(2, 8)), 1.3, 0.2, "alternating-even")]
    passed = sum(monotonicity_check(ModelParams(a, b), vol, Observable.spin(0), win, tail) == 0
                 for vol, win, a, b, tail in mono)
    results.append(("monotonicity", passed, len(mono)))

    passed = 0
    alphas = (1.3, 1.5, 2.0)
    for alpha in alphas:
        prof = field_profile(ModelParams(alpha, 1.0), alternating_constraint(101), cutoff=100000)
        passed += bool(np.all(prof.values == 0.0))
    results.append(("cancellation", passed, len(alphas)))

    grid = [(a, L) for a in (1.3, 1.5, 2.0) for L in (5, 10, 20)]
    passed = 0
    for alpha, L in grid:
        N = max(choose_N(alpha, L), L)
        passed += exact_boundary_sum(alpha, L, N) <= boundary_bound(alpha, L, N)
    results.append(("bound_soundness", passed, len(grid)))
    return results


def _run_check(config: RunConfig):
    seed = config.chain.seed if config.chain is not None else 0
    rows = [(name, ok, total, "pass" if ok == total else "FAIL")
            for name, ok, total in check_suites(seed, config.check_instances)]
    return ("suite", "passed", "total", "status"), rows


_RUNNERS = {"exact": _run_exact, "sample": _run_sample, "probe": _run_probe,
            "scan": _run_scan, "check": _run_check}


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render(config: RunConfig, columns, rows) -> str:
    """Header block plus data section in the configured format."""
    out = io.StringIO()
    for k, v in config_items(config):
        out.write(f"# {k} = {v}\n")
    out.write(f"# rng = {RNG_ALGORITHM}\n")
    out.write(f"# build = {build_id()}\n")
    if config.format == "csv":
        out.write(",".join(columns) + "\n")
        for row in rows:
            out.write(",".join(_cell(v) for v in row) + "\n")
    else:
        data = {"columns": list(columns),
                "rows": [[float(_cell(v)) if isinstance(v, (float, np.floating)) else
                          (int(v) if isinstance(v, (int, np.integer)) and not isinstance(v, bool)
                           else v) for v in row] for row in rows]}
        out.write(json.dumps(data, indent=1) + "\n")
    return out.getvalue()


def data_section(text: str) -> str:
    """The output without its ``#`` metadata lines."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def run(config: RunConfig, stdout=None) -> int:
    """Execute the command and write its output; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        columns, rows = _RUNNERS[config.command](config)
    except (ValueError, EnumerationCapError) as exc:
        print(f"dysondec: {config.command} failed: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    text = render(config, columns, rows)
    if config.output_path == "-":
        stdout.write(text)
    else:
        with open(config.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if config.command == "check":
        failed = [r[0] for r in rows if r[3] != "pass"]
        if failed:
            print(f"dysondec: invariant suites failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_VIOLATION
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="dysondec", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key = value file")
    ap.add_argument("--seed", help="64-bit seed (overrides the config)")
    ap.add_argument("--out", help="output path, '-' for stdout")
    ap.add_argument("--format", choices=FORMATS)
    args = ap.parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"dysondec: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    overrides = {"command": args.command}
    for key, value in (("seed", args.seed), ("output_path", args.out), ("format", args.format)):
        if value is not None:
            overrides[key] = value
    try:
        config = parse_config(text, overrides)
    except ConfigError as exc:
        print(f"dysondec: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
