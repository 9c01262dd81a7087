import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dysondec.exact import (EnumerationCapError, KernelQuery, boundary_expectations, dlr_check,
                            finite_volume_mu_minus, finite_volume_mu_plus, gibbs_exact,
                            monotonicity_check)
from dysondec.lattice import FrozenConstraint, ModelParams, field_profile
from dysondec.observables import Observable


def test_infinite_temperature_is_uniform():
    q = KernelQuery.interval(-3, 4, "all-plus")
    assert gibbs_exact(ModelParams(1.5, 0.0), q).expectation == 0.0
    assert gibbs_exact(ModelParams(1.5, 0.0), q).log_partition == pytest.approx(8 * math.log(2))


def test_single_site_plus_boundary_is_tanh_of_field():
    p = ModelParams(2.0, 1.0)
    partial, bound = oracles.zeta_partial(2.0, 1, 10 ** 6)
    field = 2 * partial  # field lies in [field, field + 2 bound]
    got = gibbs_exact(p, KernelQuery.interval(0, 0, "all-plus")).expectation
    assert math.tanh(field) <= got <= math.tanh(field + 2 * bound) + 1e-15
    minus = gibbs_exact(p, KernelQuery.interval(0, 0, "all-minus")).expectation
    assert minus == pytest.approx(-got, abs=1e-15)


def test_cap_is_refused_not_sampled():
    with pytest.raises(EnumerationCapError):
        KernelQuery.interval(0, 20)
    with pytest.raises(EnumerationCapError):
        finite_volume_mu_plus(ModelParams(1.5, 1), (-10, 10))


def test_observable_support_must_be_free():
    with pytest.raises(ValueError):
        KernelQuery(FrozenConstraint.interval(0, 3), Observable.spin(7))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([1.3, 1.5, 2.0, 3.0]), st.floats(0, 3), st.floats(-1, 1),
       st.dictionaries(st.integers(-7, 7).filter(lambda s: not -2 <= s <= 2),
                       st.sampled_from([-1, 1]), max_size=10),
       st.sampled_from(["spin:0", "product:-2,1", "pattern:-1=+,2=-", "magnetization"]))
def test_gibbs_exact_matches_itertools_enumeration(alpha, beta, h, frozen, obs_text):
    free = (-2, -1, 0, 1, 2)
    obs = Observable.parse(obs_text)
    q = KernelQuery(FrozenConstraint(frozen, free, "none"), obs)
    got = gibbs_exact(ModelParams(alpha, beta, h), q).expectation
    ref = oracles.kernel_expectation(alpha, beta, h, free, frozen, obs.evaluate)
    assert got == pytest.approx(ref, abs=1e-12)


def test_truncated_query_reports_energy_bound():
    p = ModelParams(1.5, 0.7)
    closed = gibbs_exact(p, KernelQuery.interval(-1, 1, "all-plus"))
    cut = gibbs_exact(p, KernelQuery.interval(-1, 1, "all-plus", cutoff=50))
    assert closed.tail_bound == 0.0
    assert cut.tail_bound > 0
    # an energy shift of at most b moves log Z by at most beta b
    assert abs(cut.log_partition - closed.log_partition) <= p.beta * cut.tail_bound


@pytest.mark.parametrize("beta", [1.0, 50.0])
def test_large_beta_stays_finite(beta):
    r = gibbs_exact(ModelParams(1.3, beta, 0.2), KernelQuery.interval(-5, 5, "alternating-even"))
    assert math.isfinite(r.log_partition)
    assert abs(r.expectation) <= 1.0


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_dlr_single_site_in_three(alpha):
    rng = np.random.default_rng(11)
    frozen = {s: int(rng.choice([-1, 1])) for s in range(-6, 7) if abs(s) > 1}
    c = FrozenConstraint(frozen, (-1, 0, 1), "all-minus")
    assert dlr_check(ModelParams(alpha, 1.0), (0, 0), (-1, 1), c, Observable.spin(0)) < 1e-10


def test_dlr_at_infinite_temperature():
    c = FrozenConstraint.interval(-3, 3, "all-plus")
    r = dlr_check(ModelParams(2.0, 0.0), (-1, 0), (-3, 3), c, Observable.product(-1, 2))
    assert r < 1e-15


def test_dlr_inner_kernel_agrees_with_separately_frozen_kernel():
    # the composed side re-derives the inner kernel; compare one row by hand
    p = ModelParams(1.5, 1.3, 0.1)
    outer = FrozenConstraint.interval(-2, 2, "alternating-even")
    rest = {-2: 1, -1: -1, 2: 1}
    inner = outer.with_frozen(rest)
    ref = gibbs_exact(p, KernelQuery(inner, Observable.spin(0))).expectation
    brute = oracles.kernel_expectation(
        1.5, 1.3, 0.1, (0, 1),
        {**{j: oracles.alternating_even(j) for j in range(-4000, 4001, 2) if j not in (0,)
            and abs(j) > 2}, **rest}, lambda s: s[0])
    assert ref == pytest.approx(brute, abs=1e-3)


def test_dlr_rejects_bad_nesting():
    c = FrozenConstraint.interval(-1, 1)
    with pytest.raises(ValueError):
        dlr_check(ModelParams(2, 1), (-1, 1), (-1, 1), c, Observable.spin(0))


def test_monotonicity_small_window():
    p = ModelParams(1.5, 1.0)
    assert monotonicity_check(p, (0,), Observable.spin(0), (-2, -1, 1, 2)) == 0


def test_monotonicity_at_infinite_temperature_is_flat():
    vals = boundary_expectations(ModelParams(1.5, 0.0), (0,), Observable.spin(0), (-2, -1, 1, 2))
    assert np.all(vals == 0.0)


def test_monotonicity_detects_a_non_increasing_observable():
    with pytest.raises(ValueError):
        monotonicity_check(ModelParams(1.5, 1), (0,), Observable.indicator({0: -1}), (1, 2))


def test_boundary_expectations_match_direct_kernels():
    p = ModelParams(2.0, 0.8, 0.1)
    bsites = (-2, 2, 3)
    vals = boundary_expectations(p, (-1, 0, 1), Observable.spin(0), bsites, "all-minus")
    for pattern in (0, 5, 7):
        frozen = {s: 1 if (pattern >> j) & 1 else -1 for j, s in enumerate(bsites)}
        c = FrozenConstraint(frozen, (-1, 0, 1), "all-minus")
        ref = gibbs_exact(p, KernelQuery(c, Observable.spin(0))).expectation
        assert vals[pattern] == pytest.approx(ref, abs=1e-12)


def test_extreme_boundaries_are_strictly_ordered():
    p = ModelParams(1.5, 1.0)
    vals = boundary_expectations(p, (0,), Observable.spin(0), (-2, -1, 1, 2))
    assert vals[0] < vals[-1]


@given(st.sampled_from([1.2, 1.5, 2.0, 3.0]), st.floats(0.05, 5))
def test_mu_plus_dominates_mu_minus(alpha, beta):
    p = ModelParams(alpha, beta)
    assert finite_volume_mu_plus(p, (-2, 2)) >= finite_volume_mu_minus(p, (-2, 2))


def test_strong_field_saturates_both_boundaries():
    p = ModelParams(1.5, 2.0, 40.0)
    assert finite_volume_mu_plus(p, (-2, 2)) > 1 - 1e-12
    assert finite_volume_mu_minus(p, (-2, 2)) > 1 - 1e-12


@pytest.mark.parametrize("alpha,beta", [(1.5, 1.0), (2.0, 0.5), (3.0, 2.0)])
def test_mu_plus_decreases_along_nested_volumes(alpha, beta):
    p = ModelParams(alpha, beta)
    values = [finite_volume_mu_plus(p, (-w, w)) for w in (1, 2, 3)]
    assert values[0] >= values[1] >= values[2]
    lows = [finite_volume_mu_minus(p, (-w, w)) for w in (1, 2, 3)]
    assert lows[0] <= lows[1] <= lows[2]


def test_sandwich_any_boundary_between_extremes():
    p = ModelParams(1.5, 0.9)
    rng = np.random.default_rng(2)
    lo, hi = finite_volume_mu_minus(p, (-2, 2)), finite_volume_mu_plus(p, (-2, 2))
    for _ in range(10):
        frozen = {s: int(rng.choice([-1, 1])) for s in range(-12, 13) if abs(s) > 2}
        c = FrozenConstraint(frozen, tuple(range(-2, 3)), str(rng.choice(["all-plus", "all-minus"])))
        mid = gibbs_exact(p, KernelQuery(c)).expectation
        assert lo - 1e-12 <= mid <= hi + 1e-12


def test_fields_used_by_kernel_are_closed_form():
    # the kernel uses exactly the profile fields: a single free spin sees tanh(beta f)
    p = ModelParams(1.3, 0.4, 0.05)
    c = FrozenConstraint({-3: 1, 4: -1}, (0,), "even=alternating,odd=plus")
    f = field_profile(p, c)[0]
    assert gibbs_exact(p, KernelQuery(c)).expectation == pytest.approx(math.tanh(p.beta * f),
                                                                       abs=1e-14)
