import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dysondec.lattice import (FrozenConstraint, ModelParams, SpinWindow, coupling,
                              effective_field, field_bounds_check, field_profile,
                              hamiltonian_bc, hamiltonian_free, parse_tail_rule,
                              tail_remainder, tail_spins)
from dysondec.constraints import ProbeGeometry, alternating_constraint, build_probe_constraint

alphas = st.sampled_from([1.3, 1.5, 2.0, 2.5, 3.0])
spin_lists = st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=12)


def test_model_params_rejects_nonsummable_alpha():
    with pytest.raises(ValueError, match="alpha"):
        ModelParams(1.0, 1.0)
    with pytest.raises(ValueError, match="beta"):
        ModelParams(1.5, -0.1)


def test_dyson_regime_flag():
    assert ModelParams(2.0, 1.0).dyson_regime
    assert not ModelParams(2.5, 1.0).dyson_regime


@pytest.mark.parametrize("alpha,r,expected", [(2, 1, 1.0), (2, 2, 0.25), (1.5, 4, 0.125)])
def test_coupling_values(alpha, r, expected):
    assert coupling(ModelParams(alpha, 1.0), r) == expected


def test_coupling_rejects_self_interaction():
    with pytest.raises(ValueError):
        coupling(ModelParams(2, 1), 0)


@given(alphas, st.integers(1, 1000))
def test_coupling_positive_and_decreasing(alpha, r):
    p = ModelParams(alpha, 1.0)
    assert coupling(p, r) > coupling(p, r + 1) > 0


def test_spin_window_rejects_non_ising_values():
    with pytest.raises(ValueError):
        SpinWindow(0, (1, 0, -1))


def test_spin_window_indexing():
    w = SpinWindow(-2, (1, -1, 1))
    assert w[-2] == 1 and w[-1] == -1 and w[0] == 1
    assert 1 not in w
    with pytest.raises(IndexError):
        w[1]


@pytest.mark.parametrize("spins,expected", [((1, 1), -1.0), ((1, -1), 1.0), ((1, 1, 1), -2.25)])
def test_hamiltonian_free_small_windows(spins, expected):
    assert hamiltonian_free(ModelParams(2, 1), SpinWindow(0, spins)) == pytest.approx(expected)


@given(alphas, st.floats(-2, 2), st.integers(-50, 50), spin_lists)
def test_hamiltonian_free_matches_double_loop(alpha, h, offset, spins):
    w = SpinWindow(offset, spins)
    ref = oracles.energy(alpha, h, dict(zip(w.sites, spins)))
    assert hamiltonian_free(ModelParams(alpha, 1, h), w) == pytest.approx(ref, abs=1e-12)


@given(alphas, spin_lists, st.integers(-100, 100))
def test_hamiltonian_free_symmetries(alpha, spins, shift):
    p = ModelParams(alpha, 1.0)
    w = SpinWindow(0, spins)
    e = hamiltonian_free(p, w)
    assert hamiltonian_free(p, w.flipped()) == pytest.approx(e, abs=1e-12)
    assert hamiltonian_free(p, w.shifted(shift)) == pytest.approx(e, abs=1e-12)


def test_tail_rules_parse_and_assign():
    assert parse_tail_rule("all-plus") == ("plus", "plus")
    assert parse_tail_rule("even=alternating,odd=minus") == ("alternating", "minus")
    with pytest.raises(ValueError):
        parse_tail_rule("sideways")
    np.testing.assert_array_equal(tail_spins("alternating-even", np.arange(-4, 5)),
                                  [1, 0, -1, 0, 1, 0, -1, 0, 1])


def test_constraint_rejects_overlap():
    with pytest.raises(ValueError):
        FrozenConstraint({0: 1}, (0, 1))


def test_single_site_all_plus_energy():
    # window {0}, every other site +1: energy -> -2 zeta(2) = -pi^2/3
    c = FrozenConstraint.interval(0, 0, "all-plus")
    p = ModelParams(2, 1)
    terms = 10 ** 6
    partial, bound = oracles.zeta_partial(2.0, 1, terms)
    energy, tail = hamiltonian_bc(p, [1], c, terms)
    assert energy == pytest.approx(-2 * partial, abs=1e-9)
    assert abs(energy + math.pi ** 2 / 3) <= tail
    assert abs(-2 * partial + math.pi ** 2 / 3) <= 2 * bound


def test_tail_bound_strictly_decreases_with_cutoff():
    c = FrozenConstraint.interval(-3, 3, "all-minus")
    p = ModelParams(1.5, 1)
    s = [1, -1, 1, 1, -1, 1, 1]
    bounds = [hamiltonian_bc(p, s, c, R)[1] for R in (10, 20, 40, 80)]
    assert all(a > b for a, b in zip(bounds, bounds[1:]))


def test_hamiltonian_bc_rejects_short_cutoff():
    c = FrozenConstraint({10: 1}, (0, 1), "none")
    with pytest.raises(ValueError, match="frozen"):
        hamiltonian_bc(ModelParams(2, 1), [1, 1], c, 5)


@settings(max_examples=40, deadline=None)
@given(alphas, st.sampled_from(["all-plus", "all-minus", "alternating-even", "none",
                                "even=plus,odd=minus"]),
       st.lists(st.sampled_from([-1, 1]), min_size=5, max_size=5),
       st.integers(8, 40), st.integers(2, 6))
def test_tail_bound_is_sound(alpha, rule, spins, r1, factor):
    c = FrozenConstraint.interval(-2, 2, rule, frozen={})
    c = c.with_frozen({})  # explicit no-op keeps construction paths covered
    p = ModelParams(alpha, 1.0, 0.3)
    e1, b1 = hamiltonian_bc(p, spins, c, r1)
    e2, _ = hamiltonian_bc(p, spins, c, r1 * factor)
    assert abs(e1 - e2) <= b1


@given(alphas, st.lists(st.sampled_from([-1, 1]), min_size=3, max_size=3),
       st.dictionaries(st.integers(-8, 8).filter(lambda s: not -1 <= s <= 1),
                       st.sampled_from([-1, 1]), max_size=8))
def test_hamiltonian_bc_matches_double_loop(alpha, spins, frozen):
    c = FrozenConstraint(frozen, (-1, 0, 1), "none")
    p = ModelParams(alpha, 1.0, -0.4)
    ref = oracles.energy(alpha, -0.4, dict(zip((-1, 0, 1), spins)), frozen)
    assert hamiltonian_bc(p, spins, c, 20)[0] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.3, 1.5, 2.0, 3.0])
def test_alternating_field_vanishes_exactly_on_odd_sites(alpha):
    c = alternating_constraint(41)
    p = ModelParams(alpha, 1.0)
    for x in (-41, -7, -1, 1, 3, 41):
        assert effective_field(p, c, x, 5000) == 0.0
        assert tail_remainder(alpha, c, x, 5000) == 0.0
    assert np.all(field_profile(p, c).values == 0.0)


def test_alternating_field_at_even_origin():
    # evens 2k alternate, origin free: field = 2 sum_k (-1)^k (2k)^-alpha
    for alpha in (1.5, 2.0):
        c = FrozenConstraint({}, (0,), "alternating-even")
        partial, bound = oracles.alternating_series(alpha, 1, 200001)
        ref = 2 * 2 ** -alpha * partial
        got = field_profile(ModelParams(alpha, 1), c)[0]
        assert got < 0
        assert abs(got - ref) <= 2 * 2 ** -alpha * bound + 1e-12


def test_field_from_plus_evens_at_origin():
    # every even site but the origin +1, odd sites empty: pi^2 / 12 at alpha = 2
    c = FrozenConstraint({}, (0,), "even=plus,odd=none")
    partial, bound = oracles.zeta_partial(2.0, 1, 10 ** 6)
    got = field_profile(ModelParams(2, 1), c)[0]
    assert abs(got - 2 * partial / 4) <= 2 * bound / 4 + 1e-12
    assert got == pytest.approx(math.pi ** 2 / 12, abs=1e-12)
    truncated = effective_field(ModelParams(2, 1), c, 0, 10 ** 5)
    assert abs(truncated - got) <= 2 * oracles.power_tail_bound(2.0, 10 ** 5 + 1)


def test_homogeneous_odd_field():
    # plus odd sites at distance >= 3 around the origin (alpha = 2, L = 1)
    c = FrozenConstraint.interval(-1, 1, "even=none,odd=plus")
    partial, bound = oracles.odd_power_series(2.0, 1, 10 ** 6)
    got = field_profile(ModelParams(2, 1), c)[0]
    assert abs(got - partial) <= bound + 1e-12
    assert got == pytest.approx(2 * (math.pi ** 2 / 8 - 1), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(alphas, st.sampled_from(["all-plus", "all-minus", "alternating-even",
                                "even=alternating,odd=plus", "even=minus,odd=none"]),
       st.integers(-6, 6), st.integers(0, 30))
def test_closed_tail_matches_partial_sums(alpha, rule, site, extra):
    c = FrozenConstraint.interval(-6, 6, rule, frozen={-6: 1, 6: -1} if site not in (-6, 6) else {})
    p = ModelParams(alpha, 1.0)
    closed = field_profile(p, c)[site]
    R = 20000
    explicit = {j: int(c.spin_at(j)) for j in range(site - R, site + R + 1)
                if j != site and j not in c.free_sites}
    explicit = {j: v for j, v in explicit.items() if v}
    ref = oracles.field_from_spins(alpha, site, explicit)
    assert abs(closed - ref) <= 2 * oracles.power_tail_bound(alpha, R - 6) + 1e-12


@given(alphas, st.integers(-20, 20).map(lambda k: 4 * k))
def test_fields_translation_covariant(alpha, shift):
    c = FrozenConstraint({-4: 1, 2: -1, 5: 1}, (-1, 0, 1, 3), "alternating-even")
    p = ModelParams(alpha, 1, 0.2)
    a = field_profile(p, c).values
    b = field_profile(p, c.shifted(shift)).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@given(alphas)
def test_fields_negate_under_global_flip(alpha):
    c = FrozenConstraint({-4: 1, 2: -1, 5: 1}, (-1, 0, 1, 3), "even=plus,odd=minus")
    p = ModelParams(alpha, 1)
    np.testing.assert_allclose(field_profile(p, c.flipped()).values,
                               -field_profile(p, c).values, atol=1e-12)


def test_field_bounds_plus_annulus():
    p = ModelParams(1.5, 1.0)
    report = field_bounds_check(p, 4, 16, build_probe_constraint(ProbeGeometry(4, 16)))
    assert report.central_min > 0
    assert report.annulus_min > report.central_min


def test_field_bounds_minus_annulus_turns_central_fields_negative():
    # the alternating core keeps its sign, so this is not an exact mirror image
    p = ModelParams(1.5, 1.0)
    report = field_bounds_check(p, 4, 16, build_probe_constraint(ProbeGeometry(4, 16, -1)))
    assert report.central_max < 0
    assert report.annulus_max < 0


def test_field_bounds_annulus_floor_independent_of_N():
    p = ModelParams(1.5, 1.0)
    floors = [field_bounds_check(p, 4, N, build_probe_constraint(ProbeGeometry(4, N))).annulus_min
              for N in (8, 16, 32, 64)]
    assert min(floors) > 2.0


def test_origin_field_reported_separately():
    p = ModelParams(1.5, 1.0)
    c = build_probe_constraint(ProbeGeometry(4, 16))
    report = field_bounds_check(p, 4, 16, c)
    assert report.origin_field == pytest.approx(field_profile(p, c)[0])
