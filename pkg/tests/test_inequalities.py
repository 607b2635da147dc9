import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_direction
from seqspin.inequalities import (
    EnumerationTooLarge,
    MKSettings,
    MKValue,
    bell_bi,
    evaluate_polynomial,
    hvt_bound_check,
    hvt_max,
    hybrid_inequalities,
    mk_expectation,
    mk_expectation_batch,
    mk_mki,
    mk_polynomial,
    svetlichny,
)
from seqspin.optimizer import bi_angles, mki_angles
from seqspin.sequential import DiagonalState, MeasurementChain, correlation
from seqspin.spinmath import Direction, SpinSystem

HALF = SpinSystem(1)


def random_settings(rng, state, n, convention="physical"):
    pairs = tuple((random_direction(rng), random_direction(rng)) for _ in range(n))
    return MKSettings(pairs, state, convention)


def test_polynomial_n2_is_bell_combination():
    terms, primed = mk_polynomial(2)
    half = Fraction(1, 2)
    assert dict((p, c) for c, p in terms) == {(0, 0): half, (0, 1): half, (1, 0): half, (1, 1): -half}
    assert dict((p, c) for c, p in primed) == {(1, 1): half, (1, 0): half, (0, 1): half, (0, 0): -half}


def test_polynomial_n3_is_mermin_klyshko():
    terms, _ = mk_polynomial(3)
    half = Fraction(1, 2)
    assert dict((p, c) for c, p in terms) == {(0, 0, 1): half, (0, 1, 0): half, (1, 0, 0): half, (1, 1, 1): -half}


def test_hvt_max_values():
    for n in (2, 3, 4, 5):
        assert hvt_max(n) == 1.0
    assert hvt_max(2, 1.5) == pytest.approx(2.25)
    assert hvt_max(3, 2.0) == pytest.approx(8.0)


def test_bi_spin_half_optimal():
    st_ = DiagonalState.pure(HALF)
    s = MKSettings.coplanar([(math.pi / 4, 3 * math.pi / 4), (math.pi / 2, 0.0)], st_, "pm_one")
    v = bell_bi(s)
    assert abs(v.value) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert v.eta == pytest.approx(math.sqrt(2), abs=1e-12)
    assert v.violates


def test_bi_random_mixture_spin_half():
    st_ = DiagonalState.uniform(HALF)
    s = MKSettings.coplanar([(math.pi / 4, 3 * math.pi / 4), (math.pi / 2, 0.0)], st_)
    assert bell_bi(s).eta == pytest.approx(math.sqrt(2), abs=1e-12)


def test_bi_degenerate_second_step(rng):
    st_ = DiagonalState.pure(SpinSystem(2))
    a2 = random_direction(rng)
    s = MKSettings(((random_direction(rng), random_direction(rng)), (a2, a2)), st_)
    v = bell_bi(s)
    ch = MeasurementChain((s.pairs[0][0], a2))
    assert v.value == pytest.approx(correlation(st_, ch, (1, 2)), abs=1e-12)
    assert v.eta <= 1.0


def test_bi_s1_inside_gap():
    spin = SpinSystem(2)
    st_ = DiagonalState(spin, (0.25, 0.5, 0.25))
    assert st_.xi == pytest.approx(0.5)
    best = 0.0
    for t in np.linspace(-math.pi / 2, math.pi / 2, 721):
        s = MKSettings.coplanar(list(zip(bi_angles(t)[::2], bi_angles(t)[1::2])), st_)
        best = max(best, bell_bi(s).eta)
    assert best < 1.0


def test_mki_spin1_reduced_optimum():
    st_ = DiagonalState.pure(SpinSystem(2))
    ang = mki_angles(math.radians(23.4066404460863))
    s = MKSettings.coplanar(list(zip(ang[::2], ang[1::2])), st_)
    assert mk_mki(s).eta == pytest.approx(1.2112, abs=1e-3)


def test_mki_balanced_spin_half_vanishes(rng):
    st_ = DiagonalState.uniform(HALF)
    for _ in range(5):
        assert mk_mki(random_settings(rng, st_, 3)).eta < 1e-12


def test_collapse_identity(rng):
    for twice_s, n in ((1, 4), (2, 3), (3, 2), (2, 5)):
        st_ = DiagonalState.normalized(SpinSystem(twice_s), rng.random(twice_s + 1))
        dirs = tuple(random_direction(rng) for _ in range(n))
        s = MKSettings(tuple((d, d) for d in dirs), st_)
        m, mp = mk_expectation(s)
        ref = correlation(st_, MeasurementChain(dirs), range(1, n + 1))
        assert m == pytest.approx(ref, abs=1e-12)
        assert mp == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("twice_s,n", [(1, 2), (1, 5), (2, 3), (3, 4), (6, 3)])
def test_prime_swap_duality(twice_s, n, rng):
    st_ = DiagonalState.normalized(SpinSystem(twice_s), rng.random(twice_s + 1))
    s = random_settings(rng, st_, n)
    m, mp = mk_expectation(s)
    sm, smp = mk_expectation(s.swapped())
    assert sm == mp and smp == m


def test_enumerate_transfer_batch_agree(rng):
    st_ = DiagonalState.pure(SpinSystem(3))
    s = random_settings(rng, st_, 3)
    a = mk_expectation(s, "enumerate")
    b = mk_expectation(s, "transfer")
    th = np.array([[p.theta for p in pair] for pair in s.pairs])
    ph = np.array([[p.phi for p in pair] for pair in s.pairs])
    c = mk_expectation_batch(st_, th, ph)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(b, [float(c[0]), float(c[1])], atol=1e-12)


def test_term_guard():
    st_ = DiagonalState.pure(SpinSystem(30))
    pairs = tuple((Direction.z(), Direction.z()) for _ in range(5))
    with pytest.raises(EnumerationTooLarge):
        mk_expectation(MKSettings(pairs, st_), "enumerate")


def test_settings_validation():
    st_ = DiagonalState.pure(SpinSystem(2))
    with pytest.raises(ValueError):
        MKSettings(((Direction.z(), Direction.z()),), st_)
    with pytest.raises(ValueError):
        MKSettings(((Direction.z(), Direction.z()),) * 2, st_, "pm_one")
    with pytest.raises(ValueError):
        bell_bi(MKSettings(((Direction.z(), Direction.z()),) * 3, st_))
    with pytest.raises(ValueError):
        MKValue(1.0, 0.0)


def test_svetlichny_collapse(rng):
    st_ = DiagonalState.pure(SpinSystem(2))
    dirs = tuple(random_direction(rng) for _ in range(3))
    s = MKSettings(tuple((d, d) for d in dirs), st_)
    v = svetlichny(s)
    assert v.value == pytest.approx(2 * abs(correlation(st_, MeasurementChain(dirs), (1, 2, 3))), abs=1e-12)
    assert v.value <= v.bound
    assert v.bound == pytest.approx(2.0)


def test_svetlichny_at_mki_optimum():
    for twice_s in (1, 2, 3):
        st_ = DiagonalState.pure(SpinSystem(twice_s))
        ang = mki_angles(0.4)
        v = svetlichny(MKSettings.coplanar(list(zip(ang[::2], ang[1::2])), st_))
        assert abs(v.mki_prime) < 1e-12
        assert not v.violates


def test_hybrid_zero_correlations():
    # balanced state kills the triples; x, y, z choices make every pair orthogonal
    st_ = DiagonalState.uniform(HALF)
    x, y, z = Direction(math.pi / 2, 0.0), Direction(math.pi / 2, math.pi / 2), Direction.z()
    r = hybrid_inequalities(MKSettings(((x, y), (z, y), (x, y)), st_, "pm_one"))
    assert abs(r.value1) < 1e-12 and abs(r.value2) < 1e-12
    assert not r.breaks_published1 and not r.breaks_published2


def test_hybrid_bounds_enumerated():
    st_ = DiagonalState.pure(HALF)
    s = MKSettings.coplanar([(0, 0), (0, 0), (0, 0)], st_, "pm_one")
    r = hybrid_inequalities(s)
    assert r.classical_bounds1 == (-7.0, 5.0)
    assert r.classical_bounds2 == (-10.0, 8.0)
    assert r.published_bounds1 == (-5.0, 3.0)


def test_hybrid_marginal_modes_agree_on_pairs_for_spin_half():
    st_ = DiagonalState.pure(HALF)
    s = MKSettings.coplanar([(0.3, 1.2), (2.0, 0.7), (1.5, 2.9)], st_, "pm_one")
    skip, emb = hybrid_inequalities(s, "skip"), hybrid_inequalities(s, "embedded")
    assert math.isfinite(skip.value1) and math.isfinite(emb.value1)
    with pytest.raises(ValueError):
        hybrid_inequalities(s, "other")


def test_hvt_bound_check_small():
    for n in (2, 3, 4):
        r = hvt_bound_check(n, 1.5, trials=20000, seed=3)
        assert not r.exceeded and r.attained
        assert r.vertex_max == pytest.approx(1.5**n)


def test_evaluate_polynomial_vertex():
    terms, _ = mk_polynomial(2)
    x = np.array([[[1, 1], [1, -1]]], dtype=float)
    assert evaluate_polynomial(terms, x)[0] == pytest.approx(1.0)
