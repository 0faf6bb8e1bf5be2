import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measure_dyn.measures import (
    AtomicMeasure,
    InjectivityError,
    add,
    atomic,
    canonicalize,
    interval,
    jordan_decompose,
    pair,
    pushforward,
    restrict,
    scale,
    tv_norm,
)
from oracles import random_polynomial, tv_by_partitions

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
weights = st.builds(complex, finite, finite)
atom_lists = st.lists(st.tuples(finite, weights), max_size=10)
# well-separated integer locations avoid merging, so identities are exact
separated = st.lists(
    st.tuples(st.integers(-50, 50), weights), max_size=8, unique_by=lambda a: a[0]
)


def as_measure(atoms):
    return AtomicMeasure.from_atoms((float(x), c) for x, c in atoms)


# --- tv_norm ---------------------------------------------------------------

def test_tv_empty():
    assert tv_norm(AtomicMeasure.empty()) == 0.0


def test_tv_sum_of_moduli():
    assert tv_norm(atomic((0, 3), (1, -4j))) == 7.0


def test_tv_single_complex_atom_matches_partition_oracle():
    m = atomic((0, 3 + 4j))
    assert tv_norm(m) == 5.0
    assert tv_by_partitions(list(m)) == 5.0


@settings(max_examples=300, deadline=None)
@given(separated.filter(lambda a: len(a) <= 6))
def test_tv_equals_partition_supremum(atoms):
    m = as_measure(atoms)
    assert tv_norm(m) == pytest.approx(tv_by_partitions(list(m)), rel=1e-12, abs=0.0)


# --- canonical form --------------------------------------------------------

@settings(max_examples=1000, deadline=None)
@given(atom_lists)
def test_canonicalization_idempotent(atoms):
    m = as_measure(atoms)
    assert canonicalize(m) == m
    assert np.all(np.diff(m.locations) > m.merge_tolerance)
    assert np.all(np.abs(m.weights) > 0)


def test_close_atoms_merge_and_cancel():
    assert add(atomic((0, 1)), atomic((0, -1))).is_empty
    m = atomic((0.0, 1), (5e-13, 2))
    assert len(m) == 1 and m.weights[0] == 3


def test_tiny_weights_dropped():
    assert atomic((0, 1e-301)).is_empty


# --- Jordan decomposition --------------------------------------------------

def test_jordan_positive_real():
    parts = jordan_decompose(atomic((0, 5)))
    assert parts.p1_plus == atomic((0, 5))
    assert parts.p1_minus.is_empty and parts.p2_plus.is_empty and parts.p2_minus.is_empty


def test_jordan_sign_split():
    parts = jordan_decompose(atomic((0, -2), (1, 3j)))
    assert parts.p1_minus == atomic((0, 2))
    assert parts.p2_plus == atomic((1, 3))
    assert parts.p1_plus.is_empty and parts.p2_minus.is_empty


def test_jordan_componentwise():
    parts = jordan_decompose(atomic((0, 1 - 2j)))
    assert parts.p1_plus == atomic((0, 1))
    assert parts.p2_minus == atomic((0, 2))


@settings(max_examples=500, deadline=None)
@given(atom_lists)
def test_jordan_recombination_exact(atoms):
    m = as_measure(atoms)
    parts = jordan_decompose(m)
    assert parts.recombine() == m
    for a, b in ((parts.p1_plus, parts.p1_minus), (parts.p2_plus, parts.p2_minus)):
        assert not set(a.locations.tolist()) & set(b.locations.tolist())
        assert np.all(a.weights.real > 0) and np.all(a.weights.imag == 0)
    total = parts.total()
    assert tv_norm(m) <= total * (1 + 1e-12)
    assert total <= 2 * tv_norm(m) * (1 + 1e-12)


# --- pushforward -----------------------------------------------------------

def test_pushforward_shift():
    assert pushforward(atomic((0, 1)), lambda t: t + 1) == atomic((1, 1))
    assert pushforward(AtomicMeasure.empty(), lambda t: t + 1).is_empty


def test_pushforward_against_test_functions(rng):
    m = atomic((0, 2), (3, -1))
    pushed = pushforward(m, lambda t: t + 1)
    assert pushed == atomic((1, 2), (4, -1))
    for _ in range(100):
        g = random_polynomial(rng, degree=4)
        assert pair(pushed, g) == pytest.approx(pair(m, lambda t: g(t + 1)), rel=1e-12, abs=1e-12)


def test_pushforward_collision_raises():
    with pytest.raises(InjectivityError):
        pushforward(atomic((-1, 1), (1, 1)), lambda t: t * t)


@settings(max_examples=200, deadline=None)
@given(atom_lists)
def test_pushforward_preserves_tv(atoms):
    m = as_measure(atoms)
    assert tv_norm(pushforward(m, lambda t: 2 * t + 3)) == pytest.approx(tv_norm(m), rel=1e-15)


# --- restrict --------------------------------------------------------------

def test_restrict_examples():
    m = atomic((0, 1), (5, 2))
    assert restrict(m, interval(-1, 1)) == atomic((0, 1))
    assert restrict(m, lambda t: True) == m
    assert restrict(m, lambda t: False).is_empty


@settings(max_examples=500, deadline=None)
@given(atom_lists, finite)
def test_restrict_complement_identity(atoms, cut):
    m = as_measure(atoms)
    left = restrict(m, lambda t: t < cut)
    right = restrict(m, lambda t: ~(t < cut))
    assert add(left, right) == m
    assert tv_norm(left) <= tv_norm(m)


# --- pair, add, scale ------------------------------------------------------

def test_pair_examples():
    assert pair(atomic((2, 3)), lambda t: t**2) == 12
    assert pair(AtomicMeasure.empty(), lambda t: t) == 0
    assert pair(atomic((0, 1), (1, -1)), lambda t: np.ones_like(t)) == 0


def test_add_scale_examples():
    assert scale(atomic((0, 2)), 1j) == atomic((0, 2j))
    m = add(atomic((0, 1)), atomic((1, 1)))
    assert m == atomic((0, 1), (1, 1)) and tv_norm(m) == 2


@settings(max_examples=1000, deadline=None)
@given(atom_lists, atom_lists, weights)
def test_tv_triangle_and_homogeneity(a1, a2, c):
    m1, m2 = as_measure(a1), as_measure(a2)
    assert tv_norm(add(m1, m2)) <= (tv_norm(m1) + tv_norm(m2)) * (1 + 1e-12)
    assert tv_norm(scale(m1, c)) == pytest.approx(abs(c) * tv_norm(m1), rel=1e-12, abs=1e-300)


@settings(max_examples=300, deadline=None)
@given(separated, separated)
def test_tv_additive_on_disjoint_supports(a1, a2):
    m1 = as_measure(a1)
    m2 = as_measure([(x + 0.5, c) for x, c in a2])
    assert tv_norm(add(m1, m2)) == pytest.approx(tv_norm(m1) + tv_norm(m2), rel=1e-15)


# --- serialization ---------------------------------------------------------

def test_json_round_trip_sorted():
    m = atomic((3, 1 - 1j), (-2, 0.5))
    records = json.loads(m.to_json())
    assert [r["x"] for r in records] == [-2.0, 3.0]
    assert records[1] == {"x": 3.0, "re": 1.0, "im": -1.0}
    assert AtomicMeasure.from_json(m.to_json()) == m


def test_values_are_immutable():
    m = atomic((0, 1))
    with pytest.raises(ValueError):
        m.weights[0] = 2
    assert math.isclose(tv_norm(m), 1.0)
