import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convlab._config import DimensionCapError
from convlab.linalg import (
    DensityState,
    LayoutError,
    PureState,
    StateError,
    SystemLayout,
    basis_state,
    fidelity,
    maximally_entangled,
    maximally_mixed,
    partial_trace,
    permute,
    purified_distance,
    purify,
    random_density,
    random_pure,
    state_from_json,
    state_to_json,
    tensor_product,
    trace_distance,
)

from conftest import seeded

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def ket(v, label="A"):
    v = np.asarray(v, dtype=complex)
    return DensityState([(label, v.size)], np.outer(v, v.conj()))


ZERO = ket([1, 0])
ONE = ket([0, 1])
PLUS = ket([1 / math.sqrt(2), 1 / math.sqrt(2)])


def test_layout_invariants():
    lay = SystemLayout([("A", 2), ("B", 3)])
    assert lay.total == 6 and lay.labels == ("A", "B")
    with pytest.raises(LayoutError):
        SystemLayout([("A", 2), ("A", 3)])
    with pytest.raises(LayoutError):
        SystemLayout([("A", 0)])


def test_state_validation():
    with pytest.raises(StateError):
        DensityState([("A", 2)], np.diag([1.2, -0.2]))
    with pytest.raises(StateError):
        DensityState([("A", 2)], np.diag([0.8, 0.4]))
    with pytest.raises(StateError):
        DensityState([("A", 2)], np.array([[0.5, 0.1], [0.3, 0.5]]))
    sub = DensityState([("A", 2)], np.diag([0.3, 0.2]))
    assert not sub.is_normalized and abs(sub.normalization - 0.5) < 1e-15
    with pytest.raises(StateError):
        PureState([("A", 2)], [1, 1])


def test_dimension_cap(monkeypatch):
    monkeypatch.setenv("CONVLAB_MAX_DIM", "4")
    with pytest.raises(DimensionCapError):
        maximally_mixed([("A", 8)])


# tensor_product


def test_tensor_product_identity_case():
    out = tensor_product(maximally_mixed([("A", 2)]), maximally_mixed([("B", 2)]))
    assert out.layout.labels == ("A", "B")
    assert np.allclose(out.matrix, np.eye(4) / 4, atol=1e-15)


def test_tensor_product_basis():
    out = tensor_product(ZERO, ONE.relabel({"A": "B"}))
    assert np.allclose(out.matrix, basis_state([("A", 2), ("B", 2)], (0, 1)).matrix)


def test_tensor_product_trace_multiplies():
    rng = seeded(1)
    a = DensityState([("A", 2)], random_density([("A", 2)], rng).matrix * 0.7)
    b = DensityState([("B", 3)], random_density([("B", 3)], rng).matrix * 0.4)
    out = tensor_product(a, b)
    assert abs(out.normalization - a.normalization * b.normalization) < 1e-14


def test_tensor_product_label_collision():
    with pytest.raises(LayoutError):
        tensor_product(ZERO, ONE)


# partial_trace


def test_partial_trace_bell_marginal():
    phi = maximally_entangled(("A", "B"), 2)
    assert np.allclose(partial_trace(phi, ["A"]).matrix, np.eye(2) / 2, atol=1e-15)
    assert np.allclose(partial_trace(phi.density(), ["A"]).matrix, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_product():
    rng = seeded(2)
    a = random_density([("A", 2)], rng)
    b = random_density([("B", 3)], rng)
    assert np.allclose(partial_trace(tensor_product(a, b), ["A"]).matrix, a.matrix, atol=1e-15)


def test_partial_trace_schmidt_oracle():
    psi = random_pure([("A", 2), ("B", 3)], seeded(3))
    svals = np.linalg.svd(psi.amplitudes.reshape(2, 3), compute_uv=False)
    ev = np.sort(np.linalg.eigvalsh(partial_trace(psi, ["B"]).matrix))
    expected = np.sort(np.concatenate([svals**2, [0.0]]))
    assert np.allclose(ev, expected, atol=1e-12)


def test_partial_trace_unknown_label():
    with pytest.raises(LayoutError):
        partial_trace(ZERO, ["Q"])


def test_permute_roundtrip():
    s = random_density([("A", 2), ("B", 3), ("C", 2)], seeded(4))
    back = permute(permute(s, ["C", "A", "B"]), ["A", "B", "C"])
    assert np.array_equal(back.matrix, s.matrix)
    assert np.allclose(partial_trace(permute(s, ["B", "A", "C"]), ["A"]).matrix, partial_trace(s, ["A"]).matrix)


# distances


def test_fidelity_examples():
    assert abs(fidelity(PLUS, PLUS) - 1) < 1e-12
    assert fidelity(ZERO, ONE) < 1e-12
    assert abs(fidelity(ZERO, PLUS) - 1 / math.sqrt(2)) < 1e-12


def test_trace_distance_examples():
    assert trace_distance(PLUS, PLUS) < 1e-12
    assert abs(trace_distance(ZERO, ONE) - 1) < 1e-12
    assert abs(trace_distance(ZERO, PLUS) - 1 / math.sqrt(2)) < 1e-12


def test_purified_distance_examples():
    assert purified_distance(PLUS, PLUS) < 1e-6
    assert abs(purified_distance(ZERO, ONE) - 1) < 1e-12
    assert abs(purified_distance(ZERO, PLUS) - 1 / math.sqrt(2)) < 1e-12


def test_distance_layout_mismatch():
    with pytest.raises(LayoutError):
        fidelity(ZERO, ONE.relabel({"A": "B"}))


def test_generalized_fidelity_subnormalized():
    r = DensityState([("A", 2)], np.diag([0.5, 0.0]))
    s = DensityState([("A", 2)], np.diag([0.5, 0.0]))
    # sqrt(r)sqrt(s) has trace norm 1/2, correction sqrt(1/2 * 1/2)
    assert abs(fidelity(r, s) - 1.0) < 1e-12


def _pair(seed, d=3):
    rng = seeded(seed)
    lay = [("A", d)]
    return random_density(lay, rng, rank=int(rng.integers(1, d + 1))), random_density(lay, rng)


@given(SEEDS)
def test_fuchs_van_de_graaf(seed):
    r, s = _pair(seed)
    f, t = fidelity(r, s), trace_distance(r, s)
    assert 1 - f <= t + 1e-9
    assert t <= math.sqrt(max(0.0, 1 - f * f)) + 1e-9


def test_purified_dominates_trace_distance_200_pairs():
    for k in range(200):
        r, s = _pair(1000 + k)
        assert trace_distance(r, s) <= purified_distance(r, s) + 1e-12


@given(SEEDS)
def test_distances_symmetric(seed):
    r, s = _pair(seed)
    assert abs(fidelity(r, s) - fidelity(s, r)) < 1e-12
    assert abs(trace_distance(r, s) - trace_distance(s, r)) < 1e-12
    assert abs(purified_distance(r, s) - purified_distance(s, r)) < 1e-12


@given(SEEDS)
def test_purified_distance_triangle(seed):
    rng = seeded(seed)
    lay = [("A", 2)]
    a, b, c = (random_density(lay, rng) for _ in range(3))
    assert purified_distance(a, c) <= purified_distance(a, b) + purified_distance(b, c) + 1e-9


@given(SEEDS, st.integers(1, 3), st.integers(1, 3))
def test_partial_trace_of_product_recovers_factor(seed, da, db):
    rng = seeded(seed)
    a = random_density([("A", da)], rng)
    b = random_density([("B", db)], rng)
    assert np.max(np.abs(partial_trace(tensor_product(a, b), ["A"]).matrix - a.matrix)) <= 1e-12


# purification


def test_purify_maximally_mixed():
    psi = purify(maximally_mixed([("A", 2)]), "C")
    assert psi.layout.dims == (2, 2)
    assert np.allclose(partial_trace(psi, ["A"]).matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(psi, ["C"]).matrix, np.eye(2) / 2)


def test_purify_pure_state_rank_one():
    psi = purify(PLUS, "C")
    assert psi.layout.dims == (2, 1)
    assert np.allclose(psi.density().matrix, PLUS.matrix)


def test_purify_roundtrip_random():
    s = random_density([("A", 3)], seeded(5))
    psi = purify(s, "C")
    assert np.max(np.abs(partial_trace(psi, ["A"]).matrix - s.matrix)) <= 1e-10


def test_purify_rejects_subnormalized():
    with pytest.raises(StateError):
        purify(DensityState([("A", 2)], np.diag([0.3, 0.3])), "C")


# JSON


def test_state_json_bit_exact():
    s = random_density([("A", 2), ("B", 3)], seeded(6))
    back = state_from_json(state_to_json(s))
    assert back.layout == s.layout
    assert np.array_equal(back.matrix, s.matrix)
    data = json.loads(state_to_json(s))
    assert data["subsystems"] == [["A", 2], ["B", 3]]
