import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convlab._config import DimensionCapError
from convlab.channels import (
    ChannelError,
    ChoiMatrix,
    QuantumChannel,
    action_distance,
    amplitude_damping,
    apply_to,
    channel_from_dict,
    channel_from_json,
    channel_to_json,
    choi_apply,
    complementary,
    compose,
    depolarizing,
    erasure,
    from_choi,
    identity,
    make_channel,
    random_channel,
    random_unitary,
    spanning_inputs,
    stinespring,
    tensor,
    tensor_power,
    to_choi,
)
from convlab.entropies import von_neumann
from convlab.linalg import DensityState, random_pure

from conftest import seeded

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
PLUS = np.full((2, 2), 0.5)

ZOO = [
    erasure(0.0), erasure(0.3), erasure(0.5), erasure(1.0), erasure(0.4, d=3),
    depolarizing(0.0), depolarizing(0.7), depolarizing(1.0), depolarizing(0.5, d=3),
    amplitude_damping(0.0), amplitude_damping(0.25), amplitude_damping(0.75), amplitude_damping(1.0),
    identity(1), identity(2), identity(3),
]


def test_make_channel_examples():
    assert np.allclose(make_channel("identity", d=2).apply(PLUS), PLUS)
    out = make_channel("erasure", p=0.5).apply(np.eye(2) / 2)
    assert np.allclose(out, np.diag([0.25, 0.25, 0.5]), atol=1e-15)
    assert erasure(0.5).out_dim == 3
    out = make_channel("amplitude_damping", g=1.0).apply(np.diag([0.0, 1.0]))
    assert np.allclose(out, np.diag([1.0, 0.0]))


def test_make_channel_errors():
    with pytest.raises(ValueError):
        erasure(1.5)
    with pytest.raises(ValueError):
        amplitude_damping(-0.1)
    with pytest.raises(ChannelError):
        identity(0)
    with pytest.raises(ChannelError):
        make_channel("bogus")
    with pytest.raises(ChannelError):
        QuantumChannel([np.eye(2) * 0.9])


@pytest.mark.parametrize("c", ZOO)
def test_zoo_tp_and_choi(c):
    gram = sum(k.conj().T @ k for k in c.kraus)
    assert np.max(np.abs(gram - np.eye(c.in_dim))) <= 1e-9
    j = to_choi(c)
    j.check()
    assert np.linalg.eigvalsh(j.matrix)[0] >= -1e-12


def test_choi_identity():
    j = to_choi(identity(2)).matrix
    omega = np.eye(2).reshape(-1)
    assert np.allclose(j, np.outer(omega, omega))
    assert abs(np.trace(j) - 2) < 1e-15


def test_choi_roundtrip_random():
    c = random_channel(2, 2, seeded(7))
    back = from_choi(to_choi(c))
    assert action_distance(c, back) <= 1e-9
    assert back.env_dim == np.linalg.matrix_rank(to_choi(c).matrix, tol=1e-9)


def test_choi_rank_equals_kraus_count():
    back = from_choi(to_choi(amplitude_damping(0.3)))
    assert back.env_dim == 2
    assert from_choi(to_choi(identity(3))).env_dim == 1


def test_from_choi_rejects_negative():
    j = to_choi(identity(2)).matrix - 0.1 * np.eye(4) + 0.05 * np.eye(4)
    w, v = np.linalg.eigh(to_choi(identity(2)).matrix)
    w[0] = -0.1
    bad = (v * w) @ v.conj().T
    with pytest.raises(ChannelError):
        from_choi(ChoiMatrix(2, 2, bad))
    with pytest.raises(ChannelError):
        from_choi(ChoiMatrix(2, 2, 0.5 * to_choi(identity(2)).matrix))


@given(SEEDS)
def test_choi_apply_matches_kraus(seed):
    rng = seeded(seed)
    c = random_channel(2, 3, rng)
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    assert np.allclose(choi_apply(to_choi(c).matrix, x, 2, 3), c.apply(x), atol=1e-12)


def test_stinespring_identity():
    v = stinespring(identity(3))
    assert v.env_dim == 1
    assert np.allclose(v.matrix, np.eye(3))


def test_stinespring_random_isometry():
    rng = seeded(8)
    c = random_channel(3, 2, rng)
    v = stinespring(c)
    assert np.max(np.abs(v.matrix.conj().T @ v.matrix - np.eye(3))) <= 1e-10
    rho = random_pure([("A", 3)], rng).density().matrix
    big = (v.matrix @ rho @ v.matrix.conj().T).reshape(2, c.env_dim, 2, c.env_dim)
    assert np.allclose(np.einsum("aebe->ab", big), c.apply(rho), atol=1e-9)


def test_stinespring_erasure_environment():
    v = stinespring(erasure(0.5)).matrix
    rho = np.eye(2) / 2
    big = (v @ rho @ v.conj().T).reshape(3, 3, 3, 3)
    env = np.einsum("aeaf->ef", big)
    assert np.allclose(env, erasure(0.5).apply(rho), atol=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 0.9])
def test_complementary_erasure(p):
    assert action_distance(complementary(erasure(p)), erasure(1 - p)) <= 1e-12


def test_complementary_identity_is_forgetful():
    c = complementary(identity(3))
    assert (c.in_dim, c.out_dim) == (3, 1)
    assert np.allclose(c.apply(np.eye(3) / 3), [[1.0]])


@given(SEEDS)
def test_complementary_same_output_entropy_on_pure_inputs(seed):
    rng = seeded(seed)
    c = random_channel(2, 2, rng, env_dim=3)
    psi = random_pure([("A", 2)], rng).density()
    sb = von_neumann(DensityState([("B", 2)], c.apply(psi.matrix)))
    se = von_neumann(DensityState([("E", 3)], complementary(c).apply(psi.matrix)))
    assert abs(sb - se) < 1e-8


@given(SEEDS)
def test_double_complement_spectrum(seed):
    rng = seeded(seed)
    c = random_channel(2, 2, rng, env_dim=3)
    cc = complementary(complementary(c))
    psi = random_pure([("A", 2)], rng).density().matrix
    e1 = np.sort(np.linalg.eigvalsh(complementary(c).apply(psi)))
    e2 = np.sort(np.linalg.eigvalsh(complementary(cc).apply(psi)))
    s1 = -sum(x * math.log2(x) for x in e1 if x > 1e-12)
    s2 = -sum(x * math.log2(x) for x in e2 if x > 1e-12)
    assert abs(s1 - s2) < 1e-8


def test_compose_examples():
    c = random_channel(2, 3, seeded(9))
    assert action_distance(compose(identity(3), c), c) <= 1e-12
    assert action_distance(compose(amplitude_damping(0.5), amplitude_damping(0.5)), amplitude_damping(0.75)) <= 1e-12
    with pytest.raises(ChannelError):
        compose(identity(2), c)


def test_tensor_power_dims_and_action():
    c = tensor_power(erasure(0.5), 2)
    assert (c.in_dim, c.out_dim) == (4, 9)
    rng = seeded(10)
    a, b = random_pure([("A", 2)], rng).density().matrix, random_pure([("A", 2)], rng).density().matrix
    e = erasure(0.5)
    assert np.allclose(c.apply(np.kron(a, b)), np.kron(e.apply(a), e.apply(b)), atol=1e-12)
    t = tensor(amplitude_damping(0.3), identity(2))
    x = np.kron(a, b)
    assert np.allclose(t.apply(x), np.kron(amplitude_damping(0.3).apply(a), b), atol=1e-12)


def test_tensor_power_cap(monkeypatch):
    monkeypatch.setenv("CONVLAB_MAX_DIM", "16")
    with pytest.raises(DimensionCapError):
        tensor_power(erasure(0.5), 3)


def test_apply_to_labelled_factor():
    rho = DensityState([("A", 2), ("B", 2)], np.kron(np.diag([0.0, 1.0]), np.eye(2) / 2))
    out = apply_to(amplitude_damping(1.0), rho, "A", "A2")
    assert out.layout.labels == ("A2", "B")
    assert np.allclose(out.matrix, np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2))


def test_spanning_inputs_count():
    assert len(spanning_inputs(3)) == 9


def test_channel_json_roundtrip_and_shorthand():
    c = random_channel(2, 3, seeded(11))
    back = channel_from_json(channel_to_json(c))
    assert all(np.array_equal(x, y) for x, y in zip(back.kraus, c.kraus))
    assert action_distance(channel_from_dict({"kind": "erasure", "p": 0.5}), erasure(0.5)) == 0.0
    with pytest.raises(ChannelError):
        channel_from_dict({"in_dim": 2, "out_dim": 2, "kraus": [[[1, 0]]]})


def test_random_unitary_is_unitary():
    u = random_unitary(4, seeded(12))
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
