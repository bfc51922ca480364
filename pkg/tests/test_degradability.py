import numpy as np
import pytest

from convlab.channels import (
    QuantumChannel,
    amplitude_damping,
    complementary,
    depolarizing,
    erasure,
    identity,
    random_unitary,
    spanning_inputs,
)
from convlab.degradability import (
    ANTIDEGRADABLE,
    DEGRADABLE,
    NEITHER,
    certify_antidegradable,
    certify_degradable,
    witness_error,
)

from conftest import seeded

THRESHOLD = 1e-6


def rotated(c: QuantumChannel, u: np.ndarray, v: np.ndarray) -> QuantumChannel:
    return QuantumChannel([v @ k @ u.conj().T for k in c.kraus])


def assert_cptp_witness(cert):
    j = cert.witness.matrix
    d_mid, d_out = cert.witness.in_dim, cert.witness.out_dim
    assert np.linalg.eigvalsh(j)[0] >= -1e-7
    marg = np.einsum("aiaj->ij", j.reshape(d_out, d_mid, d_out, d_mid))
    assert np.max(np.abs(marg - np.eye(d_mid))) <= 1e-7


def test_erasure_half_antidegradable_with_identity_like_witness():
    cert = certify_antidegradable(erasure(0.5))
    assert cert.verdict == ANTIDEGRADABLE and cert.proven
    assert cert.residual <= THRESHOLD
    assert_cptp_witness(cert)
    m = cert.witness_channel()
    # environment and output of the half erasure are the same space: the map is the identity on its outputs
    for rho in (np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0]), np.diag([0, 0, 1.0]), np.array([[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 0]])):
        assert np.max(np.abs(m.apply(rho) - rho)) <= 1e-5


def test_amplitude_damping_examples():
    cert = certify_antidegradable(amplitude_damping(0.75))
    assert cert.verdict == ANTIDEGRADABLE
    assert_cptp_witness(cert)
    cert = certify_antidegradable(amplitude_damping(0.25))
    assert cert.verdict == NEITHER
    assert cert.residual > 1e-3
    assert cert.witness is None


def test_degradable_examples():
    assert certify_degradable(erasure(0.3)).verdict == DEGRADABLE
    assert certify_antidegradable(erasure(0.3)).verdict == NEITHER
    assert certify_degradable(erasure(0.5)).verdict == DEGRADABLE
    assert certify_antidegradable(erasure(0.5)).verdict == ANTIDEGRADABLE
    assert certify_degradable(identity(2)).verdict == DEGRADABLE
    assert certify_antidegradable(identity(2)).verdict == NEITHER


def test_fully_depolarizing_is_antidegradable():
    assert certify_antidegradable(depolarizing(1.0)).proven


@pytest.mark.parametrize(
    "c,direction",
    [(erasure(0.5), "anti"), (erasure(0.7), "anti"), (amplitude_damping(0.75), "anti"), (erasure(0.3), "deg"), (amplitude_damping(0.2), "deg")],
)
def test_witness_reproduces_target(c, direction):
    cert = certify_antidegradable(c) if direction == "anti" else certify_degradable(c)
    assert cert.proven
    assert witness_error(c, cert) <= 10 * THRESHOLD
    assert_cptp_witness(cert)
    # explicit spanning-set check
    m = cert.witness_channel()
    src, tgt = (complementary(c), c) if direction == "anti" else (c, complementary(c))
    for x in spanning_inputs(c.in_dim):
        assert np.max(np.abs(m.apply(src.apply(x)) - tgt.apply(x))) <= 10 * THRESHOLD


@pytest.mark.parametrize("c", [erasure(0.5), amplitude_damping(0.75), amplitude_damping(0.25), erasure(0.3)])
def test_verdict_invariant_under_basis_rotation(c):
    rng = seeded(31)
    u, v = random_unitary(c.in_dim, rng), random_unitary(c.out_dim, rng)
    rc = rotated(c, u, v)
    assert certify_antidegradable(rc).verdict == certify_antidegradable(c).verdict
    assert certify_degradable(rc).verdict == certify_degradable(c).verdict


def test_threshold_validation():
    with pytest.raises(ValueError):
        certify_antidegradable(erasure(0.5), threshold=0.0)


def test_certificate_json():
    import json

    data = json.loads(certify_antidegradable(erasure(0.5)).to_json())
    assert data["verdict"] == ANTIDEGRADABLE
    assert data["witness"]["in_dim"] == 3 and data["witness"]["out_dim"] == 3
    assert json.loads(certify_antidegradable(amplitude_damping(0.25)).to_json())["witness"] is None
