import csv
import io
import json
import math
import os
import subprocess
import sys

import pytest

from convlab.channels import channel_to_json, erasure, identity
from convlab.cli import fnv1a64
from convlab.linalg import maximally_entangled, state_to_json


def run(*args, env=None, cwd=None):
    full_env = dict(os.environ)
    if env:
        full_env.update(env)
    return subprocess.run([sys.executable, "-m", "convlab.cli", *args], capture_output=True, text=True, env=full_env, cwd=cwd)


def records(out: str) -> list[dict]:
    return [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def bell(tmp_path):
    p = tmp_path / "bell.json"
    p.write_text(state_to_json(maximally_entangled(("R", "A"), 2).density()))
    return str(p)


def test_fnv1a_vectors():
    assert fnv1a64(b"") == "cbf29ce484222325"
    assert fnv1a64(b"a") == "af63dc4c8601ec8c"
    assert fnv1a64(b"foobar") == "85944171f73967e8"


def test_bound_private():
    r = run("bound", "private", "--eps", "0.6", "--delta", "0.6")
    assert r.returncode == 0
    rec = records(r.stdout)[0]
    assert abs(rec["bound"] - 3.673003) <= 1e-6
    assert rec["in_region"] is True
    assert abs(rec["alpha"] - math.asin(0.6)) <= 1e-15
    meta = rec["meta"]
    assert meta["seed"] == 0 and meta["tool"] == "convlab" and meta["version"]
    assert "tolerances" in meta and "input_hashes" in meta


def test_bound_quantum_and_domain():
    r = run("bound", "quantum", "--eps", "0.5")
    assert r.returncode == 0
    assert abs(records(r.stdout)[0]["bound"] - 1.0) <= 1e-12
    r = run("bound", "quantum", "--eps", "0.8")
    assert r.returncode == 2
    rec = records(r.stdout)[0]
    assert rec["error"] == "domain" and rec["reason"] == "eps ≥ 1/√2"
    r = run("bound", "private", "--eps", "1.0", "--delta", "0.0")
    assert r.returncode == 2


def test_bound_usage_errors():
    assert run("bound", "private", "--eps", "0.1").returncode == 1
    assert run("bound", "private", "--eps", "1.5", "--delta", "0.1").returncode == 1
    assert run("bound", "quantum", "--eps", "abc").returncode == 1
    assert run("frobnicate").returncode == 1


def test_nats_display():
    r = run("--nats", "bound", "quantum", "--eps", "0.5")
    rec = records(r.stdout)[0]
    assert abs(rec["bound"] - math.log(2)) <= 1e-12
    assert rec["meta"]["units"] == "nats"


def test_region_stdout():
    r = run("region", "--step", "0.5")
    assert r.returncode == 0
    rows = list(csv.reader(io.StringIO(r.stdout)))
    assert rows[0] == ["eps", "delta_max"]
    body = [(float(a), float(b)) for a, b in rows[1:]]
    assert len(body) == math.floor(1 / 0.5) + 1
    assert body[0] == (0.0, 1.0)
    assert abs(body[1][1] - math.sqrt(0.75)) <= 1e-8
    assert json.loads(r.stderr.strip().splitlines()[-1])["rows"] == 3


def test_region_file_and_symmetry(tmp_path):
    out = tmp_path / "curve.csv"
    r = run("region", "--step", "0.05", "--out", str(out))
    assert r.returncode == 0
    assert records(r.stdout)[0]["rows"] == 21
    rows = list(csv.reader(out.open()))[1:]
    eps = [float(a) for a, _ in rows]
    dmax = [float(b) for _, b in rows]
    assert all(x >= y for x, y in zip(dmax, dmax[1:]))
    assert all(len(a.replace(".", "").lstrip("0")) <= 9 for a, _ in rows)
    # symmetric pair: the grid eps whose delta_max is nearest 0.25 sits near delta_max(0.25)
    target = dmax[eps.index(0.25)]
    nearest = min(range(len(dmax)), key=lambda i: abs(dmax[i] - 0.25))
    assert abs(eps[nearest] - target) <= 0.05


def test_region_errors(tmp_path):
    assert run("region", "--step", "0").returncode == 1
    assert run("region", "--step", "0.1", "--out", str(tmp_path / "missing" / "x.csv")).returncode == 1


def test_certify_shorthand_and_file(tmp_path):
    r = run("certify", "--kind", "erasure", "--p", "0.5")
    assert r.returncode == 0
    rec = records(r.stdout)[0]
    assert rec["verdict"] == "antidegradable" and rec["residual"] <= 1e-6
    assert rec["witness"] is not None
    f = tmp_path / "ch.json"
    f.write_text(channel_to_json(identity(2)))
    r = run("certify", "--channel", str(f), "--direction", "degradable")
    rec = records(r.stdout)[0]
    assert rec["verdict"] == "degradable"
    assert rec["meta"]["input_hashes"][str(f)] == fnv1a64(f.read_bytes())
    r = run("certify", "--kind", "amplitude_damping", "--g", "0.25")
    assert records(r.stdout)[0]["verdict"] == "neither_proven"


def test_certify_errors(tmp_path):
    assert run("certify").returncode == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("certify", "--channel", str(bad)).returncode == 1
    assert run("certify", "--channel", str(tmp_path / "nope.json")).returncode == 1


def test_entropy_commands(bell):
    r = run("entropy", "hmin", "--state", bell, "--target", "R", "--cond", "A")
    assert r.returncode == 0
    assert abs(records(r.stdout)[0]["value"] + 1.0) <= 1e-6
    r = run("entropy", "vn", "--state", bell, "--target", "R")
    assert abs(records(r.stdout)[0]["value"] - 1.0) <= 1e-9
    r = run("entropy", "conditional", "--state", bell, "--target", "R", "--cond", "A")
    assert abs(records(r.stdout)[0]["value"] + 1.0) <= 1e-9
    r = run("entropy", "hmax", "--state", bell, "--target", "R", "--cond", "A", "--eps", "0.1")
    assert r.returncode == 0
    assert run("entropy", "hmin", "--state", bell, "--target", "Q", "--cond", "A").returncode == 1
    assert run("entropy", "hmin", "--state", bell, "--target", "R", "--eps", "1.0").returncode == 1


def test_verify_all_byte_identical():
    a = run("--seed", "7", "verify", "all")
    b = run("--seed", "7", "verify", "all")
    assert a.returncode == 0, a.stdout[-2000:]
    assert a.stdout == b.stdout
    recs = records(a.stdout)
    assert recs[-1]["summary"] is True and recs[-1]["pass"] is True
    assert all(r["meta"]["seed"] == 7 for r in recs)
    assert {r.get("suite") for r in recs[:-1]} == {"lemma1", "duality", "private-chain", "quantum-chain"}


def test_verify_workers_do_not_change_output(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"states": 2, "private_trials": 8}))
    a = run("--seed", "3", "verify", "lemma1", "--config", str(cfg))
    b = run("--seed", "3", "verify", "lemma1", "--config", str(cfg), "--workers", "2")
    assert a.returncode == 0
    # the config hash is part of the metadata; everything else matches too
    assert a.stdout == b.stdout


def test_verify_failure_exit_code(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"channel": {"kind": "erasure", "p": 0.3}}))
    r = run("verify", "quantum-chain", "--config", str(cfg))
    assert r.returncode == 3
    recs = records(r.stdout)
    assert recs[0]["pass"] is False and recs[0]["error"] == "PreconditionError"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert run("verify", "lemma1", "--config", str(bad)).returncode == 1
    assert run("verify", "lemma1", "--workers", "0").returncode == 1


def test_dimension_cap_env(bell):
    assert run("entropy", "vn", "--state", bell, "--target", "R").returncode == 0
    r = run("entropy", "vn", "--state", bell, "--target", "R", env={"CONVLAB_MAX_DIM": "3"})
    assert r.returncode == 1
    assert "cap" in records(r.stdout)[0]["reason"]


def test_console_script_installed():
    r = subprocess.run(["convlab", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
