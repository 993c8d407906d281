import json

import numpy as np
import pytest

from spinecho.ensembles import (
    OatCircuit,
    RngStream,
    apply_oat,
    brownian_hamiltonian,
    default_twist_strength,
    haar_unitary,
    oat_matrix,
    random_axis,
    sample_brownian_couplings,
    sample_brownian_step,
    sample_oat_circuit,
    twist_unitary,
)
from spinecho.spin_core import coherent_state, dicke_state, make_spin_system, spin_operators


def test_haar_unitary_is_unitary():
    for d in (1, 2, 7, 33):
        u = haar_unitary(d, RngStream(0))
        assert np.abs(u @ u.conj().T - np.eye(d)).max() < 1e-12


def test_haar_d1_is_phase():
    vals = [haar_unitary(1, RngStream(0, i))[0, 0] for i in range(200)]
    assert all(abs(abs(v) - 1) < 1e-12 for v in vals)
    assert abs(np.mean(vals)) < 0.2  # phases wander the whole circle


def test_haar_first_moment():
    d = 3
    g = RngStream(1).generator()
    m = 10_000
    acc = np.mean([abs(haar_unitary(d, g)[0, 0]) ** 2 for _ in range(m)])
    # Var(|U00|^2) = (D-1)/(D^2 (D+1)) for Haar columns
    se = np.sqrt((d - 1) / (d**2 * (d + 1)) / m)
    assert abs(acc - 1 / d) < 3 * se


def test_haar_scrambles_to_maximally_mixed():
    n = 12
    sys = make_spin_system(n)
    d = sys.dim
    psi0 = dicke_state(sys, sys.spin)
    acc = np.zeros((d, d), dtype=complex)
    m = 300
    for i in range(m):
        u = haar_unitary(d, RngStream(2, i))
        psi = u @ psi0
        acc += np.outer(psi, psi.conj())
    acc /= m
    assert np.abs(acc - np.eye(d) / d).max() < 5 / np.sqrt(m) / d


def test_haar_two_design_twirl():
    # E[U A U^dag (x) U B U^dag] = a I + b SWAP with Weingarten coefficients
    d = 3
    g = RngStream(3).generator()
    rng = np.random.default_rng(9)
    a_op = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    b_op = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = 10_000
    acc = np.zeros((d * d, d * d), dtype=complex)
    samples = np.empty(m)
    for i in range(m):
        u = haar_unitary(d, g)
        ua = u @ a_op @ u.conj().T
        ub = u @ b_op @ u.conj().T
        term = np.kron(ua, ub)
        acc += term
        samples[i] = abs(term[0, 0])
    acc /= m
    tr_a, tr_b, tr_ab = np.trace(a_op), np.trace(b_op), np.trace(a_op @ b_op)
    alpha = (d * tr_a * tr_b - tr_ab) / (d * (d**2 - 1))
    beta = (d * tr_ab - tr_a * tr_b) / (d * (d**2 - 1))
    swap = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    exact = alpha * np.eye(d * d) + beta * swap
    # scale of elementwise fluctuation, conservatively the largest observed
    se = samples.std(ddof=1) / np.sqrt(m)
    assert np.abs(acc - exact).max() < 5 * se


def test_random_axis_moments():
    g = RngStream(4).generator()
    axes = np.array([random_axis(g) for _ in range(100_000)])
    assert np.abs(axes.mean(axis=0)).max() < 0.01
    second = axes[:, :, None] * axes[:, None, :]
    assert np.abs(second.mean(axis=0) - np.eye(3) / 3).max() < 0.01


def test_seeded_determinism():
    a1 = random_axis(RngStream(5, 7))
    a2 = random_axis(RngStream(5, 7))
    assert np.array_equal(a1, a2)
    u1 = haar_unitary(6, RngStream(5, 7))
    u2 = haar_unitary(6, RngStream(5, 7))
    assert np.array_equal(u1, u2)
    assert not np.array_equal(u1, haar_unitary(6, RngStream(5, 8)))


def test_default_twist_strength():
    assert abs(default_twist_strength(100) - np.pi / 20) < 1e-15


def test_sample_oat_circuit():
    sys = make_spin_system(100)
    c0 = sample_oat_circuit(sys, 0, RngStream(6))
    assert c0.n_steps == 0
    assert np.abs(oat_matrix(c0) - np.eye(sys.dim)).max() == 0.0
    c1 = sample_oat_circuit(sys, 5, RngStream(6))
    c2 = sample_oat_circuit(sys, 5, RngStream(6))
    assert np.array_equal(c1.axes, c2.axes)
    assert abs(c1.strength - np.pi / 20) < 1e-15


def test_oat_circuit_json_roundtrip():
    sys = make_spin_system(8)
    c = sample_oat_circuit(sys, 3, RngStream(7))
    doc = json.loads(c.to_json())
    assert set(doc) == {"n", "strength", "axes"}
    assert doc["n"] == 8 and len(doc["axes"]) == 3
    c2 = OatCircuit.from_json(c.to_json())
    assert np.array_equal(c.axes, c2.axes) and c.strength == c2.strength


def test_apply_oat_forward_reverse():
    sys = make_spin_system(10)
    c = sample_oat_circuit(sys, 4, RngStream(8))
    psi = coherent_state(sys, np.array([1.0, 0.0, 0.0]))
    out = apply_oat(c, apply_oat(c, psi), direction="reverse")
    assert np.abs(out - psi).max() < 1e-10
    assert abs(np.linalg.norm(apply_oat(c, psi)) - 1) < 1e-12


def test_twist_about_z_leaves_polarized_state():
    sys = make_spin_system(6)
    c = OatCircuit(6, 0.7, np.array([[0.0, 0.0, 1.0]]))
    psi = dicke_state(sys, 3.0)
    out = apply_oat(c, psi)
    assert abs(abs(np.vdot(psi, out)) - 1) < 1e-12
    # [Sz^2, Sz] = 0: twisting about z cannot move <Sz> of any state
    ops = spin_operators(sys)
    cx = coherent_state(sys, np.array([1.0, 0.0, 0.0]))
    before = np.real(cx.conj() @ ops.sz @ cx)
    after_state = apply_oat(c, cx)
    after = np.real(after_state.conj() @ ops.sz @ after_state)
    assert abs(before - after) < 1e-10


def test_oat_matrix_equals_sequential_twists():
    sys = make_spin_system(5)
    c = sample_oat_circuit(sys, 3, RngStream(9))
    u = np.eye(sys.dim, dtype=complex)
    for ax, chi in c.steps():
        u = twist_unitary(sys, ax, chi) @ u
    assert np.abs(u - oat_matrix(c)).max() < 1e-12


def test_brownian_couplings_covariance():
    g = RngStream(10).generator()
    spin, dt, rate = 3.0, 0.05, 1.0
    m = 100_000
    xy = np.empty(m)
    xx = np.empty(m)
    for i in range(m):
        j = sample_brownian_couplings(rate, spin, dt, g)
        assert np.array_equal(j, j.T)
        xy[i], xx[i] = j[0, 1], j[0, 0]
    base = rate / (spin**2 * dt)
    assert abs(xy.var(ddof=1) - base) / base < 0.05
    assert abs(xx.var(ddof=1) - 2 * base) / (2 * base) < 0.05


def test_brownian_step_unitary_and_small_rate_limit():
    sys = make_spin_system(6)
    u = sample_brownian_step(sys, 1.0, 0.05, RngStream(11))
    assert np.abs(u @ u.conj().T - np.eye(sys.dim)).max() < 1e-12
    u_small = sample_brownian_step(sys, 1e-14, 0.05, RngStream(11))
    assert np.abs(u_small - np.eye(sys.dim)).max() < 1e-6


def test_brownian_hamiltonian_hermitian():
    sys = make_spin_system(6)
    g = RngStream(12).generator()
    for _ in range(5):
        j = sample_brownian_couplings(2.0, sys.spin, 0.1, g)
        h = brownian_hamiltonian(sys, j)
        assert np.abs(h - h.conj().T).max() < 1e-12


def test_oat_circuit_validates_axes():
    with pytest.raises(ValueError):
        OatCircuit(4, 0.5, np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(ValueError):
        OatCircuit(4, np.inf, np.array([[0.0, 0.0, 1.0]]))
