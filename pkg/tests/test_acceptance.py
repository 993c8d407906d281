"""Acceptance suite: one pass/fail line per criterion.

Each test prints its verdict before asserting so the full scorecard is
visible in the captured output even when a criterion fails.  Three checks
encode tolerances that the exact formulas provably do not meet; they are
implemented exactly as stated, fail honestly, and their docstrings carry the
analysis (see also the test messages).
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from spinecho import analytics as an
from spinecho.channels import (
    axis_averaged_channel,
    depolarizing_step,
    noisy_echo_mc,
    small_theta_qfi,
)
from spinecho.cli import main as cli_main
from spinecho.echo import EnsembleSpec, echo_sweep, qfi_convergence
from spinecho.ensembles import RngStream, haar_unitary
from spinecho.mmse import MmsePair, build_gamma_eta, mmse_estimate, solve_mmse_observable
from spinecho.replica import (
    build_heff,
    cluster_spectrum,
    exact_spectrum_k1,
    level_energy_k1,
    pairing_states,
    perturbation_check,
    roat_brownian_correspondence,
)
from spinecho.spin_core import axis_operator, dicke_state, make_spin_system

Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])


def report(criterion: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")


def haar_echo_moments(n, thetas, n_circuits, seed):
    """Per-circuit <Sz> and <Sz^2> over a theta grid, fixed axis y."""
    sys = make_spin_system(n)
    m = sys.m_values()
    sn = axis_operator(sys, Y)
    vals, vecs = np.linalg.eigh((sn + sn.conj().T) / 2)
    psi0 = dicke_state(sys, sys.spin)
    sz = np.empty((n_circuits, len(thetas)))
    sz2 = np.empty((n_circuits, len(thetas)))
    for i in range(n_circuits):
        u = haar_unitary(sys.dim, RngStream(seed, i))
        a = vecs.conj().T @ (u @ psi0)
        back = u.conj().T @ vecs
        for k, th in enumerate(thetas):
            chi = back @ (np.exp(-1j * vals * th) * a)
            w = np.abs(chi) ** 2
            sz[i, k] = w @ m
            sz2[i, k] = w @ m**2
    return sz, sz2


def test_criterion_01_echo_signal_oracle_equivalence():
    t0 = time.time()
    worst = 1.0
    for n in (12, 20, 50):
        s = n / 2
        thetas = np.linspace(0.0, 3 * np.pi, 60) / s
        sz, sz2 = haar_echo_moments(n, thetas, 500, seed=101)
        ok_points = 0
        for k, th in enumerate(thetas):
            floor = 1e-9
            se1 = sz[:, k].std(ddof=1) / np.sqrt(sz.shape[0])
            se2 = sz2[:, k].std(ddof=1) / np.sqrt(sz.shape[0])
            d1 = abs(sz[:, k].mean() - an.clean_signal(s, th))
            d2 = abs(sz2[:, k].mean() - an.clean_second_moment(s, th))
            if d1 <= 3 * se1 + floor and d2 <= 3 * se2 + floor:
                ok_points += 1
        frac = ok_points / len(thetas)
        worst = min(worst, frac)
    elapsed = time.time() - t0
    ok = worst >= 0.95 and elapsed < 600
    report("1", ok, f"echo moments vs closed form: worst fraction within 3 SE = {worst:.3f} "
                    f"(need >= 0.95), runtime {elapsed:.0f}s (cap 600s)")
    assert ok


def test_criterion_02_sensitivity_limit():
    n = 100
    grid = np.linspace(0.0, an.bandwidth(n), 41)
    res = echo_sweep(make_spin_system(n), EnsembleSpec("haar"), grid, 300, RngStream(102),
                     fixed_axis=Y)
    got = res.sensitivity[1]
    ok_mc = abs(got - n / 2) / (n / 2) < 0.10
    x = 0.5
    series = n / 2 * (1 - 3 * x**2 / 40)
    u = np.sinc(x / np.pi)
    full = n * np.sqrt(3) / x * u * (u - np.cos(x)) / np.sqrt(1 + 2 * u**2 - 3 * u**4)
    ok_series = abs(series - full) / full < 1e-3
    ok = ok_mc and ok_series
    report("2", ok, f"1/dtheta at first interior point = {got:.2f} (want 50 +- 10%); "
                    f"series vs closed form at x=0.5: {abs(series-full)/full:.2e} (< 1e-3)")
    assert ok


def test_criterion_03_oat_convergence():
    n = 12
    stats = qfi_convergence(make_spin_system(n), 8, 300, 1000, RngStream(103))
    mean_ratio = stats[8].mean_qfi / an.haar_qfi_mean(n)
    std_ratio = stats[8].std_qfi / an.haar_qfi_std(n)
    t95 = {}
    for nn in (16, 64):
        st = qfi_convergence(make_spin_system(nn), 8, 150, 500, RngStream(104))
        t95[nn] = next(s.step for s in st if s.mean_qfi >= 0.95 * an.haar_qfi_mean(nn))
    ok = (abs(mean_ratio - 1) < 0.05 and abs(std_ratio - 1) < 0.25
          and abs(t95[16] - t95[64]) <= 1)
    report("3", ok, f"N=12 after 8 twists: mean/52 = {mean_ratio:.3f} (+-5%), "
                    f"std/{an.haar_qfi_std(n):.3f} = {std_ratio:.3f} (+-25%); "
                    f"95% step N=16: {t95[16]}, N=64: {t95[64]} (+-1)")
    assert ok


def test_criterion_04_qfi_circuit_variance():
    ratios = {}
    for n in (32, 64):
        sys = make_spin_system(n)
        psi0 = dicke_state(sys, sys.spin)
        sn = axis_operator(sys, Z)
        vals = np.empty(400)
        for i in range(400):
            psi = haar_unitary(sys.dim, RngStream(105 + n, i)) @ psi0
            v = sn @ psi
            vals[i] = 4 * (np.real(v.conj() @ v) - np.real(psi.conj() @ v) ** 2)
        ratios[n] = vals.var(ddof=1) / an.var_qfi_circuits(n)
    ok = all(0.6 <= r <= 1.6 for r in ratios.values())
    report("4", ok, f"Var_U[QFI] / (4N^3/45): N=32 -> {ratios[32]:.3f}, N=64 -> {ratios[64]:.3f} "
                    f"(need within [0.6, 1.6])")
    assert ok


def test_criterion_05_signal_fluctuation_scaling():
    n = 64
    s = n / 2
    theta = 1.0 / s
    sz, _ = haar_echo_moments(n, np.array([theta]), 400, seed=106)
    var_mc = sz[:, 0].var(ddof=1)
    pred, _ = an.signal_fluctuation_formulas(s, 1.0)
    ratio = var_mc / pred
    ok = 0.5 <= ratio <= 2.0
    report("5", ok, f"across-circuit Var[<Sz>] / ((17/270) S x^4) = {ratio:.3f} at N=64, x=1 "
                    f"(need within [0.5, 2.0])")
    assert ok


def test_criterion_06_depolarizing_reduction_slope():
    """Stated tolerance is unattainable: the residual is O(theta^4), not theta^3.

    The axis-averaged channel minus its second-order depolarizing form has no
    cubic term (odd moments of a uniform axis vanish, and the 26-point rule
    integrates them to exactly zero), so the log-log slope over
    theta in {0.02, 0.04, 0.08} is 4.0, outside the stated 3 +- 0.3.
    """
    sys = make_spin_system(6)
    psi = dicke_state(sys, 3.0)
    rho = np.outer(psi, psi.conj())
    thetas = (0.02, 0.04, 0.08)
    residuals = [
        float(np.abs(axis_averaged_channel(rho, th, quadrature=True)
                     - depolarizing_step(rho, th)).max())
        for th in thetas
    ]
    slope = float(np.polyfit(np.log(thetas), np.log(residuals), 1)[0])
    ok = 2.7 <= slope <= 3.3
    report("6a", ok, f"reduction residual log-log slope = {slope:.3f} (stated 3 +- 0.3; "
                     f"the odd-moment cancellation makes the true exponent 4)")
    assert ok, (
        f"slope {slope:.3f} is outside 3 +- 0.3 because the theta^3 term vanishes "
        f"identically; residuals {residuals} scale as theta^4"
    )


def test_criterion_06_small_theta_qfi():
    """The Haar mean of the small-angle QFI is N(N+1)/3 exactly.

    (4/3) S (S+1) is its leading-order form; the exact ensemble average
    subtracts the mean squared polarization S(S+1)/(D+1), giving N(N+1)/3.
    A 3-standard-error test discriminates the two at 10^3 probes and must
    target the exact value.
    """
    n = 6
    sys = make_spin_system(n)
    psi0 = dicke_state(sys, sys.spin)
    vals = np.empty(1000)
    for i in range(1000):
        psi = haar_unitary(sys.dim, RngStream(107, i)) @ psi0
        vals[i] = small_theta_qfi(np.outer(psi, psi.conj()))
    target = n * (n + 1) / 3
    leading = 4 / 3 * sys.spin * (sys.spin + 1)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    ok = abs(vals.mean() - target) < 3 * se
    report("6b", ok, f"Haar-mean small-angle QFI = {vals.mean():.3f} vs exact N(N+1)/3 = "
                     f"{target:.1f} (3 SE = {3*se:.3f}; leading-order (4/3)S(S+1) = {leading:.1f})")
    assert ok


def test_criterion_07_noisy_analytics():
    exact_ok = all(
        an.noisy_signal(s, 0.0, cgt) == s * np.exp(-cgt)
        for s in (1.0, 2.5, 6.0) for cgt in (0.0, 0.3, 1.7)
    )
    pert_ok = True
    for s in (1.0, 1.5, 2.0):
        r = perturbation_check(s)
        pert_ok &= abs(r.overlap_alpha_beta - r.expected_overlap) < 1e-8
        pert_ok &= r.heff_residual_alpha < 1e-8 and r.heff_residual_beta < 1e-8
        pert_ok &= abs(r.v_alpha_alpha) < 1e-8 and abs(r.v_alpha_mu) < 1e-8
        pert_ok &= abs(r.v_mu_mu - an.noise_shift_constant(s)) < 1e-8

    ratios = []
    for npart in (4, 6, 8, 10):
        s = npart / 2
        gammas = np.array([0.0005, 0.001, 0.002]) * (40.5 / an.noise_shift_constant(s))
        logs = []
        for gam in gammas:
            st = noisy_echo_mc(make_spin_system(npart), gamma=float(gam), t_oneway=5.0,
                               n_steps=100, theta=0.0, n_circuits=8, rng=RngStream(108),
                               scrambler="brownian")
            logs.append(np.log(st.mean_sz / s))
        kappa = -np.dot(gammas, logs) / np.dot(gammas, gammas)
        ratios.append(kappa / an.noise_shift_constant(s))
    spread = max(ratios) / min(ratios)
    ok = exact_ok and pert_ok and spread < 1.25
    report("7", ok, f"noisy signal at theta=0 exact: {exact_ok}; ground-space matrix elements "
                    f"exact: {pert_ok}; kappa/c spread across S in 2..5 = {spread:.3f} (< 1.25)")
    assert ok


def test_criterion_08_replica_spectra():
    spins = [v / 2 for v in range(1, 21)]  # 1/2 .. 10
    spec_ok = True
    for s in spins:
        sys = make_spin_system(int(round(2 * s)))
        numeric = cluster_spectrum(np.linalg.eigvalsh(build_heff(sys, k=1)))
        exact = exact_spectrum_k1(s)
        spec_ok &= len(numeric.energies) == len(exact.energies)
        spec_ok &= bool(np.abs(numeric.energies - exact.energies).max() < 1e-8)
        spec_ok &= bool(np.array_equal(numeric.degeneracies, exact.degeneracies))

    null_ok = True
    for s in (1.0, 1.5, 2.0):
        sys = make_spin_system(int(round(2 * s)))
        vals, vecs = np.linalg.eigh(build_heff(sys, k=2))
        keep = vals < 1e-7 * np.abs(vals).max()
        null_ok &= int(keep.sum()) == 2
        null = vecs[:, keep]
        alpha, beta = pairing_states(sys)
        for vec in (alpha, beta):
            null_ok &= bool(np.linalg.norm(null @ (null.conj().T @ vec) - vec) < 1e-7)

    rep = roat_brownian_correspondence(1.0, chi=1e-3, dt=1.0, n_axes=100_000, rng=RngStream(109))
    roat_ok = abs(rep.prefactor_ratio - 1.0) < 0.05

    ok = spec_ok and null_ok and roat_ok
    report("8a", ok, f"spectrum formula to 1e-8 up to S=10: {spec_ok}; k=2 null space dim 2: "
                     f"{null_ok}; twist generator prefactor/(1/15) = {rep.prefactor_ratio:.4f} (+-5%)")
    assert ok


def test_criterion_08_gap_approach_at_s25():
    """Stated tolerance is unattainable: |E(25,1) - 4J| = 0.1552 J by the exact formula.

    E(S,1) = 4J (1 + 1/S) - 3J/S^2, so the distance from the 4J asymptote at
    S = 25 is (4*25 - 3)/625 = 0.1552 J > 0.1 J; the 0.1 J window is reached
    from S = 40.  The formula itself is pinned (to 1e-8) by the spectrum check
    above.
    """
    gap = float(level_energy_k1(25.0, 1))
    ok = abs(gap - 4.0) < 0.1
    report("8b", ok, f"|E(S=25, j=1) - 4J| = {abs(gap-4.0):.4f} J (stated < 0.1 J; "
                     f"the exact formula reaches that window at S = 40)")
    assert ok, (
        f"E(25,1) = {gap:.4f} J sits 0.1552 J above 4J by the exact formula; "
        f"the stated 0.1 J tolerance first holds at S = 40"
    )


def _haar_probe_pair(n, theta_max, seed):
    sys = make_spin_system(n)
    psi = haar_unitary(sys.dim, RngStream(seed)) @ dicke_state(sys, sys.spin)
    rho = np.outer(psi, psi.conj())
    return rho, build_gamma_eta(rho, theta_max, 32)


def test_criterion_09_solver_residual_and_bias():
    rng = np.random.default_rng(14)
    ok_res = True
    for d in (8, 32, 64):
        m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        gamma = m @ m.conj().T + 0.5 * np.eye(d)
        gamma /= np.trace(gamma).real
        eta = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        eta = (eta + eta.conj().T) / 2
        a = solve_mmse_observable(MmsePair(gamma, eta, 0.1, 8, "small_theta"))
        ok_res &= bool(np.abs(gamma @ a + a @ gamma - 2 * eta).max() < 1e-8)

    rho, pair = _haar_probe_pair(6, 0.01, seed=110)
    a = solve_mmse_observable(pair)
    ok_res &= bool(np.abs(pair.gamma_op @ a + a @ pair.gamma_op - 2 * pair.eta_op).max() < 1e-8)
    bias = mmse_estimate(a, rho)
    ok_bias = abs(bias - 0.005) / 0.005 < 1e-3
    ok = ok_res and ok_bias
    report("9a", ok, f"anticommutator residual < 1e-8: {ok_res}; bias at theta=0 = {bias:.6f} "
                     f"vs theta_max/2 = 0.005 (+-0.1%)")
    assert ok


def test_criterion_09_observable_slope():
    """Stated tolerance is unattainable: the deviation from (theta_max/2) rho is linear.

    The prior-averaged eta carries an O(theta_max^3) component on the range of
    the depolarizer, where Gamma's eigenvalues are O(theta_max^2); the
    anticommutator solve divides one by the other, leaving an O(theta_max)
    block whose eigenvalue is exactly 3 theta_max / 4 (the posterior mean of a
    uniform prior conditioned on a quadratic-in-theta outcome).  The measured
    log-log slope is therefore 1, not 3.
    """
    devs = []
    for tm in (0.02, 0.04, 0.08):
        rho, pair = _haar_probe_pair(6, tm, seed=110)
        a = solve_mmse_observable(pair)
        devs.append(float(np.abs(a - tm / 2 * rho).max()))
    slope = float(np.polyfit(np.log([0.02, 0.04, 0.08]), np.log(devs), 1)[0])
    ok = slope > 2.7
    report("9b", ok, f"||A - (theta_max/2) rho|| log-log slope = {slope:.3f} (stated ~3; the "
                     f"exact solve has a 3 theta_max/4 shell making the true exponent 1)")
    assert ok, (
        f"slope {slope:.3f}: the exact anticommutator solution deviates from "
        f"(theta_max/2) rho at first order via the depolarizer shell (value 3 theta_max/4); "
        f"deviations {devs}"
    )


def test_criterion_10_gain_surface():
    n = 1000
    xs = np.linspace(0.0, np.pi, 161)
    cgts = [0.0, 0.25, 0.5, 1.0, 2.0]
    surf = an.gain_surface(n, xs, cgts)
    clean_origin = surf.gain_db[0, 0]
    ok_origin = abs(clean_origin - 23.98) < 0.01
    clamped = np.maximum(surf.gain_db, an.GAIN_DB_FLOOR)
    ok_monotone = bool(np.all(np.diff(clamped, axis=0) <= 1e-9))
    ok_optimum = bool(np.all(surf.optimal_x[1:] > 0))
    ok = ok_origin and ok_monotone and ok_optimum
    report("10", ok, f"clean gain at x->0 = {clean_origin:.4f} dB (23.98 +- 0.01); monotone in "
                     f"noise: {ok_monotone}; optimal x > 0 for all noisy rows: {ok_optimum}")
    assert ok


def test_criterion_11_cli_determinism(tmp_path):
    cfg = {
        "n": 8, "n_circuits": 6, "n_axes": 20, "theta_points": 5, "oat_steps": 2,
        "s_values": [0.5, 1.0, 2.0], "channel_probes": 25, "husimi_n_polar": 6,
        "husimi_n_azimuth": 8, "x_points": 8,
        "noise": {"gamma": 0.01, "t_steps": 2},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    trees = []
    for tag, workers in (("a", 1), ("b", 8)):
        out = tmp_path / tag
        for cmd in ("echo-sweep", "oat-converge", "noise-sweep", "heff", "mmse",
                    "channel-check", "husimi"):
            code = cli_main([cmd, "--config", str(cfg_path), "--out", str(out),
                             "--seed", "17", "--workers", str(workers)])
            assert code == 0, f"{cmd} failed"
        trees.append({p.name: p.read_bytes() for p in sorted(Path(out).iterdir())})
    ok = trees[0] == trees[1]
    report("11", ok, f"{len(trees[0])} output files byte-identical across worker counts 1 and 8: {ok}")
    assert ok
