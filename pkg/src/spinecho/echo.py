"""The scramble / rotate / unscramble echo protocol and its Monte Carlo sweeps.

The protocol prepares ``|chi> = U^dag R_n(theta) U |S,S>`` and reads out the
polarization deficit: at theta = 0 the echo is perfect and <Sz> = S for any
unitary scrambler; a small rotation about an arbitrary axis shows up as a
quadratic dip whose curvature carries the angle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .ensembles import (
    OatCircuit,
    RngStream,
    apply_oat,
    haar_unitary,
    oat_matrix,
    random_axis,
    sample_brownian_step,
    sample_oat_circuit,
    twist_unitary,
)
from .spin_core import SpinSystem, axis_operator, dicke_state, rotation, spin_operators

__all__ = [
    "EnsembleSpec",
    "EchoPointStats",
    "EchoSweepResult",
    "QfiStats",
    "SensitivityProfile",
    "IsotropyReport",
    "sample_scrambler",
    "run_echo",
    "probe_qfi",
    "qfi_convergence",
    "echo_sweep",
    "sensitivity_from_sweep",
    "metrological_gain",
    "moment_isotropy_check",
]

# stream-index layout inside one operation: index 0 feeds shared draws (axis
# pools), circuit i draws from index 1 + i
_CIRCUIT_BASE = 1


@dataclass(frozen=True)
class EnsembleSpec:
    """Which scrambler family a Monte Carlo run draws from."""

    kind: str  # "haar" | "oat" | "brownian" | "identity"
    oat_steps: int = 8
    twist_strength: float | None = None  # None -> pi / (2 sqrt(N))
    brownian_steps: int = 64
    brownian_rate: float = 1.0
    brownian_dt: float = 0.05

    def __post_init__(self):
        if self.kind not in ("haar", "oat", "brownian", "identity"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")


def sample_scrambler(sys: SpinSystem, spec: EnsembleSpec, rng: RngStream) -> np.ndarray:
    """Draw one scrambling unitary as a dense matrix."""
    if spec.kind == "identity":
        return np.eye(sys.dim, dtype=complex)
    if spec.kind == "haar":
        return haar_unitary(sys.dim, rng)
    if spec.kind == "oat":
        circuit = sample_oat_circuit(sys, spec.oat_steps, rng, strength=spec.twist_strength)
        return oat_matrix(circuit)
    g = rng.generator()
    u = np.eye(sys.dim, dtype=complex)
    for _ in range(spec.brownian_steps):
        u = sample_brownian_step(sys, spec.brownian_rate, spec.brownian_dt, g) @ u
    return u


# ---------------------------------------------------------------------------
# Single-shot echo and QFI
# ---------------------------------------------------------------------------

def run_echo(sys: SpinSystem, scrambler, axis, theta: float) -> tuple[float, float]:
    """Run one echo and return (<Sz>, <Sz^2>) in the final state.

    ``scrambler`` is either a dense unitary matrix or an :class:`OatCircuit`.
    """
    rot = rotation(sys, axis, theta)
    polarized = dicke_state(sys, sys.spin)
    if isinstance(scrambler, OatCircuit):
        probe = apply_oat(scrambler, polarized)
        chi = apply_oat(scrambler, rot @ probe, direction="reverse")
    else:
        u = np.asarray(scrambler)
        if u.shape != (sys.dim, sys.dim):
            raise ValueError(f"scrambler has shape {u.shape}, expected {(sys.dim, sys.dim)}")
        chi = u.conj().T @ (rot @ (u @ polarized))
    m = sys.m_values()
    weights = np.abs(chi) ** 2
    return float(weights @ m), float(weights @ m**2)


def probe_qfi(psi: np.ndarray, axis) -> float:
    """Rotation QFI of a pure probe: 4 Var(S_n)."""
    psi = np.asarray(psi, dtype=complex)
    sys = SpinSystem(psi.shape[0] - 1)
    sn = axis_operator(sys, axis)
    v = sn @ psi
    mean = np.real(psi.conj() @ v)
    mean_sq = np.real(v.conj() @ v)
    return float(4 * (mean_sq - mean**2))


def _first_second_spin_moments(psi: np.ndarray, ops) -> tuple[np.ndarray, np.ndarray]:
    """Polarization vector m_a = <S_a> and symmetrized matrix C_ab = Re<S_a S_b>.

    For any unit axis n, <S_n> = m . n and <S_n^2> = n^T C n, so the QFI for
    every axis follows from these ten real numbers.
    """
    vecs = [ops.sx @ psi, ops.sy @ psi, ops.sz @ psi]
    m = np.array([np.real(psi.conj() @ v) for v in vecs])
    c = np.empty((3, 3))
    for a in range(3):
        for b in range(a, 3):
            c[a, b] = c[b, a] = np.real(vecs[a].conj() @ vecs[b])
    return m, c


def _qfi_for_axes(m: np.ndarray, c: np.ndarray, axes: np.ndarray) -> np.ndarray:
    quad = np.einsum("ka,ab,kb->k", axes, c, axes)
    lin = axes @ m
    return 4 * (quad - lin**2)


# ---------------------------------------------------------------------------
# QFI convergence under repeated random twists
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QfiStats:
    """QFI statistics over scrambling circuits at one circuit depth.

    ``mean_qfi`` averages the QFI over circuits and the axis pool;
    ``std_qfi`` is the circuit-to-circuit standard deviation at fixed axis,
    root-mean-squared over the axis pool (the shot-to-shot fluctuation a
    fixed-axis experiment would see).
    """

    step: int
    mean_qfi: float
    std_qfi: float
    n_circuits: int
    n_axes: int


def qfi_convergence(
    sys: SpinSystem,
    n_steps_max: int,
    n_circuits: int,
    n_axes: int,
    rng: RngStream,
    strength: float | None = None,
    workers: int = 1,
) -> list[QfiStats]:
    """Track QFI statistics as twisting circuits deepen from 0 to n_steps_max.

    Each circuit is grown one twist at a time, so depth-t statistics describe
    the prefix of the same random circuit.  The axis pool is shared by all
    circuits and depths.
    """
    if n_steps_max < 0 or n_circuits < 1 or n_axes < 1:
        raise ValueError("counts must be positive (n_steps_max >= 0)")
    ops = spin_operators(sys)
    axis_gen = rng.generator()
    axes = np.array([random_axis(axis_gen) for _ in range(n_axes)])
    polarized = dicke_state(sys, sys.spin)

    def one_circuit(i: int) -> np.ndarray:
        circuit = sample_oat_circuit(sys, n_steps_max, rng.offset(_CIRCUIT_BASE + i), strength=strength)
        qfi = np.empty((n_steps_max + 1, n_axes))
        psi = polarized
        m, c = _first_second_spin_moments(psi, ops)
        qfi[0] = _qfi_for_axes(m, c, axes)
        for t, (ax, chi_t) in enumerate(circuit.steps(), start=1):
            psi = twist_unitary(sys, ax, chi_t) @ psi
            m, c = _first_second_spin_moments(psi, ops)
            qfi[t] = _qfi_for_axes(m, c, axes)
        return qfi

    per_circuit = _ordered_map(one_circuit, range(n_circuits), workers)
    cube = np.stack(per_circuit)  # (n_circuits, n_steps+1, n_axes)

    out = []
    for t in range(n_steps_max + 1):
        block = cube[:, t, :]
        mean = float(block.mean())
        if n_circuits > 1:
            per_axis_var = block.var(axis=0, ddof=1)
            std = float(np.sqrt(per_axis_var.mean()))
        else:
            std = 0.0
        out.append(QfiStats(t, mean, std, n_circuits, n_axes))
    return out


# ---------------------------------------------------------------------------
# Echo sweeps over a theta grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EchoPointStats:
    theta: float
    x: float  # S * theta
    mean_sz: float
    mean_sz2: float
    var_over_circuits_sz: float
    n_samples: int


@dataclass(frozen=True)
class SensitivityProfile:
    """Finite-difference 1/Delta(theta) per grid point, with 0/0 points flagged.

    Where the quantum noise vanishes (the perfect echo at theta = 0) the
    value is copied from the nearest resolvable grid point and flagged,
    matching the limit definition of the sensitivity.
    """

    values: np.ndarray
    flagged: np.ndarray


@dataclass(frozen=True)
class EchoSweepResult:
    sys: SpinSystem
    points: list[EchoPointStats]
    sensitivity: np.ndarray
    sensitivity_flagged: np.ndarray
    gain_db: np.ndarray
    seed: int
    ensemble_tag: str

    @property
    def theta(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])


def echo_sweep(
    sys: SpinSystem,
    ensemble: EnsembleSpec,
    theta_grid,
    n_circuits: int,
    rng: RngStream,
    fixed_axis=None,
    workers: int = 1,
) -> EchoSweepResult:
    """Monte Carlo echo statistics on a theta grid.

    Per grid point: the circuit-averaged <Sz> and <Sz^2> and the unbiased
    across-circuit variance of <Sz>.  The rotation axis is either fixed for
    all circuits or drawn fresh per circuit.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.size == 0:
        raise ValueError("theta grid must be nonempty")
    if np.any(np.diff(theta_grid) <= 0) and theta_grid.size > 1:
        raise ValueError("theta grid must be strictly increasing")
    if n_circuits < 2:
        raise ValueError("n_circuits must be >= 2")

    m = sys.m_values()
    polarized = dicke_state(sys, sys.spin)
    fixed_eig = None
    if fixed_axis is not None:
        sn = axis_operator(sys, fixed_axis)
        fixed_eig = np.linalg.eigh((sn + sn.conj().T) / 2)

    def one_circuit(i: int) -> tuple[np.ndarray, np.ndarray]:
        stream = rng.offset(_CIRCUIT_BASE + i)
        u = sample_scrambler(sys, ensemble, stream)
        if fixed_eig is not None:
            vals, vecs = fixed_eig
        else:
            sn = axis_operator(sys, random_axis(stream.offset(2**32).generator()))
            vals, vecs = np.linalg.eigh((sn + sn.conj().T) / 2)
        psi = u @ polarized
        a = vecs.conj().T @ psi
        back = u.conj().T @ vecs
        sz = np.empty(theta_grid.size)
        sz2 = np.empty(theta_grid.size)
        for k, th in enumerate(theta_grid):
            chi = back @ (np.exp(-1j * vals * th) * a)
            w = np.abs(chi) ** 2
            sz[k] = w @ m
            sz2[k] = w @ m**2
        return sz, sz2

    rows = _ordered_map(one_circuit, range(n_circuits), workers)
    sz_mat = np.stack([r[0] for r in rows])
    sz2_mat = np.stack([r[1] for r in rows])

    mean_sz = sz_mat.mean(axis=0)
    mean_sz2 = sz2_mat.mean(axis=0)
    var_sz = sz_mat.var(axis=0, ddof=1)

    points = [
        EchoPointStats(float(th), float(sys.spin * th), float(mean_sz[k]), float(mean_sz2[k]),
                       float(var_sz[k]), n_circuits)
        for k, th in enumerate(theta_grid)
    ]
    if theta_grid.size >= 3:
        profile = sensitivity_from_sweep(points, spin=sys.spin)
    else:
        # too few points for finite differences: no sensitivity estimate
        profile = SensitivityProfile(np.zeros(theta_grid.size), np.ones(theta_grid.size, dtype=bool))
    gain = metrological_gain(profile.values, sys.n_particles)
    return EchoSweepResult(
        sys=sys,
        points=points,
        sensitivity=profile.values,
        sensitivity_flagged=profile.flagged,
        gain_db=gain,
        seed=rng.master_seed,
        ensemble_tag=ensemble.kind,
    )


def sensitivity_from_sweep(points, quantum_noise=None, spin: float | None = None) -> SensitivityProfile:
    """Finite-difference angular sensitivity |d(S - <Sz>)/dtheta| / Delta(Sz).

    Central differences in the interior, one-sided at the ends.  Points where
    the noise vanishes (0/0 at the perfect echo) take the value of the
    nearest resolvable point and are flagged rather than divided.
    """
    theta = np.array([p.theta for p in points], dtype=float)
    if theta.size < 3:
        raise ValueError("need at least 3 grid points for finite differences")
    mean_sz = np.array([p.mean_sz for p in points], dtype=float)
    if spin is None:
        spin = max(p.mean_sz for p in points)
    if quantum_noise is None:
        mean_sz2 = np.array([p.mean_sz2 for p in points], dtype=float)
        quantum_noise = np.sqrt(np.maximum(mean_sz2 - mean_sz**2, 0.0))
    noise = np.asarray(quantum_noise, dtype=float)

    deriv = np.abs(np.gradient(spin - mean_sz, theta))
    resolvable = noise > 1e-9 * max(spin, 1.0)
    values = np.zeros_like(deriv)
    values[resolvable] = deriv[resolvable] / noise[resolvable]
    flagged = ~resolvable
    if np.any(flagged):
        if not np.any(resolvable):
            values[:] = 0.0  # flat signal: no sensitivity anywhere
            flagged = np.zeros_like(flagged)
            return SensitivityProfile(values, flagged)
        good_idx = np.flatnonzero(resolvable)
        for i in np.flatnonzero(flagged):
            values[i] = values[good_idx[np.argmin(np.abs(good_idx - i))]]
    return SensitivityProfile(values, flagged)


def metrological_gain(inv_delta_theta, n_particles: int):
    """Gain in dB over the standard quantum limit; -inf at zero sensitivity."""
    return analytics.metrological_gain_db(inv_delta_theta, n_particles)


# ---------------------------------------------------------------------------
# Moment isotropy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IsotropyReport:
    """Axis dependence of ensemble-averaged spin moments E[<S_n^t>], t <= 2k.

    ``spread`` is max - min of the per-axis ensemble means; ``spread_over_se``
    relates it to the median standard error (infinite when there is spread but
    no sampling noise, as for a single fixed state).
    """

    orders: list[int]
    axis_means: dict[int, np.ndarray]
    axis_ses: dict[int, np.ndarray]
    spread: dict[int, float]
    spread_over_se: dict[int, float]
    n_circuits: int
    axes: np.ndarray = field(repr=False)


def moment_isotropy_check(
    sys: SpinSystem,
    ensemble: EnsembleSpec | None,
    k: int,
    n_circuits: int,
    n_axes: int,
    rng: RngStream,
    state: np.ndarray | None = None,
) -> IsotropyReport:
    """Estimate E[<S_n^t>] for t <= 2k over a pool of test axes.

    With ``ensemble=None`` the single ``state`` is analyzed instead (no
    sampling noise); anisotropy of a fixed coherent state is macroscopic and
    shows up as an infinite spread-over-SE.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    orders = list(range(1, 2 * k + 1))
    axis_gen = rng.generator()
    axes = np.array([random_axis(axis_gen) for _ in range(n_axes)])
    polarized = dicke_state(sys, sys.spin)

    if ensemble is None:
        if state is None:
            raise ValueError("need a state when no ensemble is given")
        states = [np.asarray(state, dtype=complex)]
    else:
        states = [
            sample_scrambler(sys, ensemble, rng.offset(_CIRCUIT_BASE + i)) @ polarized
            for i in range(n_circuits)
        ]

    sn_ops = [axis_operator(sys, ax) for ax in axes]
    samples = np.empty((len(states), n_axes, len(orders)))
    for i, psi in enumerate(states):
        for a, sn in enumerate(sn_ops):
            v = psi
            for t in orders:
                v = sn @ v
                samples[i, a, t - 1] = np.real(psi.conj() @ v)

    means = samples.mean(axis=0)
    if len(states) > 1:
        ses = samples.std(axis=0, ddof=1) / np.sqrt(len(states))
    else:
        ses = np.zeros_like(means)

    axis_means = {t: means[:, t - 1] for t in orders}
    axis_ses = {t: ses[:, t - 1] for t in orders}
    spread = {t: float(means[:, t - 1].max() - means[:, t - 1].min()) for t in orders}
    spread_over_se = {}
    for t in orders:
        se = float(np.median(ses[:, t - 1]))
        if se > 0:
            spread_over_se[t] = spread[t] / se
        else:
            spread_over_se[t] = np.inf if spread[t] > 1e-10 * sys.spin**t else 0.0
    return IsotropyReport(orders, axis_means, axis_ses, spread, spread_over_se, len(states), axes)


# ---------------------------------------------------------------------------

def _ordered_map(fn, items, workers: int) -> list:
    """Map preserving input order; thread pool only changes wall time, not output."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
