"""Axis-averaged encoding channel, its small-angle depolarizing form, fidelity
QFI, and Lindblad evolution with collective noise.

Averaging a rotation by theta over all axes is, to second order in theta, a
collective depolarizing channel; that reduction and the dissipative echo are
the two channel-level facts this module implements and cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .echo import EchoPointStats, _ordered_map
from .ensembles import RngStream, random_axis, sample_brownian_couplings, brownian_hamiltonian, sample_oat_circuit
from .spin_core import SpinSystem, axis_operator, dicke_state, rotation, spin_operators

__all__ = [
    "IntegrationStepError",
    "LindbladSpec",
    "octahedral_quadrature",
    "axis_averaged_channel",
    "depolarizing_step",
    "fidelity",
    "small_theta_qfi",
    "small_theta_qfi_fidelity",
    "lindblad_evolve",
    "noisy_echo_mc",
]


class IntegrationStepError(RuntimeError):
    """Raised when the fixed integrator step is too coarse for the generator."""


# hard refusal threshold for ||H|| * dt; callers should stay below 0.05
_STEP_LIMIT = 0.1


def octahedral_quadrature() -> tuple[np.ndarray, np.ndarray]:
    """26-point spherical rule: exact for polynomials in n of degree <= 7.

    Vertices, edge midpoints, and face centers of the octahedron with weights
    1/21, 4/105 and 9/280 (weights sum to 1).
    """
    pts = []
    wts = []
    for i in range(3):
        for s in (1.0, -1.0):
            v = np.zeros(3)
            v[i] = s
            pts.append(v)
            wts.append(1 / 21)
    r = 1 / np.sqrt(2)
    for i in range(3):
        j = (i + 1) % 3
        for si in (1.0, -1.0):
            for sj in (1.0, -1.0):
                v = np.zeros(3)
                v[i], v[j] = si * r, sj * r
                pts.append(v)
                wts.append(4 / 105)
    r = 1 / np.sqrt(3)
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                pts.append(np.array([sx, sy, sz]) * r)
                wts.append(9 / 280)
    return np.array(pts), np.array(wts)


def _system_for(rho: np.ndarray) -> SpinSystem:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density operator must be square, got shape {rho.shape}")
    return SpinSystem(rho.shape[0] - 1)


def axis_averaged_channel(rho, theta: float, n_axes: int | None = None, rng=None,
                          quadrature: bool = False) -> np.ndarray:
    """E_n[R_n(theta) rho R_n(theta)^dag] by Monte Carlo or spherical quadrature.

    Monte Carlo mode draws ``n_axes`` uniform axes from ``rng``; quadrature
    mode uses the deterministic 26-point octahedral rule.
    """
    rho = np.asarray(rho, dtype=complex)
    sys = _system_for(rho)
    if quadrature:
        axes, weights = octahedral_quadrature()
    else:
        if n_axes is None or rng is None or n_axes < 1:
            raise ValueError("Monte Carlo mode needs n_axes >= 1 and an rng")
        g = rng.generator() if isinstance(rng, RngStream) else rng
        axes = np.array([random_axis(g) for _ in range(n_axes)])
        weights = np.full(len(axes), 1 / len(axes))
    out = np.zeros_like(rho)
    for w, ax in zip(weights, axes):
        r = rotation(sys, ax, theta)
        out += w * (r @ rho @ r.conj().T)
    return (out + out.conj().T) / 2


def depolarizing_step(rho, theta: float) -> np.ndarray:
    """Second-order form of the axis average:
    rho + (theta^2/3) sum_j (S_j rho S_j - {S_j^2, rho}/2)."""
    rho = np.asarray(rho, dtype=complex)
    sys = _system_for(rho)
    ops = spin_operators(sys)
    acc = np.zeros_like(rho)
    for s_j in (ops.sx, ops.sy, ops.sz):
        sq = s_j @ s_j
        acc += s_j @ rho @ s_j - 0.5 * (sq @ rho + rho @ sq)
    return rho + theta**2 / 3 * acc


def _psd_sqrt(mat: np.ndarray, name: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.conj().T) / 2)
    if vals.min() < -1e-8:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {vals.min():.3e})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity Tr[sqrt(sqrt(rho) sigma sqrt(rho))]^2."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    root = _psd_sqrt(rho, "rho")
    inner = root @ sigma @ root
    vals = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum() ** 2)


def _check_pure(rho: np.ndarray):
    purity = float(np.real(np.trace(rho @ rho)))
    if abs(purity - 1.0) > 1e-8:
        raise ValueError(f"state must be pure, got Tr(rho^2) = {purity}")


def small_theta_qfi(rho) -> float:
    """Small-angle axis-averaged QFI of a pure state: (4/3) sum_j Var(S_j)."""
    rho = np.asarray(rho, dtype=complex)
    sys = _system_for(rho)
    _check_pure(rho)
    ops = spin_operators(sys)
    total = 0.0
    for s_j in (ops.sx, ops.sy, ops.sz):
        mean = np.real(np.trace(s_j @ rho))
        mean_sq = np.real(np.trace(s_j @ s_j @ rho))
        total += mean_sq - mean**2
    return 4 / 3 * total


def small_theta_qfi_fidelity(rho, theta: float, exact: bool = False) -> float:
    """Cross-check route: 8 (1 - sqrt(f(rho, M_theta[rho]))) / theta^2.

    ``exact`` switches the encoding from the second-order depolarizing form to
    the full axis average on the deterministic quadrature.
    """
    rho = np.asarray(rho, dtype=complex)
    _check_pure(rho)
    if theta == 0:
        raise ValueError("theta must be nonzero for the fidelity route")
    encoded = axis_averaged_channel(rho, theta, quadrature=True) if exact else depolarizing_step(rho, theta)
    f = fidelity(rho, encoded)
    return 8 * (1 - np.sqrt(max(f, 0.0))) / theta**2


# ---------------------------------------------------------------------------
# Lindblad evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LindbladSpec:
    """Collective dissipation plus a piecewise-constant Hamiltonian drive.

    model: "isotropic_collective" (jumps sqrt(gamma) S_j, j in x,y,z) or
    "z_collective" (single jump sqrt(gamma) Sz).  ``dt`` caps the integrator
    step; segments are subdivided to at most that length.
    """

    model: str
    gamma: float
    dt: float
    hamiltonian_schedule: list = field(default_factory=list)

    def __post_init__(self):
        if self.model not in ("isotropic_collective", "z_collective"):
            raise ValueError(f"unknown noise model {self.model!r}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        for _, duration in self.hamiltonian_schedule:
            if duration < 0:
                raise ValueError("segment durations must be >= 0")


def _jump_ops(sys: SpinSystem, model: str) -> list[np.ndarray]:
    ops = spin_operators(sys)
    if model == "isotropic_collective":
        return [ops.sx, ops.sy, ops.sz]
    return [ops.sz]


def _spectral_norm(h: np.ndarray) -> float:
    vals = np.linalg.eigvalsh((h + h.conj().T) / 2)
    return float(np.abs(vals).max()) if vals.size else 0.0


def _dissipator_matrix(sys: SpinSystem, model: str, gamma: float) -> np.ndarray:
    """Vectorized (row-major) superoperator of the collective dissipator."""
    d = sys.dim
    eye = np.eye(d)
    jumps = _jump_ops(sys, model)
    k_sum = sum(j @ j for j in jumps)
    out = np.zeros((d * d, d * d), dtype=complex)
    for j in jumps:
        out += np.kron(j, j.T)
    out -= 0.5 * (np.kron(k_sum, eye) + np.kron(eye, k_sum.T))
    return gamma * out


def _hamiltonian_matrix(h: np.ndarray) -> np.ndarray:
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def lindblad_evolve(rho, spec: LindbladSpec) -> np.ndarray:
    """Integrate drho/dt = -i[H(t), rho] + gamma sum_j (S_j rho S_j - {S_j^2, rho}/2).

    Classic fixed-step 4th-order Runge-Kutta on the vectorized state; the
    substep within each schedule segment is the largest value not exceeding
    ``spec.dt`` that also keeps ||H|| * step and gamma S^2 * step below 0.05.
    Refuses to run if that would still leave ||H|| * step above 0.1.  The
    state is re-symmetrized after every step.
    """
    rho = np.asarray(rho, dtype=complex)
    sys = _system_for(rho)
    d = sys.dim
    diss = _dissipator_matrix(sys, spec.model, spec.gamma) if spec.gamma > 0 else None
    rate_scale = spec.gamma * sys.spin**2
    vec = rho.reshape(-1).copy()

    for h, duration in spec.hamiltonian_schedule:
        if duration == 0:
            continue
        gen = diss.copy() if diss is not None else np.zeros((d * d, d * d), dtype=complex)
        hnorm = 0.0
        if h is not None:
            h = np.asarray(h, dtype=complex)
            hnorm = _spectral_norm(h)
            gen += _hamiltonian_matrix(h)
        requested = min(spec.dt, duration)
        if hnorm * requested > _STEP_LIMIT:
            raise IntegrationStepError(
                f"||H|| * dt = {hnorm * requested:.3f} exceeds {_STEP_LIMIT}; "
                f"reduce dt below {_STEP_LIMIT / hnorm:.3e}"
            )
        n_sub = max(
            1,
            int(np.ceil(duration / spec.dt)),
            int(np.ceil(duration * hnorm / 0.05)),
            int(np.ceil(duration * rate_scale / 0.05)),
        )
        step = duration / n_sub
        for _ in range(n_sub):
            k1 = gen @ vec
            k2 = gen @ (vec + 0.5 * step * k1)
            k3 = gen @ (vec + 0.5 * step * k2)
            k4 = gen @ (vec + step * k3)
            vec = vec + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            mat = vec.reshape(d, d)
            vec = ((mat + mat.conj().T) / 2).reshape(-1)
    return vec.reshape(d, d)


# ---------------------------------------------------------------------------
# Noisy echo Monte Carlo
# ---------------------------------------------------------------------------

def noisy_echo_mc(
    sys: SpinSystem,
    gamma: float,
    t_oneway: float,
    n_steps: int,
    theta: float,
    n_circuits: int,
    rng: RngStream,
    scrambler: str = "brownian",
    model: str = "isotropic_collective",
    axis=None,
    brownian_rate: float = 1.0,
    strength: float | None = None,
    workers: int = 1,
) -> EchoPointStats:
    """Echo statistics with dissipation active during both evolution legs.

    Each circuit realization scrambles for ``t_oneway`` (``n_steps`` segments
    of Brownian couplings or one-axis twists), rotates by ``theta`` about
    ``axis`` (random per circuit if None), then runs the reversed schedule
    with the Hamiltonians negated, all under the chosen collective noise at
    rate ``gamma``.  Returns circuit-averaged moments of Sz.
    """
    if n_circuits < 2:
        raise ValueError("n_circuits must be >= 2")
    if scrambler not in ("brownian", "oat"):
        raise ValueError(f"unknown scrambler {scrambler!r}")
    if n_steps < 1 or t_oneway <= 0:
        raise ValueError("need n_steps >= 1 and t_oneway > 0")
    ops = spin_operators(sys)
    seg = t_oneway / n_steps
    polarized = dicke_state(sys, sys.spin)
    rho0 = np.outer(polarized, polarized.conj())

    def one_circuit(i: int) -> tuple[float, float]:
        stream = rng.offset(1 + i)
        g = stream.generator()
        hams = []
        if scrambler == "brownian":
            for _ in range(n_steps):
                j = sample_brownian_couplings(brownian_rate, sys.spin, seg, g)
                hams.append(brownian_hamiltonian(sys, j))
        else:
            circuit = sample_oat_circuit(sys, n_steps, g, strength=strength)
            for ax, chi_t in circuit.steps():
                sn = axis_operator(sys, ax)
                hams.append((chi_t / seg) * (sn @ sn))
        rot_axis = axis if axis is not None else random_axis(g)

        # keep max(||H|| dt, gamma S^2 dt) below 0.05 across the schedule
        max_norm = max(_spectral_norm(h) for h in hams)
        dt = min(seg, 0.05 / max(max_norm, gamma * sys.spin**2, 1e-12))
        forward = LindbladSpec(model, gamma, dt, [(h, seg) for h in hams])
        backward = LindbladSpec(model, gamma, dt, [(-h, seg) for h in reversed(hams)])

        rho = lindblad_evolve(rho0, forward)
        r = rotation(sys, rot_axis, theta)
        rho = r @ rho @ r.conj().T
        rho = lindblad_evolve(rho, backward)
        sz = float(np.real(np.trace(ops.sz @ rho)))
        sz2 = float(np.real(np.trace(ops.sz @ ops.sz @ rho)))
        return sz, sz2

    results = _ordered_map(one_circuit, range(n_circuits), workers)
    sz_vals = np.array([r[0] for r in results])
    sz2_vals = np.array([r[1] for r in results])
    return EchoPointStats(
        theta=float(theta),
        x=float(sys.spin * theta),
        mean_sz=float(sz_vals.mean()),
        mean_sz2=float(sz2_vals.mean()),
        var_over_circuits_sz=float(sz_vals.var(ddof=1)),
        n_samples=n_circuits,
    )
