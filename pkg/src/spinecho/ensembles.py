"""Seeded random ensembles: Haar unitaries, uniform axes, twisting circuits,
and Brownian interaction steps.

Randomness is counter-based: every Monte Carlo sample derives its own
:class:`RngStream` from ``(master_seed, stream_index)``, so results are
independent of worker count and scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .spin_core import SpinSystem, axis_operator, expm_hermitian, spin_operators

__all__ = [
    "RngStream",
    "OatCircuit",
    "haar_unitary",
    "random_axis",
    "default_twist_strength",
    "sample_oat_circuit",
    "twist_unitary",
    "apply_oat",
    "oat_matrix",
    "sample_brownian_couplings",
    "brownian_hamiltonian",
    "sample_brownian_step",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic, independently seeded random stream."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)

    def offset(self, delta: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_index + delta)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix.

    The raw QR of a Ginibre matrix is not Haar; multiplying each column of Q
    by the phase of the matching diagonal entry of R fixes the distribution.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = _gen(rng)
    z = (g.standard_normal((dim, dim)) + 1j * g.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_axis(rng) -> np.ndarray:
    """Uniform point on the 2-sphere (normalized Gaussian 3-vector)."""
    g = _gen(rng)
    while True:
        v = g.standard_normal(3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def default_twist_strength(n_particles: int) -> float:
    """Twist strength chi*t = pi / (2 sqrt(N)): one wrap of a coherent state."""
    return np.pi / (2 * np.sqrt(n_particles))


@dataclass(frozen=True)
class OatCircuit:
    """Sequence of one-axis twists exp(-i chi t S_m^2) along random axes."""

    n_particles: int
    strength: float
    axes: np.ndarray  # shape (n_steps, 3)

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        if axes.size and np.any(np.abs((axes**2).sum(axis=1) - 1) > 1e-10):
            raise ValueError("all twist axes must be unit vectors")
        if not np.isfinite(self.strength):
            raise ValueError("twist strength must be finite")
        axes.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @property
    def n_steps(self) -> int:
        return self.axes.shape[0]

    def steps(self):
        for ax in self.axes:
            yield ax, self.strength

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n_particles, "strength": self.strength, "axes": self.axes.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "OatCircuit":
        doc = json.loads(text)
        return cls(doc["n"], doc["strength"], np.asarray(doc["axes"], dtype=float).reshape(-1, 3))


def sample_oat_circuit(sys: SpinSystem, n_steps: int, rng, strength: float | None = None) -> OatCircuit:
    """Circuit of n_steps twists about independent uniform axes."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if strength is None:
        strength = default_twist_strength(sys.n_particles)
    g = _gen(rng)
    axes = np.array([random_axis(g) for _ in range(n_steps)]).reshape(-1, 3)
    return OatCircuit(sys.n_particles, float(strength), axes)


def twist_unitary(sys: SpinSystem, axis, strength: float) -> np.ndarray:
    """One twist exp(-i strength S_axis^2)."""
    sn = axis_operator(sys, axis)
    vals, vecs = np.linalg.eigh((sn + sn.conj().T) / 2)
    return (vecs * np.exp(-1j * strength * vals**2)) @ vecs.conj().T


def apply_oat(circuit: OatCircuit, psi: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Apply the circuit unitary U = U_k ... U_1 (or its inverse) to a ket."""
    sys = SpinSystem(circuit.n_particles)
    if psi.shape != (sys.dim,):
        raise ValueError(f"state has dimension {psi.shape}, expected ({sys.dim},)")
    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    out = psi.astype(complex)
    axes = circuit.axes if direction == "forward" else circuit.axes[::-1]
    sign = 1.0 if direction == "forward" else -1.0
    for ax in axes:
        out = twist_unitary(sys, ax, sign * circuit.strength) @ out
    return out


def oat_matrix(circuit: OatCircuit) -> np.ndarray:
    """Full circuit unitary as a dense matrix."""
    sys = SpinSystem(circuit.n_particles)
    u = np.eye(sys.dim, dtype=complex)
    for ax in circuit.axes:
        u = twist_unitary(sys, ax, circuit.strength) @ u
    return u


# ---------------------------------------------------------------------------
# Brownian interaction steps
# ---------------------------------------------------------------------------

def sample_brownian_couplings(rate: float, spin: float, dt: float, rng) -> np.ndarray:
    """Symmetric Gaussian coupling matrix J^{ab} for one Brownian timestep.

    Diagonal entries have variance 2 J / (S^2 dt) and each unordered
    off-diagonal pair has variance J / (S^2 dt), reproducing the target
    second moments E[J^{ab} J^{a'b'}] = (d^{aa'} d^{bb'} + d^{ab'} d^{a'b})
    * J / (S^2 dt).
    """
    if dt <= 0 or rate <= 0:
        raise ValueError("rate and dt must be positive")
    g = _gen(rng)
    base = rate / (spin**2 * dt)
    j = np.zeros((3, 3))
    j[np.diag_indices(3)] = g.normal(scale=np.sqrt(2 * base), size=3)
    upper = g.normal(scale=np.sqrt(base), size=3)
    iu = np.triu_indices(3, k=1)
    j[iu] = upper
    j[(iu[1], iu[0])] = upper
    return j


def brownian_hamiltonian(sys: SpinSystem, couplings: np.ndarray) -> np.ndarray:
    """H_B = sum_{ab} J^{ab} S^a S^b; Hermitian for symmetric couplings."""
    ops = spin_operators(sys)
    s_vec = (ops.sx, ops.sy, ops.sz)
    h = np.zeros((sys.dim, sys.dim), dtype=complex)
    for a in range(3):
        for b in range(3):
            if couplings[a, b] != 0.0:
                h += couplings[a, b] * (s_vec[a] @ s_vec[b])
    return h


def sample_brownian_step(sys: SpinSystem, rate: float, dt: float, rng) -> np.ndarray:
    """One Brownian step exp(-i H_B dt) with freshly sampled couplings."""
    j = sample_brownian_couplings(rate, sys.spin, dt, rng)
    h = brownian_hamiltonian(sys, j)
    return expm_hermitian(h, -1j * dt)
