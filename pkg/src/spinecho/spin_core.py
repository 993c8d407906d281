"""Exact spin-S operator algebra on the (N+1)-dimensional symmetric subspace.

Basis convention: index ``i`` maps to the Dicke state ``|S, m = S - i>``, so
the fully polarized state ``|S,S>`` is the first basis vector and
``Sz = diag(S, S-1, ..., -S)``.  Operators are dense complex matrices,
states are complex vectors; both are plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

__all__ = [
    "SpinSystem",
    "SpinOperators",
    "make_spin_system",
    "spin_operators",
    "axis_operator",
    "rotation",
    "expm_hermitian",
    "trace_rotation_pair",
    "dicke_state",
    "coherent_state",
    "unit_axis",
    "husimi_q",
    "husimi_quadrature",
    "husimi_norm",
]

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SpinSystem:
    """Collective spin of N two-level particles, restricted to total spin S = N/2."""

    n_particles: int

    def __post_init__(self):
        n = self.n_particles
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise ValueError(f"n_particles must be a positive integer, got {n!r}")
        object.__setattr__(self, "n_particles", int(n))

    @property
    def spin(self) -> float:
        return self.n_particles / 2

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    def m_values(self) -> np.ndarray:
        """Sz eigenvalues in basis order: S, S-1, ..., -S."""
        return self.spin - np.arange(self.dim)


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray


def make_spin_system(n_particles: int) -> SpinSystem:
    return SpinSystem(n_particles)


@lru_cache(maxsize=None)
def _operators(n_particles: int) -> SpinOperators:
    sys = SpinSystem(n_particles)
    s, d = sys.spin, sys.dim
    m = sys.m_values()
    # <m+1| S+ |m> = sqrt(S(S+1) - m(m+1)); source column j holds m = m[j]
    c = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((d, d), dtype=complex)
    sp[np.arange(d - 1), np.arange(1, d)] = c
    sm = sp.conj().T
    ops = SpinOperators(
        sx=(sp + sm) / 2,
        sy=(sp - sm) / 2j,
        sz=np.diag(m).astype(complex),
        sp=sp,
        sm=sm,
    )
    for a in (ops.sx, ops.sy, ops.sz, ops.sp, ops.sm):
        a.setflags(write=False)
    return ops


def spin_operators(sys: SpinSystem) -> SpinOperators:
    """Sx, Sy, Sz and the ladder operators S+, S- as dense matrices."""
    return _operators(sys.n_particles)


def unit_axis(vec) -> np.ndarray:
    """Normalize a 3-vector to unit length."""
    v = np.asarray(vec, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / norm


def _check_unit(axis) -> np.ndarray:
    v = np.asarray(axis, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {v.shape}")
    if abs(v @ v - 1.0) > 1e-10:
        raise ValueError(f"axis must have unit norm, got |n|^2 = {v @ v!r}")
    return v


def axis_operator(sys: SpinSystem, axis) -> np.ndarray:
    """Spin projection S_n = n . (Sx, Sy, Sz) along a unit axis."""
    n = _check_unit(axis)
    ops = spin_operators(sys)
    return n[0] * ops.sx + n[1] * ops.sy + n[2] * ops.sz


def expm_hermitian(mat: np.ndarray, factor: complex) -> np.ndarray:
    """exp(factor * M) for Hermitian M via eigendecomposition.

    The input is symmetrized before diagonalizing, so the result is exactly
    unitary (for imaginary ``factor``) up to roundoff.
    """
    h = (mat + mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(factor * vals)) @ vecs.conj().T


def rotation(sys: SpinSystem, axis, theta: float) -> np.ndarray:
    """Rotation exp(-i S_n theta), computed in the eigenbasis of S_n."""
    return expm_hermitian(axis_operator(sys, axis), -1j * theta)


def trace_rotation_pair(sys: SpinSystem, axis_a, axis_b, theta: float, sign: int = 1) -> complex:
    """Tr[exp(-i S_a theta) exp(sign * i S_b theta)] for sign = +1 or -1.

    The value is real up to roundoff: the product of two rotations is a
    rotation, whose character depends only on the combined angle.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    u = rotation(sys, axis_a, theta)
    v = rotation(sys, axis_b, -sign * theta)
    return complex(np.trace(u @ v))


def dicke_state(sys: SpinSystem, m: float) -> np.ndarray:
    """Basis vector for |S, m>."""
    s = sys.spin
    idx = s - m
    if abs(idx - round(idx)) > 1e-9 or not (0 <= round(idx) < sys.dim):
        raise ValueError(f"m must lie in {{-S, ..., S}} in integer steps, got m={m} for S={s}")
    psi = np.zeros(sys.dim, dtype=complex)
    psi[int(round(idx))] = 1.0
    return psi


def coherent_state(sys: SpinSystem, axis) -> np.ndarray:
    """Spin-coherent state along n: the rotation taking z to n applied to |S,S>.

    The rotation axis is (z x n)/|z x n|; for n = +/-z the coordinate
    singularity is resolved as the identity / a pi rotation about x.
    """
    n = _check_unit(axis)
    polarized = dicke_state(sys, sys.spin)
    if n[2] >= 1.0 - 1e-14:
        return polarized
    if n[2] <= -1.0 + 1e-14:
        return rotation(sys, X_AXIS, np.pi) @ polarized
    rot_axis = np.cross(Z_AXIS, n)
    rot_axis /= np.linalg.norm(rot_axis)
    angle = np.arccos(np.clip(n[2], -1.0, 1.0))
    return rotation(sys, rot_axis, angle) @ polarized


def _coherent_amplitudes(sys: SpinSystem, polar: float, azimuth) -> np.ndarray:
    """Amplitudes of coherent states at fixed polar angle, vectorized over azimuth.

    Matches coherent_state() up to a global phase, which is all the Husimi
    sandwich requires.  Uses log-space magnitudes so large N does not overflow.
    """
    s = sys.spin
    m = sys.m_values()
    phi = np.atleast_1d(np.asarray(azimuth, dtype=float))
    log_binom = 0.5 * (gammaln(2 * s + 1) - gammaln(s + m + 1) - gammaln(s - m + 1))

    def pow_log(base, expo):
        # expo * log(base) with the convention 0 * log(0) = 0
        if base > 0.0:
            return expo * np.log(base)
        return np.where(expo == 0, 0.0, -np.inf)

    c, si = np.cos(polar / 2), np.sin(polar / 2)
    log_mag = log_binom + pow_log(max(c, 0.0), s + m) + pow_log(max(si, 0.0), s - m)
    mag = np.exp(log_mag)
    return mag[None, :] * np.exp(1j * (s - m)[None, :] * phi[:, None])


def husimi_q(rho: np.ndarray, n_polar: int = 64, n_azimuth: int = 128):
    """Husimi field Q(n) = <n|rho|n> on a (polar, azimuth) grid.

    Returns ``(polar, azimuth, q)`` with ``q`` of shape (n_polar, n_azimuth);
    polar spans [0, pi] inclusive, azimuth spans [0, 2 pi) exclusive.
    """
    rho = np.asarray(rho)
    if n_polar < 2 or n_azimuth < 2:
        raise ValueError("grid must have at least 2 points per dimension")
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"rho must be a square matrix, got shape {rho.shape}")
    sys = SpinSystem(rho.shape[0] - 1)
    polar = np.linspace(0.0, np.pi, n_polar)
    azimuth = np.linspace(0.0, 2 * np.pi, n_azimuth, endpoint=False)
    q = np.empty((n_polar, n_azimuth))
    for i, th in enumerate(polar):
        amps = _coherent_amplitudes(sys, th, azimuth)
        q[i] = np.einsum("ad,dc,ac->a", amps.conj(), rho, amps).real
    return polar, azimuth, q


def husimi_quadrature(polar: np.ndarray, azimuth: np.ndarray, q: np.ndarray) -> float:
    """Integral of Q over the sphere from its grid samples."""
    from scipy.integrate import simpson

    # azimuth grid is uniform and periodic: the mean times 2 pi is exact for
    # trigonometric polynomials below the grid bandwidth
    ring = q.mean(axis=1) * 2 * np.pi
    return float(simpson(ring * np.sin(polar), x=polar))


def husimi_norm(sys: SpinSystem, polar: np.ndarray, azimuth: np.ndarray, q: np.ndarray) -> float:
    """Normalization check value (D / 4 pi) * integral Q dOmega."""
    return sys.dim / (4 * np.pi) * husimi_quadrature(polar, azimuth, q)
