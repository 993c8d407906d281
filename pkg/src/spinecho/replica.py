"""Disorder-averaged replica Hamiltonians for the Brownian / random-twist models.

Averaging the doubled (forward x time-reversed) circuit dynamics over the
coupling disorder produces a positive semidefinite generator H on D^(2k)
whose spectral gap sets how fast the circuit ensemble becomes
indistinguishable from a fully scrambled one.  The k = 1 spectrum is exactly
solvable; k = 2 is handled numerically together with the noise perturbation
that shifts the crossed ground state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytics import noise_shift_constant
from .ensembles import RngStream, random_axis
from .spin_core import SpinSystem, spin_operators

__all__ = [
    "DimensionGuardError",
    "ReplicaSystem",
    "SpectrumReport",
    "GapRecord",
    "PerturbationReport",
    "CorrespondenceReport",
    "build_heff",
    "level_energy_k1",
    "exact_spectrum_k1",
    "cluster_spectrum",
    "verify_gap_constancy",
    "mean_field_energies_k2",
    "singlet_vector",
    "pairing_states",
    "noise_perturbation_operator",
    "perturbation_check",
    "time_reversal_matrix",
    "time_reversal",
    "roat_brownian_correspondence",
]

_K2_DIM_CAP = 20736  # D^4 cap for k = 2 (spin up to 5.5)


class DimensionGuardError(RuntimeError):
    """Raised when a replica construction would exceed the dimension cap."""


def _system_from_spin(s: float) -> SpinSystem:
    n = 2 * s
    if abs(n - round(n)) > 1e-12 or n < 1:
        raise ValueError(f"spin must be a positive half-integer, got {s}")
    return SpinSystem(int(round(n)))


@dataclass(frozen=True)
class ReplicaSystem:
    base: SpinSystem
    k: int

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError("k must be 1 or 2")

    @property
    def n_factors(self) -> int:
        return 2 * self.k

    @property
    def dim(self) -> int:
        return self.base.dim ** self.n_factors


def _factor_op(op: np.ndarray, position: int, n_factors: int, d: int) -> np.ndarray:
    left = d**position
    right = d ** (n_factors - position - 1)
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def build_heff(sys: SpinSystem, k: int, j_rate: float = 1.0, force: bool = False) -> np.ndarray:
    """Replica generator on D^(2k):

    H = (J / 2 S^2) [ sum_f (2 A^2 - A)  +  sum_{f != g} s_f s_g (2 G_fg^2 + G_fg) ]

    with A = S(S+1), G_fg the spin dot product between replica factors, and
    s_f = +1 / -1 on forward / time-reversed factors.
    """
    rep = ReplicaSystem(sys, k)
    if k == 2 and rep.dim > _K2_DIM_CAP and not force:
        raise DimensionGuardError(
            f"k=2 replica dimension {rep.dim} exceeds cap {_K2_DIM_CAP} (spin {sys.spin}); "
            "pass force=True to override"
        )
    d = sys.dim
    s = sys.spin
    a = s * (s + 1)
    ops = spin_operators(sys)
    components = (ops.sx, ops.sy, ops.sz)
    nf = rep.n_factors
    signs = [1.0 if f % 2 == 0 else -1.0 for f in range(nf)]  # even factors forward

    h = np.zeros((rep.dim, rep.dim), dtype=complex)
    h += nf * (2 * a**2 - a) * np.eye(rep.dim)
    for f in range(nf):
        for g in range(f + 1, nf):
            dot = np.zeros((rep.dim, rep.dim), dtype=complex)
            for comp in components:
                dot += _factor_op(comp, f, nf, d) @ _factor_op(comp, g, nf, d)
            h += signs[f] * signs[g] * 2 * (2 * dot @ dot + dot)
    h *= j_rate / (2 * s**2)
    return (h + h.conj().T) / 2


@dataclass(frozen=True)
class SpectrumReport:
    """Distinct energy levels (ascending), their multiplicities, and the gap."""

    energies: np.ndarray
    degeneracies: np.ndarray
    gap: float

    @property
    def dim(self) -> int:
        return int(self.degeneracies.sum())


def level_energy_k1(s: float, j, j_rate: float = 1.0):
    """E(S, j) = (J / 2 S^2) j (j+1) (4 S (S+1) - j (j+1) - 1)."""
    x = np.asarray(j, dtype=float) * (np.asarray(j, dtype=float) + 1)
    return j_rate / (2 * s**2) * x * (4 * s * (s + 1) - x - 1)


def exact_spectrum_k1(s: float, j_rate: float = 1.0) -> SpectrumReport:
    """Closed-form k = 1 spectrum with degeneracy 2j + 1 per j = 0 .. 2S.

    Levels are not ordered by j (the energy is a downward parabola in
    j (j+1)), and distinct j can share an energy exactly; coincident levels
    are merged with their degeneracies summed.
    """
    _system_from_spin(s)
    j = np.arange(int(round(2 * s)) + 1, dtype=float)
    e = level_energy_k1(s, j, j_rate)
    deg = (2 * j + 1).astype(int)
    order = np.argsort(e)
    e, deg = e[order], deg[order]
    scale = max(np.abs(e).max(), 1.0)
    energies, degs = [e[0]], [int(deg[0])]
    for ei, di in zip(e[1:], deg[1:]):
        if ei - energies[-1] <= 1e-12 * scale:
            degs[-1] += int(di)
        else:
            energies.append(ei)
            degs.append(int(di))
    energies = np.array(energies)
    degs = np.array(degs)
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else 0.0
    return SpectrumReport(energies, degs, gap)


def cluster_spectrum(eigenvalues: np.ndarray, rel_tol: float = 1e-7) -> SpectrumReport:
    """Group near-degenerate eigenvalues into levels.

    Dense eigensolvers split exact degeneracies at roundoff scale; clustering
    uses a tolerance relative to the spectral radius.
    """
    vals = np.sort(np.asarray(eigenvalues, dtype=float))
    tol = rel_tol * max(np.abs(vals).max(), 1.0)
    levels = [[vals[0]]]
    for v in vals[1:]:
        if v - levels[-1][-1] > tol:
            levels.append([v])
        else:
            levels[-1].append(v)
    energies = np.array([np.mean(lev) for lev in levels])
    degs = np.array([len(lev) for lev in levels])
    gap = float(energies[1] - energies[0]) if len(energies) > 1 else 0.0
    return SpectrumReport(energies, degs, gap)


@dataclass(frozen=True)
class GapRecord:
    spin: float
    gap_numeric: float
    gap_exact: float
    level_j1: float  # E(S, 1), the level approaching the 4J asymptote


def verify_gap_constancy(s_list, j_rate: float = 1.0) -> list[GapRecord]:
    """Diagonalize the k = 1 generator for each spin and compare gaps.

    For S >= 3/2 the spectral gap is E(S, 1) = 4J (1 + 1/S) - 3J/S^2: above
    4J and decreasing monotonically toward the 4J asymptote.  (At S = 1 the
    j = 2 level lies lower, at 3J, and at S = 1/2 the generator vanishes.)
    """
    records = []
    for s in s_list:
        sys = _system_from_spin(s)
        h = build_heff(sys, k=1, j_rate=j_rate)
        vals = np.linalg.eigvalsh(h)
        report = cluster_spectrum(vals)
        exact = exact_spectrum_k1(s, j_rate)
        if abs(report.gap - exact.gap) > 1e-8 * max(1.0, abs(exact.gap)):
            raise ValueError(
                f"numeric gap {report.gap} disagrees with closed form {exact.gap} at spin {s}"
            )
        records.append(
            GapRecord(float(s), report.gap, exact.gap, float(level_energy_k1(s, 1, j_rate)))
        )
    return records


def mean_field_energies_k2(s: float, j_rate: float, j_pairs) -> list[float]:
    """Singlet-sector mean-field k = 2 energies:

    E = (J / 2 S^2) (4 S (S+1) - 1) * sum of j (j + 1) over the pair
    excitations (j1, j2), each 0 .. 2S.
    """
    _system_from_spin(s)
    out = []
    for j1, j2 in j_pairs:
        for j in (j1, j2):
            if not 0 <= j <= 2 * s:
                raise ValueError(f"excitation j = {j} outside 0..2S for spin {s}")
        total = j1 * (j1 + 1) + j2 * (j2 + 1)
        out.append(float(j_rate / (2 * s**2) * (4 * s * (s + 1) - 1) * total))
    return out


# ---------------------------------------------------------------------------
# Pairing states and the noise perturbation
# ---------------------------------------------------------------------------

def singlet_vector(sys: SpinSystem) -> np.ndarray:
    """Two-factor total-spin singlet sum_m (-1)^(S - m) |m>|-m> / sqrt(D)."""
    d = sys.dim
    s = np.zeros((d, d), dtype=complex)
    idx = np.arange(d)
    s[idx, d - 1 - idx] = (-1.0) ** idx / np.sqrt(d)
    return s.reshape(-1)


def pairing_states(sys: SpinSystem) -> tuple[np.ndarray, np.ndarray]:
    """Ladder and crossed singlet pairings of the four k = 2 factors.

    Factor order is (1L, 1R, 2L, 2R): the ladder state pairs each forward
    factor with its own time-reversed partner, the crossed state swaps the
    partners.  Their overlap is exactly 1/D.
    """
    d = sys.dim
    s = singlet_vector(sys).reshape(d, d)
    ladder = np.einsum("ij,kl->ijkl", s, s).reshape(-1)
    crossed = np.einsum("il,kj->ijkl", s, s).reshape(-1)
    return ladder, crossed


def noise_perturbation_operator(sys: SpinSystem, k: int = 2) -> np.ndarray:
    """Dissipative first-order perturbation V = sum_r (S(S+1) + S_rL . S_rR)."""
    rep = ReplicaSystem(sys, k)
    d = sys.dim
    a = sys.spin * (sys.spin + 1)
    ops = spin_operators(sys)
    nf = rep.n_factors
    v = np.zeros((rep.dim, rep.dim), dtype=complex)
    for r in range(k):
        fl, fr = 2 * r, 2 * r + 1
        v += a * np.eye(rep.dim)
        for comp in (ops.sx, ops.sy, ops.sz):
            v += _factor_op(comp, fl, nf, d) @ _factor_op(comp, fr, nf, d)
    return (v + v.conj().T) / 2


@dataclass(frozen=True)
class PerturbationReport:
    spin: float
    overlap_alpha_beta: float
    expected_overlap: float
    heff_residual_alpha: float
    heff_residual_beta: float
    v_alpha_alpha: float
    v_alpha_mu: float
    v_mu_mu: float
    c_constant: float
    first_order_shift: float


def perturbation_check(s: float, gamma: float = 0.0) -> PerturbationReport:
    """Verify the k = 2 ground-space perturbation structure at spin S.

    Both pairing states must be annihilated by the clean generator; the
    Gram-Schmidt complement |mu> of the ladder state acquires the first-order
    energy shift c * gamma with c = 2 S (S+1) D^2 / (D^2 - 1), while the
    ladder state is untouched.
    """
    sys = _system_from_spin(s)
    h = build_heff(sys, k=2)
    v = noise_perturbation_operator(sys, k=2)
    alpha, beta = pairing_states(sys)
    d = sys.dim

    overlap = complex(alpha.conj() @ beta)
    mu = (d * beta - alpha) / np.sqrt(d**2 - 1)
    c = noise_shift_constant(s)
    return PerturbationReport(
        spin=float(s),
        overlap_alpha_beta=float(np.real(overlap)),
        expected_overlap=1 / d,
        heff_residual_alpha=float(np.linalg.norm(h @ alpha, np.inf)),
        heff_residual_beta=float(np.linalg.norm(h @ beta, np.inf)),
        v_alpha_alpha=float(np.real(alpha.conj() @ (v @ alpha))),
        v_alpha_mu=float(np.abs(alpha.conj() @ (v @ mu))),
        v_mu_mu=float(np.real(mu.conj() @ (v @ mu))),
        c_constant=c,
        first_order_shift=c * gamma,
    )


# ---------------------------------------------------------------------------
# Random-twist <-> Brownian correspondence
# ---------------------------------------------------------------------------

def time_reversal_matrix(dim: int) -> np.ndarray:
    """Antidiagonal sign matrix T with T S_a^* T^dag = -S_a for a = x, y, z."""
    t = np.zeros((dim, dim))
    idx = np.arange(dim)
    t[dim - 1 - idx, idx] = (-1.0) ** idx
    return t


def time_reversal(u: np.ndarray) -> np.ndarray:
    """Time-reversed unitary T U^* T^dag."""
    t = time_reversal_matrix(u.shape[0])
    return t @ u.conj() @ t.T


@dataclass(frozen=True)
class CorrespondenceReport:
    spin: float
    chi: float
    dt: float
    n_axes: int
    prefactor_ratio: float  # fitted / (chi^2 S^2 dt / 15)
    max_rel_deviation: float
    generator_norm: float


def roat_brownian_correspondence(
    s: float, chi: float, dt: float, n_axes: int, rng: RngStream, chunk: int = 4096
) -> CorrespondenceReport:
    """Extract the doubled-space generator of infinitesimal random twists.

    Averages exp(-i chi S_n^2 dt) (x) its time reversal over random axes and
    compares (1 - mean)/dt against the Brownian generator scaled by
    chi^2 S^2 dt / (15 J): the isotropic fourth moment of the axis average.
    """
    sys = _system_from_spin(s)
    if chi * sys.spin**2 * dt >= 0.1:
        raise ValueError("chi * S^2 * dt must stay below 0.1 for the expansion to hold")
    if n_axes < 1000:
        raise ValueError("need at least 10^3 axes")
    d = sys.dim
    ops = spin_operators(sys)
    stack = np.stack([ops.sx, ops.sy, ops.sz])
    t_rev = time_reversal_matrix(d)
    eye = np.eye(d)
    g = rng.generator()

    acc = np.zeros((d * d, d * d), dtype=complex)
    done = 0
    while done < n_axes:
        b = min(chunk, n_axes - done)
        axes = np.empty((b, 3))
        for i in range(b):
            axes[i] = random_axis(g)
        sn = np.einsum("bi,ijk->bjk", axes, stack)
        vals, vecs = np.linalg.eigh(sn)
        phases = np.exp(-1j * chi * dt * vals**2)
        u = np.einsum("bij,bj,bkj->bik", vecs, phases, vecs.conj())
        u_rev = np.einsum("ij,bjk,kl->bil", t_rev, u.conj(), t_rev.T)
        acc += np.einsum("bij,bkl->ikjl", u, u_rev).reshape(d * d, d * d)
        # control variate: the O(chi dt) term of U (x) U_rev has exactly zero
        # axis average, so adding it back per sample removes the dominant noise
        # without biasing the mean
        sn2 = np.einsum("bij,bjk->bik", sn, sn)
        lin = (np.einsum("bij,kl->ikjl", sn2, eye) - np.einsum("ij,bkl->ikjl", eye, sn2))
        acc += 1j * chi * dt * lin.reshape(d * d, d * d)
        done += b
    mean = acc / n_axes

    extracted = (np.eye(d * d) - mean) / dt
    target = build_heff(sys, k=1) * (chi**2 * sys.spin**2 * dt / 15)
    scale = float(np.abs(target).max())
    num = np.real(np.sum(extracted * target.conj()))
    den = np.real(np.sum(target * target.conj()))
    ratio = float(num / den)
    mask = np.abs(target) > 0.05 * scale
    rel = np.abs(extracted - target)[mask] / np.abs(target)[mask]
    return CorrespondenceReport(
        spin=float(s),
        chi=float(chi),
        dt=float(dt),
        n_axes=int(n_axes),
        prefactor_ratio=ratio,
        max_rel_deviation=float(rel.max()),
        generator_norm=float(np.linalg.norm(extracted)),
    )
