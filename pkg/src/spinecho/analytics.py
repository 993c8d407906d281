"""Closed-form predictions for the scrambled-echo rotation-sensing protocol.

Everything here is a pure function of (S or N, angle, noise strength): the
ensemble-averaged echo signal and its second moment, the angular sensitivity,
the metrological gain surface, and the fluctuation/QFI statistics.  Noise
enters only through the dimensionless product c*gamma*T, where
c = 2 S (S+1) D^2 / (D^2 - 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NoiseParams",
    "GainSurface",
    "dirichlet_f",
    "dirichlet_f_direct",
    "mu_angles",
    "sinc",
    "clean_signal",
    "clean_second_moment",
    "noisy_signal",
    "noisy_second_moment",
    "asymptotic_signal",
    "asymptotic_second_moment",
    "asymptotic_noise",
    "angular_sensitivity",
    "metrological_gain_db",
    "gain_surface",
    "haar_qfi_mean",
    "haar_qfi_std",
    "var_qfi_circuits",
    "signal_fluctuation_formulas",
    "bandwidth",
    "noise_shift_constant",
    "GAIN_DB_FLOOR",
]

GAIN_DB_FLOOR = -50.0

_SERIES_CUTOFF = 1e-6  # |theta| below which the Dirichlet kernel uses its series
_X_CUTOFF = 1e-3       # x = S*theta below which the sensitivity uses its series


def _dim(s: float) -> float:
    return 2 * s + 1


def noise_shift_constant(s: float) -> float:
    """First-order noise shift c = 2 S (S+1) D^2 / (D^2 - 1)."""
    d2 = _dim(s) ** 2
    return 2 * s * (s + 1) * d2 / (d2 - 1)


@dataclass(frozen=True)
class NoiseParams:
    """Collective dephasing strength: rate gamma acting over one-way time T."""

    gamma: float
    t_oneway: float
    spin: float

    def __post_init__(self):
        if self.gamma < 0 or self.t_oneway < 0:
            raise ValueError("gamma and t_oneway must be non-negative")

    @property
    def c(self) -> float:
        return noise_shift_constant(self.spin)

    @property
    def cgt(self) -> float:
        return self.c * self.gamma * self.t_oneway


# ---------------------------------------------------------------------------
# Dirichlet kernel f(theta) = sum_m exp(-i m theta) and helpers
# ---------------------------------------------------------------------------

def dirichlet_f(s: float, theta) -> np.ndarray | float:
    """Character sum f(theta) = sum_{m=-S}^{S} exp(-i m theta), real-valued.

    Evaluated as sin((S + 1/2) theta) / sin(theta / 2) away from theta = 0
    (mod 2 pi) and by its quadratic series near the removable singularity,
    where f(0) = D exactly.  For half-integer S the kernel is 4 pi periodic
    with f(theta + 2 pi) = -f(theta); the reduction handles both cases.
    """
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    d = _dim(s)

    k = np.round(theta / (2 * np.pi))
    reduced = theta - 2 * np.pi * k
    half_integer = (int(round(2 * s)) % 2) == 1
    sign = np.where(half_integer & (k.astype(np.int64) % 2 != 0), -1.0, 1.0)

    out = np.empty_like(reduced)
    small = np.abs(reduced) < _SERIES_CUTOFF
    if np.any(small):
        th = reduced[small]
        out[small] = d - th**2 * s * (s + 1) * d / 6
    if np.any(~small):
        th = reduced[~small]
        out[~small] = np.sin((s + 0.5) * th) / np.sin(th / 2)
    out *= sign
    return float(out[0]) if scalar else out


def dirichlet_f_direct(s: float, theta) -> np.ndarray | float:
    """Direct summation of the kernel; slow, used as an independent check."""
    theta = np.asarray(theta, dtype=float)
    m = s - np.arange(int(round(2 * s)) + 1)
    vals = np.exp(-1j * np.multiply.outer(theta, m)).sum(axis=-1)
    return vals.real if theta.ndim else float(vals.real)


def mu_angles(theta: float, cos_nm: float) -> tuple[float, float]:
    """Combined rotation angles mu+- of exp(-i S_n theta) exp(+-i S_m theta).

    cos(mu/2) = cos^2(theta/2) +- (n.m) sin^2(theta/2); the cosine argument is
    clamped so roundoff cannot push it outside [-1, 1].
    """
    if not -1.0 <= cos_nm <= 1.0 + 1e-12:
        raise ValueError(f"cos_nm must lie in [-1, 1], got {cos_nm}")
    c2, s2 = np.cos(theta / 2) ** 2, np.sin(theta / 2) ** 2
    mu_plus = 2 * np.arccos(np.clip(c2 + cos_nm * s2, -1.0, 1.0))
    mu_minus = 2 * np.arccos(np.clip(c2 - cos_nm * s2, -1.0, 1.0))
    return float(mu_plus), float(mu_minus)


def sinc(x) -> np.ndarray | float:
    """sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


# ---------------------------------------------------------------------------
# Ensemble-averaged echo moments, exact at finite S
# ---------------------------------------------------------------------------

def clean_signal(s: float, theta) -> np.ndarray | float:
    """Haar-averaged echo polarization <Sz> = S (f^2 - 1) / (D^2 - 1)."""
    return noisy_signal(s, theta, 0.0)


def clean_second_moment(s: float, theta) -> np.ndarray | float:
    """Haar-averaged <Sz^2> = S(S+1)/3 + (2S-1)(f^2 - 1) / (12 (S+1))."""
    return noisy_second_moment(s, theta, 0.0)


def noisy_signal(s: float, theta, cgt) -> np.ndarray | float:
    """<Sz> with dephasing: S e^{-c gamma T} (f^2 - 1)/(D^2 - 1).

    The kernel ratio is computed first so the perfect-echo point theta = 0
    (where it equals 1) returns S e^{-c gamma T} bit-exactly.
    """
    d2 = _dim(s) ** 2
    f = dirichlet_f(s, theta)
    return s * np.exp(-np.asarray(cgt, dtype=float)) * ((f**2 - 1) / (d2 - 1))


def noisy_second_moment(s: float, theta, cgt) -> np.ndarray | float:
    """<Sz^2> with dephasing; reduces to the clean formula at cgt = 0."""
    d2 = _dim(s) ** 2
    f = dirichlet_f(s, theta)
    e = np.exp(-np.asarray(cgt, dtype=float))
    return s * (s + 1) / 3 * (d2 - e) / (d2 - 1) + e * (2 * s - 1) * (f**2 - 1) / (12 * (s + 1))


def asymptotic_signal(x) -> np.ndarray | float:
    """Large-S limit of <Sz>/S at fixed x = S theta: sinc^2(x)."""
    return sinc(x) ** 2


def asymptotic_second_moment(x) -> np.ndarray | float:
    """Large-S limit of <Sz^2>/S^2: (1 + 2 sinc^2(x)) / 3."""
    return (1 + 2 * sinc(x) ** 2) / 3


def asymptotic_noise(x, cgt=0.0) -> np.ndarray | float:
    """Large-S limit of Delta Sz / S with dephasing."""
    u = sinc(x) ** 2
    e = np.exp(-np.asarray(cgt, dtype=float))
    return np.sqrt(np.maximum(1 + 2 * u * e - 3 * u**2 * e**2, 0.0) / 3)


# ---------------------------------------------------------------------------
# Sensitivity and gain
# ---------------------------------------------------------------------------

def angular_sensitivity(n_particles: float, x, cgt=0.0) -> np.ndarray | float:
    """Inverse angular resolution 1/Delta(theta) at x = S theta, leading order in N.

    Clean closed form: N sqrt(3)/x * sinc(x)(sinc(x) - cos(x))
    / sqrt(1 + 2 sinc^2 - 3 sinc^4), which tends to N/2 as x -> 0; the
    small-x branch uses the series N/2 (1 - 3 x^2 / 40).  With dephasing the
    full expression is evaluated (numerator e^{-cgt}, noise terms e^{-cgt},
    e^{-2 cgt}); it vanishes at x = 0 for cgt > 0.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    cgt_arr = np.ascontiguousarray(np.broadcast_to(np.asarray(cgt, dtype=float), x.shape))
    if np.any(x < 0):
        raise ValueError("x must be non-negative")

    e = np.exp(-cgt_arr)
    u = sinc(x)
    # g(x) = sinc(x)(sinc(x) - cos(x)) / x, with series for the cancellation region
    small = x < _X_CUTOFF
    g = np.empty_like(x)
    g[small] = x[small] / 3 - 4 * x[small] ** 3 / 45
    with np.errstate(invalid="ignore", divide="ignore"):
        g[~small] = u[~small] * (u[~small] - np.cos(x[~small])) / x[~small]
    denom = np.sqrt(np.maximum(1 + 2 * u**2 * e - 3 * u**4 * e**2, 0.0))
    out = np.empty_like(x)
    clean_series = small & (cgt_arr == 0.0)
    out[clean_series] = n_particles / 2 * (1 - 3 * x[clean_series] ** 2 / 40)
    rest = ~clean_series
    out[rest] = n_particles * np.sqrt(3.0) * e[rest] * np.abs(g[rest]) / denom[rest]
    return float(out[0]) if scalar else out


def metrological_gain_db(inv_delta_theta, n_particles: float) -> np.ndarray | float:
    """Gain over the standard quantum limit: 10 log10((1/Dtheta)^2 / N), in dB."""
    v = np.asarray(inv_delta_theta, dtype=float)
    if np.any(v < 0):
        raise ValueError("inverse sensitivity must be non-negative")
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(v**2 / n_particles)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GainSurface:
    """Gain in dB over a grid of sensing angle x (columns) and noise cgt (rows)."""

    n_particles: float
    x_grid: np.ndarray
    cgt_grid: np.ndarray
    gain_db: np.ndarray
    optimal_x: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.gain_db.shape != (len(self.cgt_grid), len(self.x_grid)):
            raise ValueError("gain matrix shape must be (len(cgt_grid), len(x_grid))")
        best = self.x_grid[np.argmax(self.gain_db, axis=1)]
        object.__setattr__(self, "optimal_x", best)


def gain_surface(n_particles: float, x_grid, cgt_grid) -> GainSurface:
    """Evaluate the analytic gain G(x, cgt) on a grid, with row-wise argmax."""
    x_grid = np.asarray(x_grid, dtype=float)
    cgt_grid = np.asarray(cgt_grid, dtype=float)
    if x_grid.size == 0 or cgt_grid.size == 0:
        raise ValueError("grids must be nonempty")
    gain = np.empty((len(cgt_grid), len(x_grid)))
    for i, cgt in enumerate(cgt_grid):
        sens = angular_sensitivity(n_particles, x_grid, cgt)
        gain[i] = metrological_gain_db(sens, n_particles)
    return GainSurface(n_particles, x_grid, cgt_grid, gain)


# ---------------------------------------------------------------------------
# QFI statistics and fluctuation formulas (leading order in N)
# ---------------------------------------------------------------------------

def haar_qfi_mean(n_particles: float) -> float:
    """Ensemble-mean QFI of a scrambled probe: N (N + 1) / 3."""
    return n_particles * (n_particles + 1) / 3


def haar_qfi_std(n_particles: float) -> float:
    """Circuit-to-circuit QFI standard deviation: 2 N^(3/2) / (3 sqrt(5))."""
    return 2 * n_particles**1.5 / (3 * np.sqrt(5.0))


def var_qfi_circuits(n_particles: float) -> float:
    """Circuit-to-circuit QFI variance: 4 N^3 / 45."""
    return 4 * n_particles**3 / 45


def signal_fluctuation_formulas(s: float, x: float) -> tuple[float, float]:
    """Leading-order variances of <Sz> at small x = S theta.

    Returns (var_circuits, var_axes) = ((17/270) S x^4, (23/324) S x^4):
    scatter across scrambling circuits at fixed axis, and across rotation
    axes at fixed circuit.
    """
    return 17 / 270 * s * x**4, 23 / 324 * s * x**4


def bandwidth(n_particles: float) -> float:
    """Metrological bandwidth theta_bw = 2 pi / N (first zero of the signal)."""
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    return 2 * np.pi / n_particles
