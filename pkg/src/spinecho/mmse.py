"""Bayesian minimum-mean-square-error observable for small-angle estimation.

With a uniform prior on [0, theta_max], the optimal single-observable
estimator A solves {Gamma, A}/2 = eta for the prior-averaged encoded states
Gamma and eta; for a pure probe and small theta_max it collapses to
A = (theta_max / 2) rho, i.e. the same overlap readout the echo protocol
measures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import axis_averaged_channel, depolarizing_step

__all__ = [
    "MmsePair",
    "build_gamma_eta",
    "solve_mmse_observable",
    "mmse_estimate",
]


@dataclass(frozen=True)
class MmsePair:
    """Prior-averaged state Gamma and first-moment-weighted state eta."""

    gamma_op: np.ndarray
    eta_op: np.ndarray
    theta_max: float
    n_quad: int
    mode: str


def build_gamma_eta(rho, theta_max: float, n_quad: int = 32, mode: str = "small_theta") -> MmsePair:
    """Gauss-Legendre quadrature of Gamma = E_theta[M_theta[rho]] and
    eta = E_theta[theta M_theta[rho]] over the uniform prior on [0, theta_max].

    ``mode="small_theta"`` encodes with the second-order depolarizing form
    (requires a pure input); ``mode="exact"`` uses the full axis average on
    the deterministic spherical quadrature.
    """
    if theta_max <= 0:
        raise ValueError("theta_max must be positive")
    if n_quad < 8:
        raise ValueError("n_quad must be at least 8")
    if mode not in ("small_theta", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    rho = np.asarray(rho, dtype=complex)
    if mode == "small_theta":
        purity = float(np.real(np.trace(rho @ rho)))
        if abs(purity - 1.0) > 1e-8:
            raise ValueError(f"small-theta mode requires a pure state, got Tr(rho^2) = {purity}")

    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    thetas = (nodes + 1) * theta_max / 2
    weights = weights * theta_max / 2 / theta_max  # prior density 1/theta_max

    gamma_op = np.zeros_like(rho)
    eta_op = np.zeros_like(rho)
    for w, th in zip(weights, thetas):
        if mode == "small_theta":
            encoded = depolarizing_step(rho, th)
        else:
            encoded = axis_averaged_channel(rho, th, quadrature=True)
        gamma_op += w * encoded
        eta_op += w * th * encoded
    gamma_op = (gamma_op + gamma_op.conj().T) / 2
    eta_op = (eta_op + eta_op.conj().T) / 2
    return MmsePair(gamma_op, eta_op, float(theta_max), int(n_quad), mode)


def solve_mmse_observable(pair: MmsePair, support_rtol: float = 1e-13) -> np.ndarray:
    """Solve Gamma A + A Gamma = 2 eta in the eigenbasis of Gamma.

    A_ij = 2 eta_ij / (lambda_i + lambda_j) on the numerically positive part
    of Gamma's spectrum.  The prior average of a pure probe has eigenvalues
    decaying like theta_max^(2k), so strictly zero directions are unavoidable
    at machine precision; eta carries no weight there, A is set to zero on
    that block, and the anticommutator residual is verified globally.
    Indefinite Gamma, or eta coupling into the null space, is an error that
    reports the offending eigenvalue.
    """
    vals, vecs = np.linalg.eigh(pair.gamma_op)
    vmax = float(vals.max())
    if vmax <= 0 or vals.min() < -1e-10 * max(vmax, 1.0):
        raise ValueError(
            f"Gamma must be positive semidefinite with positive trace "
            f"(min eigenvalue {vals.min():.3e})"
        )
    keep = vals > support_rtol * vmax
    eta_t = vecs.conj().T @ pair.eta_op @ vecs
    a_t = np.zeros_like(eta_t)
    lam = vals[keep]
    a_t[np.ix_(keep, keep)] = 2 * eta_t[np.ix_(keep, keep)] / (lam[:, None] + lam[None, :])
    a = vecs @ a_t @ vecs.conj().T
    a = (a + a.conj().T) / 2
    residual = np.abs(pair.gamma_op @ a + a @ pair.gamma_op - 2 * pair.eta_op).max()
    if residual > 1e-8:
        raise ValueError(
            f"anticommutator residual {residual:.3e} exceeds 1e-8: eta has weight "
            f"outside the support of Gamma (min eigenvalue {vals.min():.3e})"
        )
    return a


def mmse_estimate(observable: np.ndarray, rho_encoded: np.ndarray) -> float:
    """Estimator value <A> = Tr(A rho_encoded)."""
    a = np.asarray(observable)
    rho = np.asarray(rho_encoded)
    if a.shape != rho.shape:
        raise ValueError(f"shape mismatch: observable {a.shape} vs state {rho.shape}")
    return float(np.real(np.trace(a @ rho)))
