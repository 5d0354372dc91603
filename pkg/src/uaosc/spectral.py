"""Fourier representation in theta of the filtered field at a frozen u.

All averaged/oscillatory building blocks are mode sums over the coefficients
c_l(u) of theta -> F(theta, u): the average <F> = c_0, the zero-average
antiderivatives G_nu and H_nu, their u-Jacobians, and the bracket
<d_u G . F> that enters the eps*log corrections.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import ProblemSpec, _FD_STEP

DEFAULT_L = 16
DEFAULT_N_THETA = 64
TRIM_TOL = 1e-13


class InsufficientModesError(RuntimeError):
    """Spectral truncation residual above tolerance; carries the residual."""

    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"Fourier reconstruction residual {residual:.3e} exceeds {tol:.3e}; "
            "increase L / n_theta"
        )
        self.residual = residual
        self.tol = tol


@dataclass(frozen=True)
class FourierTable:
    """Complex Fourier coefficients of theta -> F(theta, u) at a fixed u.

    ``coeffs[L + l]`` is c_l in F = sum_l c_l e^{i l theta}; conjugate symmetry
    c_{-l} = conj(c_l) holds since F is real.  ``jac_coeffs`` are the
    u-Jacobians d_u c_l (present when built with ``with_jacobian=True``).
    """

    u: np.ndarray
    L: int
    n_theta: int
    coeffs: np.ndarray                      # (2L+1, d) complex
    jac_coeffs: Optional[np.ndarray] = None  # (2L+1, d, d) complex
    residual: float = 0.0

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def ells(self) -> np.ndarray:
        return np.arange(-self.L, self.L + 1)

    def coeff(self, ell: int) -> np.ndarray:
        return self.coeffs[self.L + ell]

    def jac_coeff(self, ell: int) -> np.ndarray:
        return self.jac_coeffs[self.L + ell]

    @property
    def average(self) -> np.ndarray:
        """<F>(u) = c_0 (real part; the imaginary residue is machine-level)."""
        return self.coeffs[self.L].real.copy()

    @property
    def d2_average(self) -> np.ndarray:
        """u-Jacobian of <F>."""
        return self.jac_coeffs[self.L].real.copy()

    def nonzero_modes(self, trim_tol: float = TRIM_TOL):
        """Active l != 0 (symmetric in +-l) with coefficients above trim level."""
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        mag = np.max(np.abs(self.coeffs), axis=1)
        keep = mag > trim_tol * scale
        keep = keep | keep[::-1]             # keep conjugate partners together
        keep[self.L] = False
        ells = self.ells[keep]
        return ells, self.coeffs[keep]

    def nonzero_jac_modes(self, trim_tol: float = TRIM_TOL):
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        mag = np.max(np.abs(self.coeffs), axis=1)
        keep = mag > trim_tol * scale
        keep = keep | keep[::-1]
        keep[self.L] = False
        return self.ells[keep], self.jac_coeffs[keep]

    def active_modes(self, trim_tol: float = TRIM_TOL):
        """Active modes including l = 0, for field/Jacobian mode sums."""
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        mag = np.max(np.abs(self.coeffs), axis=1)
        keep = mag > trim_tol * scale
        keep = keep | keep[::-1]
        keep[self.L] = True
        return self.ells[keep], self.coeffs[keep], (
            self.jac_coeffs[keep] if self.jac_coeffs is not None else None
        )

    def reconstruct(self, theta) -> np.ndarray:
        """Evaluate the truncated series at theta (scalar or array)."""
        theta = np.asarray(theta, dtype=float)
        phases = np.exp(1j * np.multiply.outer(theta, self.ells))
        return np.real(phases @ self.coeffs)


def fourier_table(
    problem: ProblemSpec,
    u: np.ndarray,
    L: int = DEFAULT_L,
    n_theta: int = DEFAULT_N_THETA,
    with_jacobian: bool = False,
    recon_tol: float = 1e-8,
) -> FourierTable:
    """DFT of theta -> F(theta, u) on the uniform grid theta_j = 2*pi*j/n.

    Requires n_theta >= 4L + 2 (2x oversampling of the kept band).  Raises
    :class:`InsufficientModesError` when the grid reconstruction residual of
    the truncated series exceeds ``recon_tol`` relative to the field scale.
    """
    if n_theta < 4 * L + 2:
        raise ValueError(f"n_theta={n_theta} < 4L+2={4 * L + 2}")
    u = np.asarray(u, dtype=float)
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    vals = problem.filtered_field(thetas, u)          # (n, d)
    c = np.fft.fft(vals, axis=0) / n_theta            # coefficient of e^{+il.}
    idx = np.concatenate([np.arange(-L, 0) % n_theta, np.arange(0, L + 1)])
    coeffs = c[idx]

    phases = np.exp(1j * np.outer(thetas, np.arange(-L, L + 1)))
    resid = float(np.max(np.abs(vals - np.real(phases @ coeffs))))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if resid > recon_tol * scale:
        raise InsufficientModesError(resid, recon_tol * scale)

    jac = None
    if with_jacobian:
        if problem.f_jac is not None:
            Jvals = problem.filtered_jacobian(thetas, u)   # (n, d, d)
            Jc = np.fft.fft(Jvals, axis=0) / n_theta
            jac = Jc[idx]
        else:
            jac = _fd_jacobian_coeffs(problem, u, L, n_theta)
    return FourierTable(u=u, L=L, n_theta=n_theta, coeffs=coeffs,
                        jac_coeffs=jac, residual=resid)


def _fd_jacobian_coeffs(problem, u, L, n_theta):
    h = _FD_STEP * (1.0 + float(np.linalg.norm(u)))
    cols = []
    for i in range(problem.dim):
        e = np.zeros(problem.dim)
        e[i] = h
        tp = fourier_table(problem, u + e, L=L, n_theta=n_theta, recon_tol=np.inf)
        tm = fourier_table(problem, u - e, L=L, n_theta=n_theta, recon_tol=np.inf)
        cols.append((tp.coeffs - tm.coeffs) / (2.0 * h))
    return np.stack(cols, axis=-1)


def field_average(problem: ProblemSpec, u: np.ndarray, n_theta: int = DEFAULT_N_THETA) -> np.ndarray:
    """<F>(u) as the plain mean over the uniform theta grid (equals c_0)."""
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return problem.filtered_field(thetas, np.asarray(u, dtype=float)).mean(axis=0)


def g_eval(table: FourierTable, nu: int, theta) -> np.ndarray:
    """G_nu(theta, u) = sum_{l!=0} c_{nu l}/(i l) e^{i l theta}; zero average."""
    return _antiderivative(table, nu, theta, order=1)


def h_eval(table: FourierTable, nu: int, theta) -> np.ndarray:
    """H_nu(theta, u) = sum_{l!=0} c_{nu l}/(i l)^2 e^{i l theta}."""
    return _antiderivative(table, nu, theta, order=2)


def _antiderivative(table, nu, theta, order):
    if nu not in (-1, 1):
        raise ValueError(f"nu must be +-1, got {nu}")
    ells, coeffs = table.nonzero_modes()
    if nu == -1:
        coeffs = coeffs[::-1]   # c_{-l} paired with e^{+il.}
    theta = np.asarray(theta, dtype=float)
    weights = np.exp(1j * np.multiply.outer(theta, ells)) / (1j * ells) ** order
    return np.real(weights @ coeffs)


def d2_g(table: FourierTable, nu: int, theta) -> np.ndarray:
    """u-Jacobian of G_nu at (theta, u); shape (..., d, d)."""
    if nu not in (-1, 1):
        raise ValueError(f"nu must be +-1, got {nu}")
    ells, jc = table.nonzero_jac_modes()
    if nu == -1:
        jc = jc[::-1]
    theta = np.asarray(theta, dtype=float)
    weights = np.exp(1j * np.multiply.outer(theta, ells)) / (1j * ells)
    return np.real(np.einsum("...l,lij->...ij", weights, jc))


def bracket_d2g_f(table: FourierTable) -> np.ndarray:
    """<d_u G . F>(u) = sum_{l!=0} (d_u c_l / (i l)) c_{-l}  (nu = +1)."""
    ells, jc = table.nonzero_jac_modes()
    _, coeffs = table.nonzero_modes()
    val = np.einsum("lij,lj,l->i", jc, coeffs[::-1], 1.0 / (1j * ells))
    return val.real
