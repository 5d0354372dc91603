"""Oscillatory problem definitions.

A problem is the ODE

    dU/dt = (gamma(t)/eps) * A U + f(U),    gamma(t) = (p+1)(t - t0)**p,

with A resonant (exp(2*pi*A) = I).  This module holds the rotation action
exp(theta*A), the time maps Gamma / Gamma^{-1} built from |gamma|, the
filtering transform between U and the slow variable u, and the builtin
benchmark problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

RESONANCE_TOL = 1e-9
_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)


class ProblemError(ValueError):
    """Invalid problem data."""


class NonResonantMatrixError(ProblemError):
    """A does not satisfy exp(2*pi*A) = I within tolerance."""


class SolutionBoundError(RuntimeError):
    """Runtime monitor: the solution left the trusted bound (blow-up guard)."""


@dataclass(frozen=True)
class RotationAction:
    """Eigen-factorisation of A used to apply exp(theta*A) cheaply.

    A = P diag(i*freqs) P^{-1} with integer ``freqs``.  The factorisation is
    computed once; each rotation is then a pair of d x d products.
    """

    dim: int
    freqs: np.ndarray          # integer frequencies l_j, eigenvalues are i*l_j
    P: np.ndarray              # eigenvector matrix (complex)
    Pinv: np.ndarray
    tol: float = RESONANCE_TOL

    @classmethod
    def from_matrix(cls, A: np.ndarray, tol: float = RESONANCE_TOL) -> "RotationAction":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ProblemError(f"A must be square, got shape {A.shape}")
        d = A.shape[0]
        lam, P = np.linalg.eig(A)
        freqs = np.round(lam.imag)
        if np.max(np.abs(lam.real)) > tol or np.max(np.abs(lam.imag - freqs)) > tol:
            raise NonResonantMatrixError(
                f"eigenvalues {lam} are not within {tol} of i*Z; exp(2*pi*A) != I"
            )
        try:
            Pinv = np.linalg.inv(P)
        except np.linalg.LinAlgError as exc:
            raise NonResonantMatrixError("A is not diagonalizable") from exc
        recon = np.max(np.abs((P * (1j * freqs)) @ Pinv - A))
        if recon > max(tol, tol * np.max(np.abs(A))):
            raise NonResonantMatrixError(
                f"eigen-reconstruction error {recon:.3e} exceeds tolerance {tol:.1e}"
            )
        return cls(dim=d, freqs=freqs.astype(float), P=P, Pinv=Pinv, tol=tol)

    def rotate(self, theta, x: np.ndarray) -> np.ndarray:
        """exp(theta*A) @ x.  ``theta`` may be scalar or (n,), x is (d,) or (n, d)."""
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        phases = np.exp(1j * np.multiply.outer(theta, self.freqs))  # (..., d)
        if x.ndim == 1:
            y = phases * (self.Pinv @ x)
        else:
            y = phases * (x @ self.Pinv.T)
        return np.real(y @ self.P.T)

    def rotation_matrices(self, theta) -> np.ndarray:
        """Dense exp(theta*A) for scalar or batched theta; shape (..., d, d)."""
        theta = np.asarray(theta, dtype=float)
        phases = np.exp(1j * np.multiply.outer(theta, self.freqs))
        return np.real(np.einsum("ij,...j,jk->...ik", self.P, phases, self.Pinv))


@dataclass(frozen=True)
class TimeMaps:
    """Gamma(t) = int_0^t |gamma| and its inverse, for gamma = (p+1)(t-t0)^p."""

    p: int
    t0: float
    T: float
    s0: float = field(init=False)
    S: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "s0", self.t0 ** (self.p + 1))
        object.__setattr__(self, "S", (self.T - self.t0) ** (self.p + 1) + self.t0 ** (self.p + 1))

    def gamma(self, t):
        return (self.p + 1) * (np.asarray(t, dtype=float) - self.t0) ** self.p

    def mu(self, t):
        """sign(t - t0)^p, the orientation factor of the rescaled field."""
        return np.sign(np.asarray(t, dtype=float) - self.t0) ** self.p

    def big_gamma(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.T + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        dt = t - self.t0
        return self.s0 + np.sign(dt) * np.abs(dt) ** (self.p + 1)

    def big_gamma_inv(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -1e-12) or np.any(s > self.S + 1e-12):
            raise ValueError(f"s={s} outside [0, {self.S}]")
        ds = s - self.s0
        return self.t0 + np.sign(ds) * np.abs(ds) ** (1.0 / (self.p + 1))

    def signed_power(self, t):
        """(t - t0)^(p+1), the unscaled filtering phase."""
        return (np.asarray(t, dtype=float) - self.t0) ** (self.p + 1)


@dataclass(frozen=True)
class ProblemSpec:
    """The quintuple defining the oscillatory problem, plus derived actions.

    ``f`` must be vectorised over leading axes: it maps (..., d) -> (..., d).
    ``f_jac`` (optional) maps (..., d) -> (..., d, d); when absent, central
    finite differences with step ~eps_machine^(1/3)*(1+|u|) are used wherever
    a Jacobian is required.
    """

    dim: int
    A: np.ndarray
    f: Callable[[np.ndarray], np.ndarray]
    p: int
    t0: float
    T: float
    eps: float
    U0: np.ndarray
    f_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    rotation: RotationAction = field(init=False, repr=False, compare=False)
    maps: TimeMaps = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        U0 = np.asarray(self.U0, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "U0", U0)
        if self.p < 1 or int(self.p) != self.p:
            raise ProblemError(f"p must be a positive integer, got {self.p}")
        if not (0.0 <= self.t0 <= self.T):
            raise ProblemError(f"t0={self.t0} outside [0, T={self.T}]")
        if not (0.0 < self.eps <= 1.0):
            raise ProblemError(f"eps={self.eps} outside (0, 1]")
        if U0.shape != (self.dim,) or A.shape != (self.dim, self.dim):
            raise ProblemError("dimension mismatch between dim, A and U0")
        object.__setattr__(self, "rotation", RotationAction.from_matrix(A))
        object.__setattr__(self, "maps", TimeMaps(p=self.p, t0=self.t0, T=self.T))

    # -- time maps ----------------------------------------------------------

    def gamma(self, t):
        return self.maps.gamma(t)

    def theta(self, t):
        """Filtering phase (t - t0)^(p+1) / eps (signed)."""
        return self.maps.signed_power(t) / self.eps

    def tau(self, t):
        """|t - t0|^(p+1) / eps, the argument fed to the tail kernels."""
        return np.abs(np.asarray(t, dtype=float) - self.t0) ** (self.p + 1) / self.eps

    # -- rotation and filtering ---------------------------------------------

    def rotate(self, theta, x):
        return self.rotation.rotate(theta, x)

    def filtered_field(self, theta, u: np.ndarray) -> np.ndarray:
        """F(theta, u) = exp(-theta A) f(exp(theta A) u); batched over theta."""
        up = self.rotation.rotate(theta, u)
        return self.rotation.rotate(np.negative(theta), self.f(up))

    def filtered_jacobian(self, theta, u: np.ndarray) -> np.ndarray:
        """d_u F(theta, u) = exp(-theta A) f'(exp(theta A) u) exp(theta A)."""
        theta = np.asarray(theta, dtype=float)
        R = self.rotation.rotation_matrices(theta)
        Rm = self.rotation.rotation_matrices(-theta)
        up = self.rotation.rotate(theta, u)
        J = self.jac_f(up)
        return np.einsum("...ij,...jk,...kl->...il", Rm, J, R)

    def jac_f(self, u: np.ndarray) -> np.ndarray:
        """Jacobian of f: analytic when available, else central differences."""
        if self.f_jac is not None:
            return np.asarray(self.f_jac(u))
        u = np.asarray(u, dtype=float)
        h = _FD_STEP * (1.0 + np.linalg.norm(u, axis=-1, keepdims=True))
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            step = h * e
            cols.append((self.f(u + step) - self.f(u - step)) / (2.0 * h[..., 0])[..., None])
        return np.stack(cols, axis=-1)

    def filter_state(self, t: float, U: np.ndarray) -> np.ndarray:
        """u = exp(-theta(t) A) U."""
        return self.rotation.rotate(-self.theta(t), U)

    def unfilter_state(self, t: float, u: np.ndarray) -> np.ndarray:
        """U = exp(+theta(t) A) u."""
        return self.rotation.rotate(self.theta(t), u)

    @property
    def u0_filtered(self) -> np.ndarray:
        """Initial value of the filtered equation, exp(-(-t0)^(p+1)/eps A) U0."""
        return self.filter_state(0.0, self.U0)

    @property
    def bound_guard(self) -> float:
        """Blow-up guard 2M with M = 4*max(1, |U0|)."""
        return 8.0 * max(1.0, float(np.linalg.norm(self.U0)))

    def check_bound(self, u: np.ndarray, where: str = "") -> None:
        if not np.all(np.isfinite(u)) or np.linalg.norm(u) > self.bound_guard:
            raise SolutionBoundError(
                f"solution bound exceeded{' at ' + where if where else ''}: |u|="
                f"{np.linalg.norm(u):.3e} > {self.bound_guard:.3e}"
            )

    def with_eps(self, eps: float) -> "ProblemSpec":
        return replace(self, eps=eps)


# -- builtin problems --------------------------------------------------------


def _hh_f(u):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    q1, q2, p2 = u[..., 0], u[..., 1], u[..., 3]
    out[..., 0] = 0.0
    out[..., 1] = p2
    out[..., 2] = -2.0 * q1 * q2
    out[..., 3] = -q2 - q1 * q1 + q2 * q2
    return out


def _hh_jac(u):
    u = np.asarray(u, dtype=float)
    J = np.zeros(u.shape[:-1] + (4, 4))
    q1, q2 = u[..., 0], u[..., 1]
    J[..., 1, 3] = 1.0
    J[..., 2, 0] = -2.0 * q2
    J[..., 2, 1] = -2.0 * q1
    J[..., 3, 0] = -2.0 * q1
    J[..., 3, 1] = -1.0 + 2.0 * q2
    return J


def henon_heiles(eps: float, t0: float = 1.0 / 3.0, T: float = 1.0) -> ProblemSpec:
    """Henon-Heiles system with time-varying rotation rate gamma(t) = 2(t-t0).

    State ordering (q1, q2, p1, p2); the stiff rotation acts in the (q1, p1)
    plane, so A has eigenvalues {+i, -i, 0, 0}.
    """
    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[2, 0] = -1.0
    return ProblemSpec(
        dim=4, A=A, f=_hh_f, p=1, t0=t0, T=T, eps=eps,
        U0=np.array([0.9, 0.6, 0.8, 0.5]), f_jac=_hh_jac, name="henon-heiles",
    )


def henon_heiles_average(u: np.ndarray) -> np.ndarray:
    """Hand-derived theta-average of the filtered Henon-Heiles field."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[..., 0] = u[..., 1] * u[..., 2]
    out[..., 1] = u[..., 3]
    out[..., 2] = -u[..., 0] * u[..., 1]
    out[..., 3] = -0.5 * (u[..., 0] ** 2 + u[..., 2] ** 2) + u[..., 1] ** 2 - u[..., 1]
    return out


def _p2_f(u):
    u = np.asarray(u, dtype=float)
    x, y = u[..., 0], u[..., 1]
    out = np.empty_like(u)
    out[..., 0] = x * x - y * y - x
    out[..., 1] = 2.0 * x * y - y
    return out


def _p2_jac(u):
    u = np.asarray(u, dtype=float)
    x, y = u[..., 0], u[..., 1]
    J = np.empty(u.shape[:-1] + (2, 2))
    J[..., 0, 0] = 2.0 * x - 1.0
    J[..., 0, 1] = -2.0 * y
    J[..., 1, 0] = 2.0 * y
    J[..., 1, 1] = 2.0 * x - 1.0
    return J


def synthetic_p2(eps: float, t0: float = 0.4, T: float = 1.0) -> ProblemSpec:
    """Planar rotation (complex-scalar) problem with p = 2.

    f(z) = z^2 - z in complex notation; the averaged field is -u, so the
    averaged flow contracts while the z^2 term carries the oscillation.
    """
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    return ProblemSpec(
        dim=2, A=A, f=_p2_f, p=2, t0=t0, T=T, eps=eps,
        U0=np.array([0.5, 0.25]), f_jac=_p2_jac, name="synthetic-p2",
    )


_BUILTINS: dict[str, Callable[..., ProblemSpec]] = {
    "henon-heiles": henon_heiles,
    "synthetic-p2": synthetic_p2,
}


def register_problem(name: str, factory: Callable[..., ProblemSpec]) -> None:
    """Extension hook: register a problem factory(eps, **kwargs) under a name."""
    _BUILTINS[name] = factory


def builtin_problem(name: str, eps: float, **kwargs) -> ProblemSpec:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ProblemError(
            f"unknown problem {name!r}; available: {sorted(_BUILTINS)}"
        ) from None
    return factory(eps, **kwargs)


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)
