"""Oscillatory special-function layer.

Everything here reduces to four primitives:

* ``erf_complex`` -- the entire error function (Faddeeva-backed),
* ``tail_E(p, l, s)`` -- the per-mode tail kernel E_p(l, s)
  = int_s^inf sigma^(-p/(p+1)) e^(i l sigma) dsigma, with an exact erf form
  for p = 1 and a quadrature + integration-by-parts composite for p >= 2,
* ``step_P0 / step_P1`` -- quadratic-phase step integrals
  int_a^b (xi - t_ref)^k e^(i l (xi-t0)^2 / eps) dxi, k = 0, 1 (erf-exact),
* ``step_omega_integrals`` -- the two tail-bearing step integrals of the
  defect scheme, evaluated per Fourier mode pair by either of two
  cross-validating strategies ("mode-pair" and "filon").

The Omega operator and its u-derivative are mode sums of tail_E over a
Fourier table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _scipy_erf, exp1 as _exp1, wofz as _wofz

from .spectral import FourierTable

SIGMA_SPLIT = 30.0          # near/far split of the sigma axis
_SQRT_PI = np.sqrt(np.pi)
STRATEGIES = ("mode-pair", "filon")


class KernelError(ValueError):
    pass


def erf_complex(z):
    """Entire error function for complex argument (Faddeeva algorithm)."""
    return _scipy_erf(np.asarray(z, dtype=complex))


# -- tail kernel E_p ----------------------------------------------------------


def _e1_pos(ell, s):
    """E_1(l, s), l > 0, via the scaled Faddeeva form (no overflow, no
    cancellation): sqrt(pi/l) e^{i pi/4} e^{i l s} w(sqrt(l s) e^{i pi/4})."""
    ell = np.asarray(ell, dtype=float)
    s = np.asarray(s, dtype=float)
    root = np.sqrt(ell * s)
    return (
        np.sqrt(np.pi / ell)
        * np.exp(1j * np.pi / 4.0)
        * np.exp(1j * ell * s)
        * _wofz(root * np.exp(1j * np.pi / 4.0))
    )


def tail_E(p: int, ell: int, s) -> complex | np.ndarray:
    """E_p(l, s) for l != 0, s >= 0; vectorised over ``s``."""
    if ell == 0:
        raise KernelError("tail_E requires l != 0 (the l = 0 integral diverges)")
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-15):
        raise KernelError(f"s must be >= 0, got {s}")
    s = np.maximum(s, 0.0)
    if p == 1:
        out = _e1_pos(abs(ell), s)
        return np.conj(out) if ell < 0 else out
    if np.ndim(s) == 0:
        return _tail_E_general(p, ell, float(s))
    return np.array([_tail_E_general(p, ell, float(si)) for si in np.ravel(s)]).reshape(s.shape)


def _tail_E_general(p, ell, s, split=SIGMA_SPLIT):
    """E_p for p >= 2: quadrature on [s, s*] (substituted to kill the
    sigma^(-p/(p+1)) singularity) plus the integration-by-parts tail at s*."""
    if ell < 0:
        return np.conj(_tail_E_general(p, -ell, s, split))
    q = p / (p + 1.0)
    s_star = max(s, split)
    val = 0.0 + 0.0j
    if s < s_star:
        # substitute sigma = y^(p+1): integrand (p+1) e^{i l y^(p+1)}
        y0, y1 = s ** (1.0 / (p + 1)), s_star ** (1.0 / (p + 1))
        phase_span = abs(ell) * (s_star - s)
        panels = max(4, int(np.ceil(phase_span / 2.0)))
        x, w = np.polynomial.legendre.leggauss(12)
        edges = np.linspace(y0, y1, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        pts = mid[:, None] + half[:, None] * x[None, :]
        vals = (p + 1.0) * np.exp(1j * ell * pts ** (p + 1))
        val += np.sum(half[:, None] * w[None, :] * vals)
    # IBP tail: int_{s*}^inf sigma^{-q} e^{i l sigma}, asymptotic series with
    # rigorous remainder; terms shrink until j ~ |l| s*.
    coef = 1.0 / (1j * ell)
    power = q
    acc = 0.0 + 0.0j
    prev = np.inf
    for _ in range(200):
        term = -coef * s_star ** (-power) * np.exp(1j * ell * s_star)
        acc += term
        coef *= power / (1j * ell)
        power += 1.0
        rem = abs(coef) * s_star ** (-power) / max(power - 1.0, 1.0) * (power - 1.0)
        if rem < 1e-15 or rem > prev:
            break
        prev = rem
    return val + acc


class TailCache:
    """Memoised E_p(l, .) evaluations for one (p, l) pair."""

    def __init__(self, p: int, ell: int):
        if ell == 0:
            raise KernelError("tail cache requires l != 0")
        self.p = p
        self.ell = ell
        self._memo: dict[float, complex] = {}

    def __call__(self, s: float) -> complex:
        key = float(s)
        if key not in self._memo:
            self._memo[key] = complex(tail_E(self.p, self.ell, key))
        return self._memo[key]


# -- Omega and its u-derivative ------------------------------------------------


def omega(table: FourierTable, nu: int, s, p: int = 1) -> np.ndarray:
    """Omega_nu(s, u) = sum_{l!=0} c_{nu l}(u) E_p(l, s); real by symmetry."""
    ells, coeffs = table.nonzero_modes()
    return _omega_sum(ells, coeffs, nu, s, p)


def d2_omega(table: FourierTable, nu: int, s, p: int = 1) -> np.ndarray:
    """u-Jacobian of Omega_nu, the same mode sum over d_u c_{nu l}."""
    ells, jc = table.nonzero_jac_modes()
    return _omega_sum(ells, jc, nu, s, p)


def _omega_sum(ells, coeffs, nu, s, p):
    if nu not in (-1, 1):
        raise KernelError(f"nu must be +-1, got {nu}")
    if nu == -1:
        coeffs = coeffs[::-1]
    s = np.asarray(s, dtype=float)
    if ells.size == 0:
        shape = s.shape + coeffs.shape[1:]
        return np.zeros(shape)
    kern = np.stack([np.atleast_1d(tail_E(p, int(l), s)) for l in ells])  # (nl, ns)
    flat = np.tensordot(kern.T, coeffs, axes=(1, 0))   # (ns, d...) complex
    out = flat.real
    return out.reshape(s.shape + coeffs.shape[1:]) if s.ndim else out[0]


# -- quadratic-phase step primitives (p = 1) ----------------------------------


def step_P0(ells, a: float, b: float, t0: float, eps: float):
    """int_a^b e^{i l (xi-t0)^2/eps} dxi, vectorised over the mode array."""
    ells = np.atleast_1d(np.asarray(ells))
    out = np.empty(ells.shape, dtype=complex)
    zero = ells == 0
    out[zero] = b - a
    nz = ~zero
    if np.any(nz):
        l = ells[nz].astype(float)
        z = np.sqrt(np.abs(l) / eps) * np.exp(-1j * np.sign(l) * np.pi / 4.0)
        out[nz] = _SQRT_PI / (2.0 * z) * (erf_complex(z * (b - t0)) - erf_complex(z * (a - t0)))
    return out


def step_P1(ells, a: float, b: float, t_ref: float, t0: float, eps: float):
    """int_a^b (xi - t_ref) e^{i l (xi-t0)^2/eps} dxi."""
    ells = np.atleast_1d(np.asarray(ells))
    out = np.empty(ells.shape, dtype=complex)
    zero = ells == 0
    out[zero] = 0.5 * ((b - t_ref) ** 2 - (a - t_ref) ** 2)
    nz = ~zero
    if np.any(nz):
        l = ells[nz].astype(float)
        w = l / eps
        core = (np.exp(1j * w * (b - t0) ** 2) - np.exp(1j * w * (a - t0) ** 2)) / (2j * w)
        out[nz] = core + (t0 - t_ref) * step_P0(ells[nz], a, b, t0, eps)
    return out


# -- sigma-line building blocks -------------------------------------------------
# All are oriented integrals from s1 to s2 (s1 > s2 allowed).


def _Q(ks, s1: float, s2: float):
    """int_{s1}^{s2} sigma^{-1/2} e^{i k sigma} dsigma over a mode array."""
    ks = np.atleast_1d(np.asarray(ks))
    out = np.empty(ks.shape, dtype=complex)
    zero = ks == 0
    out[zero] = 2.0 * (np.sqrt(s2) - np.sqrt(s1))
    nz = ~zero
    if np.any(nz):
        e_a = np.stack([tail_E(1, int(k), s1) for k in ks[nz]])
        e_b = np.stack([tail_E(1, int(k), s2) for k in ks[nz]])
        out[nz] = e_a - e_b
    return out


def _C_series(j: int, K: float, s1: float, s2: float, tol: float = 1e-17, rmax: int = 80):
    """int_{s1}^{s2} sigma^{-(j+1)} e^{i K sigma} dsigma.

    Integration by parts on e^{iK.}; each C_j is evaluated independently so
    its error stays relative to its own (tiny) magnitude.
    """
    if K == 0:
        return complex(np.log(s2 / s1)) if j == 0 else (s1 ** (-j) - s2 ** (-j)) / j
    acc = 0.0 + 0.0j
    coef = 1.0 / (1j * K)
    fac = 1.0
    best = np.inf
    for r in range(rmax):
        pw = j + 1 + r
        bnd = s2 ** (-pw) * np.exp(1j * K * s2) - s1 ** (-pw) * np.exp(1j * K * s1)
        acc += coef * fac * bnd
        fac *= pw
        coef /= 1j * K
        nxt = abs(coef) * fac * min(s1, s2) ** (-(pw + 1)) * 2.0
        if nxt < tol * max(abs(acc), 1e-300) or nxt > best:
            break
        best = nxt
    return acc


def _N0_exact(ells, ms, s1: float, s2: float):
    """int_{s1}^{s2} e^{i l sigma} E_1(m, sigma) dsigma, exact closure.

    For l != 0 one integration by parts terminates in E_1 evaluations; for
    l = 0 the antiderivative sigma is used instead.
    Returns the (len(ells), len(ms)) kernel matrix.
    """
    ells = np.asarray(ells)
    ms = np.asarray(ms)
    E_a = np.array([tail_E(1, int(m), s1) for m in ms])
    E_b = np.array([tail_E(1, int(m), s2) for m in ms])
    out = np.empty((ells.size, ms.size), dtype=complex)
    for i, l in enumerate(ells):
        if l != 0:
            bnd = np.exp(1j * l * s2) * E_b - np.exp(1j * l * s1) * E_a
            qs = _Q(l + ms, s1, s2)
            out[i] = (bnd + qs) / (1j * l)
        else:
            bnd = s2 * E_b - s1 * E_a
            R = (np.sqrt(s2) * np.exp(1j * ms * s2) - np.sqrt(s1) * np.exp(1j * ms * s1)) / (1j * ms)
            R = R - _Q(ms, s1, s2) / (2j * ms)
            out[i] = bnd + R
    return out


def _Nm_far(ells, ms, s1: float, s2: float, tol: float = 1e-15, jmax: int = 80):
    """int_{s1}^{s2} sigma^{-1/2} e^{i l sigma} E_1(m, sigma) dsigma for the
    far zone min(s1, s2) >= SIGMA_SPLIT, by the terminating IBP recursion.

    l = 0 columns are exact; l != 0 use the asymptotic recursion whose
    remainder bound is tracked and must reach ``tol`` before its floor.
    """
    ells = np.asarray(ells)
    ms = np.asarray(ms)
    smin = min(s1, s2)
    E_a = np.array([tail_E(1, int(m), s1) for m in ms])
    E_b = np.array([tail_E(1, int(m), s2) for m in ms])
    out = np.empty((ells.size, ms.size), dtype=complex)
    for i, l in enumerate(ells):
        if l == 0:
            out[i] = 2.0 * (np.sqrt(s2) * E_b - np.sqrt(s1) * E_a)
            out[i] += 2.0 * (np.exp(1j * ms * s2) - np.exp(1j * ms * s1)) / (1j * ms)
            continue
        acc = np.zeros(ms.size, dtype=complex)
        coef = 1.0 / (1j * l)
        prev = np.inf
        for j in range(jmax):
            w = j + 0.5
            bnd = s2 ** (-w) * np.exp(1j * l * s2) * E_b - s1 ** (-w) * np.exp(1j * l * s1) * E_a
            cj = np.array([_C_series(j, float(l + m), s1, s2) for m in ms])
            acc += coef * (bnd + cj)
            coef *= (j + 0.5) / (1j * l)
            rem = abs(coef) * 2.0 * smin ** (-(j + 1.0)) / (j + 1.0)
            if rem < tol or rem > prev:
                break
            prev = rem
        out[i] = acc
    return out


def _gl_nodes(lo: float, hi: float, phase_scale: float, order: int = 16):
    """Composite Gauss-Legendre grid on [lo, hi] sized by total phase."""
    panels = max(2, int(np.ceil(phase_scale / 3.0)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def _Nm_near(ells, ms, s1: float, s2: float):
    """Near-zone N_- by direct Gauss-Legendre in the stretched variable
    y = sqrt(sigma): 2 int e^{i l y^2} E_1(m, y^2) dy.  The total phase on the
    near zone is bounded by (|l| + |m|) * SIGMA_SPLIT, so a fixed grid
    independent of eps suffices."""
    ells = np.asarray(ells)
    ms = np.asarray(ms)
    sign = 1.0 if s2 >= s1 else -1.0
    lo, hi = (np.sqrt(s1), np.sqrt(s2)) if s2 >= s1 else (np.sqrt(s2), np.sqrt(s1))
    kmax = (np.max(np.abs(ells)) if ells.size else 0) + (np.max(np.abs(ms)) if ms.size else 0)
    phase = kmax * (hi * hi - lo * lo)
    y, w = _gl_nodes(lo, hi, phase)
    s_nodes = y * y
    Em = np.stack([tail_E(1, int(m), s_nodes) for m in ms])       # (nm, ny)
    El = np.exp(1j * np.multiply.outer(ells.astype(float), s_nodes))  # (nl, ny)
    return 2.0 * sign * np.einsum("ln,mn,n->lm", El, Em, w)


def _Nm_matrix(ells, ms, s1: float, s2: float):
    """Oriented N_-(l, m; s1, s2), split at SIGMA_SPLIT into near + far."""
    lo, hi = (s1, s2) if s2 >= s1 else (s2, s1)
    sign = 1.0 if s2 >= s1 else -1.0
    if hi <= SIGMA_SPLIT:
        return _Nm_near(ells, ms, s1, s2)
    if lo >= SIGMA_SPLIT:
        return _Nm_far(ells, ms, s1, s2)
    near = _Nm_near(ells, ms, lo, SIGMA_SPLIT)
    far = _Nm_far(ells, ms, SIGMA_SPLIT, hi)
    return sign * (near + far)


# -- Filon strategy -----------------------------------------------------------


def _filon_panels(y_lo: float, y_hi: float, m_max: float):
    """Panel edges: lengths grow geometrically away from 0, floored by the
    envelope scale ~1/sqrt(1+m)."""
    base = 0.35 / np.sqrt(1.0 + m_max)
    edges = [y_lo]
    while edges[-1] < y_hi - 1e-14:
        y = edges[-1]
        step = max(0.35 * max(y, base), base)
        edges.append(min(y_hi, y + step))
    return np.asarray(edges)


_CHEB_N = 8
_CHEB_T = np.cos(np.pi * (2 * np.arange(_CHEB_N) + 1) / (2 * _CHEB_N))  # Gauss-Chebyshev


def _lin_moments(beta: float, jmax: int):
    """mu_j = int_{-1}^{1} t^j e^{i beta t} dt for j = 0..jmax, |beta| >= 1."""
    out = np.empty(jmax + 1, dtype=complex)
    eb, emb = np.exp(1j * beta), np.exp(-1j * beta)
    out[0] = (eb - emb) / (1j * beta)
    for j in range(1, jmax + 1):
        bnd = eb - (-1.0) ** j * emb
        out[j] = (bnd - j * out[j - 1]) / (1j * beta)
    return out


def _quad_moments(K: float, c: float, r: float, jmax: int):
    """mu_j = int_{-1}^{1} t^j e^{i K (c + r t)^2} dt via the erf seed and the
    stable upward recursion (requires |K| r^2 >= 1)."""
    z = np.sqrt(np.abs(K)) * np.exp(-1j * np.sign(K) * np.pi / 4.0)
    out = np.empty(jmax + 1, dtype=complex)
    e_hi = np.exp(1j * K * (c + r) ** 2)
    e_lo = np.exp(1j * K * (c - r) ** 2)
    out[0] = _SQRT_PI / (2.0 * z * r) * (erf_complex(z * (c + r)) - erf_complex(z * (c - r)))
    for j in range(1, jmax + 1):
        bnd = e_hi - (-1.0) ** (j - 1) * e_lo
        prev2 = out[j - 2] if j >= 2 else 0.0 + 0.0j
        out[j] = (bnd - (j - 1) * prev2 - 2j * K * r * c * out[j - 1]) / (2j * K * r * r)
    return out


def _filon_kernels(ells, ms, s1: float, s2: float):
    """(N0, N_-) kernel matrices by Chebyshev-envelope Filon panels in
    y = sqrt(sigma): the combined quadratic phase e^{i(l+m)y^2} is integrated
    by exact moments; the smooth envelope e^{-i m y^2} E_1(m, y^2) (times y
    for N0) is interpolated per panel."""
    ells = np.asarray(ells)
    ms = np.asarray(ms)
    sign = 1.0 if s2 >= s1 else -1.0
    lo, hi = (np.sqrt(min(s1, s2)), np.sqrt(max(s1, s2)))
    m_max = float(np.max(np.abs(ms))) if ms.size else 1.0
    edges = _filon_panels(lo, hi, m_max)
    N0 = np.zeros((ells.size, ms.size), dtype=complex)
    Nm = np.zeros((ells.size, ms.size), dtype=complex)
    Ks = ells.astype(float)[:, None] + ms.astype(float)[None, :]
    for a, b in zip(edges[:-1], edges[1:]):
        c = 0.5 * (a + b)
        r = 0.5 * (b - a)
        if r < 1e-15:
            continue
        y_nodes = c + r * _CHEB_T
        s_nodes = y_nodes * y_nodes
        # envelope rho_m(y) = e^{-i m y^2} E_1(m, y^2): smooth, non-oscillatory
        rho = np.stack([np.exp(-1j * m * s_nodes) * tail_E(1, int(m), s_nodes) for m in ms])
        fits = {}   # per (m-index, with_y) Chebyshev->power coefficients in t
        for im in range(ms.size):
            fits[(im, 0)] = _cheb_power_coeffs(rho[im])
            fits[(im, 1)] = _cheb_power_coeffs(rho[im] * y_nodes)
        for il in range(ells.size):
            for im in range(ms.size):
                K = Ks[il, im]
                mom = _panel_moments(K, c, r, _CHEB_N - 1)
                Nm[il, im] += 2.0 * r * np.dot(fits[(im, 0)], mom)
                N0[il, im] += 2.0 * r * np.dot(fits[(im, 1)], mom)
    return sign * N0, sign * Nm


def _cheb_power_coeffs(vals):
    """Power-basis coefficients (in t) of the degree-(n-1) interpolant through
    the Gauss-Chebyshev nodes."""
    cheb = np.polynomial.chebyshev.chebfit(_CHEB_T, vals, _CHEB_N - 1)
    return np.polynomial.chebyshev.cheb2poly(cheb)


def _panel_moments(K: float, c: float, r: float, jmax: int):
    """Moments int_{-1}^1 t^j e^{i K (c + r t)^2} dt, choosing the stable
    evaluation per oscillation regime."""
    if K == 0.0:
        out = np.zeros(jmax + 1, dtype=complex)
        out[0::2] = 2.0 / (1.0 + np.arange(0, jmax + 1, 2))
        return out
    quad_phase = abs(K) * r * r
    if quad_phase >= 1.0:
        return _quad_moments(K, c, r, jmax)
    # small quadratic part: absorb it into the envelope (Taylor-smooth) and
    # treat the linear phase exactly
    beta = 2.0 * K * r * c
    const = np.exp(1j * K * (c * c))
    if abs(beta) >= 1.0:
        # moments of t^j e^{iKr^2 t^2} e^{i beta t}: expand the tiny quadratic
        # exponential to machine order (|Kr^2| < 1 so few terms suffice)
        out = np.zeros(jmax + 1, dtype=complex)
        lin = _lin_moments(beta, jmax + 2 * _QUAD_TAYLOR_TERMS)
        fac = 1.0
        for k in range(_QUAD_TAYLOR_TERMS):
            for j in range(jmax + 1):
                out[j] += fac * lin[j + 2 * k]
            fac *= 1j * K * r * r / (k + 1.0)
            if abs(fac) < 1e-18:
                break
        return const * out
    # everything slow: plain Gauss-Legendre
    x, w = np.polynomial.legendre.leggauss(24)
    ph = np.exp(1j * K * (c + r * x) ** 2)
    return np.array([np.sum(w * x ** j * ph) for j in range(jmax + 1)])


_QUAD_TAYLOR_TERMS = 24


# -- the two tail-bearing step integrals ----------------------------------------


@dataclass(frozen=True)
class StepGeometry:
    """One scheme step [a, b] on a single side of t0 (p = 1)."""

    a: float
    b: float
    t0: float
    eps: float

    def __post_init__(self):
        if (self.a - self.t0) * (self.b - self.t0) < -1e-14 * max(1.0, abs(self.b - self.a)):
            raise KernelError(f"step [{self.a}, {self.b}] straddles t0={self.t0}")

    @property
    def eta(self) -> float:
        """Side of t0: -1 before, +1 after."""
        return -1.0 if 0.5 * (self.a + self.b) < self.t0 else 1.0

    @property
    def sigma_a(self) -> float:
        return (self.a - self.t0) ** 2 / self.eps

    @property
    def sigma_b(self) -> float:
        return (self.b - self.t0) ** 2 / self.eps


def step_omega_integrals(
    geom: StepGeometry,
    table_b: FourierTable,
    table_u: FourierTable,
    branch: str,
    strategy: str = "mode-pair",
):
    """The two Omega_1-bearing integrals of the defect scheme over one step.

    Returns (I3, I4) with

        I3 = int (sqrt(eps)/2) (xi - a) dF(tau(xi), b) dOmega_1(tau(*), u) <F>(u) dxi
        I4 = int (sqrt(eps)/2) dF(tau(xi), b) [Omega_1(tau(xi), u) - Omega_1(tau(a), u)] dxi

    where * is xi on the pre-t0 branch and the frozen step start on the
    post-t0 branch.  Signs are applied by the caller.
    """
    if strategy not in STRATEGIES:
        raise KernelError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if branch not in ("pre", "post"):
        raise KernelError(f"branch must be 'pre' or 'post', got {branch!r}")
    eps = geom.eps
    sa, sb = geom.sigma_a, geom.sigma_b
    avg_f = table_u.average
    ells_b, _, jac_b = table_b.active_modes()
    ms, cs_u = table_u.nonzero_modes()
    _, jc_u = table_u.nonzero_jac_modes()
    d = table_u.dim
    if ms.size == 0 or ells_b.size == 0:
        return np.zeros(d), np.zeros(d)

    root = np.sqrt(eps) / 2.0

    # I4 and (pre) I3 need the sigma-line kernel matrices
    if strategy == "mode-pair":
        Nm = _Nm_matrix(ells_b, ms, sa, sb)
        N0 = _N0_exact(ells_b, ms, sa, sb)
    else:
        N0, Nm = _filon_kernels(ells_b, ms, sa, sb)

    Ea = np.array([tail_E(1, int(m), sa) for m in ms])
    Qv = _Q(ells_b, sa, sb)
    # K2[l, m] = int e^{il tau(xi)} (E1(m,tau(xi)) - E1(m,sa)) dxi
    K2 = geom.eta * root * (Nm - np.outer(Qv, Ea))
    W4 = np.einsum("lij,mj->lmi", jac_b, cs_u[::-1] if False else cs_u)
    I4 = root * np.real(np.einsum("lmi,lm->i", W4, K2))

    if branch == "post":
        # d2_Omega frozen at the step start: I3 reduces to a P1 mode sum
        dom = _omega_sum(ms, jc_u, 1, sa, 1) @ avg_f
        P1 = step_P1(ells_b, geom.a, geom.b, geom.a, geom.t0, eps)
        vecs = np.einsum("lij,j->li", jac_b, dom)
        I3 = root * np.real(np.einsum("li,l->i", vecs, P1))
    else:
        # K1[l, m] = int (xi - a) e^{il tau(xi)} E1(m, tau(xi)) dxi
        K1 = 0.5 * eps * (N0 - np.sqrt(sa) * Nm)
        V = np.einsum("mij,j->mi", jc_u, avg_f)
        W3 = np.einsum("lij,mj->lmi", jac_b, V)
        I3 = root * np.real(np.einsum("lmi,lm->i", W3, K1))
    return I3, I4
