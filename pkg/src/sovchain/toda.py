"""Open Toda chain eigenfunctions from the Mellin-Barnes recursion.

The gamma-variables are integrated along the horizontal line Im gamma = c
(``shift``), which lies above every pole of Gamma(i lambda - i gamma + eps);
by Cauchy's theorem this equals the real-line integral for eps > 0 and also
gives the eps -> 0+ limit without a near-singular integrand. Nested levels
use lines c, 2c, ... so the inner poles stay below the inner contour.
"""

from math import log, pi

import numpy as np

from .cgamma import log_gamma
from .deltafam import kernel_S
from .errors import DomainError
from .measures import log_mu_toda
from .quad import QuadSpec, cauchy_derivatives, extrapolate_to_zero, line_halfwidth, sinh_rule

DEFAULT_SHIFT = 0.5


def _gamma_nodes(n_dim, spec, halfwidth):
    x, w = sinh_rule(spec.points_per_dim, spec.map_scale, halfwidth)
    if n_dim == 1:
        return x[:, None], w
    g = np.meshgrid(*([x] * n_dim), indexing="ij")
    gw = np.meshgrid(*([w] * n_dim), indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1), np.prod(np.stack([a.ravel() for a in gw], axis=1), axis=1)


def _log_coupling(lam, gam, eps):
    # sum_{k,j} log Gamma(i lam_k - i gam_j + eps); lam (N,), gam (K, N-1)
    total = np.zeros(gam.shape[0], dtype=complex)
    for lk in lam:
        total = total + np.sum(log_gamma(1j * lk - 1j * gam + eps), axis=1)
    return total


def _psi(lam, x, eps, spec, shift, level=1):
    """Batch evaluation; ``lam`` complex (N,), ``x`` complex (M, N)."""
    n = lam.size
    if n == 1:
        return np.exp(1j * lam[0] * x[:, 0])
    c = shift * level
    base = np.imag(lam).max(initial=0.0)

    def profile(t):
        gam = (t + 1j * (base + c))[:, None] * np.ones((1, n - 1))
        gam = gam + np.arange(n - 1)[None, :] * 0.3
        return np.exp(_log_coupling(lam, gam, eps).real)

    half = line_halfwidth(profile, spec.map_scale)
    nodes, weights = _gamma_nodes(n - 1, spec, half)
    gam = nodes + 1j * (base + c)
    with np.errstate(divide="ignore"):
        logw = _log_coupling(lam, gam, eps) + log_mu_toda(nodes)
    coef = np.exp(logw) * weights
    total = np.zeros(x.shape[0], dtype=complex)
    big_lam = lam.sum()
    for g, cg in zip(gam, coef):
        if cg == 0:
            continue
        inner = _psi(g, x[:, : n - 1], eps, spec, shift, level + 1)
        total = total + cg * np.exp(1j * (big_lam - g.sum()) * x[:, n - 1]) * inner
    return total


def psi_toda(lam, x, eps=1e-2, spec=QuadSpec(points_per_dim=200), shift=DEFAULT_SHIFT):
    """Toda eigenfunction Psi^lambda_N(x) for N <= 3.

    Parameters
    ----------
    lam : sequence of float
        Spectral parameters (length N).
    x : sequence or array
        Coordinates, length N, or a batch of shape (M, N); complex entries
        are allowed (used for Cauchy-circle derivatives).
    eps : float
        Regulator in Gamma(i lambda_k - i gamma_j + eps); 0 gives the limit.
    """
    lam = np.asarray(lam, dtype=complex)
    if not 1 <= lam.size <= 3:
        raise DomainError("psi_toda supports 1 <= N <= 3")
    if eps < 0:
        raise DomainError("eps must be non-negative")
    pts = np.asarray(x, dtype=complex)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != lam.size:
        raise DomainError("lambda and x must have equal length")
    out = _psi(lam, pts, eps, spec, shift)
    return complex(out[0]) if single else out


def toda_energy(lam):
    return 0.5 * float(np.sum(np.square(lam)))


def hamiltonian_apply(lam, x, eps, spec=QuadSpec(points_per_dim=200), radius=0.1):
    """(H Psi)(x) and Psi(x) with H = -1/2 sum d^2/dx_k^2 + sum_k exp(x_k - x_{k+1})."""
    x = np.asarray(x, dtype=complex)
    n = x.size
    center = psi_toda(lam, x, eps, spec)
    lap = 0j
    for k in range(n):
        def along(zk, k=k):
            pts = np.repeat(x[None, :], zk.size, axis=0)
            pts[:, k] = zk
            return psi_toda(lam, pts, eps, spec)

        lap += cauchy_derivatives(along, x[k], radius, order=2)[2]
    potential = sum(np.exp(x[k] - x[k + 1]) for k in range(n - 1))
    return -0.5 * lap + potential * center, center


def hamiltonian_residual(lam, x, eps_values=(4e-3, 2e-3, 1e-3), spec=QuadSpec(points_per_dim=200)):
    """Relative residual |H Psi - E Psi| / (|H Psi| + |E Psi|) with eps extrapolated to 0."""
    h_vals, p_vals = [], []
    for e in eps_values:
        hp, p = hamiltonian_apply(lam, x, e, spec)
        h_vals.append((e, hp))
        p_vals.append((e, p))
    if len(eps_values) >= 3:
        hp, p = extrapolate_to_zero(h_vals), extrapolate_to_zero(p_vals)
    else:
        hp, p = h_vals[-1][1], p_vals[-1][1]
    energy = toda_energy(lam)
    return float(abs(hp - energy * p) / (abs(hp) + abs(energy * p)))


def toda_orthogonality_kernel(lam, lam_prime, eps, eps_prime):
    """prod_{k,j} Gamma(i lam'_j - i lam_k + eps + eps') / Gamma(i Lambda' - i Lambda + M (eps + eps')).

    ``M = len(lam)`` (the number of spectral variables); see the decisions
    ledger for why this is M and not M - 1.
    """
    lam = np.asarray(lam, dtype=float)
    lp = np.asarray(lam_prime, dtype=float)
    if not (eps > 0 and eps_prime > 0):
        raise DomainError("regulators must be positive")
    e = eps + eps_prime
    total = sum(log_gamma(1j * (lp[j] - lam[k]) + e) for k in range(lam.size) for j in range(lp.size))
    total = total - log_gamma(1j * (lp.sum() - lam.sum()) + lam.size * e)
    return complex(np.exp(total))


def orthogonality_integral(lam, lam_prime, eps, eps_prime, spec=QuadSpec(points_per_dim=400)):
    """Quadrature of the gamma-integral that the orthogonality kernel evaluates.

    int prod_{k=1}^{M} prod_{j=1}^{M-1} Gamma(i lam'_k - i g_j + eps') Gamma(i g_j - i lam_k + eps) mu_{M-1}(g) dg,
    along the real line (M <= 3).
    """
    from .gustafson import ParamSet, first_lhs

    params = ParamSet([1j * v + eps_prime for v in lam_prime], [-1j * v + eps for v in lam])
    return first_lhs(params, spec)


def toda_completeness_kernel(gamma, gamma_prime, L, eps):
    """L^{i(G' - G)} prod_{k,j} Gamma(i(g'_k - g_j) + eps), divided by the off-diagonal Gamma pairs.

    For N = 1 the off-diagonal product is empty; for N > 1 the kernel equals
    the S-kernel of the delta-family module, which carries the
    1/prod Gamma(i(g_a - g_b)) factors.
    """
    g = np.asarray(gamma, dtype=float)
    gp = np.asarray(gamma_prime, dtype=float)
    if not (L > 0 and eps > 0):
        raise DomainError("L and eps must be positive")
    total = 1j * log(L) * (gp.sum() - g.sum())
    total = total + sum(log_gamma(1j * (gp[k] - g[j]) + eps) for k in range(gp.size) for j in range(g.size))
    return complex(np.exp(total))
