"""Gustafson-type Mellin-Barnes integrals: closed forms and quadrature.

Three identities are covered: the first integral against the Sklyanin
measure, its reduced (t-deformed) limit, and the second integral with the
reflection-symmetric ``f(a +- b)`` structure.
"""

from dataclasses import dataclass
from math import lgamma, log, pi

import numpy as np

from .cgamma import log_gamma, log_gamma_ratio
from .errors import DomainError
from .measures import log_inv_gamma_pair, log_mu_toda
from .quad import QuadSpec, integrate_cube


@dataclass(frozen=True)
class ParamSet:
    """Complex Gustafson parameters with positive real parts."""

    alpha: tuple
    beta: tuple

    def __post_init__(self):
        a = tuple(complex(v) for v in self.alpha)
        b = tuple(complex(v) for v in self.beta)
        if len(a) != len(b):
            raise DomainError("alpha and beta must have equal length")
        if any(v.real <= 0 for v in a + b):
            raise DomainError("Gustafson parameters need positive real parts")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def __len__(self):
        return len(self.alpha)


def default_spec(dim):
    """200 Gauss points per axis up to two dimensions, 10^6 Monte Carlo samples beyond."""
    if dim <= 2:
        return QuadSpec(method="tensor-gauss", points_per_dim=200)
    return QuadSpec(method="monte-carlo", samples=1_000_000, map_scale=1.0)


def first_rhs(params):
    """prod_{k,j} Gamma(alpha_k + beta_j) / Gamma(sum(alpha + beta))."""
    a, b = params.alpha, params.beta
    num = [ak + bj for ak in a for bj in b]
    return complex(np.exp(log_gamma_ratio(num, [sum(a) + sum(b)])))


def _log_gamma_block(lam, alpha, beta):
    # sum over k, j of log[Gamma(alpha_k - i lam_j) Gamma(i lam_j + beta_k)]
    total = np.zeros(lam.shape[0], dtype=complex)
    for ak, bk in zip(alpha, beta):
        total = total + np.sum(log_gamma(ak - 1j * lam) + log_gamma(1j * lam + bk), axis=1)
    return total


def _integrate(f, dim, spec):
    return integrate_cube(f, dim, spec if spec is not None else default_spec(dim))


def first_integrand(params, log_offset=0.0):
    """Vectorised integrand of the first identity on points of shape (M, N)."""
    alpha, beta = params.alpha, params.beta

    def f(lam):
        lam = np.atleast_2d(lam)
        with np.errstate(divide="ignore"):
            logv = _log_gamma_block(lam, alpha, beta) + log_mu_toda(lam) - log_offset
        return np.exp(logv)

    return f


def first_lhs(params, spec=None, log_offset=0.0):
    """Quadrature of the first identity's left-hand side over R^N, N = len(alpha) - 1.

    ``log_offset`` is subtracted from the log integrand before exponentiation,
    so the returned estimate is the integral times exp(-log_offset).
    """
    n = len(params) - 1
    if not 1 <= n <= 3:
        raise DomainError("first identity is implemented for 1 <= N <= 3")
    return _integrate(first_integrand(params, log_offset), n, spec)


def reduced_rhs(params, t):
    """t^A (1+t)^{-A-B} prod_{k,j} Gamma(alpha_k + beta_j)."""
    if not t > 0:
        raise DomainError("t must be positive")
    a, b = params.alpha, params.beta
    big_a, big_b = sum(a), sum(b)
    logv = big_a * log(t) - (big_a + big_b) * log(1.0 + t)
    logv = logv + log_gamma_ratio([ak + bj for ak in a for bj in b], [])
    return complex(np.exp(logv))


def reduced_lhs(params, t, spec=None):
    """Quadrature of the reduced identity: the first integrand with N = len(alpha) and t^{i Lambda}."""
    if not t > 0:
        raise DomainError("t must be positive")
    n = len(params)
    alpha, beta = params.alpha, params.beta
    log_t = log(t)

    def f(lam):
        lam = np.atleast_2d(lam)
        with np.errstate(divide="ignore"):
            logv = _log_gamma_block(lam, alpha, beta) + log_mu_toda(lam)
        return np.exp(logv + 1j * log_t * lam.sum(axis=1))

    return _integrate(f, n, spec)


def large_L_reduction(alpha, beta, t, L, spec=None):
    """First identity at N=1 with the second pair set to (L, tL), divided by Gamma(L) Gamma(tL).

    Returns ``(quadrature, closed_form)``; both tend to ``reduced_rhs`` of the
    remaining one-component parameters as L grows.
    """
    params = ParamSet([alpha, L], [beta, t * L])
    offset = lgamma(L) + lgamma(t * L)
    quad = first_lhs(params, spec, log_offset=offset)
    a, b = params.alpha, params.beta
    closed = np.exp(log_gamma_ratio([ak + bj for ak in a for bj in b], [sum(a) + sum(b)]) - offset)
    return quad, complex(closed)


def _as_floats(v):
    return np.asarray(getattr(v, "entries", v), dtype=float)


def second_rhs(x, x_prime, eps):
    """Closed form of the second identity.

    prod_{k,j} Gamma(i(x'_k - x_j) + eps_k + eps_j)
    * prod_{m<n} Gamma(i(x'_n + x'_m) + eps_nm) Gamma(-i(x_n + x_m) + eps_nm)
    / Gamma(i(X' - X) + 2 E)
    """
    x, xp, e = _as_floats(x), _as_floats(x_prime), np.asarray(eps, dtype=float)
    if np.any(e <= 0):
        raise DomainError("regulators must be positive")
    n = x.size
    num = [1j * (xp[k] - x[j]) + e[k] + e[j] for k in range(n) for j in range(n)]
    for m in range(n):
        for k in range(m + 1, n):
            num.append(1j * (xp[k] + xp[m]) + e[k] + e[m])
            num.append(-1j * (x[k] + x[m]) + e[k] + e[m])
    den = [1j * (xp.sum() - x.sum()) + 2.0 * e.sum()]
    return complex(np.exp(log_gamma_ratio(num, den)))


def second_integrand(x, x_prime, eps):
    """Integrand of the second identity (including the 1/(N-1)! and 1/(4 pi) factors)."""
    x, xp, e = _as_floats(x), _as_floats(x_prime), np.asarray(eps, dtype=float)
    n = x.size
    dim = n - 1
    const = -lgamma(n) - dim * log(4 * pi)

    def f(y):
        y = np.atleast_2d(y)
        total = np.zeros(y.shape[0], dtype=complex) + const
        for k in range(n):
            for sign in (1.0, -1.0):
                yy = sign * y
                total = total + np.sum(log_gamma(1j * (yy - x[k]) + e[k]) + log_gamma(1j * (xp[k] + yy) + e[k]), axis=1)
        with np.errstate(divide="ignore"):
            for m in range(dim):
                total = total + log_inv_gamma_pair(2.0 * y[:, m])
            for j in range(dim):
                for k in range(j + 1, dim):
                    total = total + log_inv_gamma_pair(y[:, k] + y[:, j]) + log_inv_gamma_pair(y[:, k] - y[:, j])
        return np.exp(total)

    return f


def second_lhs(x, x_prime, eps, spec=None):
    """Quadrature of the second identity over R^{N-1} with measure prod dy_m / (4 pi)."""
    n = len(_as_floats(x))
    if not 2 <= n <= 3:
        raise DomainError("second identity is implemented for N = 2, 3")
    if spec is None and n == 2:
        # poles at distance ~eps from the line need more than 200 nodes in 1-D
        spec = QuadSpec(points_per_dim=800)
    return _integrate(second_integrand(x, x_prime, eps), n - 1, spec)
