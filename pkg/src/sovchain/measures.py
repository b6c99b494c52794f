"""Spectral measures of the Toda and SL(2,R) chains, their asymptotics and masses.

All densities are assembled in log space and exponentiated once. The public
density functions accept a single point (sequence of length n) or a batch of
shape ``(M, n)`` and reject near-coincident entries; the ``log_*`` variants
skip that check and return ``-inf`` where the density vanishes, which is what
quadrature integrands want.
"""

from dataclasses import dataclass, field
from math import factorial, lgamma, log, pi

import numpy as np

from .cgamma import log_gamma
from .errors import DegeneratePointError, DomainError

DEGENERACY_GAP = 1e-12


@dataclass(frozen=True)
class ChainConfig:
    """Spins and inhomogeneities of an N-site chain.

    ``s = spins - i xi`` and ``sbar = spins + i xi``.
    """

    spins: tuple
    xi: tuple = None

    def __post_init__(self):
        spins = tuple(float(v) for v in np.atleast_1d(self.spins))
        xi = tuple(0.0 for _ in spins) if self.xi is None else tuple(float(v) for v in np.atleast_1d(self.xi))
        if len(xi) != len(spins) or not spins:
            raise DomainError("spins and inhomogeneities must be non-empty lists of equal length")
        if any(not v > 0.5 for v in spins):
            raise DomainError("spins must exceed 1/2")
        object.__setattr__(self, "spins", spins)
        object.__setattr__(self, "xi", xi)

    @property
    def N(self):
        return len(self.spins)

    @property
    def s(self):
        return np.array(self.spins) - 1j * np.array(self.xi)

    @property
    def sbar(self):
        return np.array(self.spins) + 1j * np.array(self.xi)

    @property
    def total_spin(self):
        return float(sum(self.spins))

    @property
    def total_xi(self):
        return float(sum(self.xi))

    def sites(self, idx):
        """Sub-chain made of the listed site indices."""
        return ChainConfig([self.spins[i] for i in idx], [self.xi[i] for i in idx])


@dataclass(frozen=True)
class SpectralVector:
    """Separated variables with an optional momentum ``p`` and regulators ``eps``."""

    entries: tuple
    p: float = None
    eps: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(complex(v) if np.iscomplexobj(v) else float(v) for v in self.entries))
        object.__setattr__(self, "eps", tuple(float(v) for v in self.eps))
        if self.p is not None and not self.p > 0:
            raise DomainError("momentum p must be positive")

    def __len__(self):
        return len(self.entries)

    @property
    def total(self):
        """Sum of the entries (X, or Lambda, depending on context)."""
        return sum(self.entries)

    @property
    def total_eps(self):
        return sum(self.eps)


def _points(x):
    if isinstance(x, SpectralVector):
        x = x.entries
    arr = np.asarray(x)
    single = arr.ndim <= 1
    arr = np.atleast_2d(arr)
    return arr, single


def _finish(values, single):
    return float(values[0]) if single else values


def log_inv_gamma_pair(y):
    """log(1/(Gamma(iy) Gamma(-iy))) = log(y sinh(pi y) / pi), stable for all real y.

    Equals ``-inf`` at y = 0.
    """
    a = np.abs(np.asarray(y, dtype=float))
    with np.errstate(divide="ignore"):
        big = a > 1.0
        lsinh = np.where(
            big,
            np.pi * a + np.log1p(-np.exp(-2.0 * np.pi * a)) - np.log(2.0),
            np.log(np.sinh(np.pi * np.minimum(a, 1.0))),
        )
        return np.log(a) + lsinh - np.log(np.pi)


def _check_gaps(x, what, opposite=False):
    n = x.shape[1]
    for j in range(n):
        for k in range(j + 1, n):
            if np.any(np.abs(x[:, k] - x[:, j]) < DEGENERACY_GAP):
                raise DegeneratePointError(f"{what}: coincident separated variables")
            if opposite and np.any(np.abs(x[:, k] + x[:, j]) < DEGENERACY_GAP):
                raise DegeneratePointError(f"{what}: opposite separated variables")


def log_sklyanin_pairs(x):
    """Sum over j < k of log(1/(Gamma(i(x_k - x_j)) Gamma(i(x_j - x_k)))) for real x."""
    x = np.atleast_2d(x)
    total = np.zeros(x.shape[0])
    n = x.shape[1]
    for j in range(n):
        for k in range(j + 1, n):
            total = total + log_inv_gamma_pair(x[:, k] - x[:, j])
    return total


def _log_norm(n):
    return -n * log(2 * pi) - lgamma(n + 1)


def log_mu_toda(gamma):
    """Unchecked log of the Sklyanin measure; batch input of shape (M, n)."""
    g = np.atleast_2d(gamma)
    return _log_norm(g.shape[1]) + log_sklyanin_pairs(g)


def mu_toda(gamma):
    """Sklyanin measure 1 / [(2 pi)^N N! prod_{j<k} Gamma(i(g_k - g_j)) Gamma(i(g_j - g_k))].

    Raises
    ------
    DegeneratePointError
        If two entries are closer than 1e-12.
    """
    g, single = _points(gamma)
    _check_gaps(g.real, "mu_toda")
    return _finish(np.exp(log_mu_toda(g.real)), single)


def _log_site_gammas(x, cfg):
    # sum_{k, j} log[Gamma(s_j - i x_k) Gamma(sbar_j + i x_k)], real for real x
    total = np.zeros(x.shape[0], dtype=complex)
    for sj, sbj in zip(cfg.s, cfg.sbar):
        total = total + np.sum(log_gamma(sj - 1j * x) + log_gamma(sbj + 1j * x), axis=1)
    return total.real


def log_mu_B(x, cfg):
    x = np.atleast_2d(x)
    return _log_norm(x.shape[1]) + _log_site_gammas(x, cfg) + log_sklyanin_pairs(x)


def mu_B(x, cfg):
    """Density of the closed-chain B-type spectrum; ``x`` has N-1 entries."""
    pts, single = _points(x)
    if pts.shape[1] != cfg.N - 1:
        raise DomainError(f"mu_B needs {cfg.N - 1} separated variables, got {pts.shape[1]}")
    _check_gaps(pts, "mu_B")
    return _finish(np.exp(log_mu_B(pts, cfg)), single)


def log_mu_A(x, cfg):
    x = np.atleast_2d(x)
    return _log_norm(x.shape[1]) + _log_site_gammas(x, cfg) + log_sklyanin_pairs(x)


def mu_A(x, cfg):
    """Density of the A-type spectrum; ``x`` has N entries."""
    pts, single = _points(x)
    if pts.shape[1] != cfg.N:
        raise DomainError(f"mu_A needs {cfg.N} separated variables, got {pts.shape[1]}")
    _check_gaps(pts, "mu_A")
    return _finish(np.exp(log_mu_A(pts, cfg)), single)


def log_mu_BB(x, cfg):
    x = np.atleast_2d(x)
    n = x.shape[1]
    total = _log_norm(n) + np.zeros(x.shape[0])
    for sj in cfg.s:
        g = log_gamma(sj + 1j * x) + log_gamma(sj - 1j * x)
        total = total + 2.0 * np.sum(g.real, axis=1)
    for m in range(n):
        total = total + log_inv_gamma_pair(2.0 * x[:, m])
    for j in range(n):
        for k in range(j + 1, n):
            total = total + log_inv_gamma_pair(x[:, k] + x[:, j]) + log_inv_gamma_pair(x[:, k] - x[:, j])
    return total


def mu_BB(x, cfg):
    """Density of the open-chain spectrum on (0, inf)^(N-1).

    Raises
    ------
    DomainError
        If an entry is not positive.
    DegeneratePointError
        For x_n == 0 (within 1e-12) or coincident entries.
    """
    pts, single = _points(x)
    if pts.shape[1] != cfg.N - 1:
        raise DomainError(f"mu_BB needs {cfg.N - 1} separated variables, got {pts.shape[1]}")
    if np.any(np.abs(pts) < DEGENERACY_GAP):
        raise DegeneratePointError("mu_BB: separated variable at the origin")
    if np.any(pts <= 0):
        raise DomainError("mu_BB is defined for positive separated variables")
    _check_gaps(pts, "mu_BB", opposite=True)
    return _finish(np.exp(log_mu_BB(pts, cfg)), single)


def mu_coord(z, s):
    """Half-plane measure ((2s-1)/pi) theta(Im z) (2 Im z)^(2s-2)."""
    y = np.imag(np.asarray(z, dtype=complex))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(y > 0, (2 * s - 1) / pi * np.power(2.0 * np.where(y > 0, y, 1.0), 2 * s - 2), 0.0)
    return float(val) if np.ndim(val) == 0 else val


def mu_A_total_mass(cfg):
    """Closed form 2^{-sum(s + sbar)} prod_{k,j} Gamma(s_k + sbar_j)."""
    lg = sum(log_gamma(sk + sbj) for sk in cfg.s for sbj in cfg.sbar)
    return float(np.exp(lg.real - 2.0 * cfg.total_spin * log(2.0)))


def mu_asymptotic(x, cfg, which):
    """Large-|x| product form of mu_B (``which='B'``) or mu_A (``which='A'``).

    Uses the prefactor (4 pi)^{N(N-1)/2} / (2^{N-1} (N-1)!) for B and
    (4 pi)^{N(N-1)/2} / N! for A, times prod y_ij sinh(pi y_ij) and
    prod y_k^{2 s_j - 1} exp(-pi |y_k + xi_j|).
    """
    pts, single = _points(x)
    n_sites = cfg.N
    if which == "B":
        expected = n_sites - 1
        log_pref = 0.5 * n_sites * (n_sites - 1) * log(4 * pi) - (n_sites - 1) * log(2.0) - lgamma(n_sites)
    elif which == "A":
        expected = n_sites
        log_pref = 0.5 * n_sites * (n_sites - 1) * log(4 * pi) - lgamma(n_sites + 1)
    else:
        raise DomainError(f"unknown measure type {which!r}")
    if pts.shape[1] != expected:
        raise DomainError(f"{which}-type asymptotic needs {expected} variables")
    _check_gaps(pts, "mu_asymptotic")
    total = log_pref + log_sklyanin_pairs(pts)
    # log_sklyanin_pairs carries an extra 1/pi per pair relative to y sinh(pi y)
    n_pairs = pts.shape[1] * (pts.shape[1] - 1) // 2
    total = total + n_pairs * log(pi)
    for spin, xi in zip(cfg.spins, cfg.xi):
        total = total + np.sum((2 * spin - 1) * np.log(np.abs(pts)) - pi * np.abs(pts + xi), axis=1)
    return _finish(np.exp(total), single)
