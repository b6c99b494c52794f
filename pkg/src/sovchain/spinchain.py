"""Eigenfunctions of the SL(2,R) chain in separated variables, for chains of up to three sites.

Sites carry holomorphic functions on the upper half-plane. The eigenfunctions
of ``B_N``, ``A_N`` and the open-chain ``B̂_N`` are built from layer operators.
Each layer operator is evaluated in the momentum representation, where every
integral runs over a compact interval. Scalar products between eigenfunctions
have closed forms. Each closed form is paired with a direct quadrature route
that shares nothing with it beyond ``cgamma``.
"""

from dataclasses import dataclass
from itertools import product
from math import comb, factorial, pi

import numpy as np

from .cgamma import log_gamma
from .errors import DomainError, UsageError
from .measures import ChainConfig, SpectralVector
from .quad import QuadSpec, gauss_legendre, integrate_halfplane

FAMILIES = ("Psi-B", "Phi-A", "Upsilon-BB")
ENTRIES = ("A", "B", "C", "D", "open-B", "open-Bhat")


# ---------------------------------------------------------------- propagator

def _log_base(z, w):
    # log(i / (z - conj w)); the base has positive real part whenever
    # Im z + Im w > 0, so the principal branch is the right one
    return np.log(1j / (np.asarray(z, dtype=complex) - np.conj(np.asarray(w, dtype=complex))))


def _propagator(alpha, z, w):
    return np.exp(alpha * _log_base(z, w))


def propagator_D(alpha, z, w):
    """D_alpha(z, w) = (i / (z - conj w))^alpha for z, w in the upper half-plane."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(z.imag <= 0) or np.any(w.imag <= 0):
        raise DomainError("propagator arguments must lie in the open upper half-plane")
    out = _propagator(alpha, z, w)
    return complex(out) if out.ndim == 0 else out


def reproducing_kernel(cfg, z, z_prime):
    """prod_k (i / (z_k - conj z'_k))^(2 s_k)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    zp = np.atleast_1d(np.asarray(z_prime, dtype=complex))
    if z.size != cfg.N or zp.size != cfg.N:
        raise DomainError("one point per site is required")
    return complex(np.prod([propagator_D(2 * s, a, b) for s, a, b in zip(cfg.spins, z, zp)]))


# ---------------------------------------------------------------- indices

def _split(gamma):
    gamma = [complex(g) for g in gamma]
    if len(gamma) % 2:
        raise DomainError("an index vector of a closed layer has even length")
    n = len(gamma) // 2
    return gamma[:n], gamma[n:]


def log_lambda_factor(gamma, x):
    alpha, beta = _split(gamma)
    total = 0j
    for a, b in zip(alpha, beta):
        total += log_gamma(a + b) - log_gamma(a - 1j * x) - log_gamma(b + 1j * x)
    return complex(total)


def lambda_factor(gamma, x):
    """prod_k Gamma(a_k + b_k) / (Gamma(a_k - ix) Gamma(b_k + ix)) for gamma = (a_1..a_n, b_1..b_n)."""
    return complex(np.exp(log_lambda_factor(gamma, x)))


def drop_t(gamma):
    """(a_1..a_n, b_1..b_n) -> (a_1..a_{n-1}, b_2..b_n)."""
    alpha, beta = _split(gamma)
    return alpha[:-1] + beta[1:]


def closed_indices(cfg, eps=None):
    """(s_1..s_{N-1}, sbar_2..sbar_N), with sbar_N raised by the regulator sum."""
    sbar = list(cfg.sbar)
    if eps is not None:
        sbar[-1] = sbar[-1] + sum(eps)
    return list(cfg.s[:-1]) + sbar[1:]


def log_norm_const(cfg, variant="closed"):
    s, sb = cfg.s, cfg.sbar
    n = cfg.N
    val = 0.5 * sum(log_gamma(s[k] + sb[k]) for k in range(n))
    for i in range(n):
        for j in range(i + 1, n):
            val += log_gamma(s[i] + sb[j])
            if variant == "open":
                val += log_gamma(s[i] + s[j])
    if variant not in ("closed", "open"):
        raise UsageError(f"unknown normalisation variant {variant!r}")
    return -complex(val)


def norm_const(cfg, variant="closed"):
    """The normalisation of Psi (``closed``) or of Upsilon (``open``)."""
    return complex(np.exp(log_norm_const(cfg, variant)))


# ---------------------------------------------------------------- momentum kernels

_GRADED = {}


def graded_unit_rule(n, depth=300):
    """Tanh-sinh nodes on [0, 1] as (t, 1 - t, weights), both distances kept to full precision.

    The outermost nodes sit near 10^-depth. With the default, weak endpoint
    singularities t^(eps - 1) down to eps of about 0.05 lose nothing to
    truncation.
    """
    key = (n, depth)
    if key not in _GRADED:
        scale = float(np.arcsinh(2.0 * depth * np.log(10.0) / (2.0 * pi)))
        u, w = gauss_legendre(n)
        g = scale * u
        s = 0.5 * pi * np.sinh(g)
        left = 1.0 / (1.0 + np.exp(-2.0 * s))
        right = 1.0 / (1.0 + np.exp(2.0 * s))
        wts = 0.5 * w * scale * 0.5 * pi * np.cosh(g) / np.cosh(s) ** 2
        _GRADED[key] = (left, right, wts)
    return _GRADED[key]


def _power(ratio, expo):
    return np.exp(expo * np.log(ratio))


def _regularised(x, eps):
    # regulators may carry one extra entry (the one that only shifts sbar_N)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if eps is None:
        return x
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise DomainError("regulators must be non-negative")
    return x + 1j * eps[: x.size]


def _layer_density(layers, q, n_nodes):
    """Momentum density of Lambda(layers[0]) ... Lambda(layers[-1]) E_p at q, without delta and prefactors.

    ``layers`` holds (index vector, spectral parameter) pairs from the outermost
    layer inwards; ``q`` has shape (M, n + 1) for an outer layer with 2n indices.
    """
    if not layers:
        return np.ones(q.shape[0], dtype=complex)
    gamma, x = layers[0]
    alpha, beta = _split(gamma)
    n = len(alpha)
    lam = np.exp(log_lambda_factor(gamma, x))
    m = q.shape[0]
    loops = n - 1
    if loops:
        left, right, w = graded_unit_rule(n_nodes, 100)
        grids = np.meshgrid(*([np.arange(n_nodes)] * loops), indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        qq = np.repeat(q, idx.shape[0], axis=0)
        idx = np.tile(idx, (m, 1))
        span = qq[:, 1:n]
        ell = span * left[idx]
        ell_gap = span * right[idx]  # q_{k+1} - l_k
        weight = np.prod(span * w[idx], axis=1)
    else:
        qq = q
        ell = np.zeros((m, 0))
        ell_gap = np.zeros((m, 0))
        weight = np.ones(m)
    # l_0 = 0, l_n = q_{n+1}
    ell_full = np.concatenate([np.zeros((qq.shape[0], 1)), ell, qq[:, n:n + 1]], axis=1)
    # q_k - l_{k-1}: for k >= 2 this is the gap of loop k-1
    first = np.concatenate([qq[:, :1], ell_gap], axis=1)
    pk = first + ell_full[:, 1:]
    val = np.full(qq.shape[0], lam, dtype=complex) * weight
    for k in range(n):
        a = alpha[k] - 1j * x
        b = beta[k] + 1j * x
        val = val * _power(first[:, k] / pk[:, k], a - 1) * _power(ell_full[:, k + 1] / pk[:, k], b - 1) / pk[:, k]
    val = val * _layer_density(layers[1:], pk, n_nodes)
    if loops:
        val = val.reshape(m, -1).sum(axis=1)
    return val


def psi_layers(cfg, x, eps=None):
    """Layer chain of Psi: Lambda_N(gamma_N, x_1) Lambda_{N-1}(t gamma_N, x_2) ..."""
    xs = _regularised(x, eps)
    if xs.size != cfg.N - 1:
        raise DomainError("Psi needs N - 1 separated variables")
    if eps is not None and len(eps) != cfg.N:
        raise DomainError("Psi takes one regulator per site")
    gamma = closed_indices(cfg, eps)
    layers = []
    for xk in xs:
        layers.append((gamma, complex(xk)))
        gamma = drop_t(gamma)
    return layers


def _check_psi(cfg, p):
    if cfg.N > 3:
        raise DomainError("eigenfunctions are implemented for N <= 3")
    if not p > 0:
        raise DomainError("momentum p must be positive")


def _psi_prefactor(cfg, p):
    return np.exp(log_norm_const(cfg) + (cfg.total_spin - 0.5) * np.log(p))


def psi_momentum_density(cfg, p, x, q, eps=None, points=200):
    """Vectorised momentum density K(q) of Psi on the surface sum(q) = p; q has shape (M, N)."""
    _check_psi(cfg, p)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    return _psi_prefactor(cfg, p) * _layer_density(psi_layers(cfg, x, eps), q, points)


def psi_momentum_kernel(cfg, p, x, q, eps=None, spec=QuadSpec(points_per_dim=200)):
    """K(q) with F[Psi_{p,x}](q) = K(q) delta(sum q - p)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (cfg.N,):
        raise DomainError("one momentum per site is required")
    if np.any(q <= 0):
        raise DomainError("momenta must be positive")
    if abs(q.sum() - p) > 1e-12 * max(1.0, p):
        raise DomainError("momenta must add up to p")
    return complex(psi_momentum_density(cfg, p, x, q[None, :], eps, spec.points_per_dim)[0])


def simplex_rule(n_sites, p, n_nodes, depth=300):
    """Nodes (M, N) and weights on {q > 0, sum q = p} with graded clustering at every face."""
    if n_sites == 1:
        return np.array([[p]]), np.ones(1)
    if n_sites == 2:
        left, right, w = graded_unit_rule(n_nodes, depth)
        return np.stack([p * left, p * right], axis=1), p * w
    # graded coordinates multiply at N = 3 (two simplex levels and a loop),
    # so each is kept above 1e-100
    left, right, w = graded_unit_rule(n_nodes, 100)
    a = np.repeat(left, n_nodes)
    ra = np.repeat(right, n_nodes)
    b = np.tile(left, n_nodes)
    rb = np.tile(right, n_nodes)
    q = np.stack([p * a, p * ra * b, p * ra * rb], axis=1)
    return q, p * p * ra * np.repeat(w, n_nodes) * np.tile(w, n_nodes)


def _points_in_halfplane(z, n):
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    if z.shape[1] != n:
        raise DomainError(f"expected {n} coordinates per point")
    if np.any(z.imag <= 0):
        raise DomainError("coordinates must lie in the upper half-plane")
    return z


def psi_values(cfg, p, x, z, eps=None, points=200):
    """Psi_{p,x} at a batch of points z of shape (M, N)."""
    _check_psi(cfg, p)
    z = _points_in_halfplane(z, cfg.N)
    q, w = simplex_rule(cfg.N, p, points)
    dens = psi_momentum_density(cfg, p, x, q, eps, points) * w
    # keep the (points x nodes) phase matrix to a few million entries
    step = max(1, 4_000_000 // q.shape[0])
    return np.concatenate([np.exp(1j * z[i:i + step] @ q.T) @ dens for i in range(0, z.shape[0], step)])


def psi_eval(cfg, p, x, z, eps=None, spec=QuadSpec(points_per_dim=200)):
    """Psi^N_{p,x}(z) from its momentum density integrated over the simplex."""
    return complex(psi_values(cfg, p, x, np.asarray(z, dtype=complex)[None, :], eps, spec.points_per_dim)[0])


def _bridge_integral(lo, width, a, b, c, d, points):
    """int_lo^(lo + width) k^c (lo/k)^(a-1) ((k-lo)/k)^(b-1) (lo + width - k)^d dk, vectorised."""
    left, right, w = graded_unit_rule(points, 100)
    span = width[:, None]
    k = lo[:, None] + span * left[None, :]
    gap = span * left[None, :]
    rest = span * right[None, :]
    logs = (c * np.log(k) + (a - 1) * np.log(lo[:, None] / k) + (b - 1) * np.log(gap / k) + d * np.log(rest))
    return (np.exp(logs) * w[None, :]).sum(axis=1) * span[:, 0]


# ---------------------------------------------------------------- closed-B overlaps

def _momentum_weights(cfg, q):
    # log of prod_k Gamma(2 s_k) q_k^(1 - 2 s_k)
    out = np.zeros(q.shape[0])
    for k, s in enumerate(cfg.spins):
        out += float(log_gamma(2 * s).real) + (1 - 2 * s) * np.log(q[:, k])
    return out


def overlap_BB_direct(cfg, p, x, x_prime, eps, eps_prime, spec=QuadSpec(points_per_dim=400)):
    """(Psi^{eps'}_{p,x'}, Psi^{eps}_{p,x}) with the delta(p - p') stripped, by quadrature over the simplex."""
    n = spec.points_per_dim
    q, w = simplex_rule(cfg.N, p, n)
    ket = psi_momentum_density(cfg, p, x, q, eps, n)
    bra = psi_momentum_density(cfg, p, x_prime, q, eps_prime, n)
    return complex(np.sum(np.conj(bra) * ket * np.exp(np.log(w) + _momentum_weights(cfg, q))))


def _check_regulators(eps, n):
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (n,) or np.any(eps <= 0):
        raise DomainError(f"expected {n} positive regulators")
    return eps


def log_overlap_BB_closed(cfg, p, x, x_prime, eps, eps_prime, prefactor="momentum"):
    n = cfg.N - 1
    s, sb = cfg.s, cfg.sbar
    eps = _check_regulators(eps, cfg.N)
    epsp = _check_regulators(eps_prime, cfg.N)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(x_prime, dtype=float)
    ket = x + 1j * eps[:n]
    bra = xp - 1j * epsp[:n]  # conjugate of the regularised bra variables
    e, ep = eps.sum(), epsp.sum()
    val = log_gamma(eps[-1] + epsp[-1] + 1j * (x.sum() - xp.sum())) - log_gamma(e + ep)
    for k in range(n):
        for j in range(n):
            val += log_gamma(1j * (xp[k] - x[j]) + epsp[k] + eps[j])
        val -= log_gamma(sb[-1] + e + 1j * ket[k]) + log_gamma(s[-1] + ep - 1j * bra[k])
        for j in range(n):
            val -= log_gamma(sb[j] + 1j * bra[k]) + log_gamma(s[j] - 1j * ket[k])
    if prefactor == "momentum":
        # what the momentum-space computation actually produces
        for i in range(n):
            val += (log_gamma(s[i] + sb[-1] + e) + np.conj(log_gamma(s[i] + sb[-1] + ep))
                    - 2.0 * log_gamma(s[i] + sb[-1]).real)
    elif prefactor == "printed":
        # kappa_N^2 / (kappa^eps kappa^eps') p^(sum eps + eps'), kappa^eps taken at shifted sbar_N
        def log_kappa(shift):
            lk = 0.5 * sum(log_gamma(s[k] + sb[k]) for k in range(n)) + 0.5 * log_gamma(s[-1] + sb[-1] + shift)
            return -(lk + sum(log_gamma(s[i] + sb[j]) for i in range(n) for j in range(i + 1, n))
                     + sum(log_gamma(s[i] + sb[-1] + shift) for i in range(n)))
        val += 2 * log_kappa(0.0).real - log_kappa(e) - np.conj(log_kappa(ep)) + (e + ep) * np.log(p)
    else:
        raise UsageError(f"unknown prefactor convention {prefactor!r}")
    return complex(val)


def overlap_BB_closed(cfg, p, x, x_prime, eps, eps_prime, prefactor="momentum"):
    """Closed form of (Psi^{eps'}_{p,x'}, Psi^{eps}_{p,x}) without the delta(p - p').

    ``eps`` has one entry per site: the first N - 1 shift x into the upper
    half-plane, and all of them together raise sbar_N. The ``momentum``
    prefactor is what the layer construction produces: it does not depend on p.
    The ``printed`` prefactor is the alternative normalisation
    kappa^2/(kappa^eps kappa^eps') p^(sum eps + eps'); both tend to 1 as the
    regulators vanish.
    """
    return complex(np.exp(log_overlap_BB_closed(cfg, p, x, x_prime, eps, eps_prime, prefactor)))


# ---------------------------------------------------------------- A-type eigenfunctions

def open_indices(cfg):
    """eta_N = (s_1..s_N, sbar_2..sbar_N)."""
    return list(cfg.s) + list(cfg.sbar[1:])


def _check_sigma(sigma):
    sigma = complex(sigma)
    if sigma.imag < 0:
        raise DomainError("sigma must lie in the closed upper half-plane")
    return sigma


def phi_values(cfg, x, z, sigma, eps=None, points=200):
    """Phi^N_{sigma,x} at a batch of points z of shape (M, N), for N <= 2."""
    sigma = _check_sigma(sigma)
    z = _points_in_halfplane(z, cfg.N)
    xs = _regularised(x, eps)
    if xs.size != cfg.N:
        raise DomainError("Phi needs N separated variables")
    s, sb = cfg.s, cfg.sbar
    if np.any((s[0] - 1j * xs).real <= 0):
        raise DomainError("separated variables leave the convergence window")
    kappa = norm_const(cfg)
    if cfg.N == 1:
        return kappa * _propagator(s[0] - 1j * xs[0], z[:, 0], sigma)
    if cfg.N != 2:
        raise DomainError("Phi is implemented for N <= 2")
    a = s[0] - 1j * xs[0]
    b = sb[1] + 1j * xs[0]
    if a.real <= 0 or b.real <= 0 or (s[1] - 1j * xs[0]).real <= 0:
        raise DomainError("separated variables leave the convergence window")
    left, right, w = graded_unit_rule(points)
    # Feynman-parameter form: the w-integral of the layer turns D_{s1-ix2}(w, sigma)
    # into its value at the convex combination t z1 + (1 - t) z2
    mix = z[:, :1] * left[None, :] + z[:, 1:] * right[None, :]
    logs = (a - 1) * np.log(left) + (b - 1) * np.log(right)
    inner = (_propagator(s[0] - 1j * xs[1], mix, sigma) * np.exp(logs + np.log(w))[None, :]).sum(axis=1)
    lam = np.exp(log_lambda_factor([s[0], sb[1]], xs[0]))
    return kappa * lam * _propagator(s[1] - 1j * xs[0], z[:, 1], sigma) * inner


def phi_eval(cfg, x, z, sigma, eps=None, spec=QuadSpec(points_per_dim=200)):
    """Phi^N_{sigma,x}(z), including the normalisation of Psi."""
    return complex(phi_values(cfg, x, np.asarray(z, dtype=complex)[None, :], sigma, eps, spec.points_per_dim)[0])


def phi_momentum_density(cfg, x, q, sigma, eps=None, points=200):
    """F[Phi^N_{sigma,x}](q) for q of shape (M, N), N <= 2."""
    sigma = _check_sigma(sigma)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    xs = _regularised(x, eps)
    s, sb = cfg.s, cfg.sbar
    kappa = norm_const(cfg)
    phase = np.exp(-1j * q.sum(axis=1) * np.conj(sigma))
    if cfg.N == 1:
        a = s[0] - 1j * xs[0]
        return kappa * phase * np.exp((a - 1) * np.log(q[:, 0]) - log_gamma(a))
    if cfg.N != 2:
        raise DomainError("Phi is implemented for N <= 2")
    a = s[0] - 1j * xs[0]
    b = sb[1] + 1j * xs[0]
    c = s[0] - 1j * xs[1]
    d = s[1] - 1j * xs[0]
    pref = kappa * np.exp(log_lambda_factor([s[0], sb[1]], xs[0]) - log_gamma(c) - log_gamma(d))
    return pref * phase * _bridge_integral(q[:, 0], q[:, 1], a, b, c - 2, d - 1, points)


# ---------------------------------------------------------------- open-chain eigenfunctions

def _upsilon_parts(cfg, p, x):
    if cfg.N != 2:
        raise DomainError("Upsilon is implemented for N = 2")
    _check_psi(cfg, p)
    x = complex(np.atleast_1d(x)[0])
    if abs(x.imag) >= min(cfg.spins):
        raise DomainError("|Im x| must stay below the smallest spin")
    s, sb = cfg.s, cfg.sbar
    a = s[0] - 1j * x
    b = sb[1] + 1j * x
    log_c = (log_norm_const(cfg, "open") + (cfg.total_spin - 0.5) * np.log(p)
             + log_gamma(s[0] + s[1]) + (1 - s[0] - s[1]) * np.log(p)
             + log_lambda_factor([s[0], sb[1]], x) - log_gamma(s[0] + 1j * x) - log_gamma(s[1] - 1j * x))
    return a, b, s[0] + 1j * x - 2, s[1] - 1j * x - 1, log_c


def upsilon_momentum_density(cfg, p, x, q, points=200):
    """K(q) with F[Upsilon^2_{p,x}](q) = K(q) delta(q_1 + q_2 - p); q has shape (M, 2)."""
    a, b, c, d, log_c = _upsilon_parts(cfg, p, x)
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if np.any(q <= 0):
        raise DomainError("momenta must be positive")
    return np.exp(log_c) * _bridge_integral(q[:, 0], q[:, 1], a, b, c, d, points)


def upsilon_values(cfg, p, x, z, points=200):
    """Upsilon^2_{p,x} at a batch of points z of shape (M, 2)."""
    z = _points_in_halfplane(z, 2)
    # the inner bridge integral is graded again inside q_2
    q, w = simplex_rule(2, p, points, 150)
    dens = upsilon_momentum_density(cfg, p, x, q, points) * w
    return np.exp(1j * z @ q.T) @ dens


def upsilon_eval(cfg, p, x, z, spec=QuadSpec(points_per_dim=200)):
    """Upsilon^2_{p,x}(z): the half-plane sigma-integral done in momentum space, leaving two compact integrals."""
    return complex(upsilon_values(cfg, p, x, np.asarray(z, dtype=complex)[None, :], spec.points_per_dim)[0])


# ---------------------------------------------------------------- monodromy operators

class DiffOp:
    """Differential operator with polynomial coefficients, normal ordered site by site.

    A term is keyed by one (a_k, b_k) pair per site and stands for
    prod_k z_k^a_k d^b_k/dz_k^b_k, coefficients first.
    """

    def __init__(self, n_sites, terms=None):
        self.n_sites = n_sites
        self.terms = {k: complex(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def scalar(cls, n_sites, value):
        return cls(n_sites, {((0, 0),) * n_sites: value})

    @classmethod
    def site(cls, n_sites, k, poly):
        """Lift a one-site operator {(a, b): coeff} to site k."""
        terms = {}
        for (a, b), c in poly.items():
            key = [(0, 0)] * n_sites
            key[k] = (a, b)
            terms[tuple(key)] = c
        return cls(n_sites, terms)

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return DiffOp(self.n_sites, out)

    def __neg__(self):
        return DiffOp(self.n_sites, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return DiffOp(self.n_sites, {k: c * v for k, v in self.terms.items()})

    def __matmul__(self, other):
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                per_site = [_compose_site(m1, m2) for m1, m2 in zip(k1, k2)]
                for combo in product(*per_site):
                    coeff = c1 * c2
                    key = []
                    for mono, c in combo:
                        coeff *= c
                        key.append(mono)
                    key = tuple(key)
                    out[key] = out.get(key, 0) + coeff
        return DiffOp(self.n_sites, out)

    def max_order(self):
        orders = [0] * self.n_sites
        for key in self.terms:
            for k, (_, b) in enumerate(key):
                orders[k] = max(orders[k], b)
        return orders

    def norm(self):
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def apply(self, derivs, z):
        """Evaluate on Taylor data: ``derivs[(b_1..b_N)]`` holds the mixed derivative at the point z."""
        total = 0j
        for key, c in self.terms.items():
            mono = np.prod([z[k] ** a for k, (a, _) in enumerate(key)])
            total += c * mono * derivs[tuple(b for _, b in key)]
        return total


def _compose_site(m1, m2):
    # z^a d^b . z^c d^e = sum_j C(b, j) c!/(c-j)! z^(a+c-j) d^(b+e-j)
    a, b = m1
    c, e = m2
    out = []
    for j in range(min(b, c) + 1):
        out.append(((a + c - j, b + e - j), comb(b, j) * factorial(c) / factorial(c - j)))
    return out


def _spin_ops(cfg, k):
    s = cfg.spins[k]
    n = cfg.N
    minus = DiffOp.site(n, k, {(0, 1): -1.0})
    zero = DiffOp.site(n, k, {(1, 1): 1.0, (0, 0): s})
    plus = DiffOp.site(n, k, {(2, 1): 1.0, (1, 0): 2.0 * s})
    return minus, zero, plus


def _lax(cfg, k, u):
    n = cfg.N
    minus, zero, plus = _spin_ops(cfg, k)
    one = DiffOp.scalar(n, u)
    return [[one + zero.scale(1j), minus.scale(1j)], [plus.scale(1j), one - zero.scale(1j)]]


def _matmul(x, y):
    return [[x[i][0] @ y[0][j] + x[i][1] @ y[1][j] for j in range(2)] for i in range(2)]


def monodromy(cfg, u):
    """T_N(u) = L_1(u + xi_1) ... L_N(u + xi_N) as a 2x2 array of DiffOp."""
    mat = _lax(cfg, 0, u + cfg.xi[0])
    for k in range(1, cfg.N):
        mat = _matmul(mat, _lax(cfg, k, u + cfg.xi[k]))
    return mat


def monodromy_operator(cfg, entry, u):
    """One entry of the closed or open monodromy matrix at spectral parameter u."""
    if cfg.N > 3:
        raise DomainError("monodromy operators are assembled for N <= 3")
    u = complex(u)
    if entry in ("A", "B", "C", "D"):
        i, j = {"A": (0, 0), "B": (0, 1), "C": (1, 0), "D": (1, 1)}[entry]
        return monodromy(cfg, u)[i][j]
    if entry in ("open-B", "open-Bhat"):
        back = monodromy(cfg, -u)
        fwd = monodromy(cfg, u)
        # sigma_2 T^t sigma_2 = [[D, -B], [-C, A]]; keep only its second column
        op = (back[0][0] @ (-fwd[0][1])) + (back[0][1] @ fwd[0][0])
        return op if entry == "open-B" else op.scale(1.0 / (2 * u + 1j))
    raise UsageError(f"unknown monodromy entry {entry!r}")


def taylor_data(f, z, orders, radius, points=32):
    """Mixed derivatives of f at z up to the given per-site orders, from trapezoid rules on circles."""
    z = np.asarray(z, dtype=complex)
    n = z.size
    if radius >= np.min(z.imag):
        raise DomainError("Cauchy circle leaves the upper half-plane")
    theta = 2.0 * pi * np.arange(points) / points
    circle = radius * np.exp(1j * theta)
    grids = np.meshgrid(*([circle] * n), indexing="ij")
    pts = z[None, :] + np.stack([g.ravel() for g in grids], axis=1)
    vals = np.asarray(f(pts), dtype=complex).reshape((points,) * n)
    coeffs = np.fft.fftn(vals) / points**n
    out = {}
    for idx in product(*[range(m + 1) for m in orders]):
        scale = np.prod([factorial(m) / radius**m for m in idx])
        out[idx] = coeffs[idx] * scale
    return out


def monodromy_apply(cfg, entry, u, f, z, points=32, radius=None, op=None):
    """Apply a monodromy entry to f at the point z.

    ``f`` takes an (M, N) array of points. Derivatives come from Cauchy circles
    of radius 0.1 min Im z unless ``radius`` is given.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("points must lie in the upper half-plane")
    op = monodromy_operator(cfg, entry, u) if op is None else op
    r = 0.1 * float(np.min(z.imag)) if radius is None else radius
    data = taylor_data(f, z, op.max_order(), r, points)
    return op.apply(data, z)


# ---------------------------------------------------------------- eigen-equations

@dataclass(frozen=True)
class EigenfunctionQuery:
    """One eigenfunction of a given family at one point z."""

    cfg: ChainConfig
    family: str
    x: tuple
    z: tuple
    p: float = None
    eps: tuple = None
    sigma: complex = 0j

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}")
        x = self.x.entries if isinstance(self.x, SpectralVector) else self.x
        object.__setattr__(self, "x", tuple(np.atleast_1d(x)))
        object.__setattr__(self, "z", tuple(complex(v) for v in np.atleast_1d(self.z)))
        need = self.cfg.N if self.family == "Phi-A" else self.cfg.N - 1
        if len(self.x) != need:
            raise DomainError(f"{self.family} needs {need} separated variables")
        if len(self.z) != self.cfg.N:
            raise DomainError("one coordinate per site is required")
        if self.family == "Phi-A":
            if self.p is not None:
                raise DomainError("Phi carries no momentum")
            _check_sigma(self.sigma)
        elif self.p is None or not self.p > 0:
            raise DomainError(f"{self.family} needs a positive momentum")

    def evaluator(self, points=200):
        """Vectorised f(z) of shape (M, N) -> (M,) for this eigenfunction."""
        cfg, x, p = self.cfg, self.x, self.p
        if self.family == "Psi-B":
            return lambda pts: psi_values(cfg, p, x, pts, self.eps, points)
        if self.family == "Phi-A":
            return lambda pts: phi_values(cfg, x, pts, self.sigma, self.eps, points)
        return lambda pts: upsilon_values(cfg, p, x, pts, points)

    def operator(self, u):
        if self.family == "Psi-B":
            return monodromy_operator(self.cfg, "B", u)
        if self.family == "Phi-A":
            # Phi depends on sigma through conj(sigma), so conj(sigma) multiplies B
            return monodromy_operator(self.cfg, "A", u) + monodromy_operator(self.cfg, "B", u).scale(np.conj(self.sigma))
        return monodromy_operator(self.cfg, "open-Bhat", u)

    def eigenvalue(self, u):
        xs = _regularised(self.x, self.eps)
        if self.family == "Psi-B":
            return self.p * complex(np.prod(u - xs))
        if self.family == "Phi-A":
            return complex(np.prod(u - xs))
        # with T(-u) sigma_2 T^t(u) sigma_2 taken literally the leading coefficient
        # of B-hat is (-1)^(N-1) i sum S^-, hence the sign
        return (-1) ** (self.cfg.N - 1) * self.p * complex(np.prod(u * u - xs * xs))


def eigen_residual(query, u, spec=QuadSpec(points_per_dim=200), points=32):
    """|Op f - eigenvalue f| / (|Op f| + |eigenvalue f|) at the query point."""
    f = query.evaluator(spec.points_per_dim)
    z = np.asarray(query.z)
    lhs = monodromy_apply(query.cfg, None, u, f, z, points=points, op=query.operator(u))
    rhs = query.eigenvalue(complex(u)) * complex(f(z[None, :])[0])
    return float(abs(lhs - rhs) / (abs(lhs) + abs(rhs)))


# ---------------------------------------------------------------- cross overlaps

def _as_complex(v):
    return np.atleast_1d(np.asarray(v, dtype=complex))


def log_overlap_AA_closed(cfg, sigma, upsilon, x, y):
    x, y = _as_complex(x), _as_complex(y)
    if x.size != cfg.N or y.size != cfg.N:
        raise DomainError("Phi needs N separated variables")
    base = 1j / (complex(sigma) - np.conj(complex(upsilon)))
    if not base.real > 0 and not (complex(sigma).imag > 0 or complex(upsilon).imag > 0):
        raise DomainError("need Im sigma > 0 or Im upsilon > 0")
    yb = np.conj(y)
    val = 1j * (yb.sum() - x.sum()) * np.log(base)
    for k in range(cfg.N):
        for j in range(cfg.N):
            val += log_gamma(1j * (yb[k] - x[j]))
            val -= log_gamma(cfg.s[j] - 1j * x[k]) + log_gamma(cfg.sbar[j] + 1j * yb[k])
    return complex(val)


def overlap_AA_closed(cfg, sigma, upsilon, x, y):
    """(Phi_{sigma,y}, Phi_{upsilon,x}); y may carry positive imaginary parts."""
    return complex(np.exp(log_overlap_AA_closed(cfg, sigma, upsilon, x, y)))


def halfplane_overlap(bra, ket, spin, spec=QuadSpec(points_per_dim=400), v_range=None, u_halfwidth=None):
    """int conj(bra(z)) ket(z) mu_s(z) d^2z for one-site functions on the half-plane."""
    def f(z):
        y = np.imag(z)
        weight = (2 * spin - 1) / pi * np.exp((2 * spin - 2) * np.log(2 * y))
        return np.conj(bra(z)) * ket(z) * weight
    return integrate_halfplane(f, spec, v_range=v_range, u_halfwidth=u_halfwidth).value


def _one_site(values):
    return lambda z: values(np.asarray(z, dtype=complex)[:, None])


def overlap_AA_direct(cfg, sigma, upsilon, x, y, spec=QuadSpec(points_per_dim=400)):
    """Half-plane quadrature of (Phi^1_{sigma,y}, Phi^1_{upsilon,x})."""
    if cfg.N != 1:
        raise DomainError("the direct route is implemented for N = 1")
    bra = _one_site(lambda z: phi_values(cfg, y, z, sigma))
    ket = _one_site(lambda z: phi_values(cfg, x, z, upsilon))
    # the integrand falls off only like a small negative power of |z|, so the
    # mapped box has to reach |z| ~ e^90 in both directions
    return halfplane_overlap(bra, ket, cfg.spins[0], spec, v_range=(-40.0, 90.0), u_halfwidth=90.0)


def log_overlap_BA_closed(cfg, p, y, sigma, x, eps):
    n = cfg.N
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps = _check_regulators(eps, n)
    if y.size != n - 1 or x.size != n:
        raise DomainError("expected N - 1 variables y and N variables x")
    sigma = complex(sigma)
    if not sigma.imag > 0:
        raise DomainError("sigma must lie in the open upper half-plane")
    expo = -0.5 - 1j * cfg.total_xi - 1j * x.sum() + eps.sum()
    val = expo * np.log(p) - 1j * p * np.conj(sigma)
    for k in range(n):
        for j in range(n - 1):
            val += log_gamma(1j * (y[j] - x[k]) + eps[k])
    for j in range(n):
        for k in range(n - 1):
            val -= log_gamma(cfg.sbar[j] + 1j * y[k])
        for k in range(n):
            val -= log_gamma(cfg.s[j] - 1j * x[k] + eps[k])
    return complex(val)


def overlap_BA_closed(cfg, p, y, sigma, x, eps):
    """(Psi_{p,y}, Phi_{sigma,x+i eps})."""
    return complex(np.exp(log_overlap_BA_closed(cfg, p, y, sigma, x, eps)))


def _bent_halfplane(integrand, centre, p, spin, n, angle=pi / 4, upward=False):
    """int integrand(x, y) mu_s d^2z with the Re z line bent into two rays.

    ``integrand`` must be holomorphic in x between the real axis and rays
    leaving ``centre`` at ``angle`` (below the axis, or above if ``upward``),
    and carry exp(-+ i p x) so that it decays exponentially along them.
    Both y and the ray length are cut off where exp(-p y) has died out.
    """
    t, wt = gauss_legendre(n)
    # y = e^v; the lower end covers the (2y)^(2s-2) weight to ~1e-17
    v_lo, v_hi = -40.0 / min(1.0, 2 * spin - 1), np.log(60.0 / p)
    v = 0.5 * (v_hi - v_lo) * (t + 1) + v_lo
    yv = np.exp(v)
    wy = 0.5 * (v_hi - v_lo) * wt * yv * (2 * spin - 1) / pi * np.exp((2 * spin - 2) * np.log(2 * yv))
    # r = R u^2 spreads nodes near the corner
    r_max = 60.0 / (p * np.sin(angle))
    u = 0.5 * (t + 1)
    r = r_max * u * u
    wr = wt * r_max * u
    tilt = 1j if upward else -1j
    total = 0j
    for direction in (np.exp(tilt * angle), -np.exp(-tilt * angle)):
        xr = centre + r * direction
        # dx = direction dr, oriented along increasing Re z
        orient = 1.0 if direction.real > 0 else -1.0
        total += orient * direction * np.einsum("i,ij,j->", wy, integrand(xr[None, :], yv[:, None]), wr)
    return complex(total)


def overlap_BA_direct(cfg, p, y, sigma, x, eps, spec=QuadSpec(points_per_dim=400)):
    """Half-plane quadrature of (Psi^1_p, Phi^1_{sigma,x+i eps}).

    For fixed Im z the integrand is holomorphic in Re z below the real axis
    down to the branch line of D under Re sigma, and conj(Psi) carries
    exp(-i p Re z), so the Re z line is bent downwards.
    """
    if cfg.N != 1:
        raise DomainError("the direct route is implemented for N = 1")
    sigma = _check_sigma(sigma)
    alpha = cfg.s[0] - 1j * _regularised(x, eps)[0]
    kappa = norm_const(cfg)
    # Psi^1_p(z) = c e^{ipz}
    c = complex(psi_values(cfg, p, [], [[1j]])[0]) * np.exp(p)

    def integrand(xr, yv):
        return np.conj(c) * np.exp(-1j * p * xr - p * yv) * kappa * _propagator(alpha, xr + 1j * yv, sigma)

    return _bent_halfplane(integrand, sigma.real, p, cfg.spins[0], spec.points_per_dim)


def reproduce_direct(spin, p, z, spec=QuadSpec(points_per_dim=400)):
    """int I(z, z') e^{ipz'} mu_s(z') d^2z' for one site; equals e^{ipz}."""
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("z must lie in the upper half-plane")

    def integrand(xr, yv):
        # I(z, z') is holomorphic in Re z' away from Re z + i(Im z + Im z')
        return np.exp(2 * spin * np.log(1j / (z - xr + 1j * yv)) + 1j * p * xr - p * yv)

    return _bent_halfplane(integrand, z.real, p, spin, spec.points_per_dim, upward=True)


def _pm(f, a, b):
    return f(a + b) + f(a - b)


def log_overlap_UpsilonPhi_closed(cfg, p, y, sigma, x, eps):
    n = cfg.N
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eps = _check_regulators(eps, n)
    if y.size != n - 1 or x.size != n:
        raise DomainError("expected N - 1 variables y and N variables x")
    sigma = complex(sigma)
    expo = -0.5 - 1j * cfg.total_xi - 1j * x.sum() + eps.sum()
    val = expo * np.log(p) - 1j * p * np.conj(sigma)
    for k in range(n):
        for j in range(k + 1, n):
            val -= log_gamma(-1j * (x[k] + x[j]) + eps[k] + eps[j])
        for j in range(n - 1):
            val += _pm(lambda a: log_gamma(-1j * a + eps[k]), x[k], y[j])
            val -= _pm(lambda a: log_gamma(cfg.sbar[k] + 1j * a), 0.0, y[j])
        for m in range(n):
            val -= log_gamma(cfg.s[k] - 1j * x[m] + eps[m])
    return complex(val)


def overlap_UpsilonPhi_closed(cfg, p, y, sigma, x, eps):
    """(Upsilon_{p,y}, Phi_{sigma,x+i eps})."""
    return complex(np.exp(log_overlap_UpsilonPhi_closed(cfg, p, y, sigma, x, eps)))


def _momentum_overlap_on_line(cfg, p, bra_density, ket_density, points):
    # two-site overlap of functions whose bra lives on q_1 + q_2 = p
    q, w = simplex_rule(2, p, points, 150)
    vals = np.conj(bra_density(q)) * ket_density(q)
    return complex(np.sum(vals * np.exp(np.log(w) + _momentum_weights(cfg, q))))


def overlap_UpsilonPhi_direct(cfg, p, y, sigma, x, eps, spec=QuadSpec(points_per_dim=600)):
    """Momentum-space quadrature of (Upsilon^2_{p,y}, Phi^2_{sigma,x+i eps})."""
    n = spec.points_per_dim
    return _momentum_overlap_on_line(
        cfg, p,
        lambda q: upsilon_momentum_density(cfg, p, y, q, n),
        lambda q: phi_momentum_density(cfg, x, q, sigma, eps, n), n)


def log_overlap_B_AxA_closed(cfg, p, y, sigma, x, x_last, prefactor="momentum"):
    n = cfg.N - 1
    s, sb = cfg.s, cfg.sbar
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    x_last = complex(x_last)
    if y.size != n or x.size != n:
        raise DomainError("expected N variables y and N variables x for an (N+1)-site chain")
    if prefactor not in ("momentum", "printed"):
        raise UsageError(f"unknown prefactor {prefactor!r}")
    printed = prefactor == "printed"
    xi = np.asarray(cfg.xi)
    total = x.sum() + x_last
    # the momentum route has no p^{i xi_last}, no Gamma-ratio chain, and the
    # x_last Gammas shifted by s_last - conj(s_last)
    p_expo = -0.5 - 1j * total - 1j * xi.sum() + (1j * xi[-1] if printed else 0.0)
    shift = 0.0 if printed else s[-1] - sb[-1]
    val = p_expo * np.log(p) - 1j * p * np.conj(complex(sigma))
    val -= log_gamma(s[-1] - 1j * x_last)
    for k in range(n):
        if printed:
            val += log_gamma(sb[k] + s[-1]) - log_gamma(s[k] + sb[-1])
        for j in range(n):
            val += log_gamma(1j * (y[j] - x[k])) - log_gamma(sb[k] + 1j * y[j]) - log_gamma(s[j] - 1j * x[k])
        val += (log_gamma(-1j * (y[k] + x_last) + shift) - log_gamma(s[-1] - 1j * y[k])
                - log_gamma(-1j * (x[k] + x_last) + shift))
    return complex(val)


def overlap_B_AxA_closed(cfg, p, y, sigma, x, x_last, prefactor="momentum"):
    """(Psi^{N+1}_{p,y}, Phi^N_{sigma,x} (x) Phi^1_{sigma,x_last}) on an (N+1)-site chain.

    Convergence needs small positive imaginary parts on x and x_last.
    ``prefactor="printed"`` keeps the textbook normalisation, which agrees
    with the momentum-space value only for equal xi.
    """
    return complex(np.exp(log_overlap_B_AxA_closed(cfg, p, y, sigma, x, x_last, prefactor)))


def overlap_B_AxA_direct(cfg, p, y, sigma, x, x_last, spec=QuadSpec(points_per_dim=400)):
    """Momentum-space quadrature of the Psi^{N+1} against Phi^N (x) Phi^1 overlap, N + 1 <= 3."""
    if cfg.N not in (2, 3):
        raise DomainError("the direct route is implemented for two or three sites")
    n = spec.points_per_dim
    head, tail = cfg.sites(list(range(cfg.N - 1))), cfg.sites([cfg.N - 1])
    q, w = simplex_rule(cfg.N, p, n)
    ket = (phi_momentum_density(head, x, q[:, :-1], sigma, None, n)
           * phi_momentum_density(tail, [x_last], q[:, -1:], sigma, None, n))
    vals = np.conj(psi_momentum_density(cfg, p, y, q, None, n)) * ket
    return complex(np.sum(vals * np.exp(np.log(w) + _momentum_weights(cfg, q))))
