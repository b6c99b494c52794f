"""Delta-family kernels and a weak-convergence harness.

Distributional identities are only ever checked as smeared pairings against
smooth, rapidly decaying test functions; no kernel is evaluated at
coincident arguments.
"""

from dataclasses import dataclass, field
from math import factorial, lgamma, log, pi, sqrt

import numpy as np

from .cgamma import log_gamma
from .errors import DomainError, UsageError
from .measures import _check_gaps, log_inv_gamma_pair
from .quad import QuadSpec, line_halfwidth, extrapolate_to_zero, sinh_rule


@dataclass(frozen=True)
class TestFunction:
    """Smooth test function on R^d, evaluated on arrays of shape (M, d).

    ``kind`` is ``gaussian``, ``bump`` (support prod [c_k - w, c_k + w]) or
    ``hermite`` (Gaussian times the Hermite polynomial H_2 in each coordinate).
    """

    __test__ = False  # not a pytest class

    kind: str = "gaussian"
    center: tuple = (0.0,)
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bump", "hermite"):
            raise DomainError(f"unknown test function kind {self.kind!r}")
        if not self.width > 0:
            raise DomainError("width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def dim(self):
        return len(self.center)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        t = (x - np.array(self.center)) / self.width
        if self.kind == "gaussian":
            return np.exp(-0.5 * np.sum(t * t, axis=1))
        if self.kind == "hermite":
            return np.prod(4.0 * t * t - 2.0, axis=1) * np.exp(-0.5 * np.sum(t * t, axis=1))
        inside = np.all(np.abs(t) < 1.0, axis=1)
        r2 = np.where(np.abs(t) < 1.0, t * t, 0.0)
        with np.errstate(divide="ignore"):
            val = np.exp(np.sum(1.0 - 1.0 / (1.0 - r2), axis=1))
        return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class RegulatorSchedule:
    eps_values: tuple = (1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3)
    L_values: tuple = (10.0, 100.0, 1000.0)

    def __post_init__(self):
        e = list(self.eps_values)
        if any(b >= a for a, b in zip(e, e[1:])) or any(v <= 0 for v in e):
            raise UsageError("eps schedule must be positive and decreasing")
        l_ = list(self.L_values)
        if any(b <= a for a, b in zip(l_, l_[1:])) or any(v <= 0 for v in l_):
            raise UsageError("L schedule must be positive and increasing")


def _vec(x):
    return np.atleast_2d(np.asarray(getattr(x, "entries", x), dtype=float))


def _log_offdiag(x):
    # sum over a != b of log(1/Gamma(i(x_a - x_b)))
    n = x.shape[1]
    total = np.zeros(x.shape[0], dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            total = total + log_inv_gamma_pair(x[:, a] - x[:, b])
    return total


def weight_W(x):
    """(2 pi)^n n! prod_{a != b} 1/Gamma(i(x_a - x_b)) for n = len(x)."""
    pts = _vec(x)
    _check_gaps(pts, "weight_W")
    n = pts.shape[1]
    val = np.exp(n * log(2 * pi) + lgamma(n + 1) + _log_offdiag(pts).real)
    return float(val[0]) if np.ndim(getattr(x, "entries", x)) <= 1 else val


def _eps_vector(eps, n):
    e = np.atleast_1d(np.asarray(eps, dtype=float))
    if e.size == 1:
        e = np.full(n, float(e[0]))
    if e.size != n or np.any(e <= 0):
        raise DomainError(f"need {n} positive regulators")
    return e


def kernel_Ctilde(x, x_prime, eps, eps_prime):
    """Regularised kernel whose weak limit is W(x) delta(x, x').

    ``x``, ``x_prime`` have n = N-1 entries (or shape (M, n)); ``eps`` and
    ``eps_prime`` have N entries, the last of which enters the leading factor.
    """
    x, xp = _vec(x), _vec(x_prime)
    n = x.shape[1]
    e, ep = _eps_vector(eps, n + 1), _eps_vector(eps_prime, n + 1)
    lead = e[n] + ep[n] + 1j * np.sum(x - xp, axis=1)
    total = log_gamma(lead) - log_gamma(np.sum(e + ep) + 0j)
    for a in range(n):
        for b in range(n):
            total = total + log_gamma(1j * (xp[:, b] - x[:, a]) + ep[b] + e[a])
    total = total + _log_offdiag(x) + _log_offdiag(xp)
    out = np.exp(total)
    return complex(out[0]) if out.size == 1 else out


def kernel_S(x, x_prime, L, eps):
    """L^{i sum(x' - x)} prod_{a,b} Gamma(i(x'_a - x_b) + eps) / prod_{a != b} Gamma(i(x'_a - x'_b)) Gamma(i(x_a - x_b))."""
    if not (L > 0 and eps > 0):
        raise DomainError("L and eps must be positive")
    x, xp = _vec(x), _vec(x_prime)
    n = x.shape[1]
    total = 1j * log(L) * np.sum(xp - x, axis=1)
    for a in range(n):
        for b in range(n):
            total = total + log_gamma(1j * (xp[:, a] - x[:, b]) + eps)
    total = total + _log_offdiag(x) + _log_offdiag(xp)
    out = np.exp(total)
    return complex(out[0]) if out.size == 1 else out


def kernel_cosh(u, L):
    """sqrt(L / 4 pi) sech^{2L}(u / 2), computed in log space."""
    if not L > 0:
        raise DomainError("L must be positive")
    a = np.abs(np.asarray(u, dtype=float)) / 2.0
    log_sech = -(a + np.log1p(np.exp(-2.0 * a)) - log(2.0))
    val = np.exp(0.5 * log(L / (4 * pi)) + 2.0 * L * log_sech)
    return float(val) if np.ndim(val) == 0 else val


def cosh_mass(L):
    """Closed-form total mass sqrt(L) Gamma(L) / Gamma(L + 1/2) of kernel_cosh."""
    return float(np.exp(0.5 * log(L) + lgamma(L) - lgamma(L + 0.5)))


def _line_nodes(g, n, scale, half=None):
    half = line_halfwidth(g, scale) if half is None else half
    return sinh_rule(n, scale, half)


def weak_pairing(kernel, phi, phi_prime=None, spec=QuadSpec(points_per_dim=120), width=1e-3, u_points=400,
                 halfwidth=None):
    """Smeared pairing of a kernel against test functions.

    With ``phi_prime`` the double integral
    ``int int kernel(x, x') phi(x) conj(phi_prime(x')) dx dx'`` in dimension 1
    or 2 is computed in the coordinates ``(x, u = x' - x)``: the outer rule
    follows ``phi`` and the inner sinh rule has scale ``width`` so that the
    near-diagonal structure of a regularised kernel is resolved. Without
    ``phi_prime`` the single integral ``int kernel(x) phi(x) dx`` is returned.

    The outer truncation is probed from the test functions unless
    ``halfwidth`` (in the mapped variable) is given; fixing it makes the
    pairing exactly sesquilinear, since the nodes no longer depend on phi.
    """
    dim = getattr(phi, "dim", 1)
    if phi_prime is None:
        xs, wx = _line_nodes(lambda t: phi(t[:, None]), spec.points_per_dim, spec.map_scale, halfwidth)
        if dim != 1:
            raise UsageError("single pairings are one-dimensional")
        vals = np.asarray(kernel(xs), dtype=complex) * phi(xs[:, None])
        return complex(np.dot(vals, wx))
    if dim not in (1, 2):
        raise UsageError("pairings are implemented in dimension 1 and 2")
    # outer nodes cover both test functions
    xs, wx = _line_nodes(lambda t: sum(np.abs(_axis_max(f, t, dim)) for f in (phi, phi_prime)),
                         spec.points_per_dim, spec.map_scale, halfwidth)
    us, wu = sinh_rule(u_points, width, np.arcsinh(40.0 / width))
    if dim == 1:
        X = np.repeat(xs, us.size)[:, None]
        U = np.tile(us, xs.size)[:, None]
        W = np.repeat(wx, us.size) * np.tile(wu, xs.size)
    else:
        gx = np.stack([g.ravel() for g in np.meshgrid(xs, xs, indexing="ij")], axis=1)
        gw = np.outer(wx, wx).ravel()
        gu = np.stack([g.ravel() for g in np.meshgrid(us, us, indexing="ij")], axis=1)
        guw = np.outer(wu, wu).ravel()
        X = np.repeat(gx, gu.shape[0], axis=0)
        U = np.tile(gu, (gx.shape[0], 1))
        W = np.repeat(gw, gu.shape[0]) * np.tile(guw, gx.shape[0])
    XP = X + U
    left = phi(X)
    right = np.conj(phi_prime(XP))
    live = (left != 0) & (right != 0)
    K = np.zeros(W.shape, dtype=complex)
    if np.any(live):
        K[live] = kernel(X[live], XP[live])
    return complex(np.sum(K * left * right * W))


def _axis_max(f, t, dim):
    pts = np.zeros((t.size, dim))
    pts[:, 0] = t
    base = np.array(getattr(f, "center", [0.0] * dim), dtype=float)
    pts[:, 1:] = base[1:]
    if hasattr(f, "center"):
        pts[:, 0] = t
    return f(pts)


def diagonal_limit(phi, dim=1, spec=QuadSpec(points_per_dim=200)):
    """int W_n(x) |phi(x)|^2 dx, the target of every W-weighted delta family."""
    xs, wx = _line_nodes(lambda t: np.abs(_axis_max(phi, t, dim)) ** 2, spec.points_per_dim, spec.map_scale)
    if dim == 1:
        return float(2 * pi * np.dot(np.abs(phi(xs[:, None])) ** 2, wx))
    g = np.stack([g.ravel() for g in np.meshgrid(xs, xs, indexing="ij")], axis=1)
    w = np.outer(wx, wx).ravel()
    logw = 2 * log(2 * pi) + log(2.0) + _log_offdiag(g).real
    with np.errstate(divide="ignore"):
        vals = np.exp(logw) * np.abs(phi(g)) ** 2
    return float(np.dot(vals, w))


def sokhotsky_check(phi, L, eps_values=None, spec=QuadSpec(points_per_dim=400)):
    """int L^{ix} phi(x) / (x - i eps) dx with eps extrapolated to 0.

    The default schedule is eps = (0.04, 0.02, 0.01) / ln L, so that the
    damping exp(-eps ln L) of the pole contribution stays in the regime
    where three-point extrapolation is accurate. Pass a scalar
    ``eps_values`` to get the value at that single regulator.
    """
    if not L > 1:
        raise DomainError("L must exceed 1")
    k = log(L)
    if eps_values is None:
        eps_values = tuple(c / k for c in (4e-2, 2e-2, 1e-2))
    eps_list = np.atleast_1d(eps_values)
    # keep roughly ten nodes per oscillation of L^{ix} on |x| <= 1
    n = max(spec.points_per_dim, int(400 + 40 * k))
    values = []
    for eps in eps_list:
        if not eps > 0:
            raise DomainError("eps must be positive")
        xs, wx = sinh_rule(n, eps, np.arcsinh(40.0 / eps))
        f = np.exp(1j * k * xs) * phi(xs[:, None]) / (xs - 1j * eps)
        values.append((float(eps), complex(np.dot(f, wx))))
    if len(values) == 1:
        return values[0][1]
    return complex(extrapolate_to_zero(values))


@dataclass
class ConvergenceReport:
    """Pairings along a regulator schedule, the extrapolated limit and fitted order."""

    variable: str
    regulators: list
    values: list
    limit: complex
    target: complex
    order: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(abs(self.limit - self.target) <= self.tolerance * abs(self.target))

    def table(self):
        return [{"h": h, "re": v.real, "im": v.imag} for h, v in zip(self.regulators, self.values)]


def fitted_order(hs, values, limit):
    """Least-squares slope of log|v(h) - limit| against log h."""
    err = np.abs(np.asarray(values) - limit)
    hs = np.asarray(hs, dtype=float)
    mask = err > 0
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[mask]), np.log(err[mask]), 1)[0])


def convergence_study(kernel_family, phi, schedule=RegulatorSchedule(), target=None, tolerance=1e-2, spec=None):
    """Run a kernel family along a regulator schedule.

    Parameters
    ----------
    kernel_family : str
        ``ctilde`` (dimension-1 C-tilde, eps schedule), ``S`` (dimension-1
        S kernel, eps extrapolated at each L, variable 1/ln L) or ``cosh``
        (single pairing, variable 1/L).
    phi : TestFunction
    schedule : RegulatorSchedule
    target : complex, optional
        Expected limit; defaults to 2 pi int |phi|^2 (ctilde, S) or phi(0) (cosh).
    """
    pair_spec = spec or QuadSpec(points_per_dim=120)
    if kernel_family == "ctilde":
        hs = list(schedule.eps_values)
        vals = [weak_pairing(lambda x, xp, e=e: kernel_Ctilde(x, xp, [e, e], [e, e]), phi, phi, pair_spec, width=e) for e in hs]
        limit = extrapolate_to_zero(list(zip(hs, vals)))
        target = diagonal_limit(phi) if target is None else target
        variable = "eps"
    elif kernel_family == "S":
        eps_tail = schedule.eps_values[-3:]
        hs, vals = [], []
        for L in schedule.L_values:
            inner = [(e, weak_pairing(lambda x, xp, e=e, L=L: kernel_S(x, xp, L, e), phi, phi, pair_spec, width=e)) for e in eps_tail]
            hs.append(1.0 / log(L))
            vals.append(extrapolate_to_zero(inner))
        limit = vals[-1]
        target = diagonal_limit(phi) if target is None else target
        variable = "1/ln L"
    elif kernel_family == "cosh":
        hs, vals = [], []
        for L in schedule.L_values:
            hs.append(1.0 / L)
            vals.append(weak_pairing(lambda u, L=L: kernel_cosh(u, L), phi, None, QuadSpec(points_per_dim=400, map_scale=1.0 / sqrt(L))))
        limit = complex(phi(np.zeros((1, 1)))[0]) if target is None else target
        target = limit
        variable = "1/L"
    else:
        raise UsageError(f"unknown kernel family {kernel_family!r}")
    ref = target if kernel_family != "ctilde" else limit
    order = fitted_order(hs, vals, ref)
    return ConvergenceReport(variable, hs, vals, complex(limit), complex(target), order, tolerance)
