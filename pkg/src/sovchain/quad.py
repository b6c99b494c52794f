"""Quadrature engines: real line, R^d, nested compact regions, upper half-plane.

Integrands are vectorised: ``integrate_line`` and ``integrate_halfplane`` call
``f`` with a 1-D array of abscissae (real, resp. complex ``x + iy``), while
``integrate_cube`` and ``integrate_nested`` pass an array of shape ``(M, d)``.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EvaluationError, UsageError, DomainError

METHODS = ("tensor-gauss", "monte-carlo", "quasi-random")
TAIL_THRESHOLD = 1e-16
DEFAULT_MAP_SCALE = 2.0 / np.pi
MC_CHUNK = 1 << 15


@dataclass(frozen=True)
class QuadSpec:
    """Integration settings.

    Parameters
    ----------
    method : str
        One of ``tensor-gauss``, ``monte-carlo``, ``quasi-random``.
    points_per_dim : int
        Gauss-Legendre nodes per dimension (>= 2).
    samples : int
        Sample count for the stochastic methods (>= 1).
    map_scale : float
        Scale ``m`` of the sinh map ``x = m sinh(u)``.
    seed : int
        64-bit seed for the stochastic methods.
    """

    method: str = "tensor-gauss"
    points_per_dim: int = 200
    samples: int = 100_000
    map_scale: float = DEFAULT_MAP_SCALE
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown quadrature method {self.method!r}")
        if int(self.points_per_dim) < 2:
            raise UsageError("points_per_dim must be >= 2")
        if int(self.samples) < 1:
            raise UsageError("samples must be >= 1")
        if not (math.isfinite(self.map_scale) and self.map_scale > 0):
            raise UsageError("map_scale must be finite and positive")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed must fit in 64 unsigned bits")

    def with_(self, **changes):
        """Copy with some fields replaced."""
        fields = dict(self.__dict__)
        fields.update(changes)
        return QuadSpec(**fields)


@dataclass(frozen=True)
class Estimate:
    value: complex
    stat_err: float
    evaluations: int


@lru_cache(maxsize=64)
def gauss_legendre(n):
    """Nodes and weights on [-1, 1] (cached, read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _checked(values, where):
    values = np.asarray(values, dtype=complex)
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = np.flatnonzero(bad.ravel())[0]
        at = np.asarray(where)[idx]
        raise EvaluationError(f"integrand is not finite at {at!r}", abscissa=at)
    return values


def _tail_extent(magnitude, grid):
    """Smallest symmetric half-width on ``grid`` outside which magnitude < threshold."""
    peak = magnitude.max()
    if not peak > 0:
        return 1.0
    keep = magnitude >= TAIL_THRESHOLD * peak
    return max(abs(grid[keep].min()), abs(grid[keep].max()), 0.5)


# wide enough for mapped integrands that only decay like e^{-u} (1/x^2 tails)
_PROBE_U = np.linspace(-40.0, 40.0, 1601)


def line_halfwidth(f, scale):
    u = _PROBE_U
    x = scale * np.sinh(u)
    with np.errstate(all="ignore"):
        vals = np.abs(np.asarray(f(x), dtype=complex)) * scale * np.cosh(u)
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return _tail_extent(vals, u) + 0.1


def sinh_rule(n, scale, halfwidth):
    """Abscissae and weights of the sinh-mapped Gauss-Legendre rule on R."""
    t, w = gauss_legendre(n)
    u = halfwidth * t
    x = scale * np.sinh(u)
    return x, w * halfwidth * scale * np.cosh(u)


def integrate_line(f, spec=QuadSpec()):
    """Integrate ``f`` over the real line with the sinh-mapped Gauss-Legendre rule.

    The u-interval is truncated symmetrically where the mapped integrand
    drops below 1e-16 of its peak, found by a coarse probe.
    """
    if spec.method != "tensor-gauss":
        return integrate_cube(lambda p: f(p[:, 0]), 1, spec)
    half = line_halfwidth(f, spec.map_scale)
    x, w = sinh_rule(spec.points_per_dim, spec.map_scale, half)
    vals = _checked(f(x), x)
    return Estimate(complex(np.dot(vals, w)), 0.0, x.size)


_PROBE_SIZES = {1: 481, 2: 121, 3: 41, 4: 21}


def _axis_halfwidths(f, d, scale):
    """Per-axis u half-widths from a coarse probe grid over the mapped integrand."""
    u = np.linspace(-12.0, 12.0, _PROBE_SIZES[d])
    mesh = np.meshgrid(*([u] * d), indexing="ij")
    pts = np.stack([scale * np.sinh(m.ravel()) for m in mesh], axis=1)
    jac = np.prod(scale * np.cosh(np.stack([m.ravel() for m in mesh], axis=1)), axis=1)
    with np.errstate(all="ignore"):
        mag = np.abs(np.asarray(f(pts), dtype=complex)) * jac
    mag = np.where(np.isfinite(mag), mag, 0.0).reshape(mesh[0].shape)
    peak = mag.max()
    step = u[1] - u[0]
    if not peak > 0:
        return [1.0] * d
    keep = mag >= TAIL_THRESHOLD * peak
    out = []
    for k in range(d):
        axes = tuple(a for a in range(d) if a != k)
        hit = u[keep.any(axis=axes)] if axes else u[keep]
        out.append(max(abs(hit.min()), abs(hit.max()), 0.5) + step)
    return out


def _workers():
    env = os.environ.get("SOV_THREADS", "").strip()
    n = int(env) if env else 0
    return n if n > 0 else (os.cpu_count() or 1)


def _mc_chunk(f, d, scale, seed, chunk, count):
    # counter-based stream: key = seed, counter high word = chunk index
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, chunk]))
    u = gen.random((count, d))
    return _sech_weighted(f, d, scale, u)


def _sech_weighted(f, d, scale, u):
    a = np.pi / scale
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    x = np.log(np.tan(0.5 * np.pi * u)) / a
    # density prod (a/pi) sech(a x)
    log_density = np.sum(np.log(a / np.pi) - np.logaddexp(a * x, -a * x) + np.log(2.0), axis=1)
    vals = _checked(f(x), x)
    ratio = vals * np.exp(-log_density)
    return ratio.sum(), np.sum(np.abs(ratio) ** 2), ratio.shape[0]


def _combine(partials):
    total = 0j
    total_sq = 0.0
    n = 0
    for s, sq, c in partials:  # fixed chunk order
        total += s
        total_sq += sq
        n += c
    mean = total / n
    var = max(total_sq / n - abs(mean) ** 2, 0.0)
    err = math.sqrt(var / max(n - 1, 1))
    return mean, err, n


def _monte_carlo(f, d, spec):
    sizes = []
    left = spec.samples
    while left > 0:
        sizes.append(min(MC_CHUNK, left))
        left -= sizes[-1]
    jobs = [(spec.seed, k, c) for k, c in enumerate(sizes)]
    workers = min(_workers(), len(jobs))
    run = lambda job: _mc_chunk(f, d, spec.map_scale, *job)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            partials = list(pool.map(run, jobs))
    else:
        partials = [run(job) for job in jobs]
    mean, err, n = _combine(partials)
    return Estimate(complex(mean), err, n)


def _quasi_random(f, d, spec, replicas=8):
    from scipy.stats import qmc

    per = max(spec.samples // replicas, 1)
    means = []
    for r in range(replicas):
        seq = np.random.SeedSequence([spec.seed, r])
        eng = qmc.Sobol(d, scramble=True, seed=np.random.Generator(np.random.Philox(seq)))
        u = eng.random(per)
        s, _, c = _sech_weighted(f, d, spec.map_scale, u)
        means.append(s / c)
    means = np.array(means)
    err = float(np.std(means, ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0
    return Estimate(complex(means.mean()), err, per * replicas)


def integrate_cube(f, d, spec=QuadSpec()):
    """Integrate ``f`` over R^d.

    ``tensor-gauss`` takes the tensor product of the sinh-mapped line rule
    (d <= 4). ``monte-carlo`` samples the density proportional to
    ``prod sech(pi x_k / map_scale)`` from a counter-based generator keyed
    by (seed, chunk, point); chunks are summed in index order so the result
    does not depend on ``SOV_THREADS``.
    """
    if d < 1 or d > 6:
        raise UsageError(f"dimension {d} outside 1..6")
    if spec.method == "monte-carlo":
        return _monte_carlo(f, d, spec)
    if spec.method == "quasi-random":
        return _quasi_random(f, d, spec)
    if d > 4:
        raise UsageError("tensor-gauss supports d <= 4")
    halves = _axis_halfwidths(f, d, spec.map_scale)
    axes = [sinh_rule(spec.points_per_dim, spec.map_scale, h) for h in halves]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    weights = np.ones(grids[0].shape)
    for k, g in enumerate(np.meshgrid(*[a[1] for a in axes], indexing="ij")):
        weights = weights * g
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = _checked(f(pts), pts)
    return Estimate(complex(np.dot(vals, weights.ravel())), 0.0, pts.shape[0])


TANH_SINH_SCALE = 4.0


def tanh_sinh_map(t):
    """Map t in [-1, 1] onto [-1, 1] with double-exponential endpoint clustering.

    Returns ``(left, right, jac)``: the distances ``(1 + x)/2`` and ``(1 - x)/2``
    of the image x to the two endpoints, each accurate down to ~1e-37, and
    dx/dt. Keeping both distances avoids the cancellation in ``1 - x``.
    """
    g = TANH_SINH_SCALE * t
    s = 0.5 * np.pi * np.sinh(g)
    left = 1.0 / (1.0 + np.exp(-2.0 * s))
    right = 1.0 / (1.0 + np.exp(2.0 * s))
    return left, right, TANH_SINH_SCALE * 0.5 * np.pi * np.cosh(g) / np.cosh(s) ** 2


def integrate_nested(f, bounds, spec=QuadSpec(), grading=False):
    """Iterated Gauss-Legendre over a compact nested region.

    Parameters
    ----------
    f : callable
        Receives points of shape ``(M, d)``.
    bounds : list of callable
        ``bounds[k](outer)`` returns ``(lower, upper)`` arrays for coordinate
        ``k`` given the ``(M, k)`` array of outer coordinates.
    grading : bool
        Cluster nodes at every endpoint with a tanh-sinh substitution, for
        integrands with integrable endpoint singularities.

    Raises
    ------
    DomainError
        If some lower bound exceeds its upper bound.
    """
    n = spec.points_per_dim
    t, w = gauss_legendre(n)
    left, right = 0.5 * (1.0 + t), 0.5 * (1.0 - t)
    if grading:
        left, right, jac = tanh_sinh_map(t)
        w = w * jac
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    for bound in bounds:
        lo, hi = bound(pts)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), wts.shape)
        hi = np.broadcast_to(np.asarray(hi, dtype=float), wts.shape)
        if np.any(hi < lo):
            raise DomainError("inverted integration bounds")
        half = 0.5 * (hi - lo)
        # measure from the nearer endpoint so that clustered nodes keep their digits
        new = np.where(t[None, :] < 0, lo[:, None] + 2 * half[:, None] * left[None, :],
                       hi[:, None] - 2 * half[:, None] * right[None, :])
        pts = np.concatenate([np.repeat(pts, n, axis=0), new.reshape(-1, 1)], axis=1)
        wts = (wts[:, None] * half[:, None] * w[None, :]).ravel()
    vals = _checked(f(pts), pts)
    return Estimate(complex(np.dot(vals, wts)), 0.0, pts.shape[0])


_PROBE_V = np.linspace(-40.0, 8.0, 193)


def _halfplane_box(f, scale):
    u = np.linspace(-12.0, 12.0, 97)
    uu, vv = np.meshgrid(u, _PROBE_V, indexing="ij")
    z = scale * np.sinh(uu) + 1j * scale * np.exp(vv)
    jac = scale * np.cosh(uu) * scale * np.exp(vv)
    with np.errstate(all="ignore"):
        mag = np.abs(np.asarray(f(z.ravel()), dtype=complex)).reshape(z.shape) * jac
    mag = np.where(np.isfinite(mag), mag, 0.0)
    peak = mag.max()
    if not peak > 0:
        return 1.0, (-1.0, 1.0)
    keep = mag >= TAIL_THRESHOLD * peak
    ucols = u[keep.any(axis=1)]
    vrows = _PROBE_V[keep.any(axis=0)]
    du = u[1] - u[0]
    dv = _PROBE_V[1] - _PROBE_V[0]
    half = max(abs(ucols.min()), abs(ucols.max())) + du
    return half, (vrows.min() - dv, vrows.max() + dv)


def integrate_halfplane(f, spec=QuadSpec(), v_range=None, u_halfwidth=None):
    """Integrate ``f(z)`` over Im z > 0 with the product rule x = m sinh u, y = m e^v.

    The u- and v-intervals are found by probing the mapped integrand on a
    coarse grid. Pass ``v_range`` or ``u_halfwidth`` to fix them instead,
    e.g. for integrands with slow algebraic decay that the probe window
    cannot see the end of.
    """
    scale = spec.map_scale
    half, (v_lo, v_hi) = _halfplane_box(f, scale)
    if v_range is not None:
        v_lo, v_hi = v_range
    if u_halfwidth is not None:
        half = u_halfwidth
    n = spec.points_per_dim
    x, wx = sinh_rule(n, scale, half)
    t, w = gauss_legendre(n)
    v = 0.5 * (v_hi + v_lo) + 0.5 * (v_hi - v_lo) * t
    y = scale * np.exp(v)
    wy = w * 0.5 * (v_hi - v_lo) * y
    z = (x[:, None] + 1j * y[None, :]).ravel()
    wts = (wx[:, None] * wy[None, :]).ravel()
    vals = _checked(f(z), z)
    return Estimate(complex(np.dot(vals, wts)), 0.0, z.size)


def extrapolate_to_zero(values):
    """Richardson extrapolation of v(h) = v0 + c h + O(h^2) to h = 0.

    Uses the last three points: two first-order eliminations followed by a
    second-order one, which is exact for quadratic data.
    """
    if len(values) < 3:
        raise UsageError("extrapolation needs at least 3 points")
    pts = sorted(values, key=lambda hv: -hv[0])[-3:]
    (h0, v0), (h1, v1), (h2, v2) = pts
    if not h0 > h1 > h2 > 0:
        raise UsageError("step sizes must be positive and strictly decreasing")
    # Neville on the three points, evaluated at h = 0
    p01 = (h1 * v0 - h0 * v1) / (h1 - h0)
    p12 = (h2 * v1 - h1 * v2) / (h2 - h1)
    return (h2 * p01 - h0 * p12) / (h2 - h0)


def cauchy_derivatives(f, z0, radius, order=2, points=32):
    """Taylor derivatives f^(k)(z0), k = 0..order, from the trapezoid rule on a circle.

    ``f`` must be holomorphic on the closed disc and vectorised over a 1-D
    array of complex points.
    """
    theta = 2.0 * np.pi * np.arange(points) / points
    w = np.exp(1j * theta)
    vals = np.asarray(f(z0 + radius * w), dtype=complex)
    out = []
    for k in range(order + 1):
        coeff = np.mean(vals * w ** (-k)) / radius**k
        out.append(coeff * math.factorial(k))
    return out
