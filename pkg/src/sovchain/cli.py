"""``sov`` command line: named verification suites and single evaluations.

Every suite is a list of cases. A case computes an ``(lhs, rhs, stat_err)``
triple; the runner times it, compares against the case tolerance and
collects one report per case. Reports are written as a JSON array sorted by
``case_id``; a plain table goes to stdout.
"""

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import exp, lgamma, log, pi, sqrt

import numpy as np

from . import deltafam, gustafson, spinchain, toda
from .errors import UsageError
from .measures import ChainConfig, SpectralVector, log_mu_A, mu_A, mu_A_total_mass, mu_B, mu_BB, mu_toda
from .quad import QuadSpec, _workers, extrapolate_to_zero, integrate_cube, integrate_line

SUITES = (
    "gustafson-first", "gustafson-reduced", "gustafson-second", "orthogonality-b", "orthogonality-a",
    "overlap-cross", "eigen-residual", "delta-family", "toda", "measures",
)
PRESETS = ("quick", "default", "full")
EVALS = ("psi", "phi", "upsilon", "measure")


@dataclass
class Case:
    case_id: str
    compute: object
    tolerance: float
    params: dict = field(default_factory=dict)
    n: int = None
    # "rel": rel_err <= tol or abs_err <= tol * scale; "sigma": abs_err <= tol * stat_err
    rule: str = "rel"
    scale: float = 0.0
    presets: tuple = PRESETS


@dataclass
class VerifyReport:
    suite: str
    case_id: str
    lhs: complex
    rhs: complex
    abs_err: float
    rel_err: float
    stat_err: float
    tolerance: float
    passed: bool
    params: dict
    runtime_seconds: float
    seed: int

    def to_json(self):
        out = {}
        for key, val in self.__dict__.items():
            out[key] = _plain(val)
        return out


def _plain(v):
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def make_report(suite, case, lhs, rhs, stat_err, runtime, seed):
    lhs, rhs = complex(lhs), complex(rhs)
    abs_err = abs(lhs - rhs)
    top = max(abs(lhs), abs(rhs))
    rel_err = abs_err / top if top > 0 else 0.0
    if case.rule == "sigma":
        # k-sigma rule, restated as an equivalent relative tolerance
        tol = case.tolerance * stat_err / top if top > 0 else 0.0
        passed = abs_err <= case.tolerance * stat_err
    else:
        tol = case.tolerance
        passed = rel_err <= tol or abs_err <= tol * case.scale
    return VerifyReport(suite, case.case_id, lhs, rhs, float(abs_err), float(rel_err), float(stat_err),
                        float(tol), bool(passed), dict(case.params), float(runtime), int(seed))


# ---------------------------------------------------------------- suite builders

def _est(e):
    return e.value, e.stat_err


def suite_gustafson_first(opts):
    cases = []
    sets = [
        ("n1-half", (0.5, 0.5), (0.5, 0.5), 1e-6),
        ("n1-ones", (1.0, 1.0), (1.0, 1.0), 1e-6),
        ("n1-complex", (0.7 + 0.3j, 1.1 - 0.2j), (0.9 - 0.1j, 0.5 + 0.4j), 1e-6),
        ("n2-real", (0.7, 0.9, 1.1), (0.6, 0.8, 1.0), 1e-5),
        ("n2-complex", (0.8 + 0.2j, 0.6, 1.0 - 0.1j), (0.9, 0.7 - 0.3j, 0.5 + 0.1j), 1e-5),
    ]
    for cid, a, b, tol in sets:
        params = gustafson.ParamSet(a, b)

        def run(params=params):
            lhs, err = _est(gustafson.first_lhs(params))
            return lhs, gustafson.first_rhs(params), err

        cases.append(Case(cid, run, tol, {"alpha": a, "beta": b}, n=len(a) - 1))
    a, b = (0.8, 0.9, 1.0, 1.1), (0.7, 0.9, 1.0, 1.2)
    samples = 200_000 if opts.preset == "quick" else 1_000_000

    def run_mc():
        spec = QuadSpec(method="monte-carlo", samples=samples, map_scale=1.0, seed=opts.seed)
        p = gustafson.ParamSet(a, b)
        lhs, err = _est(gustafson.first_lhs(p, spec))
        return lhs, gustafson.first_rhs(p), err

    cases.append(Case("n3-monte-carlo", run_mc, 3.0, {"alpha": a, "beta": b, "samples": samples}, n=3, rule="sigma"))
    return cases


def suite_gustafson_reduced(opts):
    cases = []
    sets = [
        ("n1-ones", (1.0,), (1.0,), 1e-6),
        ("n1-complex", (0.7 + 0.2j,), (1.2 - 0.3j,), 1e-6),
        ("n2", (0.7 + 0.1j, 0.9), (0.8, 1.1 - 0.2j), 1e-5),
    ]
    for cid, a, b, tol in sets:
        for t in (0.5, 1.0, 3.0):
            params = gustafson.ParamSet(a, b)

            def run(params=params, t=t):
                lhs, err = _est(gustafson.reduced_lhs(params, t))
                return lhs, gustafson.reduced_rhs(params, t), err

            cases.append(Case(f"{cid}-t{t:g}", run, tol, {"alpha": a, "beta": b, "t": t}, n=len(a)))

    def run_large_L():
        target = gustafson.reduced_rhs(gustafson.ParamSet((1.0,), (1.0,)), 1.0)
        errs = []
        for L in (40.0, 80.0):
            quad, _ = gustafson.large_L_reduction(1.0, 1.0, 1.0, L)
            errs.append(abs(quad.value - target))
        return errs[0] / errs[1], 2.0, 0.0

    cases.append(Case("large-L-halving", run_large_L, 0.3, {"alpha": 1.0, "beta": 1.0, "t": 1.0, "L": [40, 80]}, n=1))
    return cases


def suite_gustafson_second(opts):
    cases = []
    sets = [
        ("n2", (0.3, -0.2), (0.1, 0.4), (0.05, 0.05), 1e-6),
        ("n3", (0.3, -0.2, 0.5), (0.1, 0.4, -0.3), (0.1, 0.1, 0.1), 1e-4),
    ]
    for cid, x, xp, eps, tol in sets:
        def run(x=x, xp=xp, eps=eps):
            lhs, err = _est(gustafson.second_lhs(x, xp, eps))
            return lhs, gustafson.second_rhs(x, xp, eps), err

        cases.append(Case(cid, run, tol, {"x": x, "x_prime": xp, "eps": eps}, n=len(x)))
    return cases


def suite_measures(opts):
    def mass(cfg):
        def run():
            spec = QuadSpec(points_per_dim=200 if cfg.N == 1 else 160)
            with np.errstate(divide="ignore"):
                lhs, err = _est(integrate_cube(lambda x: np.exp(log_mu_A(x, cfg)), cfg.N, spec))
            return lhs, mu_A_total_mass(cfg), err
        return run

    c1 = ChainConfig([1.0])
    c2 = ChainConfig([1.0, 1.0])
    c2i = ChainConfig([1.0, 0.8], [0.1, -0.2])
    return [
        Case("mu-A-mass-n1", lambda: (mass(c1)()[0], 0.25, 0.0), 1e-8, {"spins": c1.spins}, n=1, scale=1.0),
        Case("mu-A-mass-n2", mass(c2), 1e-4, {"spins": c2.spins}, n=2),
        Case("mu-A-mass-n2-inhomogeneous", mass(c2i), 1e-4, {"spins": c2i.spins, "xi": c2i.xi}, n=2),
    ]


def _eigen_points():
    return [(0.3 + 1.0j, -0.2 + 0.8j), (0.1 + 0.6j, 0.5 + 1.1j), (-0.4 + 0.9j, 0.2 + 0.7j),
            (0.7 + 1.3j, -0.6 + 1.0j), (0.0 + 0.5j, 0.0 + 1.5j)]


def _residual_case(cid, query, u, tol, params):
    def run():
        f = query.evaluator(200)
        z = np.asarray(query.z)
        lhs = spinchain.monodromy_apply(query.cfg, None, u, f, z, op=query.operator(u))
        rhs = query.eigenvalue(complex(u)) * complex(f(z[None, :])[0])
        return lhs, rhs, 0.0
    return Case(cid, run, tol, params, n=query.cfg.N)


def suite_eigen_residual(opts):
    cfg = ChainConfig([1.0, 0.8], [0.1, -0.2])
    base = {"spins": cfg.spins, "xi": cfg.xi}
    cases = []
    for k, z in enumerate(_eigen_points()):
        q = spinchain.EigenfunctionQuery(cfg, "Psi-B", (0.2,), z, p=1.0)
        cases.append(_residual_case(f"B2-point{k}", q, 0.37, 1e-6, dict(base, z=z, u=0.37, p=1.0, x=[0.2])))
        q = spinchain.EigenfunctionQuery(cfg, "Phi-A", (0.2, -0.3), z, sigma=1e-3j)
        cases.append(_residual_case(f"A2-point{k}", q, 0.37, 1e-5, dict(base, z=z, u=0.37, sigma=1e-3j, x=[0.2, -0.3])))
        q = spinchain.EigenfunctionQuery(cfg, "Upsilon-BB", (0.2,), z, p=1.0)
        cases.append(_residual_case(f"Bhat2-point{k}", q, 0.37, 1e-4, dict(base, z=z, u=0.37, p=1.0, x=[0.2])))
    q = spinchain.EigenfunctionQuery(cfg, "Upsilon-BB", (0.2,), _eigen_points()[0], p=1.0)

    def run_parity():
        f = q.evaluator(200)
        z = np.asarray(q.z)
        return (spinchain.monodromy_apply(cfg, None, 0.37, f, z, op=q.operator(0.37)),
                spinchain.monodromy_apply(cfg, None, -0.37, f, z, op=q.operator(-0.37)), 0.0)

    cases.append(Case("Bhat2-u-parity", run_parity, 1e-10, dict(base, u=0.37), n=2))
    # permutation and evenness symmetries
    c3 = ChainConfig([1.0, 0.8, 1.2], [0.1, -0.2, 0.05])
    z3 = np.array([[0.3 + 1.0j, -0.2 + 0.8j, 0.1 + 1.2j]])
    z2 = np.array([[0.3 + 1.0j, -0.2 + 0.8j]])
    cases.append(Case("symmetry-psi3-swap", lambda: (
        spinchain.psi_values(c3, 1.0, [0.2, -0.35], z3)[0], spinchain.psi_values(c3, 1.0, [-0.35, 0.2], z3)[0], 0.0),
        1e-5, {"spins": c3.spins, "xi": c3.xi, "x": [0.2, -0.35]}, n=3))
    cases.append(Case("symmetry-phi2-swap", lambda: (
        spinchain.phi_values(cfg, [0.2, -0.3], z2, 0.5 + 1j)[0], spinchain.phi_values(cfg, [-0.3, 0.2], z2, 0.5 + 1j)[0], 0.0),
        1e-6, dict(base, x=[0.2, -0.3], sigma=0.5 + 1j), n=2))
    cases.append(Case("symmetry-upsilon2-even", lambda: (
        spinchain.upsilon_values(cfg, 1.0, [0.2], z2)[0], spinchain.upsilon_values(cfg, 1.0, [-0.2], z2)[0], 0.0),
        1e-5, dict(base, x=[0.2]), n=2))
    return cases


def suite_toda(opts):
    lam = (0.4, -0.3)
    points = [(0.3, -0.2), (0.0, 0.5), (-0.4, 0.1), (0.8, 0.6), (-0.1, -0.7)]
    cases = []
    for k, x in enumerate(points):
        def run(x=x):
            # H Psi and E Psi at each eps, both extrapolated to eps -> 0
            hs, es = [], []
            for e in (4e-3, 2e-3, 1e-3):
                hp, p = toda.hamiltonian_apply(lam, x, e)
                hs.append((e, hp))
                es.append((e, toda.toda_energy(lam) * p))
            return extrapolate_to_zero(hs), extrapolate_to_zero(es), 0.0

        cases.append(Case(f"hamiltonian-n2-point{k}", run, 1e-4, {"lambda": lam, "x": x}, n=2))

    def closure():
        lp = (0.25, -0.1)
        return toda.orthogonality_integral(lam, lp, 0.1, 0.1).value, toda.toda_orthogonality_kernel(lam, lp, 0.1, 0.1), 0.0

    cases.append(Case("orthogonality-closure-n2", closure, 1e-5, {"lambda": lam, "lambda_prime": (0.25, -0.1), "eps": 0.1}, n=2))
    return cases


def suite_orthogonality_b(opts):
    c2 = ChainConfig([1.0, 1.0])
    c3 = ChainConfig([1.0, 0.8, 1.1], [0.1, -0.2, 0.15])
    e2 = [0.05, 0.05]
    e3 = [0.1, 0.1, 0.1]
    cases = [
        Case("cn-n2", lambda: (spinchain.overlap_BB_closed(c2, 1.0, [0.3], [-0.2], e2, e2),
                               spinchain.overlap_BB_direct(c2, 1.0, [0.3], [-0.2], e2, e2), 0.0),
             1e-5, {"spins": c2.spins, "x": [0.3], "x_prime": [-0.2], "eps": e2}, n=2),
        Case("cn-n3-inhomogeneous", lambda: (
            spinchain.overlap_BB_closed(c3, 1.0, [0.3, -0.4], [-0.2, 0.5], e3, e3),
            spinchain.overlap_BB_direct(c3, 1.0, [0.3, -0.4], [-0.2, 0.5], e3, e3, QuadSpec(points_per_dim=200)), 0.0),
             1e-5, {"spins": c3.spins, "xi": c3.xi, "x": [0.3, -0.4], "x_prime": [-0.2, 0.5], "eps": e3}, n=3,
             presets=("default", "full")),
    ]
    cfg = ChainConfig([1.0, 0.8], [0.1, -0.2])
    phi = deltafam.TestFunction("bump", (0.3,), 0.6)

    def smeared():
        def kernel(e):
            def k(x, xp):
                return np.array([spinchain.overlap_BB_closed(cfg, 1.0, [a], [b], [e, e], [e, e])
                                 for a, b in zip(x[:, 0], xp[:, 0])])
            return k

        vals = [(e, deltafam.weak_pairing(kernel(e), phi, phi, QuadSpec(points_per_dim=80), width=e, u_points=200))
                for e in (4e-2, 2e-2, 1e-2)]
        target = integrate_line(lambda t: phi(t[:, None]) ** 2 / mu_B(t[:, None], cfg), QuadSpec(points_per_dim=400)).value
        return extrapolate_to_zero(vals), target, 0.0

    cases.append(Case("smeared-orthogonality-n2", smeared, 2e-2,
                      {"spins": cfg.spins, "xi": cfg.xi, "test_function": "bump(0.3, 0.6)", "eps": [4e-2, 2e-2, 1e-2]}, n=2))
    return cases


def suite_orthogonality_a(opts):
    c1 = ChainConfig([1.0])
    x = [0.5 + 0.1j]
    return [
        Case("aa-n1", lambda: (spinchain.overlap_AA_closed(c1, 1j, 1j, x, x),
                               spinchain.overlap_AA_direct(c1, 1j, 1j, x, x), 0.0),
             1e-6, {"spins": c1.spins, "sigma": 1j, "upsilon": 1j, "x": x, "y": x}, n=1),
        Case("reproducing-kernel-n1", lambda: (spinchain.reproduce_direct(1.0, 1.0, 1j), exp(-1.0), 0.0),
             1e-6, {"spin": 1.0, "p": 1.0, "z": 1j}, n=1),
    ]


def suite_overlap_cross(opts):
    c1 = ChainConfig([1.0])
    c2 = ChainConfig([1.0, 0.8], [0.1, -0.2])
    c2b = ChainConfig([0.8, 1.2], [0.2, -0.1])
    c3 = ChainConfig([1.0, 0.8, 1.1], [0.1, -0.2, 0.15])
    y3, x3, xl3 = [0.3, -0.5], [0.2 + 0.3j, -0.1 + 0.3j], 0.4 + 0.3j
    return [
        Case("ba-n1", lambda: (spinchain.overlap_BA_closed(c1, 1.0, [], 1j, [0.2], [0.05]),
                               spinchain.overlap_BA_direct(c1, 1.0, [], 1j, [0.2], [0.05]), 0.0),
             1e-6, {"spins": c1.spins, "p": 1.0, "sigma": 1j, "x": [0.2], "eps": [0.05]}, n=1),
        Case("upsilon-phi-n2", lambda: (
            spinchain.overlap_UpsilonPhi_closed(c2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05]),
            spinchain.overlap_UpsilonPhi_direct(c2, 1.0, [0.3], 0.2 + 1j, [0.2, -0.4], [0.05, 0.05]), 0.0),
             1e-4, {"spins": c2.spins, "xi": c2.xi, "p": 1.0, "y": [0.3], "sigma": 0.2 + 1j, "x": [0.2, -0.4], "eps": [0.05, 0.05]}, n=2),
        Case("psi-phi-phi-two-site", lambda: (
            spinchain.overlap_B_AxA_closed(c2b, 1.0, [0.3], 0.3 + 1j, [0.2 + 0.05j], -0.4 + 0.05j),
            spinchain.overlap_B_AxA_direct(c2b, 1.0, [0.3], 0.3 + 1j, [0.2 + 0.05j], -0.4 + 0.05j), 0.0),
             1e-5, {"spins": c2b.spins, "xi": c2b.xi, "p": 1.0, "y": [0.3], "sigma": 0.3 + 1j, "x": [0.2 + 0.05j], "x_last": -0.4 + 0.05j}, n=1),
        Case("psi-phi-phi-n2", lambda: (
            spinchain.overlap_B_AxA_closed(c3, 1.0, y3, 0.3 + 1j, x3, xl3),
            spinchain.overlap_B_AxA_direct(c3, 1.0, y3, 0.3 + 1j, x3, xl3, QuadSpec(points_per_dim=200)), 0.0),
             1e-4, {"spins": c3.spins, "xi": c3.xi, "p": 1.0, "y": y3, "sigma": 0.3 + 1j, "x": x3, "x_last": xl3}, n=2),
    ]


def _parse_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def suite_delta_family(opts):
    gauss = deltafam.TestFunction("gaussian", (0.0,), 1.0)
    bump = deltafam.TestFunction("bump", (0.2,), 1.5)
    if opts.kernel:
        return _kernel_study(opts, gauss)
    cases = []
    for name, phi in (("gaussian", gauss), ("bump", bump)):
        def ctilde(phi=phi):
            rep = deltafam.convergence_study("ctilde", phi)
            return rep.limit, rep.target, 0.0

        cases.append(Case(f"ctilde-limit-{name}", ctilde, 1e-2, {"test_function": name, "eps": list(deltafam.RegulatorSchedule().eps_values)}, n=1))

    def s_kernel():
        rep = deltafam.convergence_study("S", gauss, deltafam.RegulatorSchedule(L_values=(1000.0,)))
        return rep.limit, rep.target, 0.0

    cases.append(Case("S-L1000", s_kernel, 5e-2, {"test_function": "gaussian", "L": 1000.0}, n=1))
    for L, expect in ((10.0, deltafam.cosh_mass(10.0)), (1e4, 1.0)):
        def mass(L=L, expect=expect):
            lhs = integrate_line(lambda u: deltafam.kernel_cosh(u, L), QuadSpec(points_per_dim=400, map_scale=1.0 / sqrt(L))).value
            return lhs, expect, 0.0

        cases.append(Case(f"cosh-mass-L{L:g}", mass, 1e-3, {"L": L}, n=1, scale=1.0))
    k = 10.0

    def sok():
        return deltafam.sokhotsky_check(gauss, exp(k)), 2j * pi, 0.0

    cases.append(Case("sokhotsky-L-e10", sok, 0.1, {"test_function": "gaussian", "L": "e^10"}, n=1))

    def sok_rate():
        # error ratio when 1/ln L halves (L -> L^2), expected about 2
        e1 = abs(deltafam.sokhotsky_check(bump, exp(k)) - 2j * pi * bump(np.zeros((1, 1)))[0])
        e2 = abs(deltafam.sokhotsky_check(bump, exp(2 * k)) - 2j * pi * bump(np.zeros((1, 1)))[0])
        return e1 / e2, 2.0, 0.0

    cases.append(Case("sokhotsky-rate", sok_rate, 0.3, {"test_function": "bump", "L": ["e^10", "e^20"]}, n=1))
    return cases


def _kernel_study(opts, phi):
    family = {"cosh": "cosh", "S": "S", "s": "S", "ctilde": "ctilde"}.get(opts.kernel)
    if family is None:
        raise UsageError(f"unknown kernel {opts.kernel!r}")
    kwargs = {}
    if opts.L:
        kwargs["L_values"] = tuple(_parse_floats(opts.L))
    schedule = deltafam.RegulatorSchedule(**kwargs)
    holder = {}

    def study():
        if "rep" not in holder:
            holder["rep"] = deltafam.convergence_study(family, phi, schedule)
        return holder["rep"]

    def limit():
        rep = study()
        # the cosh family has no extrapolation: its limit is the target by
        # construction, so the last pairing is what gets compared
        value = rep.values[-1] if family == "cosh" else rep.limit
        return value, rep.target, 0.0

    def order():
        rep = study()
        order_params.update(variable=rep.variable, table=rep.table())
        return rep.order, 1.0, 0.0

    params = {"kernel": family, "L": list(schedule.L_values), "eps": list(schedule.eps_values), "test_function": "gaussian"}
    order_params = dict(params)
    tol = 1e-2
    if family == "S":
        tol = 5e-2
    elif family == "cosh":
        tol = 2.0 / schedule.L_values[-1]
    return [Case(f"{family}-limit", limit, tol, params, n=1),
            Case(f"{family}-order", order, 0.5, order_params, n=1)]


BUILDERS = {
    "gustafson-first": suite_gustafson_first,
    "gustafson-reduced": suite_gustafson_reduced,
    "gustafson-second": suite_gustafson_second,
    "orthogonality-b": suite_orthogonality_b,
    "orthogonality-a": suite_orthogonality_a,
    "overlap-cross": suite_overlap_cross,
    "eigen-residual": suite_eigen_residual,
    "delta-family": suite_delta_family,
    "toda": suite_toda,
    "measures": suite_measures,
}


def run_suite(suite, opts):
    """Build, filter and run the cases of one suite; returns reports sorted by case_id."""
    cases = [c for c in BUILDERS[suite](opts) if opts.preset in c.presets]
    if opts.n is not None:
        cases = [c for c in cases if c.n == opts.n]
    if not cases:
        raise UsageError(f"no cases in suite {suite!r} for the given filters")

    def one(case):
        np.random.seed(opts.seed % 2**32)
        start = time.perf_counter()
        lhs, rhs, err = case.compute()
        return make_report(suite, case, lhs, rhs, err, time.perf_counter() - start, opts.seed)

    workers = min(_workers(), len(cases))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reports = list(pool.map(one, cases))
    else:
        reports = [one(c) for c in cases]
    return sorted(reports, key=lambda r: r.case_id)


def dump_reports(reports):
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _table(reports):
    lines = [f"{'case_id':34s} {'rel_err':>10s} {'tol':>10s} {'time/s':>8s}  result"]
    for r in reports:
        lines.append(f"{r.case_id:34s} {r.rel_err:10.2e} {r.tolerance:10.2e} {r.runtime_seconds:8.2f}  "
                     + ("PASS" if r.passed else "FAIL"))
    return "\n".join(lines)


# ---------------------------------------------------------------- eval

def _complex_list(text):
    return [complex(v.replace(" ", "")) for v in text.split(",") if v.strip()] if text else []


def _eval(opts):
    spins = _parse_floats(opts.spins) if opts.spins else [1.0] * max(1, len(_complex_list(opts.z)))
    xi = _parse_floats(opts.xi) if opts.xi else None
    cfg = ChainConfig(spins, xi)
    x = _complex_list(opts.x)
    eps = _parse_floats(opts.eps) if opts.eps else None
    z = _complex_list(opts.z)
    spec = QuadSpec(points_per_dim=opts.points)
    if opts.what == "psi":
        value = spinchain.psi_eval(cfg, opts.p, x, z, eps, spec)
    elif opts.what == "phi":
        value = spinchain.phi_eval(cfg, x, z, complex(opts.sigma), eps, spec)
    elif opts.what == "upsilon":
        value = spinchain.upsilon_eval(cfg, opts.p, x, z, spec)
    else:
        kind = opts.kind
        vec = SpectralVector(x)
        if kind == "A":
            value = mu_A(vec, cfg)
        elif kind == "B":
            value = mu_B(vec, cfg)
        elif kind == "BB":
            value = mu_BB(vec, cfg)
        elif kind == "toda":
            value = mu_toda(vec)
        else:
            raise UsageError(f"unknown measure kind {kind!r}")
    return {"what": opts.what, "value": _plain(complex(value)), "spins": list(cfg.spins), "xi": list(cfg.xi)}


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def build_parser():
    parser = _Parser(prog="sov", description="Spin-chain SoV identities: verification suites and evaluations.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", choices=SUITES)
    ver.add_argument("--n", type=int, default=None, help="only cases with this N")
    ver.add_argument("--preset", choices=PRESETS, default="default")
    ver.add_argument("--json", metavar="PATH", default=None, help="write the report array here ('-' for stdout)")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--kernel", default=None, help="delta-family: cosh, S or ctilde convergence study")
    ver.add_argument("--L", default=None, help="delta-family: comma-separated L schedule")
    ev = sub.add_parser("eval", help="evaluate one function")
    ev.add_argument("what", choices=EVALS)
    ev.add_argument("--spins", default=None)
    ev.add_argument("--xi", default=None)
    ev.add_argument("--p", type=float, default=1.0)
    ev.add_argument("--x", default="")
    ev.add_argument("--z", default="")
    ev.add_argument("--sigma", default="1j")
    ev.add_argument("--eps", default=None)
    ev.add_argument("--kind", default="A", help="measure: A, B, BB or toda")
    ev.add_argument("--points", type=int, default=200)
    return parser


def run(argv):
    """Entry point returning the exit code: 0 all passed, 1 numeric failure, 2 usage error."""
    parser = build_parser()
    try:
        opts = parser.parse_args(argv)
        if opts.command is None:
            raise UsageError(parser.format_usage())
        if opts.command == "eval":
            print(json.dumps(_eval(opts), sort_keys=True))
            return 0
        if not 0 <= opts.seed < 2**64:
            raise UsageError("seed must fit in 64 unsigned bits")
        if opts.kernel and opts.suite != "delta-family":
            raise UsageError("--kernel applies to the delta-family suite only")
        reports = run_suite(opts.suite, opts)
    except UsageError as exc:
        print(f"sov: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"sov: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = dump_reports(reports)
    if opts.json == "-":
        sys.stdout.write(text)
    else:
        if opts.json:
            with open(opts.json, "w", encoding="utf-8") as fh:
                fh.write(text)
        print(_table(reports))
        for r in reports:
            if "table" in r.params:
                print(f"\n{r.case_id}: pairing against {r.params['variable']}")
                for row in r.params["table"]:
                    print(f"  {row['h']:12.4e}  {row['re']:+.10f} {row['im']:+.3e}i")
    return 0 if all(r.passed for r in reports) else 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
