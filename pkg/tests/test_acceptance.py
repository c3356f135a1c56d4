"""Acceptance criteria at their stated tolerances and runtime budgets.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary so they survive output capture.
"""

import math
import time

import numpy as np

from alh.flows import FlowSpec, commutator_defect, fit_constant, integrate, lplus_hierarchy_field, reduction_defect, vector_field
from alh.functionals import C1, C2, H0, C1hat, C2hat, apply_structure, bracket, discrete_gradient, evaluate, jacobi_defect, linear_combination, random_cylinder
from alh.lattice import Field, bilinear_form, gaussian_state, pair_state, random_state
from alh.operators import adjoint, apply, assemble, interior_rows
from alh.scattering import REFERENCE_ONLY, a_coefficient, fd_grad_log, grad_log_a, grad_log_ahat, identity_residuals, resolvent_series, scattering_data
from alh.verify import SuiteConfig, run_suite

from conftest import ACCEPTANCE_LINES

SEEDS = (42, 7, 123)
Z3 = (2.0, 1.7 + 0.3j, 3j)


def sup(f, sl=slice(None)):
    return float(max(np.abs(f.c1[sl]).max(initial=0.0), np.abs(f.c2[sl]).max(initial=0.0)))


def rand_field(s, rng, ordering):
    c = rng.normal(size=(2, s.size)) + 1j * rng.normal(size=(2, s.size))
    return Field(s.window, c[0], c[1], ordering)


def record(num, title, metric, tol, elapsed, budget):
    ok = metric <= tol and elapsed < budget
    line = (f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: metric {metric:.3e} (tol {tol:.0e}), "
            f"{elapsed:.2f} s (budget {budget:g} s)")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert metric <= tol, line
    assert elapsed < budget, line


def test_01_inverse_pair():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        f = rand_field(s, np.random.default_rng(seed), "rq")
        rows = interior_rows(s, 2)
        L, Li = assemble("L", s), assemble("Linv", s)
        for A, B in ((L, Li), (Li, L)):
            err = np.abs((apply(A, apply(B, f)) - f).vector()[rows]).max()
            worst = max(worst, err / f.norm())
    record(1, "L L^-1 f = f on the interior, 3 seeds", worst, 1e-9, time.perf_counter() - t0, 1)


def test_02_al_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        rq = s.rq()
        out = apply(assemble("Lplus", s), rq)
        ep = lambda v: np.roll(v, -1) * (np.arange(s.size) < s.size - 1)
        em = lambda v: np.roll(v, 1) * (np.arange(s.size) > 0)
        w = s.weights
        err = max(np.abs(out.c1 - w * (ep(s.r) + em(s.r))).max(), np.abs(out.c2 - w * (ep(s.q) + em(s.q))).max())
        worst = max(worst, err / rq.norm())
    record(2, "Lplus (r,q) = (1 - rq)(E+ + E-)(r,q)", worst, 1e-12, time.perf_counter() - t0, 1)


def test_03_adjoint_relations():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        rows = interior_rows(s, 2)
        s3, s3q = assemble("sigma3", s).entries, assemble("sigma3", s, "qr").entries
        Lp, Lm, R = (assemble(n, s) for n in ("Lplus", "Lminus", "R"))
        worst = max(
            worst,
            np.abs((s3 @ adjoint(Lp).entries @ s3 - Lm.entries)[rows]).max(),
            np.abs((adjoint(R).entries - s3q @ R.entries @ s3q)[rows]).max(),
        )
    record(3, "Lminus = s3 Lplus* s3^-1 and R* = s3 R s3", worst, 1e-10, time.perf_counter() - t0, 5)


def test_04_K_skew():
    t0 = time.perf_counter()
    s = random_state(32, seed=42)
    K = assemble("K", s)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        u, v = rand_field(s, rng, "qr"), rand_field(s, rng, "qr")
        val = bilinear_form(u, apply(K, v), s) + bilinear_form(v, apply(K, u), s)
        worst = max(worst, abs(val) / (u.norm() * v.norm()))
    record(4, "<u,Kv> + <v,Ku> over 100 pairs", worst, 1e-10, time.perf_counter() - t0, 5)


def test_05_resolvent_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed, amplitude=0.1)
        sl = s.window.interior(2)
        w = s.weights
        for z in Z3:
            for which, zz, grad in (("L", z, grad_log_a), ("Linv", 1 / z, grad_log_ahat)):
                series = resolvent_series(s, zz, 30, which)
                g = grad(s, zz)
                err = max(np.abs(series.c1 - w * g.c1)[sl].max(), np.abs(series.c2 - w * g.c2)[sl].max())
                worst = max(worst, err)
    record(5, "resolvent identities L and L^-1, M = 30", worst, 1e-8, time.perf_counter() - t0, 10)


def test_06_gradient_generating_function():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in (42, 7):
        s = random_state(32, seed=seed)
        for z in (2.0, 1.7 + 0.3j):
            g = grad_log_a(s, z)
            worst = max(worst, (g - fd_grad_log(s, z)).norm() / g.norm())
    record(6, "grad log a vs central differences, all sites", worst, 1e-6, time.perf_counter() - t0, 10)


def test_07_kernel_condition():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        ops = {n: assemble(n, s) for n in ("Lplus", "Lminus", "L", "Linv", "D1", "D2")}
        diff = ops["Lplus"] - ops["Lminus"]
        v = s.rq()
        for n in range(5):
            worst = max(worst, sup(apply(diff, v), s.window.interior(2 * n + 2)) / v.norm())
            v = apply(ops["Lplus"], v)
        for base in ("L", "Linv"):
            v = s.rq()
            for m in range(4):
                for d in ("D1", "D2"):
                    worst = max(worst, sup(apply(ops[d], v), s.window.interior(2 * m + 2)) / v.norm())
                v = apply(ops[base], v)
    record(7, "(Lplus - Lminus) Lplus^n (r,q) and D1/D2 annihilation", worst, 1e-8, time.perf_counter() - t0, 10)


def test_08_hierarchy_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    consts = []
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        for n in range(4):
            x = vector_field(FlowSpec.hierarchy(n), s)
            y = lplus_hierarchy_field(s, n)
            worst = max(worst, sup(x - y, s.window.interior(2 * n + 2)) / sup(y))
        c, _ = fit_constant(vector_field(FlowSpec.hierarchy(1), s), vector_field(FlowSpec("al"), s),
                            s.window.interior(2))
        consts.append(c)
    spread = max(abs(c - consts[0]) for c in consts)
    elapsed = time.perf_counter() - t0
    record(8, "X_n = i 2^n B Lplus^n (r,q), n <= 3", worst, 1e-8, elapsed, 10)
    line = f"            X1 / AL-field constant c = {consts[0].real:.15g}{consts[0].imag:+.1e}i, seed spread {spread:.1e}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    record(8, "X1 / AL constant stable across seeds", spread, 1e-10, elapsed, 10)


def test_09_lenard_chain():
    t0 = time.perf_counter()
    worst = 0.0
    h1 = linear_combination([(2, C1), (2, C1hat)])
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        sl = s.window.interior(4)
        j_h1 = apply_structure("J", discrete_gradient(h1, s), s)
        k_h0 = apply_structure("K", discrete_gradient(H0, s), s)
        k_h1 = apply_structure("K", discrete_gradient(h1, s), s)
        x2 = vector_field(FlowSpec.hierarchy(2), s)
        worst = max(worst, sup(k_h0 - j_h1, sl) / k_h0.norm(), sup(x2 - k_h1, sl) / x2.norm())
    record(9, "K grad H0 = J grad H1 and X2 = K grad H1", worst, 1e-7, time.perf_counter() - t0, 5)


def test_10_al_conservation():
    t0 = time.perf_counter()
    s = gaussian_state(64, amplitude=0.3, reduction="focusing")
    rec = integrate(s, FlowSpec("al", reduction="focusing"), 1e-3, 5.0, ("H0", "C1", "C2", "C1hat", "C2hat"),
                    Z3, out_every=50)
    o = rec.observables
    drifts = {
        "H0": rec.drift("H0"),
        "C1 + C1hat": float(np.abs((o["C1"] + o["C1hat"]) - (o["C1"][0] + o["C1hat"][0])).max()),
        "C2 + C2hat": float(np.abs((o["C2"] + o["C2hat"]) - (o["C2"][0] + o["C2hat"][0])).max()),
    }
    drifts.update({f"a({z})": rec.a_drift(complex(z)) for z in Z3})
    elapsed = time.perf_counter() - t0
    record(10, "AL flow N=64, dt=1e-3, T=5: max drift " + ", ".join(f"{k} {v:.1e}" for k, v in drifts.items()),
           max(drifts.values()), 1e-7, elapsed, 60)
    record(10, "focusing reduction preserved", reduction_defect(rec.final, "focusing"), 1e-8, elapsed, 60)


def test_11_flow_commutation():
    t0 = time.perf_counter()
    worst_c, worst_b = 0.0, 0.0
    for seed in SEEDS:
        s = random_state(32, seed=seed)
        worst_c = max(worst_c, commutator_defect(0, 1, s), commutator_defect(1, 2, s))
        worst_b = max(worst_b, abs(bracket(C1 + C1hat, H0, s, "J")))
    elapsed = time.perf_counter() - t0
    record(11, "field commutators (0,1), (1,2)", worst_c, 1e-5, elapsed, 30)
    record(11, "{C1 + C1hat, H0}_J", worst_b, 1e-9, elapsed, 30)


def test_12_squared_eigen_identities():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in (42, 7):
        s = random_state(32, seed=seed)
        for z in (2.0, 1.7 + 0.3j):
            res = identity_residuals(s, z)
            worst = max(worst, max(v for k, v in res.items() if k not in REFERENCE_ONLY))
    record(12, "squared-eigenfunction identities, per-site residuals", worst, 1e-9, time.perf_counter() - t0, 10)


def test_13_pair_state_oracle():
    t0 = time.perf_counter()
    s = pair_state(32, 0.1, 0.2, 0, 1)
    zs = (2.0, 1.7 + 0.3j, 3j, -1.5 + 0.5j, 0.8 * np.exp(1.1j))
    err_a = max(max(abs(scattering_data(s, z).a - (1 + 0.02 * z**-2)), abs(a_coefficient(s, z) - (1 + 0.02 * z**-2)))
                for z in zs)
    eps = np.finfo(float).eps
    c1, c2 = evaluate(C1, s), evaluate(C2, s)
    rounding = max(abs(c1 - 0.02) / (0.02 * eps), abs(c2 + 0.0002) / (0.0002 * eps))
    elapsed = time.perf_counter() - t0
    record(13, "a(z) = 1 + 0.02 z^-2 at 5 points", err_a, 1e-12, elapsed, 1)
    record(13, "C1 = 0.02, C2 = -0.0002 (error in ulps)", rounding, 4, elapsed, 1)


def test_14_jacobi_probe():
    t0 = time.perf_counter()
    s = random_state(32, seed=42)
    cyl = [random_cylinder(s.window, i) for i in range(3)]
    triples = {
        "C1, C1hat, H0": (C1, C1hat, H0),
        "C1, C2, H0": (C1, C2, H0),
        "C1hat, C2hat, C1": (C1hat, C2hat, C1),
        "three cylinders": tuple(cyl),
    }
    worst_j = 0.0
    for name, trip in triples.items():
        k_val = abs(jacobi_defect(*trip, s, which="K"))
        j_val = abs(jacobi_defect(*trip, s, which="J"))
        worst_j = max(worst_j, j_val)
        line = f"            Jacobi defect ({name}): K {k_val:.3e} (reported only), J {j_val:.3e}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert math.isfinite(k_val)
    assert len(triples) >= 3
    record(14, "Jacobi J-control over 4 triples", worst_j, 1e-6, time.perf_counter() - t0, 30)


def test_verify_all_budget():
    t0 = time.perf_counter()
    res = run_suite("all", SuiteConfig())
    elapsed = time.perf_counter() - t0
    failed = sum(r.gating and not r.passed for r in res)
    line = (f"verify --suite all: {len(res)} results, {failed} gating failures, "
            f"{elapsed:.1f} s (budget 60 s) {'PASS' if failed == 0 and len(res) >= 60 and elapsed < 60 else 'FAIL'}")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert len(res) >= 60
    assert failed == 0
    assert elapsed < 60
