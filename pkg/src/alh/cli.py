"""Command-line entry point: gen, scatter, conserved, evolve, apply, verify.

Exit codes: 0 ok, 1 a verification check failed, 2 usage or input error,
3 numeric failure (singular state, blow-up, vanishing a(z), ...).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import AlhError, OrderingMismatch, UnknownOperator
from .flows import REDUCTIONS, FlowSpec, integrate
from .functionals import conserved_quantities
from .lattice import (
    dumps_state,
    field_from_dict,
    field_to_dict,
    gaussian_state,
    loads_state,
    pair_state,
    random_state,
    zero_state,
)
from .operators import OPERATOR_NAMES, assemble, dump_csv, power_apply
from .scattering import scattering_data
from .verify import SUITES, SuiteConfig, all_passed, dumps_report, run_suite

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_complex(text: str) -> complex:
    """Accepts '2', '1.5+0.5i', '3j', '-i'."""
    t = text.strip().replace(" ", "").replace("i", "j")
    if t in ("j", "+j", "-j"):
        t = t.replace("j", "1j")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def parse_complex_list(text: str) -> List[complex]:
    return [parse_complex(p) for p in text.split(",") if p.strip()]


def parse_z_grid(text: str) -> List[complex]:
    """'single:z' or a polar grid 'r0:r1:n,theta0:theta1:m'."""
    if text.startswith("single:"):
        return [parse_complex(text[len("single:"):])]
    try:
        radial, angular = text.split(",")
        r0, r1, n = radial.split(":")
        t0, t1, m = angular.split(":")
        radii = np.linspace(float(r0), float(r1), int(n))
        thetas = np.linspace(float(t0), float(t1), int(m))
    except ValueError:
        raise UsageError(f"bad --z-grid {text!r}; use 'r0:r1:n,theta0:theta1:m' or 'single:z'") from None
    if int(n) < 1 or int(m) < 1:
        raise UsageError("--z-grid counts must be positive")
    return [complex(r * np.exp(1j * t)) for r in radii for t in thetas]


def parse_seeds(text: str) -> tuple:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"bad --seeds {text!r}; expected comma separated integers") from None


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _load_state(path: str, check_decay: bool = True):
    try:
        return loads_state(_read_text(path), check_decay)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None


def _write(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _pair(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


# commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.kind == "zero":
        s = zero_state(args.n, args.k_min)
    elif args.kind == "pair":
        s = pair_state(
            args.n, parse_complex(args.r0), parse_complex(args.q1), args.r_site, args.q_site, args.k_min
        )
    elif args.kind == "gaussian":
        s = gaussian_state(args.n, args.amplitude, args.width, args.chirp, args.reduction or "focusing", args.k_min)
    else:
        s = random_state(args.n, args.seed, args.amplitude, args.decay, args.reduction or "none", args.k_min)
    _write(args.output, dumps_state(s) + "\n")
    return EXIT_OK


def cmd_scatter(args) -> int:
    s = _load_state(args.state)
    zs = parse_z_grid(args.z_grid)
    fh, close = _open_out(args.output)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z_re", "z_im", "a_re", "a_im", "ahat_re", "ahat_im", "b_re", "b_im", "C0_re", "C0_im"])
        for z in zs:
            sd = scattering_data(s, z)
            w.writerow([repr(x) for v in (z, sd.a, sd.a_hat, sd.b, sd.C0) for x in _pair(v)])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_conserved(args) -> int:
    s = _load_state(args.state)
    out = {k: _pair(v) for k, v in conserved_quantities(s).items()}
    _write(args.output, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_evolve(args) -> int:
    s = _load_state(args.state)
    try:
        spec = FlowSpec.parse(args.flow, args.reduction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    zs = parse_complex_list(args.z_samples) if args.z_samples else []
    obs = ("H0", "C1", "C2", "C1hat", "C2hat")
    rec = integrate(s, spec, args.dt, args.T, obs, zs, out_every=args.every)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        head = ["t", *obs]
        for j in range(1, len(zs) + 1):
            head += [f"|a(z_{j})|", f"arg a(z_{j})"]
        # imaginary parts go last so the leading columns keep the documented layout
        head += [f"{k}_im" for k in obs]
        w.writerow(head)
        for i, t in enumerate(rec.times):
            vals = [rec.observables[k][i] for k in obs]
            row = [repr(float(t))] + [repr(float(np.real(v))) for v in vals]
            for z in rec.z_samples:
                a = rec.a_samples[z][i]
                row += [repr(float(abs(a))), repr(float(np.angle(a)))]
            row += [repr(float(np.imag(v))) for v in vals]
            w.writerow(row)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_apply(args) -> int:
    s = _load_state(args.state)
    A = assemble(args.op, s, args.ordering)
    if args.dump_csv:
        fh, close = _open_out(args.dump_csv)
        try:
            dump_csv(A, fh)
        finally:
            if close:
                fh.close()
    if args.field:
        try:
            f = field_from_dict(json.loads(_read_text(args.field)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"{args.field}: malformed field document ({exc})") from None
    else:
        f = s.rq() if A.domain_ordering == "rq" else s.qr()
    out = power_apply(A, f, args.pow)
    if args.dump_csv == "-" and args.output in (None, "-"):
        return EXIT_OK  # stdout already holds the matrix
    _write(args.output, json.dumps(field_to_dict(out)) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    kw = {"n": args.n}
    if args.seeds:
        kw["seeds"] = parse_seeds(args.seeds)
    if args.amplitude is not None:
        kw["amplitude"] = args.amplitude
    cfg = SuiteConfig(**kw)
    results = []
    for name in suites:
        results += run_suite(name, cfg)
    if not args.quiet:
        for r in results:
            tag = "SKIP" if r.skipped else "DIAG" if r.diagnostic else "PASS" if r.passed else "FAIL"
            print(f"{tag:4s}  {r.suite:19s}  {r.case}  metric={r.metric:.3e} tol={r.tol:.1e}")
    ok = all_passed(results)
    n_fail = sum(r.gating and not r.passed for r in results)
    print(f"{len(results)} checks, {n_fail} failed", file=sys.stderr)
    if args.json:
        _write(args.json, dumps_report(results, cfg) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alh", description="Ablowitz-Ladik hierarchy toolkit.")
    p.add_argument("--version", action="version", version=f"alh {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    g = sub.add_parser("gen", help="generate a lattice state as JSON")
    g.add_argument("--kind", choices=("zero", "pair", "gaussian", "random"), required=True)
    g.add_argument("--n", type=int, default=32, help="window size N (>= 4)")
    g.add_argument("--k-min", type=int, default=None, help="first site index (default -(N//2))")
    g.add_argument("--r0", default="0.1", help="pair: value of r at --r-site (complex)")
    g.add_argument("--q1", default="0.2", help="pair: value of q at --q-site (complex)")
    g.add_argument("--r-site", type=int, default=0)
    g.add_argument("--q-site", type=int, default=1)
    g.add_argument("--amplitude", type=float, default=0.1, help="gaussian peak / random envelope")
    g.add_argument("--width", type=float, default=4.0, help="gaussian width")
    g.add_argument("--chirp", type=float, default=0.0, help="gaussian quadratic phase")
    g.add_argument("--seed", type=int, default=42, help="random: RNG seed")
    g.add_argument("--decay", type=float, default=0.1, help="random: envelope decay rate")
    g.add_argument("--reduction", choices=REDUCTIONS, default=None,
                   help="tie r to q (gaussian default focusing, random default none)")
    g.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    g.set_defaults(func=cmd_gen)

    def state_arg(sp):
        sp.add_argument("--state", default="-", help="state JSON file (default stdin)")

    sc = sub.add_parser("scatter", help="scattering data a, ahat, b, C0 on a z grid (CSV)")
    state_arg(sc)
    sc.add_argument("--z-grid", required=True, help="'r0:r1:n,theta0:theta1:m' (polar) or 'single:z'")
    sc.add_argument("-o", "--output", default=None)
    sc.set_defaults(func=cmd_scatter)

    co = sub.add_parser("conserved", help="conserved quantities as JSON [re, im] pairs")
    state_arg(co)
    co.add_argument("-o", "--output", default=None)
    co.set_defaults(func=cmd_conserved)

    ev = sub.add_parser("evolve", help="integrate a flow with RK4 and record observables (CSV)")
    state_arg(ev)
    ev.add_argument("--flow", required=True, help="al, al-standard or n:<int>")
    ev.add_argument("--dt", type=float, required=True)
    ev.add_argument("--T", type=float, required=True, help="final time")
    ev.add_argument("--z-samples", default="", help="comma separated spectral points, e.g. '2.0,1.5+0.5i'")
    ev.add_argument("--reduction", choices=REDUCTIONS, default="none")
    ev.add_argument("--every", type=int, default=1, help="record every k-th step")
    ev.add_argument("--out", default=None, help="CSV file (default stdout)")
    ev.set_defaults(func=cmd_evolve)

    ap = sub.add_parser("apply", help="apply an operator power to a field")
    state_arg(ap)
    ap.add_argument("--op", required=True, choices=OPERATOR_NAMES)
    ap.add_argument("--pow", type=int, default=1)
    ap.add_argument("--field", default=None, help="field JSON (default: the state's own (r,q) or (q,r))")
    ap.add_argument("--ordering", choices=("rq", "qr"), default="rq",
                    help="ordering for sigma1/2/3 and identity")
    ap.add_argument("--dump-csv", default=None, help="write the matrix as row,col,re,im CSV")
    ap.add_argument("-o", "--output", default=None)
    ap.set_defaults(func=cmd_apply)

    ve = sub.add_parser("verify", help="run verification suites")
    ve.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    ve.add_argument("--n", type=int, default=32)
    ve.add_argument("--seeds", default=None, help="comma separated seeds (default 42,7,123)")
    ve.add_argument("--amplitude", type=float, default=None)
    ve.add_argument("--json", default=None, help="write the full report here")
    ve.add_argument("-q", "--quiet", action="store_true", help="only print the summary")
    ve.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, OrderingMismatch, UnknownOperator) as exc:
        print(f"alh {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AlhError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"alh {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"alh {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
