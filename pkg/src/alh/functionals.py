"""Conserved functionals, their variational derivatives, gradients and brackets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import BranchViolation, NoAnalyticRule, UnknownOperator
from .lattice import Field, LatticeState, Window, bilinear_form, shift_seq
from .operators import apply, assemble

Pair = Tuple[np.ndarray, np.ndarray]


def _p(v):
    return shift_seq(v, "+")


def _m(v):
    return shift_seq(v, "-")


@dataclass(frozen=True)
class Functional:
    name: str
    rule: Callable[[LatticeState], complex]
    derivative: Optional[Callable[[LatticeState], Pair]] = None

    def __call__(self, s: LatticeState) -> complex:
        return evaluate(self, s)

    def __add__(self, other: "Functional") -> "Functional":
        return linear_combination([(1, self), (1, other)])

    def __mul__(self, c) -> "Functional":
        if isinstance(c, Functional):
            return product(self, c)
        return linear_combination([(c, self)])

    __rmul__ = __mul__


def _branch(s: LatticeState) -> None:
    rq = np.abs(s.r * s.q)
    if np.any(rq >= 1):
        raise BranchViolation(f"max |r q| = {rq.max():.3f} >= 1")


def _h0(s):
    _branch(s)
    return -np.sum(np.log(s.weights))


def _h0_d(s):
    w = s.weights
    return s.r / w, s.q / w


def _c0(s):
    return np.prod(s.weights)


def _c0_d(s):
    c0 = np.prod(s.weights)
    w = s.weights
    return -s.r * c0 / w, -s.q * c0 / w


def _c1(s):
    return np.sum(s.r * _p(s.q))


def _c1_d(s):
    return _m(s.r), _p(s.q)


def _c1h(s):
    return np.sum(s.q * _p(s.r))


def _c1h_d(s):
    return _p(s.r), _m(s.q)


def _c2(s):
    q, r = s.q, s.r
    return np.sum(_p(q) * _m(r) * (1 - r * q) - 0.5 * r**2 * _p(q) ** 2)


def _c2_d(s):
    q, r = s.q, s.r
    dq = _m(_m(r)) * (1 - _m(r * q)) - r * _p(q) * _m(r) - _m(r) ** 2 * q
    dr = _p(_p(q)) * (1 - _p(r * q)) - q * _p(q) * _m(r) - r * _p(q) ** 2
    return dq, dr


def _c2h(s):
    q, r = s.q, s.r
    return np.sum(_p(r) * _m(q) * (1 - r * q) - 0.5 * q**2 * _p(r) ** 2)


def _c2h_d(s):
    q, r = s.q, s.r
    dq = _p(_p(r)) * (1 - _p(q * r)) - r * _p(r) * _m(q) - q * _p(r) ** 2
    dr = _m(_m(q)) * (1 - _m(q * r)) - q * _p(r) * _m(q) - _m(q) ** 2 * r
    return dq, dr


def _hal(s):
    return -(_c1(s) + _c1h(s))


def _hal_d(s):
    q, r = s.q, s.r
    return -(_p(r) + _m(r)), -(_p(q) + _m(q))


def _hal_std(s):
    return _hal(s) + 2 * _h0(s)


def _hal_std_d(s):
    a, b = _hal_d(s)
    c, d = _h0_d(s)
    return a + 2 * c, b + 2 * d


H0 = Functional("H0", _h0, _h0_d)
C0 = Functional("C0", _c0, _c0_d)
C1 = Functional("C1", _c1, _c1_d)
C2 = Functional("C2", _c2, _c2_d)
C1hat = Functional("C1hat", _c1h, _c1h_d)
C2hat = Functional("C2hat", _c2h, _c2h_d)
H_AL = Functional("H_AL", _hal, _hal_d)
H_AL_standard = Functional("H_AL_standard", _hal_std, _hal_std_d)

FUNCTIONALS: Dict[str, Functional] = {
    f.name: f for f in (H0, C0, C1, C2, C1hat, C2hat, H_AL, H_AL_standard)
}
CONSERVED_REPORT = ("H0", "C0", "C1", "C2", "C1hat", "C2hat", "H_AL")


def get_functional(name: str) -> Functional:
    try:
        return FUNCTIONALS[name]
    except KeyError:
        raise UnknownOperator(f"unknown functional {name!r}") from None


def linear_combination(terms: Sequence[Tuple[complex, Functional]]) -> Functional:
    terms = list(terms)
    name = " + ".join(f"{c}*{f.name}" for c, f in terms)

    def rule(s):
        return sum(c * f.rule(s) for c, f in terms)

    deriv = None
    if all(f.derivative is not None for _, f in terms):

        def deriv(s):
            parts = [(c, f.derivative(s)) for c, f in terms]
            return sum(c * d[0] for c, d in parts), sum(c * d[1] for c, d in parts)

    return Functional(name, rule, deriv)


def product(F: Functional, G: Functional, analytic: bool = False) -> Functional:
    """F G. Without `analytic` the product has no derivative rule (oracle is used),
    which is what the Leibniz check wants."""
    deriv = None
    if analytic and F.derivative is not None and G.derivative is not None:

        def deriv(s):
            f, g = F.rule(s), G.rule(s)
            (fq, fr), (gq, gr) = F.derivative(s), G.derivative(s)
            return f * gq + g * fq, f * gr + g * fr

    return Functional(f"({F.name})*({G.name})", lambda s: F.rule(s) * G.rule(s), deriv)


# cylinder functionals ----------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """coef * prod over factors (var, site, power), var in {'q', 'r'}."""

    coef: complex
    factors: Tuple[Tuple[str, int, int], ...]


def cylinder(monomials: Sequence[Monomial], name: str = "cylinder") -> Functional:
    monomials = tuple(monomials)

    def values(s, var, site):
        return (s.q if var == "q" else s.r)[s.window.index(site)]

    def rule(s):
        total = 0j
        for mono in monomials:
            t = mono.coef
            for var, site, pw in mono.factors:
                t *= values(s, var, site) ** pw
            total += t
        return total

    def deriv(s):
        dq = np.zeros(s.size, complex)
        dr = np.zeros(s.size, complex)
        for mono in monomials:
            for j, (var, site, pw) in enumerate(mono.factors):
                t = mono.coef * pw * values(s, var, site) ** (pw - 1)
                for i, (v2, s2, p2) in enumerate(mono.factors):
                    if i != j:
                        t *= values(s, v2, s2) ** p2
                (dq if var == "q" else dr)[s.window.index(site)] += t
        return dq, dr

    return Functional(name, rule, deriv)


def random_cylinder(window: Window, seed: int, n_monomials: int = 2, max_vars: int = 6) -> Functional:
    """Seeded sum of monomials on a narrow central band, at most `max_vars` variables in total.

    The band is kept narrow so that different cylinders share sites and their
    brackets do not vanish trivially.
    """
    rng = np.random.default_rng(seed)
    mid = (window.k_min + window.k_max) // 2
    lo, hi = max(window.k_min + 3, mid - 2), min(window.k_max - 3, mid + 2)
    per = max(1, max_vars // n_monomials)
    monos = []
    for _ in range(n_monomials):
        n_f = int(rng.integers(1, per + 1))
        factors = tuple(
            ("q" if rng.uniform() < 0.5 else "r", int(rng.integers(lo, hi + 1)), int(rng.integers(1, 3)))
            for _ in range(n_f)
        )
        coef = complex(rng.normal(), rng.normal())
        monos.append(Monomial(coef, factors))
    return cylinder(monos, name=f"cylinder(seed={seed})")


# evaluation and derivatives ------------------------------------------------


def evaluate(F: Functional, s: LatticeState) -> complex:
    return complex(F.rule(s))


def fd_var_derivative(F: Functional, s: LatticeState, eps: float = 1e-6) -> Field:
    """Central differences in every q_k and r_k separately.

    The functionals are holomorphic in (q, r), so a real step is enough.
    """
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-8, 1e-4]")
    q0, r0 = np.array(s.q), np.array(s.r)
    out = []
    for which in ("q", "r"):
        g = np.empty(s.size, complex)
        for i in range(s.size):
            vals = []
            for h in (eps, -eps):
                q, r = q0.copy(), r0.copy()
                (q if which == "q" else r)[i] += h
                vals.append(F.rule(s.replace(q, r)))
            g[i] = (vals[0] - vals[1]) / (2 * eps)
        out.append(g)
    return Field(s.window, out[0], out[1], "qr")


def var_derivative(F: Functional, s: LatticeState, eps: float = 1e-6) -> Field:
    """(dF/dq_k, dF/dr_k) as a qr-ordered field."""
    if F.derivative is None:
        warnings.warn(f"{F.name}: no analytic rule, using finite differences", NoAnalyticRule, stacklevel=2)
        return fd_var_derivative(F, s, eps)
    if F is H0:
        _branch(s)
    dq, dr = F.derivative(s)
    return Field(s.window, dq, dr, "qr")


def gradient_from_variational(d: Field, s: LatticeState) -> Field:
    """grad = -(1 - q r) sigma1 (dF/dq, dF/dr)."""
    w = s.weights
    return Field(s.window, -w * d.c2, -w * d.c1, "qr")


def discrete_gradient(F: Functional, s: LatticeState) -> Field:
    return gradient_from_variational(var_derivative(F, s), s)


def apply_structure(which: str, g: Field, s: LatticeState) -> Field:
    """Apply J (local, diagonal) or K (dense) to a qr-ordered field."""
    if which == "J":
        return Field(g.window, -1j * g.c1, 1j * g.c2, "qr")
    if which == "K":
        return apply(assemble("K", s), g)
    raise ValueError(f"structure must be 'J' or 'K', got {which!r}")


def bracket_of_gradients(gF: Field, gG: Field, s: LatticeState, which: str = "J") -> complex:
    return bilinear_form(gF, apply_structure(which, gG, s), s)


def bracket(F: Functional, G: Functional, s: LatticeState, which: str = "J") -> complex:
    """{F, G} = <grad F, X grad G> with X = J or K."""
    return bracket_of_gradients(discrete_gradient(F, s), discrete_gradient(G, s), s, which)


def _fd_gradient(value: Callable[[LatticeState], complex], s: LatticeState, eps: float) -> Field:
    d = fd_var_derivative(Functional("inner", value), s, eps)
    return gradient_from_variational(d, s)


def jacobi_defect(
    F: Functional, G: Functional, H: Functional, s: LatticeState, eps: float = 1e-5, which: str = "K"
) -> complex:
    """Cyclic sum {{F,G},H} + {{G,H},F} + {{H,F},G}.

    Inner brackets are evaluated exactly; their gradients come from central
    differences with step `eps`. Diagnostic only.
    """
    total = 0j
    for A, B, C in ((F, G, H), (G, H, F), (H, F, G)):
        inner = _fd_gradient(lambda st, A=A, B=B: bracket(A, B, st, which), s, eps)
        total += bracket_of_gradients(inner, discrete_gradient(C, s), s, which)
    return total


def leibniz_defect(F: Functional, G: Functional, H: Functional, s: LatticeState, which: str = "K") -> complex:
    """{FG, H} - F {G, H} - G {F, H}, with the product's gradient from the oracle."""
    fg = product(F, G)
    g_fg = gradient_from_variational(fd_var_derivative(fg, s), s)
    lhs = bracket_of_gradients(g_fg, discrete_gradient(H, s), s, which)
    return lhs - evaluate(F, s) * bracket(G, H, s, which) - evaluate(G, s) * bracket(F, H, s, which)


def conserved_quantities(s: LatticeState) -> Dict[str, complex]:
    return {name: evaluate(FUNCTIONALS[name], s) for name in CONSERVED_REPORT}
