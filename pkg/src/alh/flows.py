"""Hierarchy vector fields, the AL equations and fixed-step RK4 integration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BlowUp, SingularState
from .functionals import FUNCTIONALS, evaluate
from .lattice import Field, LatticeState, shift_seq
from .operators import apply, assemble, power_apply
from .scattering import a_coefficient, scattering_data

BLOWUP = 1e6
REDUCTIONS = ("none", "focusing", "defocusing")
KINDS = ("hierarchy", "al", "al_standard", "lplus_poly")


@dataclass(frozen=True)
class FlowSpec:
    kind: str
    n: int = 0
    coefficients: Tuple[complex, ...] = ()
    reduction: str = "none"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {self.reduction!r}")
        if self.n < 0:
            raise ValueError("hierarchy index must be non-negative")
        if not all(np.isfinite(c) for c in self.coefficients):
            raise ValueError("polynomial coefficients must be finite")

    @classmethod
    def hierarchy(cls, n: int, reduction: str = "none") -> "FlowSpec":
        return cls("hierarchy", n=n, reduction=reduction)

    @classmethod
    def parse(cls, text: str, reduction: str = "none") -> "FlowSpec":
        """'al', 'al-standard' or 'n:<int>'."""
        if text == "al":
            return cls("al", reduction=reduction)
        if text in ("al-standard", "al_standard"):
            return cls("al_standard", reduction=reduction)
        if text.startswith("n:"):
            return cls.hierarchy(int(text[2:]), reduction)
        raise ValueError(f"unknown flow {text!r}; expected al, al-standard or n:<int>")


def _sum_shifts(v):
    return shift_seq(v, "+") + shift_seq(v, "-")


def al_field_arrays(q: np.ndarray, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(q_t, r_t) = (-i w (E+ + E-) q, i w (E+ + E-) r), w = 1 - r q."""
    w = 1 - r * q
    return -1j * w * _sum_shifts(q), 1j * w * _sum_shifts(r)


def x0_arrays(q, r):
    return 1j * q, -1j * r


def vector_field(spec: FlowSpec, s: LatticeState) -> Field:
    q, r = s.q, s.r
    if spec.kind == "al":
        return Field(s.window, *al_field_arrays(q, r), "qr")
    if spec.kind == "al_standard":
        a, b = al_field_arrays(q, r)
        c, d = x0_arrays(q, r)
        return Field(s.window, a + 2 * c, b + 2 * d, "qr")
    if spec.kind == "hierarchy":
        x0 = Field(s.window, *x0_arrays(q, r), "qr")
        if spec.n == 0:
            return x0
        return power_apply(assemble("R", s), x0, spec.n)
    # lplus_poly: i B P(L+) (r, q)
    Lp = assemble("Lplus", s)
    term = s.rq()
    acc = Field.zeros(s.window, "rq")
    for j, c in enumerate(spec.coefficients):
        if j:
            term = apply(Lp, term)
        acc = acc + c * term
    return apply(assemble("B", s), acc) * 1j


def lplus_hierarchy_field(s: LatticeState, n: int) -> Field:
    """i 2^n B L+^n (r, q)."""
    coefs = (0,) * n + (2.0**n,)
    return vector_field(FlowSpec("lplus_poly", coefficients=coefs), s)


def _state_check(q, r, s0: LatticeState) -> LatticeState:
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(r))):
        raise BlowUp("non-finite values in the state")
    if max(np.abs(q).max(), np.abs(r).max()) > BLOWUP:
        raise BlowUp(f"|q| or |r| exceeded {BLOWUP:g}")
    return LatticeState(s0.window, q, r, s0.decay_eps, s0.singular_tol, check_decay=False)


def _rhs(spec: FlowSpec, s0: LatticeState):
    if spec.kind == "al":
        return lambda q, r: al_field_arrays(q, r)
    if spec.kind == "al_standard":

        def f(q, r):
            a, b = al_field_arrays(q, r)
            return a + 2j * q, b - 2j * r

        return f

    def g(q, r):
        v = vector_field(spec, _state_check(q, r, s0))
        return v.c1, v.c2

    return g


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    observables: Dict[str, np.ndarray]
    z_samples: Tuple[complex, ...] = ()
    a_samples: Dict[complex, np.ndarray] = field(default_factory=dict)
    b_samples: Dict[complex, np.ndarray] = field(default_factory=dict)
    states: List[LatticeState] = field(default_factory=list)
    final: Optional[LatticeState] = None

    def drift(self, name: str) -> float:
        v = self.observables[name]
        return float(np.abs(v - v[0]).max())

    def a_drift(self, z: complex) -> float:
        v = self.a_samples[z]
        return float(np.abs(v - v[0]).max())


DEFAULT_OBSERVABLES = ("H0", "C1", "C2", "C1hat", "C2hat")


def integrate(
    s0: LatticeState,
    spec: FlowSpec,
    dt: float,
    T: float,
    observables: Sequence[str] = DEFAULT_OBSERVABLES,
    z_samples: Sequence[complex] = (),
    out_every: int = 1,
    keep_states: bool = False,
    track_b: bool = False,
) -> TrajectoryRecord:
    """Classic RK4 with fixed step. Observers are sampled every `out_every` steps."""
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    if spec.reduction == "focusing":
        s0 = s0.replace(r=-np.conj(s0.q), check_decay=s0.check_decay)
    elif spec.reduction == "defocusing":
        s0 = s0.replace(r=np.conj(s0.q), check_decay=s0.check_decay)
    steps = int(round(T / dt))
    f = _rhs(spec, s0)
    z_samples = tuple(complex(z) for z in z_samples)
    times: List[float] = []
    obs: Dict[str, List[complex]] = {k: [] for k in observables}
    a_s: Dict[complex, List[complex]] = {z: [] for z in z_samples}
    b_s: Dict[complex, List[complex]] = {z: [] for z in z_samples}
    states: List[LatticeState] = []

    def observe(t, st):
        times.append(t)
        for k in observables:
            obs[k].append(evaluate(FUNCTIONALS[k], st))
        for z in z_samples:
            if track_b:
                sd = scattering_data(st, z)
                a_s[z].append(sd.a)
                b_s[z].append(sd.b)
            else:
                a_s[z].append(a_coefficient(st, z))
        if keep_states:
            states.append(st)

    q, r = np.array(s0.q), np.array(s0.r)
    st = s0
    observe(0.0, st)
    for i in range(1, steps + 1):
        k1 = f(q, r)
        k2 = f(q + 0.5 * dt * k1[0], r + 0.5 * dt * k1[1])
        k3 = f(q + 0.5 * dt * k2[0], r + 0.5 * dt * k2[1])
        k4 = f(q + dt * k3[0], r + dt * k3[1])
        q = q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        r = r + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        try:
            st = _state_check(q, r, s0)
        except SingularState as exc:
            raise SingularState(f"at t = {i * dt:g}: {exc}") from None
        if i % out_every == 0 or i == steps:
            observe(i * dt, st)
    return TrajectoryRecord(
        np.array(times),
        {k: np.array(v) for k, v in obs.items()},
        z_samples,
        {z: np.array(v) for z, v in a_s.items()},
        {z: np.array(v) for z, v in b_s.items()} if track_b else {},
        states,
        st,
    )


def reduction_defect(s: LatticeState, reduction: str = "focusing") -> float:
    if reduction == "focusing":
        return float(np.abs(s.r + np.conj(s.q)).max())
    if reduction == "defocusing":
        return float(np.abs(s.r - np.conj(s.q)).max())
    return 0.0


def _perturbed(s: LatticeState, v: Field, h: float) -> LatticeState:
    return s.replace(s.q + h * v.c1, s.r + h * v.c2)


def directional_derivative(spec: FlowSpec, s: LatticeState, v: Field, eps: float) -> Field:
    """Central difference of the field map along v."""
    plus = vector_field(spec, _perturbed(s, v, eps))
    minus = vector_field(spec, _perturbed(s, v, -eps))
    return (plus - minus) * (1 / (2 * eps))


def commutator_defect(m: int, n: int, s: LatticeState, eps: float = 1e-5) -> float:
    """sup-norm of D X_n [X_m] - D X_m [X_n]."""
    if m > 3 or n > 3:
        raise ValueError("m, n <= 3")
    if m == n:
        return 0.0
    sm, sn = FlowSpec.hierarchy(m), FlowSpec.hierarchy(n)
    xm, xn = vector_field(sm, s), vector_field(sn, s)
    d = directional_derivative(sn, s, xm, eps) - directional_derivative(sm, s, xn, eps)
    return d.norm()


def fit_constant(x: Field, y: Field, rows: Optional[slice] = None) -> Tuple[complex, float]:
    """Least-squares c with x ~ c y, plus sup-norm residual relative to |x|."""
    rows = rows or slice(None)
    xv = np.r_[x.c1[rows], x.c2[rows]]
    yv = np.r_[y.c1[rows], y.c2[rows]]
    c = np.vdot(yv, xv) / np.vdot(yv, yv)
    res = np.abs(xv - c * yv).max() / max(np.abs(xv).max(), 1e-300)
    return complex(c), float(res)


def fit_log_linear(times: np.ndarray, values: np.ndarray) -> Tuple[complex, float]:
    """Fit log v(t) = log v0 + omega t. Returns omega and the max residual
    relative to max |log v| (phase unwrapped)."""
    logv = np.log(np.abs(values)) + 1j * np.unwrap(np.angle(values))
    A = np.vstack([np.ones_like(times), times]).T
    coef, *_ = np.linalg.lstsq(A.astype(complex), logv, rcond=None)
    res = np.abs(A @ coef - logv).max() / max(np.abs(logv).max(), 1e-300)
    return complex(coef[1]), float(res)
