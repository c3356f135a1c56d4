"""Dense 2N x 2N realizations of the lattice operators at a base state.

Basis convention: component c (0 or 1) at site k sits at index 2 (k - k_min) + c.
Sum operators J+ and J- include the site itself; shifts are zero-extended.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, Optional, TextIO

import numpy as np

from .errors import OrderingMismatch, UnknownOperator
from .lattice import ORDERINGS, Field, LatticeState


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    name: str
    base: LatticeState
    entries: np.ndarray
    domain_ordering: str
    codomain_ordering: str

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return compose(self, other)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_orderings(self, other)
        return OperatorMatrix(f"({self.name}+{other.name})", self.base, self.entries + other.entries,
                              self.domain_ordering, self.codomain_ordering)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_orderings(self, other)
        return OperatorMatrix(f"({self.name}-{other.name})", self.base, self.entries - other.entries,
                              self.domain_ordering, self.codomain_ordering)

    def scaled(self, c: complex) -> "OperatorMatrix":
        return OperatorMatrix(f"{c}*{self.name}", self.base, c * self.entries,
                              self.domain_ordering, self.codomain_ordering)


@dataclass(frozen=True, eq=False)
class FormMatrix:
    """G with bilinear_form(u, v) = u^T G v."""

    entries: np.ndarray

    def inverse(self) -> np.ndarray:
        # per-site blocks are antidiagonal, so the inverse is blockwise too
        g = self.entries
        inv = np.zeros_like(g)
        inv[0::2, 1::2] = np.diag(1.0 / np.diag(g[1::2, 0::2]))
        inv[1::2, 0::2] = np.diag(1.0 / np.diag(g[0::2, 1::2]))
        return inv


def _same_orderings(a: OperatorMatrix, b: OperatorMatrix) -> None:
    if (a.domain_ordering, a.codomain_ordering) != (b.domain_ordering, b.codomain_ordering):
        raise OrderingMismatch(f"{a.name} and {b.name} have different orderings")


# assembly helpers ------------------------------------------------------------


def _blocks(a, b, c, d) -> np.ndarray:
    n = a.shape[0]
    m = np.zeros((2 * n, 2 * n), complex)
    m[0::2, 0::2] = a
    m[0::2, 1::2] = b
    m[1::2, 0::2] = c
    m[1::2, 1::2] = d
    return m


def _site_block(b00, b01, b10, b11, n) -> np.ndarray:
    one = np.ones(n)
    return _blocks(*(np.diag(x * one) for x in (b00, b01, b10, b11)))


class _Parts:
    """Shared N x N building blocks for one state."""

    def __init__(self, s: LatticeState):
        n = s.size
        self.n = n
        self.q, self.r, self.w = s.q, s.r, s.weights
        self.Ep = np.eye(n, k=1)
        self.Em = np.eye(n, k=-1)
        self.Jp = np.triu(np.ones((n, n)))
        self.Jm = np.tril(np.ones((n, n)))
        self.Z = np.zeros((n, n))

    @staticmethod
    def d(x, m, y=None):
        """Diag(x) m Diag(y) computed elementwise."""
        out = x[:, None] * m
        return out if y is None else out * y[None, :]


def _L(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Jp, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Jp, p.Z, p.d
    return (
        _blocks(Em, Z, Z, Ep)
        + _blocks(
            -d(w, Em @ d(r, Jp, q / w)),
            d(w, Em @ d(r, Jp, r / w)),
            -d(w, Ep @ d(q, Jp, q / w)),
            d(w, Ep @ d(q, Jp, r / w)),
        )
        + _blocks(d(w, Em, r * q / w), -d(w, Em, r * r / w), Z, Z)
        + _blocks(
            -d(r, Jp, q) @ Em,
            d(r, Jp, r) @ Ep,
            -d(q, Jp, q) @ Em,
            d(q, Jp, r) @ Ep,
        )
        + _blocks(Z, Z, d(q * q, Em), -d(q * r, Ep))
    )


def _Linv(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Jp, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Jp, p.Z, p.d
    return (
        _blocks(Ep, Z, Z, Em)
        + _blocks(
            d(w, Ep @ d(r, Jp, q / w)),
            -d(w, Ep @ d(r, Jp, r / w)),
            d(w, Em @ d(q, Jp, q / w)),
            -d(w, Em @ d(q, Jp, r / w)),
        )
        + _blocks(Z, Z, -d(w, Em, q * q / w), d(w, Em, q * r / w))
        + _blocks(
            d(r, Jp, q) @ Ep,
            -d(r, Jp, r) @ Em,
            d(q, Jp, q) @ Ep,
            -d(q, Jp, r) @ Em,
        )
        + _blocks(-d(r * q, Ep), d(r * r, Em), Z, Z)
    )


def _Lplus(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Jp, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Jp, p.Z, p.d
    Dm = Ep - Em
    return (
        _blocks(Ep + Em, Z, Z, Ep + Em)
        + _blocks(
            d(w, Dm @ d(r, Jp, q / w)),
            -d(w, Dm @ d(r, Jp, r / w)),
            -d(w, Dm @ d(q, Jp, q / w)),
            d(w, Dm @ d(q, Jp, r / w)),
        )
        # E- acts on ratio times field: the operator composition reading
        + _blocks(d(w, Em, r * q / w), -d(w, Em, r * r / w), -d(w, Em, q * q / w), d(w, Em, q * r / w))
        + _blocks(d(r, Jp, q) @ Dm, d(r, Jp, r) @ Dm, d(q, Jp, q) @ Dm, d(q, Jp, r) @ Dm)
        + _blocks(-d(r * q, Ep), d(r * r, Em), d(q * q, Em), -d(q * r, Ep))
    )


def _Lminus(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Jm, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Jm, p.Z, p.d
    Dm = Ep - Em
    return (
        _blocks(Ep + Em, Z, Z, Ep + Em)
        - _blocks(
            d(w, Dm @ d(r, Jm, q / w)),
            -d(w, Dm @ d(r, Jm, r / w)),
            -d(w, Dm @ d(q, Jm, q / w)),
            d(w, Dm @ d(q, Jm, r / w)),
        )
        - _blocks(-d(w, Ep, r * q / w), d(w, Ep, r * r / w), d(w, Ep, q * q / w), -d(w, Ep, q * r / w))
        - _blocks(d(r, Jm, q) @ Dm, d(r, Jm, r) @ Dm, d(q, Jm, q) @ Dm, d(q, Jm, r) @ Dm)
        - _blocks(d(r * q, Em), -d(r * r, Ep), -d(q * q, Ep), d(q * r, Em))
    )


def _R(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Z, p.d
    Dm, Sp, Jd = Ep - Em, Ep + Em, p.Jp - p.Jm
    return (
        _blocks(2 * Sp, Z, Z, 2 * Sp)
        + _blocks(
            d(w, Dm @ d(q, Jd, r / w)),
            d(w, Dm @ d(q, Jd, q / w)),
            d(w, Dm @ d(r, Jd, r / w)),
            d(w, Dm @ d(r, Jd, q / w)),
        )
        + _blocks(d(w, Sp, q * r / w), d(w, Sp, q * q / w), d(w, Sp, r * r / w), d(w, Sp, r * q / w))
        + _blocks(d(q, Jd, r) @ Dm, -d(q, Jd, q) @ Dm, -d(r, Jd, r) @ Dm, d(r, Jd, q) @ Dm)
        - _blocks(d(q * r, Sp), d(q * q, Sp), d(r * r, Sp), d(r * q, Sp))
    )


def _K(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, Ep, Em, Z, d = p.q, p.r, p.w, p.Ep, p.Em, p.Z, p.d
    Dm, Sp, Jd = Ep - Em, Ep + Em, p.Jp - p.Jm
    inner = (
        # leading term carries sigma3; without it K = R J fails and K is not skew
        _blocks(2 * Sp, Z, Z, -2 * Sp)
        + _blocks(
            d(w, Dm @ d(q, Jd, r / w)),
            -d(w, Dm @ d(q, Jd, q / w)),
            d(w, Dm @ d(r, Jd, r / w)),
            -d(w, Dm @ d(r, Jd, q / w)),
        )
        + _blocks(d(w, Sp, q * r / w), -d(w, Sp, q * q / w), d(w, Sp, r * r / w), -d(w, Sp, r * q / w))
        + _blocks(d(q, Jd, r) @ Dm, d(q, Jd, q) @ Dm, -d(r, Jd, r) @ Dm, -d(r, Jd, q) @ Dm)
        + _blocks(-d(q * r, Sp), d(q * q, Sp), -d(r * r, Sp), d(r * q, Sp))
    )
    return -1j * inner


def _D1(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, w, d = p.q, p.r, p.w, p.d
    S = np.ones((p.n, p.n))
    Dm = p.Ep - p.Em
    return _blocks(
        d(w, Dm @ d(r, S, q / w)),
        -d(w, Dm @ d(r, S, r / w)),
        -d(w, Dm @ d(q, S, q / w)),
        d(w, Dm @ d(q, S, r / w)),
    )


def _D2(s: LatticeState) -> np.ndarray:
    p = _Parts(s)
    q, r, d = p.q, p.r, p.d
    S = np.ones((p.n, p.n))
    Dm = p.Ep - p.Em
    return _blocks(d(r, S, q) @ Dm, d(r, S, r) @ Dm, d(q, S, q) @ Dm, d(q, S, r) @ Dm)


_BUILDERS: Dict[str, tuple] = {
    # name: (builder, domain, codomain); None means "caller picks the ordering"
    "L": (_L, "rq", "rq"),
    "Linv": (_Linv, "rq", "rq"),
    "Lplus": (_Lplus, "rq", "rq"),
    "Lminus": (_Lminus, "rq", "rq"),
    "D1": (_D1, "rq", "rq"),
    "D2": (_D2, "rq", "rq"),
    "R": (_R, "qr", "qr"),
    "K": (_K, "qr", "qr"),
    "J": (lambda s: _site_block(-1j, 0, 0, 1j, s.size), "qr", "qr"),
    "B": (lambda s: _site_block(0, 1, -1, 0, s.size), "rq", "qr"),
    "Binv": (lambda s: _site_block(0, -1, 1, 0, s.size), "qr", "rq"),
    "sigma1": (lambda s: _site_block(0, 1, 1, 0, s.size), None, None),
    "sigma2": (lambda s: _site_block(0, -1j, 1j, 0, s.size), None, None),
    "sigma3": (lambda s: _site_block(1, 0, 0, -1, s.size), None, None),
    "identity": (lambda s: np.eye(2 * s.size, dtype=complex), None, None),
}

OPERATOR_NAMES = tuple(_BUILDERS)


def assemble(name: str, s: LatticeState, ordering: str = "rq") -> OperatorMatrix:
    """Dense matrix of the named operator at state `s`.

    `ordering` only matters for the ordering-neutral constants
    (identity and the Pauli matrices).
    """
    try:
        build, dom, cod = _BUILDERS[name]
    except KeyError:
        raise UnknownOperator(f"unknown operator {name!r}; known: {', '.join(OPERATOR_NAMES)}") from None
    if dom is None:
        if ordering not in ORDERINGS:
            raise ValueError(ordering)
        dom = cod = ordering
    return OperatorMatrix(name, s, build(s), dom, cod)


def form_matrix(s: LatticeState) -> FormMatrix:
    g = -1.0 / s.weights
    n = s.size
    m = np.zeros((2 * n, 2 * n), complex)
    m[0::2, 1::2] = np.diag(g)
    m[1::2, 0::2] = np.diag(g)
    return FormMatrix(m)


def apply(A: OperatorMatrix, f: Field) -> Field:
    if f.ordering != A.domain_ordering:
        raise OrderingMismatch(f"{A.name} expects {A.domain_ordering}-ordered fields, got {f.ordering}")
    if f.window != A.base.window:
        raise ValueError("field and operator live on different windows")
    return Field.from_vector(f.window, A.entries @ f.vector(), A.codomain_ordering)


def compose(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    """A after B."""
    if A.domain_ordering != B.codomain_ordering:
        raise OrderingMismatch(f"cannot compose {A.name} ({A.domain_ordering}) with {B.name} ({B.codomain_ordering})")
    return OperatorMatrix(f"{A.name}.{B.name}", A.base, A.entries @ B.entries, B.domain_ordering, A.codomain_ordering)


def adjoint(A: OperatorMatrix, s: Optional[LatticeState] = None) -> OperatorMatrix:
    """A* = G^-1 A^T G with respect to the weighted bilinear form."""
    G = form_matrix(A.base if s is None else s)
    return OperatorMatrix(f"{A.name}*", A.base, G.inverse() @ A.entries.T @ G.entries,
                          A.codomain_ordering, A.domain_ordering)


def power_apply(A: OperatorMatrix, f: Field, n: int) -> Field:
    if n < 0:
        raise ValueError("power must be non-negative")
    for _ in range(n):
        f = apply(A, f)
    return f


def power_series(A: OperatorMatrix, f: Field, n_max: int) -> list:
    """[f, A f, ..., A^n_max f]."""
    out = [f]
    for _ in range(n_max):
        out.append(apply(A, out[-1]))
    return out


def dump_csv(A: OperatorMatrix, out: Optional[TextIO] = None, skip_zeros: bool = True) -> str:
    """Write `row,col,re,im` lines; returns the text when `out` is None."""
    buf = out if out is not None else io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["row", "col", "re", "im"])
    e = A.entries
    rows, cols = np.nonzero(e) if skip_zeros else np.indices(e.shape).reshape(2, -1)
    for i, j in zip(rows, cols):
        wr.writerow([int(i), int(j), repr(float(e[i, j].real)), repr(float(e[i, j].imag))])
    return buf.getvalue() if out is None else ""


def interior_rows(s: LatticeState, width: int) -> np.ndarray:
    """Row indices of the 2N basis whose site is at least `width` from both edges."""
    sites = np.arange(width, s.size - width)
    return np.sort(np.r_[2 * sites, 2 * sites + 1])
