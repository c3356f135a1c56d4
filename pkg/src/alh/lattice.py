"""Sequence types on a finite lattice window, plus the basic difference/sum primitives.

The bi-infinite lattice is modelled by zero extension outside [k_min, k_max].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SingularState

DECAY_EPS = 1e-12
SINGULAR_TOL = 1e-10
MARGIN = 2  # sites at each edge that must carry (numerically) zero potential
ORDERINGS = ("rq", "qr")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Window:
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.k_max - self.k_min + 1 < 4:
            raise ValueError(f"window [{self.k_min}, {self.k_max}] needs at least 4 sites")

    @classmethod
    def of_size(cls, n: int, k_min: Optional[int] = None) -> "Window":
        if k_min is None:
            k_min = -(n // 2)
        return cls(k_min, k_min + n - 1)

    @property
    def size(self) -> int:
        return self.k_max - self.k_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def index(self, k: int) -> int:
        if not self.k_min <= k <= self.k_max:
            raise IndexError(f"site {k} outside window [{self.k_min}, {self.k_max}]")
        return k - self.k_min

    def interior(self, width: int) -> slice:
        """Slice of site indices at least `width` sites away from either edge."""
        return slice(width, self.size - width)


@dataclass(frozen=True, eq=False)
class LatticeState:
    """A point (q, r) of phase space restricted to a window.

    `check_decay=False` skips the edge-decay check; used for perturbed or
    evolved states, where the edges are only approximately zero.
    """

    window: Window
    q: np.ndarray
    r: np.ndarray
    decay_eps: float = DECAY_EPS
    singular_tol: float = SINGULAR_TOL
    check_decay: bool = True

    def __post_init__(self):
        q, r = _frozen(self.q), _frozen(self.r)
        n = self.window.size
        if q.shape != (n,) or r.shape != (n,):
            raise ValueError(f"q and r must have shape ({n},)")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        w = 1.0 - r * q
        bad = np.flatnonzero(np.abs(w) <= self.singular_tol)
        if bad.size:
            k = int(self.window.k_min + bad[0])
            raise SingularState(f"|1 - q r| = {abs(w[bad[0]]):.3e} at site {k}")
        object.__setattr__(self, "_w", _frozen(w))
        if self.check_decay:
            edge = np.r_[0:MARGIN, n - MARGIN:n]
            if max(np.abs(q[edge]).max(), np.abs(r[edge]).max()) >= self.decay_eps:
                raise ValueError(
                    "potential does not decay: the two outermost sites on each side "
                    f"must be below {self.decay_eps:g} (pass check_decay=False to skip)"
                )

    @classmethod
    def from_arrays(cls, q, r, k_min: Optional[int] = None, **kw) -> "LatticeState":
        q = np.asarray(q, dtype=complex)
        return cls(Window.of_size(len(q), k_min), q, np.asarray(r, dtype=complex), **kw)

    @property
    def weights(self) -> np.ndarray:
        """w_k = 1 - r_k q_k."""
        return self._w

    @property
    def size(self) -> int:
        return self.window.size

    def replace(self, q=None, r=None, check_decay: bool = False) -> "LatticeState":
        return LatticeState(
            self.window,
            self.q if q is None else q,
            self.r if r is None else r,
            self.decay_eps,
            self.singular_tol,
            check_decay,
        )

    def rq(self) -> "Field":
        return Field(self.window, self.r, self.q, "rq")

    def qr(self) -> "Field":
        return Field(self.window, self.q, self.r, "qr")


@dataclass(frozen=True, eq=False)
class Field:
    """Pair of complex sequences on a window with an ordering tag (rq or qr)."""

    window: Window
    c1: np.ndarray
    c2: np.ndarray
    ordering: str = "qr"

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        c1, c2 = _frozen(self.c1), _frozen(self.c2)
        if c1.shape != (self.window.size,) or c2.shape != c1.shape:
            raise ValueError("field components must match the window size")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @classmethod
    def zeros(cls, window: Window, ordering: str = "qr") -> "Field":
        z = np.zeros(window.size, complex)
        return cls(window, z, z, ordering)

    @classmethod
    def from_vector(cls, window: Window, v, ordering: str) -> "Field":
        """Inverse of `vector`: site-major interleaving, index 2(k - k_min) + c."""
        v = np.asarray(v)
        return cls(window, v[0::2], v[1::2], ordering)

    def vector(self) -> np.ndarray:
        v = np.empty(2 * self.window.size, complex)
        v[0::2] = self.c1
        v[1::2] = self.c2
        return v

    def norm(self) -> float:
        return float(max(np.abs(self.c1).max(initial=0.0), np.abs(self.c2).max(initial=0.0)))

    def __add__(self, other: "Field") -> "Field":
        _check_same(self, other)
        return Field(self.window, self.c1 + other.c1, self.c2 + other.c2, self.ordering)

    def __sub__(self, other: "Field") -> "Field":
        _check_same(self, other)
        return Field(self.window, self.c1 - other.c1, self.c2 - other.c2, self.ordering)

    def __mul__(self, c) -> "Field":
        return Field(self.window, c * self.c1, c * self.c2, self.ordering)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return -1 * self


def _check_same(u: Field, v: Field) -> None:
    from .errors import OrderingMismatch

    if u.window != v.window:
        raise ValueError("fields live on different windows")
    if u.ordering != v.ordering:
        raise OrderingMismatch(f"{u.ordering} vs {v.ordering}")


def reorder(f: Field, ordering: str) -> Field:
    """Swap components so that the field carries the requested ordering tag."""
    if ordering not in ORDERINGS:
        raise ValueError(ordering)
    if f.ordering == ordering:
        return f
    return Field(f.window, f.c2, f.c1, ordering)


def shift_seq(v: np.ndarray, direction: str) -> np.ndarray:
    """E+ v_k = v_{k+1}, E- v_k = v_{k-1}, zero fill from outside."""
    v = np.asarray(v)
    out = np.zeros_like(v)
    if direction == "+":
        out[:-1] = v[1:]
    elif direction == "-":
        out[1:] = v[:-1]
    else:
        raise ValueError(f"direction must be '+' or '-', got {direction!r}")
    return out


def shift(f: Field, direction: str) -> Field:
    return Field(f.window, shift_seq(f.c1, direction), shift_seq(f.c2, direction), f.ordering)


def tail_sums(u) -> np.ndarray:
    """J+_k u = sum_{j >= k} u_j for every k in the window."""
    u = np.asarray(u)
    return np.cumsum(u[::-1])[::-1]


def head_sums(u) -> np.ndarray:
    """J-_k u = sum_{j <= k} u_j for every k in the window."""
    return np.cumsum(np.asarray(u))


def partial_sum(u, k: int, side: str, window: Optional[Window] = None) -> complex:
    u = np.asarray(u)
    window = window or Window(0, len(u) - 1)
    i = window.index(k)
    if side == "plus":
        return u[i:].sum()
    if side == "minus":
        return u[: i + 1].sum()
    raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


def tail_products(s: LatticeState) -> np.ndarray:
    """P(k) for k = k_min .. k_max+1 (length N+1, last entry 1)."""
    w = s.weights
    if np.any(np.abs(w) <= s.singular_tol):
        raise SingularState("vanishing weight in tail product")
    out = np.ones(s.size + 1, complex)
    out[:-1] = np.cumprod(w[::-1])[::-1]
    return out


def tail_product(s: LatticeState, k: int) -> complex:
    if k == s.window.k_max + 1:
        return 1.0 + 0j
    return complex(tail_products(s)[s.window.index(k)])


def bilinear_form(u: Field, v: Field, s: LatticeState) -> complex:
    """<u, v> = -sum (u1 v2 + u2 v1) / (1 - q r), no conjugation."""
    _check_same(u, v)
    if u.window != s.window:
        raise ValueError("fields and state live on different windows")
    return complex(-np.sum((u.c1 * v.c2 + u.c2 * v.c1) / s.weights))


# generators ---------------------------------------------------------------


def _margin(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a[:MARGIN] = 0
    a[-MARGIN:] = 0
    return a


def _reduce(q: np.ndarray, r: Optional[np.ndarray], reduction: str) -> np.ndarray:
    if reduction == "focusing":
        return -np.conj(q)
    if reduction == "defocusing":
        return np.conj(q)
    if reduction == "none" and r is not None:
        return r
    if reduction == "none":
        raise ValueError("this generator needs reduction 'focusing' or 'defocusing'")
    raise ValueError(f"unknown reduction {reduction!r}")


def zero_state(n: int, k_min: Optional[int] = None) -> LatticeState:
    w = Window.of_size(n, k_min)
    return LatticeState(w, np.zeros(n), np.zeros(n))


def pair_state(
    n: int,
    r_value: complex = 0.1,
    q_value: complex = 0.2,
    r_site: int = 0,
    q_site: int = 1,
    k_min: Optional[int] = None,
) -> LatticeState:
    """r nonzero at one site, q at another (or the same), zero elsewhere."""
    w = Window.of_size(n, k_min)
    q = np.zeros(n, complex)
    r = np.zeros(n, complex)
    r[w.index(r_site)] = r_value
    q[w.index(q_site)] = q_value
    return LatticeState(w, q, r)


def gaussian_state(
    n: int,
    amplitude: float = 0.3,
    width: float = 4.0,
    chirp: float = 0.0,
    reduction: str = "focusing",
    k_min: Optional[int] = None,
) -> LatticeState:
    """q_k = A exp(-k^2 / 2 width^2 + i chirp k^2) centred at site 0."""
    w = Window.of_size(n, k_min)
    k = w.sites.astype(float)
    q = _margin(amplitude * np.exp(-(k**2) / (2 * width**2) + 1j * chirp * k**2))
    r = _margin(_reduce(q, None, reduction))
    return LatticeState(w, q, r)


def random_state(
    n: int,
    seed: int = 42,
    amplitude: float = 0.1,
    decay: float = 0.1,
    reduction: str = "none",
    k_min: Optional[int] = None,
) -> LatticeState:
    """Seeded random potential, |q_k|, |r_k| <= amplitude * exp(-decay |k|)."""
    w = Window.of_size(n, k_min)
    rng = np.random.default_rng(seed)
    env = amplitude * np.exp(-decay * np.abs(w.sites))

    def draw():
        return env * rng.uniform(0, 1, n) * np.exp(2j * np.pi * rng.uniform(0, 1, n))

    q = _margin(draw())
    r = _margin(_reduce(q, draw(), reduction))
    return LatticeState(w, q, r)


# JSON I/O -----------------------------------------------------------------


def _pairs(a: np.ndarray) -> list:
    return [[float(x.real), float(x.imag)] for x in a]


def _unpairs(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("complex arrays must be lists of [re, im] pairs")
    return a[:, 0] + 1j * a[:, 1]


def state_to_dict(s: LatticeState) -> dict:
    return {"k_min": s.window.k_min, "q": _pairs(s.q), "r": _pairs(s.r)}


def state_from_dict(d: dict, check_decay: bool = True) -> LatticeState:
    try:
        q, r = _unpairs(d["q"]), _unpairs(d["r"])
        k_min = int(d["k_min"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed state document: {exc}") from exc
    return LatticeState.from_arrays(q, r, k_min=k_min, check_decay=check_decay)


def dumps_state(s: LatticeState) -> str:
    return json.dumps(state_to_dict(s))


def loads_state(text: str, check_decay: bool = True) -> LatticeState:
    return state_from_dict(json.loads(text), check_decay)


def field_to_dict(f: Field) -> dict:
    return {"k_min": f.window.k_min, "ordering": f.ordering, "c1": _pairs(f.c1), "c2": _pairs(f.c2)}


def field_from_dict(d: dict) -> Field:
    c1, c2 = _unpairs(d["c1"]), _unpairs(d["c2"])
    return Field(Window.of_size(len(c1), int(d["k_min"])), c1, c2, d.get("ordering", "qr"))
