"""Scattering side of the lattice: transfer matrices, Jost solutions, a(z), b(z),
squared eigenfunctions and the gradient generating functions.

Jost solutions are stored in normalized form so that no z^k powers are formed:

    m_k  = z^-k phi_k      m_{k+1}  = z^-1 E_k m_k,        m_{k_min}  = (1, 0)
    mh_k = z^k  phih_k     mh_{k+1} = z E_k mh_k,          mh_{k_min} = (0, 1)
    n_k  = z^k  psi_k      n_k      = z^-1 E_k^-1 n_{k+1}, n_{k_max+1}  = (0, 1)
    nh_k = z^-k psih_k     nh_k     = z E_k^-1 nh_{k+1},   nh_{k_max+1} = (1, 0)

Arrays have N + 1 rows, row i standing for site k_min + i (the last row is k_max + 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .errors import SingularTransfer, ZeroOfA
from .lattice import Field, LatticeState, shift_seq, tail_products, tail_sums
from .operators import assemble

ZERO_A_TOL = 1e-12


def transfer_matrices(s: LatticeState, z: complex) -> np.ndarray:
    """E_k = [[z, q_k], [r_k, 1/z]] for every site, shape (N, 2, 2)."""
    z = complex(z)
    e = np.empty((s.size, 2, 2), complex)
    e[:, 0, 0] = z
    e[:, 0, 1] = s.q
    e[:, 1, 0] = s.r
    e[:, 1, 1] = 1 / z
    return e


@dataclass(frozen=True, eq=False)
class JostSolutions:
    z: complex
    m: np.ndarray
    mh: np.ndarray
    n: np.ndarray
    nh: np.ndarray

    def recursion_residual(self, s: LatticeState) -> float:
        return recursion_residual(self, s)


def jost(s: LatticeState, z: complex) -> JostSolutions:
    z = complex(z)
    if z == 0:
        raise ValueError("spectral parameter must be nonzero")
    q, r, w = s.q, s.r, s.weights
    if np.any(np.abs(w) <= s.singular_tol):
        raise SingularTransfer("det E_k = 1 - q_k r_k vanishes")
    n_sites = s.size
    m = np.empty((n_sites + 1, 2), complex)
    mh = np.empty_like(m)
    n = np.empty_like(m)
    nh = np.empty_like(m)
    m[0] = (1, 0)
    mh[0] = (0, 1)
    zi = 1 / z
    for i in range(n_sites):
        a1, a2 = m[i]
        m[i + 1] = (a1 + zi * q[i] * a2, zi * r[i] * a1 + zi * zi * a2)
        b1, b2 = mh[i]
        mh[i + 1] = (z * z * b1 + z * q[i] * b2, z * r[i] * b1 + b2)
    n[-1] = (0, 1)
    nh[-1] = (1, 0)
    for i in range(n_sites - 1, -1, -1):
        c1, c2 = n[i + 1]
        n[i] = ((zi * zi * c1 - zi * q[i] * c2) / w[i], (-zi * r[i] * c1 + c2) / w[i])
        d1, d2 = nh[i + 1]
        nh[i] = ((d1 - z * q[i] * d2) / w[i], (-z * r[i] * d1 + z * z * d2) / w[i])
    return JostSolutions(z, m, mh, n, nh)


def _residual_backward(js: JostSolutions, s: LatticeState) -> float:
    # psi_{k+1} = E_k psi_k in normalized form: n_{k+1} = z E_k n_k, nh_{k+1} = z^-1 E_k nh_k
    E = transfer_matrices(s, js.z)
    out = 0.0
    for v, fac in ((js.n, js.z), (js.nh, 1 / js.z)):
        pred = fac * np.einsum("kij,kj->ki", E, v[:-1])
        out = max(out, np.abs(pred - v[1:]).max() / max(np.abs(v).max(), 1e-300))
    return float(out)


def recursion_residual(js: JostSolutions, s: LatticeState) -> float:
    """Largest relative defect of nu_{k+1} = E_k nu_k over the four solutions."""
    E = transfer_matrices(s, js.z)
    out = 0.0
    for v, fac in ((js.m, 1 / js.z), (js.mh, js.z)):
        pred = fac * np.einsum("kij,kj->ki", E, v[:-1])
        out = max(out, np.abs(pred - v[1:]).max() / max(np.abs(v).max(), 1e-300))
    return max(out, _residual_backward(js, s))


@dataclass(frozen=True, eq=False)
class ScatteringData:
    z: complex
    a: complex
    a_hat: complex
    b: complex
    b_hat: complex
    C0: complex
    jost: JostSolutions
    a_profile: np.ndarray  # P(k) det(phi_k, psi_k) for every k, should be flat
    a_hat_profile: np.ndarray

    @property
    def det_defect(self) -> float:
        """|a a_hat - b b_hat - C0| relative to the largest of the three terms.

        Off the unit circle a_hat (or a) grows like |z|^(2N) and the identity is a
        cancellation between two huge products, so |C0| is the wrong scale there.
        """
        aa, bb = self.a * self.a_hat, self.b * self.b_hat
        return abs(aa - bb - self.C0) / max(abs(aa), abs(bb), abs(self.C0))

    @property
    def a_variation(self) -> float:
        return float(np.abs(self.a_profile - self.a).max() / abs(self.a))

    @property
    def a_hat_variation(self) -> float:
        return float(np.abs(self.a_hat_profile - self.a_hat).max() / abs(self.a_hat))


def scattering_data(s: LatticeState, z: complex, js: Optional[JostSolutions] = None) -> ScatteringData:
    js = js or jost(s, z)
    z = js.z
    P = tail_products(s)
    m, mh, n, nh = js.m, js.mh, js.n, js.nh
    a_prof = P * (m[:, 0] * n[:, 1] - n[:, 0] * m[:, 1])
    ah_prof = P * (nh[:, 0] * mh[:, 1] - mh[:, 0] * nh[:, 1])
    k_end = s.window.k_max + 1
    b = z ** (2 * k_end) * m[-1, 1]
    b_hat = z ** (-2 * k_end) * mh[-1, 0]
    return ScatteringData(z, complex(a_prof[0]), complex(ah_prof[0]), complex(b), complex(b_hat),
                          complex(P[0]), js, a_prof, ah_prof)


def edge_diagnostics(s: LatticeState, sd: ScatteringData) -> Dict[str, complex]:
    """Left-edge extraction of a and b_hat, and b evaluated one site inside the right edge.

    Reported only; the determinant route is authoritative.
    """
    z, js, C0 = sd.z, sd.jost, sd.C0
    k0 = s.window.k_min
    k1 = s.window.k_max
    return {
        "a_left": C0 * js.n[0, 1],
        "b_hat_left": -C0 * js.n[0, 0] * z ** (-2 * k0),
        "b_at_kmax": z ** (2 * k1) * js.m[-2, 1],
        "b_hat_at_kmax": z ** (-2 * k1) * js.mh[-2, 0],
    }


def a_coefficient(s: LatticeState, z: complex) -> complex:
    """a(z) via the forward recursion only (cheap; used by finite differences)."""
    zi = 1 / complex(z)
    m1, m2 = 1.0 + 0j, 0j
    for qk, rk in zip(s.q, s.r):
        m1, m2 = m1 + zi * qk * m2, zi * rk * m1 + zi * zi * m2
    return m1


def a_hat_coefficient(s: LatticeState, z: complex) -> complex:
    z = complex(z)
    b1, b2 = 0j, 1.0 + 0j
    for qk, rk in zip(s.q, s.r):
        b1, b2 = z * z * b1 + z * qk * b2, z * rk * b1 + b2
    return b2


@dataclass(frozen=True, eq=False)
class SquaredEigen:
    """Semi-shifted squared eigenfunctions alpha, beta, gamma, delta (one value per site)."""

    z: complex
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    hatted: bool = False

    def W(self, i: int) -> np.ndarray:
        return np.array([[self.gamma[i], -self.alpha[i]], [self.beta[i], -self.delta[i]]])


def _check_a(a: complex, label: str) -> None:
    if abs(a) < ZERO_A_TOL:
        raise ZeroOfA(f"|{label}(z)| = {abs(a):.2e} below {ZERO_A_TOL:g}")


def squared_eigen(s: LatticeState, z: complex, sd: Optional[ScatteringData] = None) -> SquaredEigen:
    sd = sd or scattering_data(s, z)
    _check_a(sd.a, "a")
    js, z = sd.jost, sd.z
    P = tail_products(s)
    # z P(k+1)/a carries the z-power left over from psi_k phi_{k+1} = z n_k m_{k+1}
    c = z * P[1:] / sd.a
    n, m1 = js.n[:-1], js.m[1:]
    return SquaredEigen(
        z,
        alpha=c * n[:, 0] * m1[:, 0],
        beta=c * n[:, 1] * m1[:, 1],
        gamma=c * n[:, 0] * m1[:, 1],
        delta=c * n[:, 1] * m1[:, 0],
    )


def squared_eigen_hat(s: LatticeState, z: complex, sd: Optional[ScatteringData] = None) -> SquaredEigen:
    """Hatted partners, signed so that the unit identity and both hatted shift
    identities hold as stated (overall minus relative to the plain construction)."""
    sd = sd or scattering_data(s, z)
    _check_a(sd.a_hat, "a_hat")
    js, z = sd.jost, sd.z
    P = tail_products(s)
    c = -P[1:] / (z * sd.a_hat)
    nh, mh1 = js.nh[:-1], js.mh[1:]
    return SquaredEigen(
        z,
        alpha=c * nh[:, 0] * mh1[:, 0],
        beta=c * nh[:, 1] * mh1[:, 1],
        gamma=c * nh[:, 0] * mh1[:, 1],
        delta=c * nh[:, 1] * mh1[:, 0],
        hatted=True,
    )


def v_matrix_entries(s: LatticeState, sd: ScatteringData) -> Dict[str, np.ndarray]:
    """Unshifted squared eigenfunctions C_k, A_k, B_k, D_k of V_k."""
    js = sd.jost
    c = tail_products(s)[:-1] / sd.a
    n, m = js.n[:-1], js.m[:-1]
    return {
        "C": c * n[:, 0] * m[:, 1],
        "A": c * n[:, 0] * m[:, 0],
        "B": c * n[:, 1] * m[:, 1],
        "D": c * n[:, 1] * m[:, 0],
    }


def grad_log_a(s: LatticeState, z: complex) -> Field:
    """delta log a + delta H0 as a qr-ordered pair (d/dq_k, d/dr_k) = (beta, -alpha)."""
    W = squared_eigen(s, z)
    return Field(s.window, W.beta, -W.alpha, "qr")


def grad_log_ahat(s: LatticeState, z: complex) -> Field:
    """delta log a_hat + delta H0 = (beta_hat, -alpha_hat)."""
    W = squared_eigen_hat(s, z)
    return Field(s.window, W.beta, -W.alpha, "qr")


def fd_grad_log(s: LatticeState, z: complex, hatted: bool = False, eps: float = 1e-6) -> Field:
    """Central-difference oracle for delta log a (or log a_hat), H0 part included.

    log a is holomorphic in each q_k, r_k, so a real step suffices.
    """
    coef = a_hat_coefficient if hatted else a_coefficient
    q0, r0 = np.array(s.q), np.array(s.r)
    w = s.weights
    out = []
    for which in ("q", "r"):
        g = np.empty(s.size, complex)
        for i in range(s.size):
            vals = []
            for h in (eps, -eps):
                q, r = q0.copy(), r0.copy()
                (q if which == "q" else r)[i] += h
                vals.append(np.log(coef(s.replace(q, r), z)))
            g[i] = (vals[0] - vals[1]) / (2 * eps)
        out.append(g)
    gq = out[0] + s.r / w
    gr = out[1] + s.q / w
    return Field(s.window, gq, gr, "qr")


def resolvent_series(s: LatticeState, z: complex, M: int = 30, which: str = "L") -> Field:
    """sum_{m=0}^{M} z^{-2m} L^m (r, q), or with z^{2m} (L^-1)^m for which='Linv'."""
    if which not in ("L", "Linv"):
        raise ValueError("which must be 'L' or 'Linv'")
    A = assemble(which, s).entries
    z = complex(z)
    fac = z**-2 if which == "L" else z**2
    term = s.rq().vector()
    total = term.copy()
    for _ in range(M):
        term = fac * (A @ term)
        total += term
    return Field.from_vector(s.window, total, "rq")


def resolvent_tail_bound(s: LatticeState, z: complex, M: int = 30, which: str = "L") -> float:
    """Geometric estimate ||A^M (r,q)|| |fac|^M / (1 - ||A|| |fac|), inf if not contracting."""
    A = assemble(which, s).entries
    z = complex(z)
    fac = abs(z) ** (-2 if which == "L" else 2)
    norm = np.linalg.norm(A, 2)
    if norm * fac >= 1:
        return float("inf")
    v = s.rq().vector()
    for _ in range(M):
        v = A @ v
    return float(np.linalg.norm(v) * fac**M / (1 - norm * fac))


# squared-eigenfunction identities ----------------------------------------


def _jp1(v: np.ndarray) -> np.ndarray:
    """J+_{k+1} v."""
    return tail_sums(v) - v


def identity_residuals(s: LatticeState, z: complex) -> Dict[str, float]:
    """Max per-site residual of each squared-eigenfunction identity.

    Shift identities are measured where the shifted site stays in the window.
    'factor-hat-naive' is the hatted factor identity with the constant placed
    as in the unhatted one; it does not hold and is kept for reference only.
    'factor-hat' is the form that does hold.
    """
    z = complex(z)
    sd = scattering_data(s, z)
    W = squared_eigen(s, z, sd)
    H = squared_eigen_hat(s, z, sd)
    V = v_matrix_entries(s, sd)
    q, r, w = s.q, s.r, s.weights
    E = transfer_matrices(s, z)
    Ei = np.linalg.inv(E)
    Ep = lambda v: shift_seq(v, "+")  # noqa: E731
    Em = lambda v: shift_seq(v, "-")  # noqa: E731
    out: Dict[str, float] = {}

    out["W-recursion"] = max(
        np.abs(W.W(i + 1) - E[i] @ W.W(i) @ Ei[i + 1]).max() for i in range(s.size - 1)
    )
    out["W-V"] = max(
        np.abs(W.W(i) - np.array([[V["C"][i], -V["A"][i]], [V["B"][i], -V["D"][i]]]) @ Ei[i]).max()
        for i in range(s.size)
    )

    def unit(X):
        return np.abs((r * X.alpha + X.delta / z) - (q * X.beta + z * X.gamma) - 1).max()

    out["unit"] = unit(W)
    out["unit-hat"] = unit(H)

    # plain shift identities
    x1, x2 = w * W.beta, -w * W.alpha
    t1 = q * W.beta + z * W.gamma + 1
    t2 = -(r * W.alpha + W.delta / z - 1)
    p1 = Ep(x1) - (z**-2 * (x1 - r) + (Ep(r) + z**-2 * r) * t1)
    p2 = Ep(x2) - (z**2 * (x2 - q) + (Ep(q) + z**2 * q) * t2)
    out["shift+"] = max(np.abs(p1[:-1]).max(), np.abs(p2[:-1]).max())
    u1 = -(q * W.beta + z * W.gamma)
    u2 = r * W.alpha + W.delta / z
    m1 = Em(x1) - (z**2 * (x1 - r) + (Em(r) + z**2 * r) * Em(u1))
    m2 = Em(x2) - (z**-2 * (x2 - q) + (Em(q) + z**-2 * q) * Em(u2))
    out["shift-"] = max(np.abs(m1[1:]).max(), np.abs(m2[1:]).max())

    S = _jp1(q * W.beta) + _jp1(r * W.alpha)
    out["factor-first"] = max(np.abs(t1 - (-S + 1)).max(), np.abs(t2 - S).max())
    out["factor-second"] = max(np.abs(-u1 - (-S)).max(), np.abs(u2 - (-S + 1)).max())
    out["orthogonality"] = abs(np.sum(q * W.beta + r * W.alpha))

    # hatted shift identities
    y1, y2 = -w * H.beta, w * H.alpha
    h1 = q * H.beta + z * H.gamma + 1
    h2 = -(r * H.alpha + H.delta / z - 1)
    p1 = Ep(y1) - (z**-2 * (y1 + r) - (Ep(r) + z**-2 * r) * h1)
    p2 = Ep(y2) - (z**2 * (y2 + q) - (Ep(q) + z**2 * q) * h2)
    out["shift+ hat"] = max(np.abs(p1[:-1]).max(), np.abs(p2[:-1]).max())
    g1 = q * H.beta + z * H.gamma
    g2 = -(r * H.alpha + H.delta / z)
    m1 = Em(y1) - (z**2 * (y1 + r) + (Em(r) + z**2 * r) * Em(g1))
    m2 = Em(y2) - (z**-2 * (y2 + q) + (Em(q) + z**-2 * q) * Em(g2))
    out["shift- hat"] = max(np.abs(m1[1:]).max(), np.abs(m2[1:]).max())

    # M (-beta_hat, alpha_hat) with M = [[J(q), -J(r)], [-J(q), J(r)]]
    Sh = _jp1(q * H.beta) + _jp1(r * H.alpha)
    out["factor-hat"] = max(np.abs(g1 + 1 - (-Sh)).max(), np.abs(g2 - Sh).max())
    out["factor-hat-naive"] = max(np.abs(g1 - (-Sh)).max(), np.abs(g2 + 1 - Sh).max())
    out["orthogonality-hat"] = abs(np.sum(q * H.beta + r * H.alpha))
    return {k: float(v) for k, v in out.items()}


REFERENCE_ONLY = ("factor-hat-naive",)
