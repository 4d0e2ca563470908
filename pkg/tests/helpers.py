"""Reference computations shared by the operator and scheme tests.

The discrete Riesz operator is supposed to produce the L2 projection of the
continuous fractional integral of a DG field. These helpers compute that
projection without quadrature: each polynomial piece of the input decomposes
into half-line powers (t - B)_+^p, the left-sided integral maps each one to
Gamma(p+1)/Gamma(p+1+s) (t - B)_+^(p+s), and the product with a Legendre mode
integrates to a finite sum of power differences. The power differences
cancel heavily when an element sits far from a term's base point, so the
sums run in extended precision; the double-precision results are then good
to roundoff at the mesh sizes tested.
"""

from __future__ import annotations

import math

import numpy as np

from fracldg.mesh import Mesh1D
from fracldg.oracle import PiecewisePoly, gamma_fn, piece_halfline_terms
from fracldg.quadrature import legendre_monomial_coeffs


_LD = np.longdouble


def _modes_about(C_xi: np.ndarray, h: np.longdouble, t0: np.longdouble) -> np.ndarray:
    """Legendre modes re-expanded in powers of y, where xi = (2/h) y + t0."""
    kp1 = C_xi.shape[1]
    out = np.zeros_like(C_xi)
    for r in range(kp1):
        for p in range(r, kp1):
            out[:, r] += C_xi[:, p] * math.comb(p, r) * t0 ** (p - r)
        out[:, r] *= (_LD(2.0) / h) ** r
    return out


def project_left_transform(P: PiecewisePoly, mesh: Mesh1D, order: int,
                           s: float) -> np.ndarray:
    """Modal coefficients of the L2 projection of I_L^s[P] onto the DG space."""
    kp1 = order + 1
    C = legendre_monomial_coeffs(order).astype(_LD)
    terms = []
    for i in range(len(P.pieces)):
        c, d = float(P.breakpoints[i]), float(P.breakpoints[i + 1])
        for base, p, coef in piece_halfline_terms(c, d, P.pieces[i]):
            terms.append((_LD(base), _LD(p) + _LD(s),
                          _LD(coef) * _LD(gamma_fn(p + 1.0) / gamma_fn(p + 1.0 + s))))
    out = np.zeros((mesh.num_elements, kp1), dtype=_LD)
    for i in range(mesh.num_elements):
        A, B_e = _LD(mesh.boundaries[i]), _LD(mesh.boundaries[i + 1])
        h = _LD(mesh.widths[i])
        for base, mu, coef in terms:
            y1 = B_e - base
            if y1 <= 0.0:
                continue
            y0 = max(A - base, _LD(0.0))
            modes = _modes_about(C, h, _LD(2.0) * (base - A) / h - _LD(1.0))
            pw = np.arange(kp1).astype(_LD) + mu + _LD(1.0)
            out[i] += (_LD(2.0) / h) * coef * (modes @ ((y1 ** pw - y0 ** pw) / pw))
    return out.astype(float)


def project_right_transform(P: PiecewisePoly, mesh: Mesh1D, order: int,
                            s: float) -> np.ndarray:
    """Right-sided transform via reflection of both the function and the mesh."""
    S = float(mesh.a + mesh.b)
    mirror = Mesh1D(a=mesh.a, b=mesh.b, boundaries=(S - mesh.boundaries)[::-1].copy())
    flipped = project_left_transform(P.reflect(mirror_sum=S), mirror, order, s)
    parity = np.where(np.arange(order + 1) % 2 == 0, 1.0, -1.0)
    return flipped[::-1] * parity


def project_riesz_integral(P: PiecewisePoly, mesh: Mesh1D, order: int,
                           s: float) -> np.ndarray:
    """Projection of (I_L^s + I_R^s) P / (2 cos(s pi / 2))."""
    comb = project_left_transform(P, mesh, order, s)
    comb += project_right_transform(P, mesh, order, s)
    return comb / (2.0 * math.cos(0.5 * math.pi * s))


def dense_diffusion_matrix(op, beta: float, orientation: str) -> np.ndarray:
    """The pure-diffusion rhs (f = 0, eps = 1, zero boundary data) as one
    dense matrix acting on flattened modal coefficients.

    Assembled directly from the weak forms: a block matrix for the auxiliary
    derivative p, the operator matrix for q, then interface functionals and
    the volume term for du/dt. Independent of the element-loop assembly in
    fracldg.ldg except for the shared operator matrix.
    """
    from fracldg.quadrature import gauss_legendre, legendre_eval

    mesh, order = op.mesh, op.order
    K, kp1 = mesh.num_elements, order + 1
    N = K * kp1
    h = mesh.widths
    ep = legendre_eval(order, np.array([1.0]))[0][:, 0]
    em = legendre_eval(order, np.array([-1.0]))[0][:, 0]
    rule = gauss_legendre(order + 2)
    phi, dphi = legendre_eval(order, rule.nodes)
    S = np.einsum("mg,g,ng->mn", dphi, rule.weights, phi)

    P = np.zeros((N, N))
    for i in range(K):
        r = slice(i * kp1, (i + 1) * kp1)
        if orientation == "minus_plus":
            P[r, r] += np.outer(ep, ep) - S
            if i > 0:
                P[r, slice((i - 1) * kp1, i * kp1)] -= np.outer(em, ep)
        else:
            P[r, r] += -np.outer(em, em) - S
            if i < K - 1:
                P[r, slice((i + 1) * kp1, (i + 2) * kp1)] += np.outer(ep, em)
        P[r, :] *= 2.0 / h[i]
    Q = op.matrix @ P

    qhat = np.zeros((K + 1, N))
    for i in range(K):
        r = slice(i * kp1, (i + 1) * kp1)
        if orientation == "minus_plus":
            qhat[i, :] = em @ Q[r, :]
        else:
            qhat[i + 1, :] = ep @ Q[r, :]
    if orientation == "minus_plus":
        qhat[K, :] = ep @ Q[(K - 1) * kp1:, :]
        qhat[K, (K - 1) * kp1:] -= beta / h[-1] * ep
    else:
        qhat[0, :] = em @ Q[:kp1, :]
        qhat[0, :kp1] += beta / h[0] * em

    A = np.zeros((N, N))
    for i in range(K):
        r = slice(i * kp1, (i + 1) * kp1)
        A[r, :] = np.outer(em, -qhat[i, :]) - np.outer(ep, -qhat[i + 1, :]) - S @ Q[r, :]
        A[r, :] *= 2.0 / h[i]
    return A
