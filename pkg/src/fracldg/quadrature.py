"""Gauss quadrature rules and the orthonormal Legendre modal basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights on the reference interval [-1, 1].

    exact_degree is the highest polynomial degree integrated exactly
    against the rule's weight function.
    """

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __post_init__(self) -> None:
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must be matching 1d arrays")


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1], exact through degree 2n-1."""
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    x, w = leggauss(n)
    return QuadratureRule(nodes=x, weights=w, exact_degree=2 * n - 1)


def gauss_jacobi(n: int, a: float, b: float) -> QuadratureRule:
    """n-point Gauss-Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1].

    Exact for polynomials through degree 2n-1 against the weight. Requires
    a, b > -1 so the weight is integrable.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if a <= -1.0 or b <= -1.0:
        raise ValueError(f"jacobi exponents must exceed -1, got a={a}, b={b}")
    x, w = roots_jacobi(n, a, b)
    return QuadratureRule(nodes=x, weights=w, exact_degree=2 * n - 1)


def legendre_eval(k: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and x-derivatives of the orthonormal Legendre basis on [-1, 1].

    Returns arrays of shape (k+1, len(x)) with row n holding
    phi_n = sqrt((2n+1)/2) * P_n, so that (phi_m, phi_n) = delta_mn.
    Points outside [-1 - 1e-12, 1 + 1e-12] are rejected.
    """
    if k < 0:
        raise ValueError(f"polynomial order must be >= 0, got k={k}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("evaluation point outside the reference interval")

    vals = np.empty((k + 1, x.size))
    ders = np.empty((k + 1, x.size))
    # P_n by the three-term recurrence, P_n' by the derivative recurrence
    # (1 - x^2) P_n'(x) = n (P_{n-1} - x P_n), rearranged to avoid the
    # endpoint division: P_n' = n P_{n-1} + x P_{n-1}' works termwise.
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    vals[0] = p_prev
    ders[0] = d_prev
    if k >= 1:
        p_cur = x.copy()
        d_cur = np.ones_like(x)
        vals[1] = p_cur
        ders[1] = d_cur
        for n in range(1, k):
            p_next = ((2 * n + 1) * x * p_cur - n * p_prev) / (n + 1)
            d_next = d_prev + (2 * n + 1) * p_cur
            p_prev, p_cur = p_cur, p_next
            d_prev, d_cur = d_cur, d_next
            vals[n + 1] = p_cur
            ders[n + 1] = d_cur
    scale = np.sqrt((2.0 * np.arange(k + 1) + 1.0) / 2.0)
    return vals * scale[:, None], ders * scale[:, None]


@dataclass(frozen=True, eq=False)
class LegendreBasis:
    """Orthonormal Legendre modal basis of order k with cached endpoint data.

    stiffness[m, n] = int_{-1}^{1} phi_m'(x) phi_n(x) dx.
    """

    order: int
    at_left: np.ndarray
    at_right: np.ndarray
    stiffness: np.ndarray

    @classmethod
    def create(cls, order: int) -> "LegendreBasis":
        rule = gauss_legendre(order + 2)
        vals, ders = legendre_eval(order, rule.nodes)
        stiffness = (ders * rule.weights) @ vals.T
        left, _ = legendre_eval(order, np.array([-1.0]))
        right, _ = legendre_eval(order, np.array([1.0]))
        return cls(
            order=order,
            at_left=left[:, 0],
            at_right=right[:, 0],
            stiffness=stiffness,
        )


def legendre_monomial_coeffs(order: int) -> np.ndarray:
    """C[n, p]: coefficient of xi^p in the orthonormal Legendre phi_n."""
    C = np.zeros((order + 1, order + 1))
    for n in range(order + 1):
        e = np.zeros(n + 1)
        e[n] = 1.0
        C[n, : n + 1] = np.polynomial.legendre.leg2poly(e)
        C[n] *= np.sqrt((2 * n + 1) / 2.0)
    return C
