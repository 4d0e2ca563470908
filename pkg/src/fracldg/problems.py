"""Built-in problems: two manufactured smooth runs and a shock-forming
Burgers run with fractional viscosity.

The manufactured sources need the fractional Laplacian of the initial
profile.  For compactly supported piecewise polynomials that operator has a
closed form: a finite sum of one-sided powers  coef * (x - base)^(p - alpha).
We keep that sum explicitly (terms below) and build two consumers from it:
a pointwise evaluator for the source closure and an exact L2 projector so
the semidiscrete source carries no quadrature error near the support edges,
where the powers are not smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ldg import ProblemSpec, SourceTerm
from .mesh import Mesh1D
from .oracle import (
    FracParams,
    PiecewisePoly,
    Side,
    gamma_fn,
    piece_halfline_terms,
)
from .quadrature import gauss_legendre, legendre_eval, legendre_monomial_coeffs

EXAMPLE_IDS = ("example1", "example2", "example3")

# Far elements see an integrand analytic in a Bernstein ellipse of radius
# >= 3 + sqrt(8); sixteen Gauss points resolve that far below roundoff.
_FAR_POINTS = 16

HalflineTerm = tuple[float, float, float]  # (base, power, coefficient)


@dataclass(frozen=True)
class BuiltinProblem:
    """A named problem plus the oracle data its source was built from."""

    id: str
    spec: ProblemSpec
    profile: PiecewisePoly
    frac_laplacian: Optional[Callable[[np.ndarray], np.ndarray]]
    default_final_time: float
    default_snapshot_interval: Optional[float] = None


# ---------------------------------------------------------------------------
# closed-form machinery


def _rl_derivative_terms(P: PiecewisePoly, alpha: float, side: Side,
                         scale: float = 1.0) -> tuple[HalflineTerm, ...]:
    """One-sided Riemann-Liouville derivative of P as half-line power terms.

    P must vanish fast enough at its breakpoints that every term keeps
    power > -1; the built-in profiles have integer coefficient arrays, so
    the cancellations behind that are exact and `scale` carries any overall
    rational factor.
    """
    Q = P if side is Side.LEFT else P.reflect()
    S = float(P.breakpoints[0] + P.breakpoints[-1])
    terms: list[HalflineTerm] = []
    for c, d, coeffs in zip(Q.breakpoints[:-1], Q.breakpoints[1:], Q.pieces):
        for base, p, coef in piece_halfline_terms(float(c), float(d), coeffs):
            mu = p - alpha
            if mu <= -1.0:
                raise ValueError(
                    "profile leaves a non-integrable power; derivative terms "
                    "need contact of order > alpha - 1 at every breakpoint")
            amp = scale * coef * gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - alpha)
            terms.append((float(base) if side is Side.LEFT else S - float(base),
                          mu, amp))
    return tuple(terms)


def _eval_halfline_sum(left: tuple[HalflineTerm, ...],
                       right: tuple[HalflineTerm, ...], x) -> np.ndarray:
    scalar = np.isscalar(x)
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(pts)
    for base, mu, coef in left:
        y = pts - base
        mask = y > 0.0
        out[mask] += coef * y[mask] ** mu
    for base, mu, coef in right:
        y = base - pts
        mask = y > 0.0
        out[mask] += coef * y[mask] ** mu
    return float(out[0]) if scalar else out


def _mode_matrix(order: int, h: float, t0: float, slope: float) -> np.ndarray:
    """Legendre modes re-expanded in powers of y, where xi = t0 + slope*(2/h)*y.

    Near branch only (|t0| <= 3), so the binomial sums stay benign.
    """
    C = legendre_monomial_coeffs(order)
    out = np.zeros((order + 1, order + 1))
    for m in range(order + 1):
        for p in range(order + 1):
            a = C[m, p]
            if a == 0.0:
                continue
            for r in range(p + 1):
                out[m, r] += a * math.comb(p, r) * t0 ** (p - r)
    step = slope * 2.0 / h
    out *= step ** np.arange(order + 1)
    return out


def _project_halfline_power(mesh: Mesh1D, order: int, base: float, mu: float,
                            side: Side) -> np.ndarray:
    """Exact modal L2 projection of (x-base)_+^mu or (base-x)_+^mu."""
    K = mesh.widths.size
    out = np.zeros((K, order + 1))
    far = gauss_legendre(_FAR_POINTS)
    for i in range(K):
        A, B = mesh.boundaries[i], mesh.boundaries[i + 1]
        h = mesh.widths[i]
        if side is Side.LEFT:
            lo, hi = A - base, B - base
        else:
            lo, hi = base - B, base - A
        if hi <= 0.0:
            continue
        if lo >= h:
            # branch point at least one width away: plain Gauss quadrature
            x = 0.5 * (A + B) + 0.5 * h * far.nodes
            y = x - base if side is Side.LEFT else base - x
            phi, _ = legendre_eval(order, far.nodes)
            out[i] = phi @ (far.weights * y ** mu)
            continue
        t0 = (2.0 / h) * (base - 0.5 * (A + B))
        modes = _mode_matrix(order, h, t0, 1.0 if side is Side.LEFT else -1.0)
        pw = mu + 1.0 + np.arange(order + 1)
        y0, y1 = max(lo, 0.0), hi
        out[i] = (2.0 / h) * (modes @ ((y1 ** pw - y0 ** pw) / pw))
    return out


def _project_piecewise(P: PiecewisePoly, mesh: Mesh1D, order: int) -> np.ndarray:
    """Exact modal L2 projection of a piecewise polynomial; elements are
    split at the profile's breakpoints so every panel is a single polynomial."""
    n = (P.degree + order) // 2 + 1
    gl = gauss_legendre(n)
    K = mesh.widths.size
    out = np.zeros((K, order + 1))
    for i in range(K):
        A, B = mesh.boundaries[i], mesh.boundaries[i + 1]
        h = mesh.widths[i]
        cuts = [t for t in P.breakpoints if A < t < B]
        edges = np.array([A, *cuts, B])
        for a1, b1 in zip(edges[:-1], edges[1:]):
            x = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * gl.nodes
            xi = (2.0 * x - A - B) / h
            phi, _ = legendre_eval(order, xi)
            out[i] += (b1 - a1) / h * (phi @ (gl.weights * P.eval(x)))
    return out


def _poly_product(P: PiecewisePoly, Q: PiecewisePoly) -> PiecewisePoly:
    # same breakpoint ladders required
    if not np.array_equal(P.breakpoints, Q.breakpoints):
        raise ValueError("piecewise product needs matching breakpoints")
    pieces = tuple(np.convolve(p, q) for p, q in zip(P.pieces, Q.pieces))
    return PiecewisePoly(P.breakpoints.copy(), pieces)


# ---------------------------------------------------------------------------
# the three built-in configurations


def _smooth_problem(domain: tuple[float, float], raw: PiecewisePoly,
                    scale: float, alpha: float, epsilon: float,
                    with_burgers: bool) -> tuple[ProblemSpec, PiecewisePoly,
                                                 Callable[[np.ndarray], np.ndarray]]:
    """ProblemSpec for exact solution e^{-t} u0 with manufactured source."""
    profile = scale * raw
    par = FracParams(alpha)
    left = _rl_derivative_terms(raw, alpha, Side.LEFT, scale)
    right = _rl_derivative_terms(raw, alpha, Side.RIGHT, scale)

    def frac_lap(x):
        # (-Lap)^{alpha/2} u0, positive-definite sign convention: the term
        # sum is the Riesz derivative, whose scaled form is the negative
        return -par.deriv_coeff * _eval_halfline_sum(left, right, x)

    def proj_stationary(mesh: Mesh1D, order: int) -> np.ndarray:
        acc = -_project_piecewise(profile, mesh, order)
        for base, mu, coef in left:
            acc -= epsilon * par.deriv_coeff * coef * _project_halfline_power(
                mesh, order, base, mu, Side.LEFT)
        for base, mu, coef in right:
            acc -= epsilon * par.deriv_coeff * coef * _project_halfline_power(
                mesh, order, base, mu, Side.RIGHT)
        return acc

    def part_stationary(x):
        return -profile.eval(x) + epsilon * frac_lap(x)

    time_factors = [lambda t: math.exp(-t)]
    projectors = [proj_stationary]
    parts = [part_stationary]
    f = fprime = None
    if with_burgers:
        advected = _poly_product(profile, profile.derivative())

        def proj_advected(mesh: Mesh1D, order: int) -> np.ndarray:
            return _project_piecewise(advected, mesh, order)

        time_factors.append(lambda t: math.exp(-2.0 * t))
        projectors.append(proj_advected)
        parts.append(advected.eval)
        f = lambda u: 0.5 * u * u
        fprime = lambda u: u

    def pointwise(x, t):
        return math.exp(-t) * parts[0](x) + (
            math.exp(-2.0 * t) * parts[1](x) if with_burgers else 0.0)

    source = SourceTerm(time_factors, projectors, pointwise)
    spec = ProblemSpec(
        domain=domain, alpha=alpha, epsilon=epsilon,
        u0=profile.eval, f=f, fprime=fprime, source=source,
        exact=lambda x, t: math.exp(-t) * profile.eval(x))
    return spec, profile, frac_lap


def _decaying_polynomial_problem(alpha: float) -> BuiltinProblem:
    # x^6 (1-x)^6 on [0,1]: integer coefficients, C^5 contact at both ends
    coeffs = np.zeros(13)
    for j in range(7):
        coeffs[6 + j] = (-1.0) ** j * math.comb(6, j)
    raw = PiecewisePoly.single_piece(coeffs, (0.0, 1.0))
    spec, profile, frac_lap = _smooth_problem(
        (0.0, 1.0), raw, 1.0, alpha, 1.0, with_burgers=False)
    return BuiltinProblem("example1", spec, profile, frac_lap,
                          default_final_time=0.5)


def _viscous_burgers_problem(alpha: float) -> BuiltinProblem:
    # (1-x^2)^4 / 10 supported on [-1,1], inside the domain [-2,2];
    # integer array with the 1/10 carried separately so the contact-order
    # cancellations in the derivative terms stay exact
    coeffs = np.zeros(9)
    for j in range(5):
        coeffs[4 + j] = (-1.0) ** j * math.comb(4, j) * 2.0 ** (4 - j)
    raw = PiecewisePoly.single_piece(coeffs, (-1.0, 1.0))
    spec, profile, frac_lap = _smooth_problem(
        (-2.0, 2.0), raw, 0.1, alpha, 1.0, with_burgers=True)
    return BuiltinProblem("example2", spec, profile, frac_lap,
                          default_final_time=0.5)


def _riemann_problem(alpha: float, classical_diffusion: bool) -> BuiltinProblem:
    profile = PiecewisePoly.single_piece([0.5], (-1.0, 0.0))
    spec = ProblemSpec(
        domain=(-2.0, 2.0), alpha=alpha, epsilon=0.04,
        u0=profile.eval, f=lambda u: 0.5 * u * u, fprime=lambda u: u,
        classical_diffusion=classical_diffusion)
    return BuiltinProblem("example3", spec, profile, None,
                          default_final_time=1.0, default_snapshot_interval=0.25)


def make_example(problem_id: str, alpha: float, *,
                 classical_diffusion: bool = False) -> BuiltinProblem:
    """Build one of the named problems at the requested fractional order.

    The classical flag (second-order diffusion, alpha = 2) is only meaningful
    for the source-free Riemann problem; the manufactured sources of the other
    two are tied to 1 < alpha < 2.
    """
    if problem_id not in EXAMPLE_IDS:
        raise ValueError(
            f"unknown problem '{problem_id}'; choose one of {EXAMPLE_IDS}")
    if classical_diffusion and problem_id != "example3":
        raise ValueError("classical diffusion comparison is only supported "
                         "for example3")
    if problem_id == "example1":
        return _decaying_polynomial_problem(alpha)
    if problem_id == "example2":
        return _viscous_burgers_problem(alpha)
    return _riemann_problem(alpha, classical_diffusion)


def source_eval(prob: BuiltinProblem, x, t: float):
    """Pointwise manufactured source; identically zero when none is attached."""
    scalar = np.isscalar(x)
    if prob.spec.source is None:
        return 0.0 if scalar else np.zeros_like(np.asarray(x, dtype=float))
    out = prob.spec.source.eval(x, t)
    return float(np.atleast_1d(out)[0]) if scalar else out


def exact_eval(prob: BuiltinProblem, x, t: float):
    """Exact solution when the problem has one, else None."""
    if prob.spec.exact is None:
        return None
    out = prob.spec.exact(x, t)
    return float(np.atleast_1d(out)[0]) if np.isscalar(x) else out
