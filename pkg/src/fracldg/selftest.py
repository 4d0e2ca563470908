"""Runtime self-checks: re-verify the core mathematical identities of the
assembled pieces on small grids, independently of the development test suite.

Each suite returns a pass/fail result with the measured deviation, so a
damaged build (bad compiler flags, broken BLAS, edited tables) is caught at
the installation site, not just on CI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import DgField, l2_project, to_piecewise
from .ldg import FluxSpec
from .mesh import Mesh1D, make_mesh
from .operators import RieszOperator, apply, assemble_riesz_operator
from .oracle import (
    PiecewisePoly,
    Side,
    frac_integral_piecewise,
    frac_transform,
    piece_halfline_terms,
    shifted_power_frac_integral,
)
from .problems import _project_halfline_power, make_example
from .quadrature import gauss_legendre, legendre_eval
from .timestepping import lserk_step

__all__ = [
    "SelftestReport", "SuiteResult", "run_selftest",
    "suite_adjoint", "suite_oracle_exactness", "suite_positivity",
    "suite_reflection", "suite_semigroup", "suite_stability",
    "suite_temporal_order",
]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class SelftestReport:
    results: tuple[SuiteResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        out = [f"{r.name:<16} {'pass' if r.passed else 'FAIL':<5} {r.detail}"
               for r in self.results]
        good = sum(r.passed for r in self.results)
        out.append(f"selftest: {good}/{len(self.results)} suites passed")
        return out


_ADJOINT_GRID = ((10, 0, 0.2), (10, 2, 0.8), (12, 1, 0.5), (8, 3, 0.3))


def suite_adjoint(seed: int = 0, operator: RieszOperator | None = None) -> SuiteResult:
    """One-sided matrices must be transposes of each other (uniform mesh)."""
    del seed
    ops = ([operator] if operator is not None else
           [assemble_riesz_operator(make_mesh(0.0, 1.0, K), k, s)
            for K, k, s in _ADJOINT_GRID])
    dev = max(float(np.abs(op.right - op.left.T).max() / np.abs(op.left).max())
              for op in ops)
    return SuiteResult("adjoint", dev <= 1e-12,
                       f"max relative deviation {dev:.2e} (bound 1e-12)")


def suite_positivity(seed: int = 0) -> SuiteResult:
    """The combined matrix must be positive semidefinite up to roundoff."""
    op = assemble_riesz_operator(make_mesh(0.0, 1.0, 16), 2, 0.5)
    bound = 1e-10 * float(np.linalg.norm(op.matrix, 2))
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(200):
        v = rng.standard_normal(op.dim)
        worst = min(worst, float(v @ op.matrix @ v) / float(v @ v))
    return SuiteResult("positivity", worst >= -bound,
                       f"worst Rayleigh quotient {worst:.2e} (bound {-bound:.2e})")


def suite_reflection(seed: int = 0) -> SuiteResult:
    """Assembling on the reflected mesh and conjugating by the
    reflect-and-parity permutation must turn the left matrix into the right."""
    del seed
    worst = 0.0
    for boundaries in (np.linspace(0.0, 1.0, 8),
                       np.array([0.0, 0.15, 0.4, 0.55, 0.8, 1.0])):
        mesh = Mesh1D(a=0.0, b=1.0, boundaries=boundaries.copy())
        mirror = Mesh1D(a=0.0, b=1.0,
                        boundaries=(1.0 - mesh.boundaries)[::-1].copy())
        order, kp1 = 2, 3
        op = assemble_riesz_operator(mesh, order, 0.4)
        opm = assemble_riesz_operator(mirror, order, 0.4)
        K = mesh.num_elements
        sign = np.fromfunction(lambda m, n: (-1.0) ** (m + n), (kp1, kp1))
        conj = np.zeros_like(opm.left)
        for i in range(K):
            for j in range(K):
                blk = opm.left[(K - 1 - i) * kp1:(K - i) * kp1,
                               (K - 1 - j) * kp1:(K - j) * kp1]
                conj[i * kp1:(i + 1) * kp1, j * kp1:(j + 1) * kp1] = blk * sign
        worst = max(worst, float(np.abs(op.right - conj).max()
                                 / np.abs(op.left).max()))
    return SuiteResult("reflection", worst <= 1e-12,
                       f"max relative deviation {worst:.2e} (bound 1e-12)")


def suite_semigroup(seed: int = 0) -> SuiteResult:
    """Fractional integrals compose: applying order s2 then s1 must agree
    with the single order s1+s2 transform."""
    del seed
    from .oracle import PiecewisePoly

    ramp = PiecewisePoly.single_piece([0.0, 1.0], (0.0, 1.0))
    s1, s2 = 0.3, 0.4
    worst = 0.0
    for x in (0.3, 0.9, 1.5, 4.0):
        direct = frac_integral_piecewise(Side.LEFT, s1 + s2, ramp, x)
        composed = sum(
            coef * math.gamma(p + 1.0) / math.gamma(p + 1.0 + s2)
            * shifted_power_frac_integral(s1, base, p + s2, x)
            for base, p, coef in piece_halfline_terms(0.0, 1.0, [0.0, 1.0])
        )
        worst = max(worst, abs(composed - direct) / max(abs(direct), 1e-300))
    return SuiteResult("semigroup", worst <= 1e-11,
                       f"max relative deviation {worst:.2e} (bound 1e-11)")


def _right_halfline_terms(c: float, d: float, coeffs) -> tuple:
    """P(t) 1_{[c,d]} as a combination of powers (base - t)_+^p."""
    a = np.asarray(coeffs, dtype=float)
    width = d - c
    m = np.zeros_like(a)
    for q in range(a.size):
        m[q] = sum(a[p] * math.comb(p, q) * width ** (p - q) * (-1.0) ** q
                   for p in range(q, a.size))
    return tuple((d - tb, p, coef)
                 for tb, p, coef in piece_halfline_terms(0.0, width, m))


def _one_sided_reference(mesh: Mesh1D, order: int, s: float, side: Side) -> np.ndarray:
    """Dense one-sided integral matrix built column by column from the
    closed-form transform of each basis function.

    Near the source piece the column is the exact modal projection of the
    half-line power terms. A width or more away those terms cancel against
    each other down to entries ~1e-8, amplified by the (2/h)^p coefficient
    scale, so far target elements instead integrate the pointwise transform
    (analytic there) with plain Gauss quadrature.
    """
    K, kp1 = mesh.num_elements, order + 1
    ref = np.zeros((K * kp1, K * kp1))
    far = gauss_legendre(16)
    phi, _ = legendre_eval(order, far.nodes)
    for j in range(K):
        for n in range(kp1):
            coeffs = np.zeros((K, kp1))
            coeffs[j, n] = 1.0
            piece = to_piecewise(DgField(mesh, order, coeffs)).pieces[j]
            c, d = mesh.boundaries[j], mesh.boundaries[j + 1]
            terms = (piece_halfline_terms(c, d, piece) if side is Side.LEFT
                     else _right_halfline_terms(c, d, piece))
            col = np.zeros((K, kp1))
            for base, p, coef in terms:
                ratio = math.gamma(p + 1.0) / math.gamma(p + 1.0 + s)
                col += coef * ratio * _project_halfline_power(
                    mesh, order, base, p + s, side)
            width = d - c
            poly = PiecewisePoly.single_piece(piece, (c, d))
            for i in range(K):
                A, B = mesh.boundaries[i], mesh.boundaries[i + 1]
                if side is Side.LEFT:
                    faraway = A >= d + width
                else:
                    faraway = B <= c - width
                if faraway:
                    x = 0.5 * (A + B) + 0.5 * (B - A) * far.nodes
                    vals = frac_transform(side, s, poly, x)
                    col[i] = phi @ (far.weights * vals)
            ref[:, j * kp1 + n] = col.ravel()
    return ref


def suite_oracle_exactness(seed: int = 0,
                           combos=((6, 2, 0.5), (8, 1, 0.3))) -> SuiteResult:
    """Every assembled column must equal the exact modal projection of the
    closed-form transform of its basis function, both sides; applying the
    combined operator to projected monomials must match as well."""
    del seed
    worst = 0.0
    for K, order, s in combos:
        mesh = make_mesh(0.0, 1.0, K)
        op = assemble_riesz_operator(mesh, order, s)
        left_ref = _one_sided_reference(mesh, order, s, Side.LEFT)
        right_ref = _one_sided_reference(mesh, order, s, Side.RIGHT)
        scale = float(np.abs(left_ref).max())
        worst = max(worst,
                    float(np.abs(op.left - left_ref).max()) / scale,
                    float(np.abs(op.right - right_ref).max()) / scale)
        combined = (left_ref + right_ref) / (2.0 * math.cos(0.5 * math.pi * s))
        for p in range(order + 1):
            u = l2_project(lambda x: x ** p, mesh, order)
            got = apply(op, u).coeffs.ravel()
            ref = combined @ u.coeffs.ravel()
            worst = max(worst, float(np.abs(got - ref).max()
                                     / np.abs(ref).max()))
    return SuiteResult("oracle-exactness", worst <= 1e-10,
                       f"max relative deviation {worst:.2e} (bound 1e-10)")


def suite_stability(seed: int = 0) -> SuiteResult:
    """A short source-free shock run must keep its discrete L2 norm
    non-increasing (within roundoff slack per step)."""
    del seed
    from .harness import stable_control
    from .timestepping import integrate

    prob = make_example("example3", 1.5)
    mesh = make_mesh(*prob.spec.domain, 40)
    flux = FluxSpec()
    op = assemble_riesz_operator(mesh, 2, 2.0 - prob.spec.alpha)
    ctrl = stable_control(prob.spec, flux, op, mesh, 2, cfl=0.1, final_time=0.2)
    res = integrate(prob.spec, flux, op, mesh, 2, ctrl)
    norms = np.array([row[3] for row in res.step_log])
    growth = float((np.diff(norms) / norms[:-1]).max())
    return SuiteResult("stability", growth <= 1e-8,
                       f"max per-step norm growth {growth:.2e} (bound 1e-8)")


def suite_temporal_order(seed: int = 0) -> SuiteResult:
    """The time integrator must show at least its design order on u' = -u."""
    del seed
    errors = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        y = np.array([1.0])
        steps = round(1.0 / dt)
        for i in range(steps):
            y = lserk_step(lambda u, t: -u, y, i * dt, dt)
        errors.append(abs(float(y[0]) - math.exp(-1.0)))
    orders = [math.log(a / b) / math.log(2.0) for a, b in zip(errors, errors[1:])]
    worst = min(orders)
    return SuiteResult("temporal-order", worst >= 3.7,
                       f"observed orders {', '.join(f'{o:.2f}' for o in orders)} "
                       "(bound 3.7)")


SUITES = (
    suite_adjoint,
    suite_positivity,
    suite_reflection,
    suite_semigroup,
    suite_oracle_exactness,
    suite_stability,
    suite_temporal_order,
)


def run_selftest(seed: int = 0) -> SelftestReport:
    """Run every suite; the report carries one result per suite."""
    return SelftestReport(results=tuple(suite(seed) for suite in SUITES))
