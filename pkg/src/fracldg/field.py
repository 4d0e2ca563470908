"""Piecewise polynomial DG fields in the orthonormal Legendre modal basis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .mesh import Mesh1D
from .quadrature import gauss_legendre, legendre_eval


@dataclass(eq=False)
class DgField:
    """Modal coefficients, shape (K, k+1); coeffs[j, n] multiplies phi_n on I_j."""

    mesh: Mesh1D
    order: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.mesh.num_elements, self.order + 1)
        if self.coeffs.shape != expected:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match mesh/order {expected}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    def copy(self) -> "DgField":
        return DgField(self.mesh, self.order, self.coeffs.copy())


def l2_project(
    f: Callable[[np.ndarray], np.ndarray],
    mesh: Mesh1D,
    order: int,
    num_points: int | None = None,
) -> DgField:
    """Element-wise L2 projection of a callable onto the order-k modal space.

    The mass matrix is (h_j/2) * I in the orthonormal basis, so the
    coefficients reduce to reference-interval integrals of f against phi_n.
    num_points defaults to order + 5 (enough for the built-in data).
    """
    n_q = num_points if num_points is not None else order + 5
    rule = gauss_legendre(n_q)
    vals, _ = legendre_eval(order, rule.nodes)  # (k+1, n_q)
    weighted = vals * rule.weights  # phi_n(xi_i) w_i
    coeffs = np.empty((mesh.num_elements, order + 1))
    for j in range(mesh.num_elements):
        x = mesh.from_reference(j, rule.nodes)
        coeffs[j] = weighted @ np.asarray(f(x), dtype=float)
    return DgField(mesh=mesh, order=order, coeffs=coeffs)


def eval_field(u: DgField, x: Union[float, np.ndarray], side: str = "interior"):
    """Evaluate a DG field at physical points.

    side selects the one-sided limit when a point sits exactly on an interior
    element boundary: "left" takes the element below, "right" the element
    above, and "interior" the containing element as located by searchsorted
    (the element above, except at x=b).
    """
    if side not in ("interior", "left", "right"):
        raise ValueError(f"unknown side '{side}'")
    scalar = np.isscalar(x)
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(pts)
    bnd = u.mesh.boundaries
    for i, xi in enumerate(pts):
        j = u.mesh.locate(xi)
        if side == "left" and j > 0 and np.isclose(xi, bnd[j]):
            j -= 1
        elif side == "right" and j < u.mesh.num_elements - 1 and np.isclose(xi, bnd[j + 1]):
            j += 1
        ref = u.mesh.to_reference(j, xi)
        ref = min(max(ref, -1.0), 1.0)
        vals, _ = legendre_eval(u.order, np.array([ref]))
        out[i] = u.coeffs[j] @ vals[:, 0]
    return float(out[0]) if scalar else out


def element_values(u: DgField, ref_nodes: np.ndarray) -> np.ndarray:
    """Values of the field at the same reference nodes in every element.

    Returns shape (K, len(ref_nodes)). This is the bulk evaluation used by
    norms, fluxes, and snapshot export.
    """
    vals, _ = legendre_eval(u.order, ref_nodes)
    return u.coeffs @ vals


def l2_norm(u: DgField, num_points: int | None = None) -> float:
    """Global L2 norm; exact for modal data (orthonormal basis)."""
    # ||u||^2 = sum_j (h_j/2) * sum_n c_{j,n}^2, independent of quadrature.
    del num_points
    return float(np.sqrt(np.sum(0.5 * u.mesh.widths[:, None] * u.coeffs**2)))


def l2_error(
    u: DgField,
    ref: Union[DgField, Callable[[np.ndarray], np.ndarray]],
    num_points: int | None = None,
) -> float:
    """Global L2 distance between a field and a reference (field or callable).

    Uses 2k+4 Gauss points per element unless overridden.
    """
    n_q = num_points if num_points is not None else 2 * u.order + 4
    rule = gauss_legendre(n_q)
    u_vals = element_values(u, rule.nodes)
    if isinstance(ref, DgField):
        if ref.mesh is not u.mesh and ref.mesh.num_elements != u.mesh.num_elements:
            raise ValueError("fields live on different meshes")
        r_vals = element_values(ref, rule.nodes)
    else:
        xs = np.stack(
            [u.mesh.from_reference(j, rule.nodes) for j in range(u.mesh.num_elements)]
        )
        r_vals = np.asarray(ref(xs.ravel()), dtype=float).reshape(xs.shape)
    diff2 = (u_vals - r_vals) ** 2
    per_element = 0.5 * u.mesh.widths * (diff2 @ rule.weights)
    return float(np.sqrt(per_element.sum()))


def snapshot_rows(u: DgField, num_points: int | None = None) -> np.ndarray:
    """(x, u) sample rows at per-element quadrature points, increasing in x."""
    n_q = num_points if num_points is not None else 2 * u.order + 4
    rule = gauss_legendre(n_q)
    vals = element_values(u, rule.nodes)
    xs = np.stack(
        [u.mesh.from_reference(j, rule.nodes) for j in range(u.mesh.num_elements)]
    )
    return np.column_stack([xs.ravel(), vals.ravel()])


def interface_traces(u: DgField) -> tuple[np.ndarray, np.ndarray]:
    """One-sided traces at all K+1 interfaces.

    Returns (minus, plus): minus[j] is the trace from below at interface j
    (nan at the left boundary), plus[j] the trace from above (nan at the
    right boundary).
    """
    vals_l, _ = legendre_eval(u.order, np.array([-1.0]))
    vals_r, _ = legendre_eval(u.order, np.array([1.0]))
    at_left = u.coeffs @ vals_l[:, 0]  # trace at each element's left edge
    at_right = u.coeffs @ vals_r[:, 0]
    K = u.mesh.num_elements
    minus = np.full(K + 1, np.nan)
    plus = np.full(K + 1, np.nan)
    minus[1:] = at_right
    plus[:-1] = at_left
    return minus, plus


def to_piecewise(u: DgField) -> "PiecewisePoly":
    """The field as an exact piecewise polynomial (coefficients per element
    about its left edge), suitable for the closed-form fractional transforms."""
    from .oracle import PiecewisePoly
    from .quadrature import legendre_monomial_coeffs

    kp1 = u.order + 1
    C = legendre_monomial_coeffs(u.order)
    pieces = []
    for j in range(u.mesh.num_elements):
        a = 2.0 / u.mesh.widths[j]
        # phi_n(a*y - 1) with y = x - left edge, as powers of y
        poly = np.zeros(kp1)
        for n in range(kp1):
            cn = u.coeffs[j, n]
            if cn == 0.0:
                continue
            basis = np.zeros(kp1)
            basis[0] = 1.0
            deg = 0
            for p in range(kp1):
                if C[n, p] != 0.0:
                    poly[: deg + 1] += cn * C[n, p] * basis[: deg + 1]
                if p < u.order:
                    nxt = np.zeros(kp1)
                    nxt[1 : deg + 2] = a * basis[: deg + 1]
                    nxt[: deg + 1] -= basis[: deg + 1]
                    basis = nxt
                    deg += 1
        pieces.append(poly)
    return PiecewisePoly(u.mesh.boundaries.copy(), tuple(pieces))
