"""Discrete Riesz fractional-integral operator on DG fields.

For a mesh, a polynomial order k and an integral order s in (0, 1), the
operator maps modal coefficients of a field p to the modal coefficients of
the L2 projection of (I_L^s p + I_R^s p)/(2 cos(s pi/2)) onto the same DG
space. Entries are mass-scaled, i.e. the inverse of the diagonal orthonormal
mass matrix is already folded in:

    G[(i,m),(j,n)] = (2/h_i) int_{I_i} phi_m(xi_i(x)) T_s[phi_n 1_{I_j}](x) dx.

On uniform meshes the left-sided matrix is block lower-triangular Toeplitz,
G_left[i,j] = (h/2)^s V_{i-j}, and the right-sided one follows by parity,
V^R_L[m,n] = (-1)^(m+n) V_L[m,n]. The unit blocks V_L are computed exactly:
the self block in closed form, the adjacent block split into a closed-form
part (the branch point sits at the shared edge) plus Gauss quadrature of an
analytic factor, and far blocks by quadrature of the all-positive series. A
slower per-pair path assembles arbitrary meshes and serves as an independent
cross-check of the blocked one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedMeshError
from .field import DgField
from .mesh import Mesh1D
from .oracle import _piece_value, _power_ratio, gamma_fn
from .quadrature import gauss_legendre, legendre_eval, legendre_monomial_coeffs

_BLOCK_QUAD = 32
_ADJACENT_QUAD = 48
_SERIES_TOL = 1e-18
_SERIES_MAX_TERMS = 600


def _shift_expansion(C: np.ndarray, shift: float) -> np.ndarray:
    """Coefficient rows re-expanded in powers of (xi - shift)."""
    kp1 = C.shape[1]
    out = np.zeros_like(C)
    for q in range(kp1):
        for p in range(q, kp1):
            out[:, q] += C[:, p] * math.comb(p, q) * shift ** (p - q)
    return out


def _edge_moment(r: int, mu: float) -> float:
    """int_{-1}^{1} (1+xi)^(r+mu) dxi."""
    return 2.0 ** (r + mu + 1.0) / (r + mu + 1.0)


def _self_block(s: float, order: int, C_left: np.ndarray) -> np.ndarray:
    # V_0[m,n] = sum_p b^n_p Gpp(p,s) sum_r b^m_r int (1+xi)^(r+p+s)
    kp1 = order + 1
    V = np.zeros((kp1, kp1))
    for n in range(kp1):
        for p in range(kp1):
            bn = C_left[n, p]
            if bn == 0.0:
                continue
            g = bn * _power_ratio(p, s)
            for m in range(kp1):
                acc = 0.0
                for r in range(kp1):
                    if C_left[m, r] != 0.0:
                        acc += C_left[m, r] * _edge_moment(r, p + s)
                V[m, n] += g * acc
    return V


def _adjacent_block(s: float, order: int, C_left: np.ndarray, C_right: np.ndarray) -> np.ndarray:
    """V_1: source piece [-3,-1], target [-1,1]; truncation identity split.

    The expansion-about(-3) part is analytic across the target (branch point
    two widths away), so Gauss quadrature is exact to machine precision; the
    re-expansion-about(-1) part has its branch point at the shared edge and
    integrates in closed form.
    """
    kp1 = order + 1
    rule = gauss_legendre(_ADJACENT_QUAD)
    phi, _ = legendre_eval(order, rule.nodes)
    V = np.zeros((kp1, kp1))
    # full part: phi_n as a function of t on [-3,-1] has local xi = t + 2, so
    # the expansion in (t+3) = (xi+1) is the plain left-edge expansion C_left
    for n in range(kp1):
        for p in range(kp1):
            bn = C_left[n, p]
            if bn == 0.0:
                continue
            smooth = bn * _power_ratio(p, s) * (rule.nodes + 3.0) ** (p + s)
            V[:, n] += phi @ (rule.weights * smooth)
    # re-expansion part: phi_n in powers of (t+1) = (xi - 1) uses C_right
    for n in range(kp1):
        for q in range(kp1):
            en = C_right[n, q]
            if en == 0.0:
                continue
            g = en * _power_ratio(q, s)
            for m in range(kp1):
                acc = 0.0
                for r in range(kp1):
                    if C_left[m, r] != 0.0:
                        acc += C_left[m, r] * _edge_moment(r, q + s)
                V[m, n] -= g * acc
    return V


def _far_blocks(s: float, order: int, C_left: np.ndarray, Ls: np.ndarray) -> np.ndarray:
    """V_L for all L >= 2 at once, via the all-positive series at quadrature
    nodes; the integrand is analytic on the target element."""
    kp1 = order + 1
    if Ls.size == 0:
        return np.zeros((0, kp1, kp1))
    rule = gauss_legendre(_BLOCK_QUAD)
    phi, _ = legendre_eval(order, rule.nodes)
    z = 2.0 * Ls[:, None] + 1.0 + rule.nodes[None, :]  # (L, g): x - c_j
    w = 2.0 / z
    # M_p(w) = sum_m g_m w^m / (p+m+1), g_0 = 1, g_{m+1} = g_m (m+1-s)/(m+1)
    M = np.zeros((kp1, Ls.size, rule.nodes.size))
    g = 1.0
    wm = np.ones_like(w)
    for m in range(_SERIES_MAX_TERMS):
        term = g * wm
        for p in range(kp1):
            M[p] += term / (p + m + 1.0)
        if term.max() < _SERIES_TOL and m > 8:
            break
        g *= (m + 1.0 - s) / (m + 1.0)
        wm *= w
    else:
        raise ArithmeticError("far-field block series failed to converge")
    pref = 2.0 * z ** (s - 1.0) / gamma_fn(s)  # piece width 2
    # V_L[m,n] = sum_g wq_g phi_m(g) * pref * sum_p b^n_p 2^p M_p
    pow2 = 2.0 ** np.arange(kp1)
    T = np.einsum("np,pLg->nLg", C_left * pow2[None, :], M) * pref[None, :, :]
    V = np.einsum("mg,g,nLg->Lmn", phi, rule.weights, T)
    return V


def uniform_unit_blocks(s: float, order: int, num_blocks: int) -> np.ndarray:
    """V_L for L = 0 .. num_blocks-1 on the unit (width-2) uniform layout."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"integral order must lie in (0, 1), got {s}")
    C = legendre_monomial_coeffs(order)
    C_left = _shift_expansion(C, -1.0)   # powers of (1 + xi)
    C_right = _shift_expansion(C, 1.0)   # powers of (xi - 1)
    out = np.zeros((num_blocks, order + 1, order + 1))
    out[0] = _self_block(s, order, C_left)
    if num_blocks > 1:
        out[1] = _adjacent_block(s, order, C_left, C_right)
    if num_blocks > 2:
        out[2:] = _far_blocks(s, order, C_left, np.arange(2, num_blocks))
    return out


@dataclass
class RieszOperator:
    """Assembled discrete Riesz integral of order s on a DG space."""

    mesh: Mesh1D
    order: int
    s: float
    matrix: np.ndarray
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    blocks: np.ndarray | None = None  # combined Toeplitz blocks, uniform only

    @property
    def dim(self) -> int:
        return self.mesh.num_elements * (self.order + 1)

    def apply_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        K, kp1 = self.mesh.num_elements, self.order + 1
        if coeffs.shape != (K, kp1):
            raise ValueError(f"expected coefficients of shape {(K, kp1)}")
        return (self.matrix @ coeffs.reshape(-1)).reshape(K, kp1)


def assemble_riesz_operator(mesh: Mesh1D, order: int, s: float, *,
                            combined_only: bool = False) -> RieszOperator:
    """Build the operator; block-Toeplitz path on uniform meshes, per-pair
    otherwise. combined_only skips storing the one-sided matrices."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"integral order must lie in (0, 1), got {s}")
    if order < 0:
        raise ValueError("order must be nonnegative")
    K, kp1 = mesh.num_elements, order + 1
    coeff = 1.0 / (2.0 * math.cos(0.5 * math.pi * s))
    if mesh.uniform:
        h = float(mesh.widths[0])
        V = uniform_unit_blocks(s, order, K) * (0.5 * h) ** s
        parity = np.fromfunction(lambda m, n: (-1.0) ** (m + n), (kp1, kp1))
        blocks = np.zeros((2 * K - 1, kp1, kp1))
        for L in range(K):
            blocks[K - 1 + L] += coeff * V[L]
            blocks[K - 1 - L] += coeff * (V[L] * parity)
        matrix = _block_toeplitz_dense(blocks, K)
        left = right = None
        if not combined_only:
            lower = np.zeros_like(blocks)
            lower[K - 1:] = V
            left = _block_toeplitz_dense(lower, K)
            upper = np.zeros_like(blocks)
            for L in range(K):
                upper[K - 1 - L] = V[L] * parity
            right = _block_toeplitz_dense(upper, K)
        return RieszOperator(mesh, order, s, matrix, left, right, blocks)
    left = _assemble_left_generic(mesh.widths, order, s)
    right = _conjugate_right(_assemble_left_generic(mesh.widths[::-1].copy(), order, s), order)
    matrix = coeff * (left + right)
    if combined_only:
        left = right = None
    return RieszOperator(mesh, order, s, matrix, left, right, None)


def _block_toeplitz_dense(blocks: np.ndarray, K: int) -> np.ndarray:
    kp1 = blocks.shape[1]
    out = np.empty((K * kp1, K * kp1))
    for i in range(K):
        for j in range(K):
            out[i * kp1:(i + 1) * kp1, j * kp1:(j + 1) * kp1] = blocks[K - 1 + i - j]
    return out


def _conjugate_right(left_mirror: np.ndarray, order: int) -> np.ndarray:
    """Right-sided matrix from the left-sided one on the reversed mesh:
    reverse the element order and flip basis parity on both sides."""
    kp1 = order + 1
    K = left_mirror.shape[0] // kp1
    sign = np.fromfunction(lambda m, n: (-1.0) ** (m + n), (kp1, kp1))
    out = np.zeros_like(left_mirror)
    for i in range(K):
        for j in range(K):
            blk = left_mirror[(K - 1 - i) * kp1:(K - i) * kp1,
                              (K - 1 - j) * kp1:(K - j) * kp1]
            out[i * kp1:(i + 1) * kp1, j * kp1:(j + 1) * kp1] = blk * sign
    return out


def _assemble_left_generic(widths: np.ndarray, order: int, s: float) -> np.ndarray:
    """Per-pair assembly of the left-sided matrix for arbitrary widths.

    Self and adjacent pairs get the same exact treatment as the uniform
    blocks; distant pairs use quadrature of the stable pointwise transform.
    """
    K, kp1 = widths.size, order + 1
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    C = legendre_monomial_coeffs(order)
    C_left = _shift_expansion(C, -1.0)
    C_right = _shift_expansion(C, 1.0)
    rule = gauss_legendre(_ADJACENT_QUAD)
    phi, _ = legendre_eval(order, rule.nodes)
    out = np.zeros((K * kp1, K * kp1))
    V0 = _self_block(s, order, C_left)
    for i in range(K):
        hi = widths[i]
        xi_nodes = edges[i] + 0.5 * hi * (1.0 + rule.nodes)
        for j in range(i + 1):
            hj = widths[j]
            blk = np.zeros((kp1, kp1))
            if j == i:
                blk = (0.5 * hi) ** s * V0
            elif j == i - 1:
                # full part: expansion about the far edge of the source element
                # is analytic on the target; quadrature is effectively exact
                zz = (xi_nodes - edges[j]) / (0.5 * hj)
                for n in range(kp1):
                    for p in range(kp1):
                        bn = C_left[n, p] * (0.5 * hj) ** s * _power_ratio(p, s)
                        if bn == 0.0:
                            continue
                        blk[:, n] += bn * (phi @ (rule.weights * zz ** (p + s)))
                # re-expansion about the shared edge: closed form
                for n in range(kp1):
                    for q in range(kp1):
                        en = C_right[n, q] / (0.5 * hj) ** q
                        if en == 0.0:
                            continue
                        g = en * _power_ratio(q, s) * (0.5 * hi) ** (q + s)
                        for m in range(kp1):
                            acc = 0.0
                            for r in range(kp1):
                                if C_left[m, r] != 0.0:
                                    acc += C_left[m, r] * _edge_moment(r, q + s)
                            blk[m, n] -= g * acc
            else:
                # distant pair: pointwise stable transform at target nodes
                scale = (0.5 * hj) ** np.arange(kp1)
                for n in range(kp1):
                    coeffs_n = C_left[n] / scale  # powers of (t - c_j)
                    vals = np.array([
                        _piece_value(edges[j], edges[j + 1], coeffs_n, s, x, None)
                        for x in xi_nodes
                    ])
                    blk[:, n] = phi @ (rule.weights * vals)
            out[i * kp1:(i + 1) * kp1, j * kp1:(j + 1) * kp1] = blk
    return out


def apply(op: RieszOperator, p: DgField) -> DgField:
    """Discrete Riesz integral of the field p, as a field on the same space."""
    _check_compatible(op, p)
    return DgField(p.mesh, p.order, op.apply_coeffs(p.coeffs))


def fast_apply_coeffs(op: RieszOperator, coeffs: np.ndarray) -> np.ndarray:
    """Combined operator via FFT block-circulant embedding; O(K log K)
    instead of the dense O(K^2)."""
    if op.blocks is None:
        raise UnsupportedMeshError("fast apply requires a uniform-mesh operator")
    K, kp1 = op.mesh.num_elements, op.order + 1
    if coeffs.shape != (K, kp1):
        raise ValueError(f"expected coefficients of shape {(K, kp1)}")
    N = 2 * K  # circulant embedding size covers lags -(K-1) .. K-1
    # circulant first column c[l] = block at lag l (wrap negative lags)
    lag = np.zeros((N, kp1, kp1))
    for L in range(-K + 1, K):
        lag[L % N] = op.blocks[K - 1 + L]
    Chat = np.fft.rfft(lag, axis=0)
    pad = np.zeros((N, kp1))
    pad[:K] = coeffs
    Uhat = np.fft.rfft(pad, axis=0)
    Yhat = np.einsum("fmn,fn->fm", Chat, Uhat)
    y = np.fft.irfft(Yhat, n=N, axis=0)
    return y[:K]


def fast_apply_uniform(op: RieszOperator, p: DgField) -> DgField:
    """Same result as apply() on uniform meshes, computed in O(K log K)."""
    _check_compatible(op, p)
    return DgField(p.mesh, p.order, fast_apply_coeffs(op, p.coeffs))


def _check_compatible(op: RieszOperator, p: DgField) -> None:
    if p.order != op.order:
        raise ValueError(f"field order {p.order} does not match operator order {op.order}")
    if p.mesh.num_elements != op.mesh.num_elements or not np.array_equal(
        p.mesh.boundaries, op.mesh.boundaries
    ):
        raise ValueError("field mesh does not match operator mesh")
