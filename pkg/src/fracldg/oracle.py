"""Closed-form fractional calculus on compactly supported piecewise polynomials.

A function is stored as breakpoints c_0 < ... < c_M with per-piece monomial
coefficients about each piece's left endpoint, and is zero outside [c_0, c_M].
Every operation reduces to the shifted-power rule

    T_sigma[(t-c)^p 1_{t>=c}](x) = Gamma(p+1)/Gamma(p+1+sigma) * (x-c)^(p+sigma)

plus the truncation identity that writes a piece restricted to [c, d] as an
expansion about c minus a re-expansion about d. sigma > 0 yields left-sided
fractional integrals, sigma = -alpha in (-2, -1) the left Riemann-Liouville
derivative (as the termwise finite part), and x-derivatives of a transform
shift sigma down by integers. Right-sided operators go through reflection.

Evaluation never uses numeric quadrature. Each piece contribution is computed
in one of three mathematically identical forms chosen for floating-point
stability: the partial monomial sum inside the piece, the truncation identity
just beyond it, and farther out a Gauss hypergeometric series for the same
incomplete-Beta integral,

    int_0^1 tau^p (1 - w tau)^(sigma-1) dtau
        = 2F1(1-sigma, p+1; p+2; w) / (p+1),   w = width/(x-c),

whose terms are all positive, so nothing cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import SingularEvaluationError

# Net coefficient of a would-be singular power, relative to the largest
# contribution, below which the singular part is taken as an exact zero.
_SINGULAR_RTOL = 1e-10
_SERIES_TOL = 1e-18
_SERIES_MAX_TERMS = 500
# Switch from the truncation identity to the series at width/(x-c) = 0.8;
# keeping the identity's window narrow caps its cancellation at roughly
# 1.25^degree while the series still converges in a few hundred terms.
_SERIES_W_MAX = 0.8


def gamma_fn(x: float) -> float:
    """Gamma function; poles at 0, -1, -2, ... raise ValueError."""
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"gamma function pole at x={x}")
    return math.gamma(x)


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


def _binomial_shift(coeffs: np.ndarray, shift: float) -> np.ndarray:
    """Re-expand sum_p a_p y^p about y = shift: b_q = sum_p a_p C(p,q) shift^(p-q)."""
    deg = coeffs.size - 1
    out = np.zeros_like(coeffs)
    for q in range(deg + 1):
        acc = 0.0
        for p in range(q, deg + 1):
            acc += coeffs[p] * math.comb(p, q) * shift ** (p - q)
        out[q] = acc
    return out


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Compactly supported piecewise polynomial.

    pieces[i] holds monomial coefficients about breakpoints[i], valid on
    [breakpoints[i], breakpoints[i+1]].
    """

    breakpoints: np.ndarray
    pieces: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if np.any(np.diff(bp) <= 0.0) or not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite and strictly increasing")
        pieces = tuple(np.asarray(p, dtype=float) for p in self.pieces)
        if len(pieces) != bp.size - 1:
            raise ValueError("piece count must match breakpoint intervals")
        for p in pieces:
            if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)):
                raise ValueError("each piece needs a finite 1d coefficient array")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def single_piece(cls, coeffs: Sequence[float], interval: tuple[float, float]) -> "PiecewisePoly":
        return cls(np.array(interval, dtype=float), (np.asarray(coeffs, dtype=float),))

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def degree(self) -> int:
        return max(p.size for p in self.pieces) - 1

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Pointwise value; zero outside the support, right piece at interior
        breakpoints, last piece at the right support endpoint."""
        scalar = np.isscalar(x)
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(pts)
        bp = self.breakpoints
        idx = np.searchsorted(bp, pts, side="right") - 1
        for i, (xi, j) in enumerate(zip(pts, idx)):
            if xi == bp[-1]:
                j = len(self.pieces) - 1
            if j < 0 or j >= len(self.pieces):
                continue
            out[i] = _horner(self.pieces[j], xi - bp[j])
        return float(out[0]) if scalar else out

    def derivative(self) -> "PiecewisePoly":
        """Classical piecewise derivative (jumps between pieces are dropped)."""
        new = []
        for p in self.pieces:
            if p.size == 1:
                new.append(np.zeros(1))
            else:
                new.append(p[1:] * np.arange(1, p.size))
        return PiecewisePoly(self.breakpoints.copy(), tuple(new))

    def reflect(self, mirror_sum: float | None = None) -> "PiecewisePoly":
        """The function x -> self(mirror_sum - x); default mirrors the support."""
        S = (self.breakpoints[0] + self.breakpoints[-1]) if mirror_sum is None else mirror_sum
        new_bp = (S - self.breakpoints)[::-1].copy()
        new_pieces = []
        for i in reversed(range(len(self.pieces))):
            w = self.breakpoints[i + 1] - self.breakpoints[i]
            # f(w - delta) expanded in powers of delta
            shifted = _binomial_shift(self.pieces[i], w)
            signs = np.where(np.arange(shifted.size) % 2 == 0, 1.0, -1.0)
            new_pieces.append(shifted * signs)
        return PiecewisePoly(new_bp, tuple(new_pieces))

    def with_breakpoints(self, points: Iterable[float]) -> "PiecewisePoly":
        """Insert extra breakpoints (re-expanding pieces); values unchanged."""
        extra = [float(t) for t in points
                 if self.breakpoints[0] < t < self.breakpoints[-1]
                 and not np.any(np.isclose(t, self.breakpoints))]
        bp = np.sort(np.concatenate([self.breakpoints, np.asarray(extra)]))
        new_pieces = []
        for i in range(bp.size - 1):
            j = int(np.searchsorted(self.breakpoints, bp[i], side="right") - 1)
            j = min(j, len(self.pieces) - 1)
            new_pieces.append(_binomial_shift(self.pieces[j], bp[i] - self.breakpoints[j]))
        return PiecewisePoly(bp, tuple(new_pieces))

    def __mul__(self, scale: float) -> "PiecewisePoly":
        return PiecewisePoly(self.breakpoints.copy(), tuple(p * scale for p in self.pieces))

    __rmul__ = __mul__


def _horner(coeffs: np.ndarray, y: float) -> float:
    acc = 0.0
    for a in coeffs[::-1]:
        acc = acc * y + a
    return acc


@dataclass(frozen=True)
class FracParams:
    """Derived constants for a fractional order alpha in (1, 2).

    s = 2 - alpha is the order of the fractional integrals in the split form;
    deriv_coeff = -1/(2 cos(alpha pi/2)) and integral_coeff = 1/(2 cos(s pi/2))
    are both positive on the admissible range.
    """

    alpha: float
    s: float = field(init=False)
    deriv_coeff: float = field(init=False)
    integral_coeff: float = field(init=False)

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie strictly in (1, 2), got {self.alpha}")
        s = 2.0 - self.alpha
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "deriv_coeff", -1.0 / (2.0 * math.cos(0.5 * math.pi * self.alpha)))
        object.__setattr__(self, "integral_coeff", 1.0 / (2.0 * math.cos(0.5 * math.pi * s)))


def _power_ratio(p: int, sigma: float) -> float:
    """Gamma(p+1)/Gamma(p+1+sigma)."""
    return gamma_fn(p + 1.0) / gamma_fn(p + 1.0 + sigma)


def _series_piece_value(h: float, coeffs: np.ndarray, sigma: float, z: float) -> float:
    """(1/Gamma(sigma)) int_c^d (x-t)^(sigma-1) P(t) dt for z = x - c > 2h.

    All-positive 2F1 series in w = h/z; exact limit of the truncation identity.
    """
    w = h / z
    g = 1.0
    gw = [g]
    wm = 1.0
    for m in range(1, _SERIES_MAX_TERMS):
        g *= (m - sigma) / m
        wm *= w
        term = g * wm
        gw.append(term)
        if term < _SERIES_TOL and m > 8:
            break
    else:
        raise ArithmeticError("far-field series failed to converge")
    gw_arr = np.asarray(gw)
    m_idx = np.arange(gw_arr.size)
    total = 0.0
    hp = 1.0
    for p, a in enumerate(coeffs):
        if a != 0.0:
            total += a * hp * np.sum(gw_arr / (p + m_idx + 1.0))
        hp *= h
    return h * z ** (sigma - 1.0) / gamma_fn(sigma) * total


class _SingularAccumulator:
    """Collects the coefficients of would-be singular powers at the evaluation
    point; nets that cancel to (relative) zero are dropped, anything else is a
    genuine non-finite one-sided limit."""

    def __init__(self, x: float) -> None:
        self.x = x
        self.net: dict[int, float] = {}
        self.scale: dict[int, float] = {}

    def add(self, p: int, coef: float) -> None:
        self.net[p] = self.net.get(p, 0.0) + coef
        self.scale[p] = max(self.scale.get(p, 0.0), abs(coef))

    def check(self) -> None:
        for p, net in self.net.items():
            if abs(net) > _SINGULAR_RTOL * max(1.0, self.scale[p]):
                raise SingularEvaluationError(
                    f"one-sided limit at x={self.x} is not finite "
                    f"(singular power with net coefficient {net:.3e})"
                )


def _piece_value(c: float, d: float, coeffs: np.ndarray, sigma: float,
                 x: float, sing: _SingularAccumulator | None) -> float:
    """Contribution of one piece to T_sigma at x (limit from above at
    breakpoints); singular-limit coefficients go into the accumulator."""
    if x < c:
        return 0.0
    h = d - c
    if x == c:
        if sigma < 0.0 and sing is not None:
            for p, a in enumerate(coeffs):
                if p + sigma < 0.0 and a != 0.0:
                    sing.add(p, a * _power_ratio(p, sigma))
        return 0.0
    if x <= d:
        val = 0.0
        z = x - c
        for p, a in enumerate(coeffs):
            if a != 0.0:
                val += a * _power_ratio(p, sigma) * z ** (p + sigma)
        if x == d and sigma < 0.0 and sing is not None:
            b = _binomial_shift(coeffs, h)
            for q, bq in enumerate(b):
                if q + sigma < 0.0 and bq != 0.0:
                    sing.add(q, -bq * _power_ratio(q, sigma))
        return val
    z = x - c
    if h > _SERIES_W_MAX * z:
        # truncation identity: expansion about c minus re-expansion about d
        val = 0.0
        for p, a in enumerate(coeffs):
            if a != 0.0:
                val += a * _power_ratio(p, sigma) * z ** (p + sigma)
        b = _binomial_shift(coeffs, h)
        zd = x - d
        for q, bq in enumerate(b):
            if bq != 0.0:
                val -= bq * _power_ratio(q, sigma) * zd ** (q + sigma)
        return val
    return _series_piece_value(h, coeffs, sigma, z)


def _transform_eval(P: PiecewisePoly, sigma: float, x: float) -> float:
    """Left-sided T_sigma of P at a single point."""
    if sigma == 0.0:
        return P.eval(x)
    sing = _SingularAccumulator(x) if sigma < 0.0 else None
    bp = P.breakpoints
    total = 0.0
    for i in range(len(P.pieces)):
        total += _piece_value(bp[i], bp[i + 1], P.pieces[i], sigma, x, sing)
    if sing is not None:
        sing.check()
    return total


def frac_transform(side: Side, sigma: float, P: PiecewisePoly, x, deriv: int = 0):
    """d^deriv/dx^deriv of the one-sided transform T_sigma applied to P.

    Admissible effective order sigma - deriv in (-2, 1]. The right-sided
    transform is the left-sided one of the reflected function, with a sign
    (-1)^deriv from the chain rule.
    """
    eff = sigma - deriv
    if not -2.0 < eff <= 1.0:
        raise ValueError(f"effective transform order {eff} outside (-2, 1]")
    if deriv < 0:
        raise ValueError("deriv must be a nonnegative integer")
    if side == Side.LEFT:
        Q, map_x, sign = P, (lambda t: t), 1.0
    else:
        S = P.breakpoints[0] + P.breakpoints[-1]
        Q, map_x, sign = P.reflect(), (lambda t: S - t), (-1.0) ** deriv
    scalar = np.isscalar(x)
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([sign * _transform_eval(Q, eff, map_x(xi)) for xi in pts])
    return float(out[0]) if scalar else out


def frac_integral_piecewise(side: Side, s: float, P: PiecewisePoly, x):
    """Riemann-Liouville fractional integral of order s in (0, 1]."""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"integral order must lie in (0, 1], got {s}")
    return frac_transform(side, s, P, x)


def rl_derivative_piecewise(side: Side, alpha: float, P: PiecewisePoly, x):
    """Riemann-Liouville fractional derivative of order alpha in (1, 2)."""
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"derivative order must lie strictly in (1, 2), got {alpha}")
    return frac_transform(side, -alpha, P, x)


def riesz_frac_laplacian_piecewise(alpha: float, P: PiecewisePoly, x):
    """Value of -(-Laplace)^(alpha/2) P, i.e. the negative fractional Laplacian."""
    par = FracParams(alpha)
    left = frac_transform(Side.LEFT, -alpha, P, x)
    right = frac_transform(Side.RIGHT, -alpha, P, x)
    return par.deriv_coeff * (left + right)


def riesz_integral_piecewise(s: float, P: PiecewisePoly, x):
    """Riesz fractional integral of order s in (0, 1): the smoothing factor of
    the split form, (I_L^s + I_R^s)/(2 cos(s pi/2))."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"Riesz integral order must lie strictly in (0, 1), got {s}")
    coeff = 1.0 / (2.0 * math.cos(0.5 * math.pi * s))
    return coeff * (frac_transform(Side.LEFT, s, P, x) + frac_transform(Side.RIGHT, s, P, x))


def shifted_power_frac_integral(s: float, c: float, mu: float, x):
    """Left integral of order s of the half-line power (t-c)^mu 1_{t>=c}.

    Exact for any real mu > -1: Gamma(mu+1)/Gamma(mu+1+s) (x-c)^(mu+s).
    This is the rule transforms are built from; exposed for composition tests.
    """
    if s <= 0.0:
        raise ValueError("integral order must be positive")
    if mu <= -1.0:
        raise ValueError("power must exceed -1")
    scalar = np.isscalar(x)
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(pts)
    mask = pts > c
    out[mask] = gamma_fn(mu + 1.0) / gamma_fn(mu + 1.0 + s) * (pts[mask] - c) ** (mu + s)
    return float(out[0]) if scalar else out


def piece_halfline_terms(c: float, d: float, coeffs: Sequence[float]
                         ) -> tuple[tuple[float, float, float], ...]:
    """Truncation identity for one piece: P(t) 1_{[c,d]} as a combination of
    half-line powers (base, power, coefficient) supported on t >= base."""
    a = np.asarray(coeffs, dtype=float)
    terms = [(c, float(p), float(a[p])) for p in range(a.size) if a[p] != 0.0]
    b = _binomial_shift(a, d - c)
    terms += [(d, float(q), float(-b[q])) for q in range(b.size) if b[q] != 0.0]
    return tuple(terms)
