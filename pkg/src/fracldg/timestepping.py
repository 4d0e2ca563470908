"""Low-storage explicit RK4(5) time stepping with the fractional CFL rule.

The integrator works on bare coefficient arrays; one derivative buffer and
the state itself are the only storage. The step size obeys
dt = C * min(h_min^alpha, h_min / max|f'|): the diffusive bound scales with
the fractional order because the Riesz operator's spectral radius grows like
h^(-alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InstabilityError
from .field import DgField, l2_project
from .ldg import FluxSpec, ProblemSpec, semidiscrete_rhs
from .mesh import Mesh1D
from .operators import RieszOperator


@dataclass(frozen=True)
class LserkScheme:
    """Five-stage low-storage RK4 update: k <- a_i k + dt L(y), y <- y + b_i k."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    c: tuple[float, ...]

    def __post_init__(self) -> None:
        if not len(self.a) == len(self.b) == len(self.c):
            raise ValueError("stage coefficient lists must have equal length")
        if self.a[0] != 0.0 or self.c[0] != 0.0:
            raise ValueError("first stage must start from the step's own state")

    @property
    def stages(self) -> int:
        return len(self.a)


CARPENTER_KENNEDY = LserkScheme(
    a=(
        0.0,
        -567301805773.0 / 1357537059087.0,
        -2404267990393.0 / 2016746695238.0,
        -3550918686646.0 / 2091501179385.0,
        -1275806237668.0 / 842570457699.0,
    ),
    b=(
        1432997174477.0 / 9575080441755.0,
        5161836677717.0 / 13612068292357.0,
        1720146321549.0 / 2090206949498.0,
        3134564353537.0 / 4481467310338.0,
        2277821191437.0 / 14882151754819.0,
    ),
    c=(
        0.0,
        1432997174477.0 / 9575080441755.0,
        2526269341429.0 / 6820363962896.0,
        2006345519317.0 / 3224310063776.0,
        2802321613138.0 / 2924317926251.0,
    ),
)


@dataclass(frozen=True)
class StepControl:
    """Step-size and run-length parameters for one integration."""

    cfl: float
    h_min: float
    alpha: float
    max_speed: float = 0.0
    final_time: float = 0.0
    snapshot_interval: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"CFL constant must lie in (0, 1), got {self.cfl}")
        if self.h_min <= 0.0:
            raise ValueError("mesh width must be positive")
        if not 1.0 < self.alpha <= 2.0:
            raise ValueError(f"fractional order must lie in (1, 2], got {self.alpha}")
        if self.max_speed < 0.0:
            raise ValueError("speed estimate must be nonnegative")
        if self.final_time < 0.0:
            raise ValueError("final time must be nonnegative")
        if self.snapshot_interval is not None and self.snapshot_interval <= 0.0:
            raise ValueError("snapshot interval must be positive")


def cfl_dt(ctrl: StepControl) -> float:
    """Nominal step: the binding one of the diffusive and convective limits."""
    diffusive = ctrl.h_min**ctrl.alpha
    convective = ctrl.h_min / max(ctrl.max_speed, 1e-14)
    return ctrl.cfl * min(diffusive, convective)


def lserk_step(
    rhs: Callable[[np.ndarray, float], np.ndarray],
    y: np.ndarray,
    t: float,
    dt: float,
    scheme: LserkScheme = CARPENTER_KENNEDY,
) -> np.ndarray:
    if dt <= 0.0:
        raise ValueError(f"step size must be positive, got {dt}")
    y = np.array(y, dtype=float)
    k = np.zeros_like(y)
    for a_i, b_i, c_i in zip(scheme.a, scheme.b, scheme.c):
        k = a_i * k + dt * rhs(y, t + c_i * dt)
        y += b_i * k
    return y


@dataclass
class IntegrationResult:
    final: DgField
    snapshots: list[tuple[float, DgField]]
    # rows (step, t, dt, l2_norm); row 0 describes the initial state
    step_log: list[tuple[int, float, float, float]]


def _discrete_norm(widths: np.ndarray, coeffs: np.ndarray) -> float:
    return math.sqrt(float(np.sum(0.5 * widths[:, None] * coeffs**2)))


def integrate(
    prob: ProblemSpec,
    spec: FluxSpec,
    op: Optional[RieszOperator],
    mesh: Mesh1D,
    order: int,
    ctrl: StepControl,
    scheme: LserkScheme = CARPENTER_KENNEDY,
) -> IntegrationResult:
    """March the LDG semidiscretization from the projected initial condition
    to ctrl.final_time; the last step is truncated to land exactly there.

    On instability the partial step log and snapshots are attached to the
    raised error.
    """
    u = l2_project(prob.u0, mesh, order)
    y, t = u.coeffs, 0.0
    dt_nominal = cfl_dt(ctrl)
    T = ctrl.final_time

    def rhs(state: np.ndarray, at: float) -> np.ndarray:
        if not np.all(np.isfinite(state)):
            raise InstabilityError(at)
        field = DgField(mesh, order, state)
        return semidiscrete_rhs(field, at, prob, spec, op).coeffs

    snapshots = [(0.0, DgField(mesh, order, y.copy()))]
    log = [(0, 0.0, 0.0, _discrete_norm(mesh.widths, y))]
    interval = ctrl.snapshot_interval
    next_snap = interval if interval is not None else math.inf
    step = 0
    tol = 1e-12 * max(T, 1.0)
    try:
        while t < T - tol:
            dt = min(dt_nominal, T - t)
            y = lserk_step(rhs, y, t, dt, scheme)
            t += dt
            step += 1
            log.append((step, t, dt, _discrete_norm(mesh.widths, y)))
            while t >= next_snap - tol:
                snapshots.append((t, DgField(mesh, order, y.copy())))
                next_snap += interval
    except InstabilityError as err:
        err.step_log = log
        err.snapshots = snapshots
        raise
    final = DgField(mesh, order, y)
    return IntegrationResult(final=final, snapshots=snapshots, step_log=log)
