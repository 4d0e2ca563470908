"""1D interval meshes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedMeshError

#: Relative slack for deciding whether a mesh is uniform.
_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh1D:
    a: float
    b: float
    boundaries: np.ndarray  # element boundaries, shape (K+1,), increasing
    widths: np.ndarray = field(init=False)
    uniform: bool = field(init=False)

    def __post_init__(self) -> None:
        bnd = np.asarray(self.boundaries, dtype=float)
        if bnd.ndim != 1 or bnd.size < 2:
            raise UnsupportedMeshError("mesh needs at least one element")
        widths = np.diff(bnd)
        if np.any(widths <= 0.0):
            raise UnsupportedMeshError("element boundaries must be strictly increasing")
        if not (np.isclose(bnd[0], self.a) and np.isclose(bnd[-1], self.b)):
            raise UnsupportedMeshError("boundaries must span [a, b]")
        h0 = widths[0]
        uniform = bool(np.all(np.abs(widths - h0) <= _UNIFORM_RTOL * h0))
        object.__setattr__(self, "boundaries", bnd)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "uniform", uniform)

    @property
    def num_elements(self) -> int:
        return self.boundaries.size - 1

    @property
    def h_min(self) -> float:
        return float(self.widths.min())

    def centers(self) -> np.ndarray:
        return 0.5 * (self.boundaries[:-1] + self.boundaries[1:])

    def to_reference(self, j: int, x: np.ndarray) -> np.ndarray:
        """Map physical points in element j to the reference interval [-1, 1]."""
        return 2.0 * (np.asarray(x) - self.boundaries[j]) / self.widths[j] - 1.0

    def from_reference(self, j: int, xi: np.ndarray) -> np.ndarray:
        return self.boundaries[j] + 0.5 * (np.asarray(xi) + 1.0) * self.widths[j]

    def locate(self, x: float) -> int:
        """Index of the element containing x (right-closed at b)."""
        if x < self.a - 1e-12 or x > self.b + 1e-12:
            raise ValueError(f"point {x} outside the domain [{self.a}, {self.b}]")
        j = int(np.searchsorted(self.boundaries, x, side="right") - 1)
        return min(max(j, 0), self.num_elements - 1)


def make_mesh(a: float, b: float, num_elements: int) -> Mesh1D:
    """Uniform mesh of num_elements elements on [a, b]."""
    if not b > a:
        raise UnsupportedMeshError(f"need b > a, got [{a}, {b}]")
    if num_elements < 1:
        raise UnsupportedMeshError(f"need at least one element, got {num_elements}")
    return Mesh1D(a=a, b=b, boundaries=np.linspace(a, b, num_elements + 1))
