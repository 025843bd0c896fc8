"""Uniform tensor grids for the truncated (x, v) phase space.

The whole laboratory runs on uniform node-centered grids.  Integrals are
uniform-weight Riemann sums (for the decaying integrands handled here this
coincides with the trapezoidal rule up to the boundary half-cells, whose
integrands are below the domain truncation target).  Uniform weights are
what make the discrete adjointness identities of the operator module exact.

Grids are built exactly symmetric about the origin so that parity arguments
(odd velocity moments vanish, the macroscopic flux of even functions is
zero) hold to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _symmetric_nodes(n: int, half_width: float) -> np.ndarray:
    # (k - (n-1)/2) is exactly representable, so nodes come in exact +/- pairs.
    dx = 2.0 * half_width / (n - 1)
    return (np.arange(n) - (n - 1) / 2.0) * dx


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid with ``n_x`` position and ``n_v`` velocity nodes.

    Boundary tags: positions and velocities both use ``"truncated"`` decay
    boundaries (fields are negligible at the edge, fluxes through the outer
    cell faces are zero).  A ``"periodic"`` position tag is accepted for
    forward compatibility but no operator assembly supports it.
    """

    n_x: int
    n_v: int
    x_max: float
    v_max: float
    bc_x: str = "truncated"
    bc_v: str = "truncated"
    x: np.ndarray = field(init=False, repr=False, compare=False)
    v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_x < 8 or self.n_v < 8:
            raise ValueError("need at least 8 nodes per direction")
        if self.x_max <= 0 or self.v_max <= 0:
            raise ValueError("domain half-widths must be positive")
        if self.bc_x not in ("truncated", "periodic") or self.bc_v != "truncated":
            raise ValueError(f"unsupported boundary tags ({self.bc_x!r}, {self.bc_v!r})")
        object.__setattr__(self, "x", _symmetric_nodes(self.n_x, self.x_max))
        object.__setattr__(self, "v", _symmetric_nodes(self.n_v, self.v_max))

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_x - 1)

    @property
    def dv(self) -> float:
        return 2.0 * self.v_max / (self.n_v - 1)

    @property
    def cell(self) -> float:
        """Phase-space cell volume dx * dv."""
        return self.dx * self.dv

    def x_corners(self) -> np.ndarray:
        """n_x + 1 half-point positions, exactly symmetric."""
        return (np.arange(self.n_x + 1) - self.n_x / 2.0) * self.dx

    def v_corners(self) -> np.ndarray:
        """n_v + 1 half-point velocities, exactly symmetric."""
        return (np.arange(self.n_v + 1) - self.n_v / 2.0) * self.dv

    def integrate(self, values: np.ndarray) -> float:
        """Phase-space integral of nodal values."""
        return float(np.sum(values) * self.cell)

    def integrate_v(self, values: np.ndarray) -> np.ndarray:
        """Velocity integral per position node (axis 1)."""
        return np.sum(values, axis=1) * self.dv

    def integrate_x(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.dx)
