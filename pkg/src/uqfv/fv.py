"""Structured finite-volume machinery shared by the intrusive solvers.

Grids are uniform rectangles in 1D/2D. Moment fields store one coefficient
vector per (spatial cell, random element, polynomial index, conserved
component). The flux machinery works pointwise in the random variable:
states are reconstructed at the quadrature nodes, numerical fluxes are
evaluated per node, and the flux differences are projected back onto the
basis.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .basis import GpcBasis
from .euler import (
    GasModel,
    InadmissibleStateError,
    _flux_unchecked,
    _wave_speed_unchecked,
    is_admissible,
)

__all__ = [
    "StructuredGrid",
    "grid_1d",
    "grid_2d",
    "MomentField",
    "hll_flux",
    "lax_friedrichs_flux",
    "cfl_time_step",
    "extend_moments",
    "extend_node_states",
    "moment_flux_divergence",
    "deterministic_solve",
    "RunStats",
    "RunResult",
]

_BC_KINDS = ("transmissive", "periodic", "dirichlet")


def _normalize_bc(bc):
    """Accept 'transmissive' | 'periodic' | ('dirichlet', state)."""
    if isinstance(bc, str):
        if bc not in ("transmissive", "periodic"):
            raise ValueError(f"unknown boundary condition: {bc!r}")
        return (bc, None)
    kind, state = bc
    if kind != "dirichlet":
        raise ValueError(f"unknown boundary condition: {kind!r}")
    return ("dirichlet", np.asarray(state, dtype=float))


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform rectangular mesh with per-side boundary conditions.

    ``shape`` is (nx,) or (nx, ny); ``extents`` holds one (lo, hi) pair per
    axis; ``bcs`` holds one (low side, high side) pair of boundary
    conditions per axis.
    """

    shape: tuple
    extents: tuple
    bcs: tuple

    def __post_init__(self):
        for n in self.shape:
            if n < 1:
                raise ValueError(f"cell counts must be positive, got {self.shape}")
        for lo, hi in self.extents:
            if not lo < hi:
                raise ValueError(f"empty extent ({lo}, {hi})")
        for lo_bc, hi_bc in self.bcs:
            if (lo_bc[0] == "periodic") != (hi_bc[0] == "periodic"):
                raise ValueError("periodic boundaries must pair up on an axis")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def deltas(self) -> tuple:
        return tuple(
            (hi - lo) / n for (lo, hi), n in zip(self.extents, self.shape)
        )

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for d in self.deltas:
            vol *= d
        return vol

    def cell_centers(self, axis: int = 0) -> np.ndarray:
        lo, hi = self.extents[axis]
        n = self.shape[axis]
        h = (hi - lo) / n
        return lo + h * (np.arange(n) + 0.5)


def _bc_pair(bc):
    """One spec for both sides, or a (low, high) pair of specs."""
    single = isinstance(bc, str) or (isinstance(bc, tuple) and bc[0] == "dirichlet")
    if single:
        return (_normalize_bc(bc), _normalize_bc(bc))
    lo, hi = bc
    return (_normalize_bc(lo), _normalize_bc(hi))


def grid_1d(nx: int, x_min: float, x_max: float, bc="transmissive") -> StructuredGrid:
    return StructuredGrid(shape=(nx,), extents=((x_min, x_max),), bcs=(_bc_pair(bc),))


def grid_2d(
    nx: int,
    ny: int,
    x_extent=(0.0, 1.0),
    y_extent=(0.0, 1.0),
    bc_x="transmissive",
    bc_y="transmissive",
) -> StructuredGrid:
    return StructuredGrid(
        shape=(nx, ny),
        extents=(x_extent, y_extent),
        bcs=(_bc_pair(bc_x), _bc_pair(bc_y)),
    )


@dataclass
class MomentField:
    """Coefficients indexed by (spatial cells..., element, gPC index, component)."""

    grid: StructuredGrid
    basis: GpcBasis
    coeffs: np.ndarray

    def __post_init__(self):
        expected = self.grid.shape + (
            self.basis.n_elements,
            self.basis.n_coeffs,
        )
        if self.coeffs.shape[:-1] != expected:
            raise ValueError(
                f"coefficient array shaped {self.coeffs.shape} does not match "
                f"grid x elements x coefficients {expected}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("moment field holds non-finite entries")

    @property
    def n_components(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def cell_means(self) -> np.ndarray:
        """Zeroth coefficients (cells..., element, component)."""
        return self.coeffs[..., 0, :]

    def node_states(self) -> np.ndarray:
        """Reconstructed states at each quadrature node (cells..., L, Q, d)."""
        return np.einsum("...kd,kq->...qd", self.coeffs, self.basis.phi)

    def copy(self) -> "MomentField":
        return MomentField(self.grid, self.basis, self.coeffs.copy())


def hll_flux(u_left, u_right, gas: GasModel, axis: int = 0) -> np.ndarray:
    """HLL two-wave flux with Davis wave-speed bounds.

    s_L = min(v_L - c_L, v_R - c_R), s_R = max(v_L + c_L, v_R + c_R);
    consistent (flux(u, u) = physical flux) and positivity preserving under
    the CFL restriction.
    """
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    if not (is_admissible(ul, gas) and is_admissible(ur, gas)):
        raise InadmissibleStateError("inadmissible state passed to hll_flux")
    return _hll_unchecked(ul, ur, gas, axis)


def _sound_speed_unchecked(u, gas: GasModel) -> np.ndarray:
    rho, m, en = u[..., 0], u[..., 1:-1], u[..., -1]
    p = (gas.gamma - 1.0) * (en - 0.5 * np.sum(m * m, axis=-1) / rho)
    return np.sqrt(gas.gamma * p / rho)


def _hll_unchecked(ul, ur, gas: GasModel, axis: int) -> np.ndarray:
    vl = ul[..., 1 + axis] / ul[..., 0]
    vr = ur[..., 1 + axis] / ur[..., 0]
    cl = _sound_speed_unchecked(ul, gas)
    cr = _sound_speed_unchecked(ur, gas)
    s_l = np.minimum(vl - cl, vr - cr)
    s_r = np.maximum(vl + cl, vr + cr)
    fl = _flux_unchecked(ul, gas, axis)
    fr = _flux_unchecked(ur, gas, axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        middle = (
            s_r[..., None] * fl
            - s_l[..., None] * fr
            + (s_l * s_r)[..., None] * (ur - ul)
        ) / (s_r - s_l)[..., None]
    flux = np.where(s_l[..., None] >= 0.0, fl, middle)
    flux = np.where(s_r[..., None] <= 0.0, fr, flux)
    return flux


def lax_friedrichs_flux(
    u_left, u_right, gas: GasModel, axis: int = 0, lambda_max: float = 0.0
) -> np.ndarray:
    """Central flux with global dissipation: (f_L + f_R - lambda (u_R - u_L)) / 2."""
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    if not (is_admissible(ul, gas) and is_admissible(ur, gas)):
        raise InadmissibleStateError("inadmissible state passed to lax_friedrichs_flux")
    return _lf_unchecked(ul, ur, gas, axis, lambda_max)


def _lf_unchecked(ul, ur, gas: GasModel, axis: int, lambda_max: float) -> np.ndarray:
    fl = _flux_unchecked(ul, gas, axis)
    fr = _flux_unchecked(ur, gas, axis)
    return 0.5 * (fl + fr - lambda_max * (ur - ul))


def global_wave_speeds(node_states, grid: StructuredGrid, gas: GasModel) -> tuple:
    """Largest |v| + c per axis over every cell, element and quadrature node."""
    u = np.asarray(node_states, dtype=float)
    if not is_admissible(u, gas):
        raise InadmissibleStateError("inadmissible state in wave-speed scan")
    return tuple(
        float(np.max(_wave_speed_unchecked(u, gas, axis)))
        for axis in range(grid.ndim)
    )


def cfl_time_step(node_states, grid: StructuredGrid, gas: GasModel, cfl: float) -> float:
    """Time step from lambda_1 dt/dx + lambda_2 dt/dy <= cfl (1D drops the y term)."""
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl number must lie in (0, 1], got {cfl}")
    speeds = global_wave_speeds(node_states, grid, gas)
    denom = sum(s / h for s, h in zip(speeds, grid.deltas))
    if denom <= 0.0:
        raise ValueError("zero wave speed everywhere; nothing to advance")
    return cfl / denom


def _dirichlet_moments(state: np.ndarray, basis: GpcBasis, tail_shape) -> np.ndarray:
    ghost = np.zeros(tail_shape + (basis.n_elements, basis.n_coeffs, len(state)))
    ghost[..., 0, :] = state
    return ghost


def extend_moments(field: MomentField, axis: int = 0) -> np.ndarray:
    """Moment coefficients with one ghost layer on each side of an axis.

    Transmissive copies the adjacent interior moments, periodic wraps, and
    dirichlet inserts the projection of the prescribed state (its value in
    the zeroth coefficient, zeros above).
    """
    coeffs = field.coeffs
    grid = field.grid
    lo_bc, hi_bc = grid.bcs[axis]
    first = _take_cell(coeffs, axis, 0)
    last = _take_cell(coeffs, axis, -1)
    if lo_bc[0] == "transmissive":
        lo = first
    elif lo_bc[0] == "periodic":
        lo = last
    else:
        lo = _dirichlet_moments(lo_bc[1], field.basis, first.shape[:-3])
    if hi_bc[0] == "transmissive":
        hi = last
    elif hi_bc[0] == "periodic":
        hi = first
    else:
        hi = _dirichlet_moments(hi_bc[1], field.basis, last.shape[:-3])
    return np.concatenate(
        [np.expand_dims(lo, axis), coeffs, np.expand_dims(hi, axis)], axis=axis
    )


def _take_cell(arr: np.ndarray, axis: int, index: int) -> np.ndarray:
    slicer = [slice(None)] * arr.ndim
    slicer[axis] = index
    return arr[tuple(slicer)]


def extend_node_states(
    node_states: np.ndarray, grid: StructuredGrid, axis: int
) -> np.ndarray:
    """Node-state array with one ghost layer per side along a spatial axis.

    Equivalent to extending the moments and reconstructing: the ghost states
    of a dirichlet side are the prescribed state at every node.
    """
    lo_bc, hi_bc = grid.bcs[axis]
    first = _take_cell(node_states, axis, 0)
    last = _take_cell(node_states, axis, -1)
    if lo_bc[0] == "transmissive":
        lo = first
    elif lo_bc[0] == "periodic":
        lo = last
    else:
        lo = np.broadcast_to(lo_bc[1], first.shape)
    if hi_bc[0] == "transmissive":
        hi = last
    elif hi_bc[0] == "periodic":
        hi = first
    else:
        hi = np.broadcast_to(hi_bc[1], last.shape)
    return np.concatenate(
        [np.expand_dims(lo, axis), node_states, np.expand_dims(hi, axis)], axis=axis
    )


def moment_flux_divergence(
    node_states: np.ndarray,
    grid: StructuredGrid,
    basis: GpcBasis,
    gas: GasModel,
    flux: str = "hll",
) -> np.ndarray:
    """Projected flux divergence sum_axis <(F_+ - F_-) phi_k f> / dh.

    ``node_states`` has shape (cells..., L, Q, d); the result matches the
    moment-coefficient layout (cells..., L, K+1, d). Forward Euler then reads
    ``coeffs -= dt * divergence``.
    """
    if flux == "lax-friedrichs":
        lambdas = global_wave_speeds(node_states, grid, gas)
    elif flux != "hll":
        raise ValueError(f"unknown numerical flux: {flux!r}")
    div = None
    for axis in range(grid.ndim):
        ext = extend_node_states(node_states, grid, axis)
        left = _take_range(ext, axis, 0, ext.shape[axis] - 1)
        right = _take_range(ext, axis, 1, ext.shape[axis])
        if flux == "hll":
            interface = _hll_unchecked(left, right, gas, axis)
        else:
            interface = _lf_unchecked(left, right, gas, axis, lambdas[axis])
        diff = _take_range(interface, axis, 1, interface.shape[axis]) - _take_range(
            interface, axis, 0, interface.shape[axis] - 1
        )
        contrib = np.einsum(
            "...qd,kq,q->...kd", diff, basis.phi, basis.rule.weights
        ) / grid.deltas[axis]
        div = contrib if div is None else div + contrib
    return div


def _take_range(arr: np.ndarray, axis: int, start: int, stop: int) -> np.ndarray:
    slicer = [slice(None)] * arr.ndim
    slicer[axis] = slice(start, stop)
    return arr[tuple(slicer)]


def deterministic_solve(
    states: np.ndarray,
    grid: StructuredGrid,
    gas: GasModel,
    t_end: float,
    cfl: float = 0.9,
    flux: str = "hll",
    n_steps: int | None = None,
) -> np.ndarray:
    """Plain first-order FV solve on state arrays (cells..., d).

    Used by the stochastic-collocation reference; ``n_steps`` overrides the
    end time for fixed-step studies.
    """
    u = np.asarray(states, dtype=float).copy()
    t = 0.0
    step = 0
    while (t < t_end) if n_steps is None else (step < n_steps):
        speeds = [
            float(np.max(_wave_speed_unchecked(u, gas, ax))) for ax in range(grid.ndim)
        ]
        if not is_admissible(u, gas):
            raise InadmissibleStateError(f"inadmissible state at step {step}")
        dt = cfl / sum(s / h for s, h in zip(speeds, grid.deltas))
        if n_steps is None:
            dt = min(dt, t_end - t)
        for axis in range(grid.ndim):
            ext = extend_node_states(u, grid, axis)
            left = _take_range(ext, axis, 0, ext.shape[axis] - 1)
            right = _take_range(ext, axis, 1, ext.shape[axis])
            if flux == "hll":
                interface = _hll_unchecked(left, right, gas, axis)
            else:
                interface = _lf_unchecked(left, right, gas, axis, speeds[axis])
            diff = _take_range(interface, axis, 1, interface.shape[axis]) - _take_range(
                interface, axis, 0, interface.shape[axis] - 1
            )
            u = u - (dt / grid.deltas[axis]) * diff
        t += dt
        step += 1
    return u


@dataclass
class RunStats:
    """Wall-clock and solver diagnostics accumulated over a run."""

    steps: int = 0
    wall_s: float = 0.0
    flux_s: float = 0.0
    filter_limiter_s: float = 0.0
    dual_solve_s: float = 0.0
    newton_iterations: int = 0
    newton_max_residual: float = 0.0

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "wall_s": self.wall_s,
            "flux_s": self.flux_s,
            "filter_limiter_s": self.filter_limiter_s,
            "dual_solve_s": self.dual_solve_s,
            "newton_iterations": self.newton_iterations,
            "newton_max_residual": self.newton_max_residual,
        }


@dataclass
class RunResult:
    """Final moment field plus run diagnostics and optional snapshots."""

    field: MomentField
    stats: RunStats
    snapshots: list | None = None  # (time, MomentField) pairs when requested


class _Timer:
    """Accumulates one phase's wall time via ``with timer:`` blocks."""

    def __init__(self):
        self.total = 0.0

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.total += time.perf_counter() - self._t0
        return False
