"""Built-in uncertain initial-value problems and their moment projection."""

from __future__ import annotations

import numpy as np

from .basis import GpcBasis, build_basis, build_partition
from .config import GridSpec, ProblemSpec, RunConfig
from .euler import GasModel
from .fv import MomentField, StructuredGrid, grid_1d, grid_2d

__all__ = [
    "make_gas",
    "make_grid",
    "make_basis",
    "make_initial",
    "project_initial_data",
    "initial_node_states",
]

XI_DOMAIN = (-1.0, 1.0)


def make_gas(problem: ProblemSpec) -> GasModel:
    return GasModel(gamma=problem.gamma)


def _sod_states(problem: ProblemSpec, two_d: bool):
    if two_d:
        left = (problem.rho_l, 0.0, 0.0, problem.e_l)
        right = (problem.rho_r, 0.0, 0.0, problem.e_r)
    else:
        left = (problem.rho_l, 0.0, problem.e_l)
        right = (problem.rho_r, 0.0, problem.e_r)
    return np.asarray(left), np.asarray(right)


def make_grid(grid: GridSpec, problem: ProblemSpec) -> StructuredGrid:
    two_d = problem.preset == "riemann_2d"
    left, right = _sod_states(problem, two_d)
    if grid.bc == "dirichlet":
        if problem.preset == "custom_1d":
            raise ValueError("dirichlet boundaries are not defined for custom_1d")
        bc_x = (("dirichlet", left), ("dirichlet", right))
    else:
        bc_x = grid.bc
    if not two_d:
        return grid_1d(grid.nx, grid.x_min, grid.x_max, bc=bc_x)
    return grid_2d(
        grid.nx,
        grid.ny,
        (grid.x_min, grid.x_max),
        (grid.y_min, grid.y_max),
        bc_x=bc_x,
        bc_y=grid.bc_y,
    )


def make_basis(config: RunConfig) -> GpcBasis:
    spec = config.basis
    partition = build_partition(*XI_DOMAIN, spec.n_elements)
    if spec.quadrature == "clenshaw-curtis":
        return build_basis(partition, spec.degree, "clenshaw-curtis", spec.cc_level)
    return build_basis(partition, spec.degree, "gauss-legendre", spec.quad_points)


def make_initial(problem: ProblemSpec):
    """Initial-state callable; broadcasts over positions and the random variable.

    1D problems return initial(x, xi) -> (..., 3); riemann_2d returns
    initial(x, y, xi) -> (..., 4).
    """
    gamma = problem.gamma
    if problem.preset == "sod_1d":
        left, right = _sod_states(problem, two_d=False)

        def initial(x, xi):
            x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
            mask = (x < problem.x0 + problem.sigma * xi)[..., None]
            return np.where(mask, left, right)

        return initial
    if problem.preset == "riemann_2d":
        left, right = _sod_states(problem, two_d=True)

        def initial(x, y, xi):
            x, y, xi = np.broadcast_arrays(
                np.asarray(x, float), np.asarray(y, float), np.asarray(xi, float)
            )
            mask = (x < problem.x0 + problem.sigma * xi)[..., None]
            return np.where(mask, left, right)

        return initial
    if problem.preset == "custom_1d":
        # smooth sine density bump with uncertain amplitude, uniform pressure
        def initial(x, xi):
            x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
            rho = problem.rho0 + problem.amplitude * np.sin(2.0 * np.pi * x) * (
                1.0 + problem.xi_coupling * xi
            )
            u = np.empty(x.shape + (3,))
            u[..., 0] = rho
            u[..., 1] = rho * problem.velocity
            u[..., 2] = problem.pressure / (gamma - 1.0) + 0.5 * rho * problem.velocity**2
            return u

        return initial
    raise ValueError(f"unknown preset {problem.preset!r}")


def initial_node_states(initial, grid: StructuredGrid, basis: GpcBasis) -> np.ndarray:
    """Initial states at cell centers and quadrature nodes (cells..., L, Q, d)."""
    xi = basis.nodes  # (L, Q)
    if grid.ndim == 1:
        x = grid.cell_centers(0)
        return initial(x[:, None, None], xi[None, :, :])
    x = grid.cell_centers(0)
    y = grid.cell_centers(1)
    return initial(
        x[:, None, None, None], y[None, :, None, None], xi[None, None, :, :]
    )


def project_initial_data(initial, grid: StructuredGrid, basis: GpcBasis) -> MomentField:
    """Moment coefficients of the initial data, one block per (cell, element)."""
    states = initial_node_states(initial, grid, basis)
    coeffs = np.einsum(
        "...qd,kq,q->...kd", states, basis.phi, basis.rule.weights
    )
    return MomentField(grid=grid, basis=basis, coeffs=coeffs)
