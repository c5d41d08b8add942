"""Exact 1D Riemann solutions and quadrature references for uncertain data.

The exact solver provides the ground truth for the shock-tube experiments:
composed with quadrature over the random interface position it yields
pointwise mean and variance fields. A generic stochastic-collocation
reference runs the deterministic FV solver at quadrature nodes instead.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .euler import GasModel, InadmissibleStateError, is_admissible
from .fv import StructuredGrid, deterministic_solve
from .stats import FieldStatistics

__all__ = [
    "VacuumError",
    "RiemannSolution",
    "solve_riemann",
    "sod_reference_statistics",
    "collocation_reference",
]


class VacuumError(ValueError):
    """Initial data generates vacuum; the pressure equation has no positive root."""


def _primitives(u, gas: GasModel):
    rho = u[0]
    v = u[1] / rho
    p = (gas.gamma - 1.0) * (u[2] - 0.5 * u[1] ** 2 / rho)
    return rho, v, p


def _conserved(rho, v, p, gas: GasModel):
    return np.stack(
        [rho, rho * v, p / (gas.gamma - 1.0) + 0.5 * rho * v**2], axis=-1
    )


def _wave_function(p, rho_k, p_k, a_k, gamma):
    """Velocity jump across one wave and its derivative with respect to p."""
    if p > p_k:  # shock branch
        a_coef = 2.0 / ((gamma + 1.0) * rho_k)
        b_coef = (gamma - 1.0) / (gamma + 1.0) * p_k
        root = np.sqrt(a_coef / (p + b_coef))
        f = (p - p_k) * root
        df = root * (1.0 - 0.5 * (p - p_k) / (p + b_coef))
    else:  # rarefaction branch
        ratio = (p / p_k) ** ((gamma - 1.0) / (2.0 * gamma))
        f = 2.0 * a_k / (gamma - 1.0) * (ratio - 1.0)
        df = (p / p_k) ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho_k * a_k)
    return f, df


@dataclass(frozen=True)
class RiemannSolution:
    """Self-similar solution of the 1D Euler Riemann problem.

    ``sample(s)`` evaluates the conserved state at similarity coordinates
    s = x/t (vectorized). ``wave_speeds`` lists every wave speed, ordered,
    for piecewise integration over uncertain data.
    """

    gas: GasModel
    left: tuple
    right: tuple
    p_star: float
    v_star: float
    rho_star_left: float
    rho_star_right: float
    left_wave: str
    right_wave: str
    left_head: float
    left_tail: float
    right_tail: float
    right_head: float

    @property
    def wave_speeds(self) -> np.ndarray:
        return np.unique(
            [self.left_head, self.left_tail, self.v_star, self.right_tail, self.right_head]
        )

    def sample(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        gamma = self.gas.gamma
        rho_l, v_l, p_l = self.left
        rho_r, v_r, p_r = self.right
        a_l = np.sqrt(gamma * p_l / rho_l)
        a_r = np.sqrt(gamma * p_r / rho_r)
        rho = np.empty_like(s)
        v = np.empty_like(s)
        p = np.empty_like(s)

        left_outer = s <= self.left_head
        left_star = (s >= self.left_tail) & (s <= self.v_star)
        right_star = (s > self.v_star) & (s <= self.right_tail)
        right_outer = s >= self.right_head
        rho[left_outer], v[left_outer], p[left_outer] = rho_l, v_l, p_l
        rho[right_outer], v[right_outer], p[right_outer] = rho_r, v_r, p_r
        rho[left_star] = self.rho_star_left
        v[left_star], p[left_star] = self.v_star, self.p_star
        rho[right_star] = self.rho_star_right
        v[right_star], p[right_star] = self.v_star, self.p_star

        fan = (s > self.left_head) & (s < self.left_tail)
        if np.any(fan):
            sf = s[fan]
            common = 2.0 / (gamma + 1.0) + (gamma - 1.0) / ((gamma + 1.0) * a_l) * (v_l - sf)
            v[fan] = 2.0 / (gamma + 1.0) * (a_l + 0.5 * (gamma - 1.0) * v_l + sf)
            rho[fan] = rho_l * common ** (2.0 / (gamma - 1.0))
            p[fan] = p_l * common ** (2.0 * gamma / (gamma - 1.0))
        fan = (s > self.right_tail) & (s < self.right_head)
        if np.any(fan):
            sf = s[fan]
            common = 2.0 / (gamma + 1.0) - (gamma - 1.0) / ((gamma + 1.0) * a_r) * (v_r - sf)
            v[fan] = 2.0 / (gamma + 1.0) * (-a_r + 0.5 * (gamma - 1.0) * v_r + sf)
            rho[fan] = rho_r * common ** (2.0 / (gamma - 1.0))
            p[fan] = p_r * common ** (2.0 * gamma / (gamma - 1.0))
        return _conserved(rho, v, p, self.gas)


def solve_riemann(left, right, gas: GasModel, tol: float = 1e-12) -> RiemannSolution:
    """Exact two-wave solution; Newton on the pressure function, bisection fallback."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if left.shape != (3,) or right.shape != (3,):
        raise ValueError("solve_riemann expects 1D conserved states (rho, m, E)")
    if not (is_admissible(left, gas) and is_admissible(right, gas)):
        raise InadmissibleStateError("Riemann data must be admissible")
    gamma = gas.gamma
    rho_l, v_l, p_l = _primitives(left, gas)
    rho_r, v_r, p_r = _primitives(right, gas)
    a_l = np.sqrt(gamma * p_l / rho_l)
    a_r = np.sqrt(gamma * p_r / rho_r)
    if 2.0 * (a_l + a_r) / (gamma - 1.0) <= v_r - v_l:
        raise VacuumError("data generate vacuum; no positive star pressure")

    def fun(p):
        f_l, df_l = _wave_function(p, rho_l, p_l, a_l, gamma)
        f_r, df_r = _wave_function(p, rho_r, p_r, a_r, gamma)
        return f_l + f_r + (v_r - v_l), df_l + df_r

    # two-rarefaction guess keeps Newton inside the positive branch
    exp = (gamma - 1.0) / (2.0 * gamma)
    guess = (
        (a_l + a_r - 0.5 * (gamma - 1.0) * (v_r - v_l))
        / (a_l / p_l**exp + a_r / p_r**exp)
    ) ** (1.0 / exp)
    p = max(guess, tol)
    converged = False
    for _ in range(100):
        f, df = fun(p)
        step = f / df
        p_new = p - step
        if p_new <= 0.0:
            p_new = 0.5 * p
        if abs(p_new - p) <= tol * max(p_new, 1e-300) and abs(f) <= tol:
            p = p_new
            converged = True
            break
        p = p_new
    if not converged:
        lo, hi = tol, max(p_l, p_r)
        while fun(hi)[0] < 0.0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fun(mid)[0] > 0.0:
                hi = mid
            else:
                lo = mid
        p = 0.5 * (lo + hi)
    p_star = p
    f_l, _ = _wave_function(p_star, rho_l, p_l, a_l, gamma)
    f_r, _ = _wave_function(p_star, rho_r, p_r, a_r, gamma)
    v_star = 0.5 * (v_l + v_r) + 0.5 * (f_r - f_l)

    mu = (gamma - 1.0) / (gamma + 1.0)
    if p_star > p_l:
        left_wave = "shock"
        rho_star_l = rho_l * (p_star / p_l + mu) / (mu * p_star / p_l + 1.0)
        s = v_l - a_l * np.sqrt(
            (gamma + 1.0) / (2.0 * gamma) * p_star / p_l + (gamma - 1.0) / (2.0 * gamma)
        )
        left_head = left_tail = s
    else:
        left_wave = "rarefaction"
        rho_star_l = rho_l * (p_star / p_l) ** (1.0 / gamma)
        a_star = a_l * (p_star / p_l) ** ((gamma - 1.0) / (2.0 * gamma))
        left_head = v_l - a_l
        left_tail = v_star - a_star
    if p_star > p_r:
        right_wave = "shock"
        rho_star_r = rho_r * (p_star / p_r + mu) / (mu * p_star / p_r + 1.0)
        s = v_r + a_r * np.sqrt(
            (gamma + 1.0) / (2.0 * gamma) * p_star / p_r + (gamma - 1.0) / (2.0 * gamma)
        )
        right_head = right_tail = s
    else:
        right_wave = "rarefaction"
        rho_star_r = rho_r * (p_star / p_r) ** (1.0 / gamma)
        a_star = a_r * (p_star / p_r) ** ((gamma - 1.0) / (2.0 * gamma))
        right_head = v_r + a_r
        right_tail = v_star + a_star
    return RiemannSolution(
        gas=gas,
        left=(rho_l, v_l, p_l),
        right=(rho_r, v_r, p_r),
        p_star=float(p_star),
        v_star=float(v_star),
        rho_star_left=float(rho_star_l),
        rho_star_right=float(rho_star_r),
        left_wave=left_wave,
        right_wave=right_wave,
        left_head=float(left_head),
        left_tail=float(left_tail),
        right_tail=float(right_tail),
        right_head=float(right_head),
    )


def _uncertain_state(sol: RiemannSolution, x: float, t: float, xi: np.ndarray, x0: float, sigma: float):
    """Exact state at position x, time t, for interface positions x0 + sigma*xi."""
    offset = x - x0 - sigma * xi
    if t > 0.0:
        return sol.sample(offset / t)
    left = _conserved(*sol.left, sol.gas)
    right = _conserved(*sol.right, sol.gas)
    return np.where(offset[:, None] < 0.0, left, right)


def sod_reference_statistics(
    left,
    right,
    gas: GasModel,
    x_points: np.ndarray,
    t: float,
    x0: float = 0.5,
    sigma: float = 0.05,
    n_nodes: int = 100,
    sub_points=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean and variance of the exact uncertain-interface solution.

    The interface sits at x0 + sigma*xi with xi uniform on (-1, 1). At fixed
    x the state is only piecewise smooth in xi (it jumps where a wave crosses
    x), so the xi-integral is split at the wave-crossing points and a Gauss
    rule with ``n_nodes`` is applied per smooth piece. ``sub_points`` may
    hold per-point offsets (e.g. sub-cell positions relative to the cell
    center); the statistics then describe the sub-point-averaged state.
    """
    sol = solve_riemann(left, right, gas)
    x_points = np.asarray(x_points, dtype=float)
    offsets = np.asarray([0.0] if sub_points is None else sub_points, dtype=float)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(n_nodes)

    mean = np.empty((len(x_points), 3))
    second = np.empty((len(x_points), 3))
    speeds = sol.wave_speeds
    for i, x in enumerate(x_points):
        xs = x + offsets
        if sigma == 0.0:
            states = np.stack([_uncertain_state(sol, xj, t, np.zeros(1), x0, sigma)[0] for xj in xs])
            avg = states.mean(axis=0)
            mean[i] = avg
            second[i] = avg**2
            continue
        cuts = ((xs[:, None] - x0 - speeds[None, :] * t) / sigma).ravel()
        cuts = np.sort(cuts[(cuts > -1.0) & (cuts < 1.0)])
        edges = np.concatenate([[-1.0], cuts, [1.0]])
        m1 = np.zeros(3)
        m2 = np.zeros(3)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a <= 1e-15:
                continue
            xi = 0.5 * (a + b) + 0.5 * (b - a) * gl_nodes
            states = np.mean(
                [_uncertain_state(sol, xj, t, xi, x0, sigma) for xj in xs], axis=0
            )
            # density of xi is 1/2; segment scaling (b-a)/2
            w = 0.25 * (b - a) * gl_weights
            m1 += w @ states
            m2 += w @ states**2
        mean[i] = m1
        second[i] = m2
    var = np.maximum(second - mean**2, 0.0)
    return mean, var


def sod_reference_on_grid(
    left,
    right,
    gas: GasModel,
    grid: StructuredGrid,
    t: float,
    x0: float = 0.5,
    sigma: float = 0.05,
    n_nodes: int = 100,
    subcells: int = 5,
) -> FieldStatistics:
    """Grid-aligned reference statistics with sub-cell averaging."""
    if grid.ndim != 1:
        raise ValueError("the exact shock-tube reference is one-dimensional")
    dx = grid.deltas[0]
    if subcells > 1:
        sub = dx * ((np.arange(subcells) + 0.5) / subcells - 0.5)
    else:
        sub = None
    mean, var = sod_reference_statistics(
        left, right, gas, grid.cell_centers(0), t, x0, sigma, n_nodes, sub
    )
    return FieldStatistics(grid=grid, mean=mean, variance=var)


def collocation_reference(
    initial,
    grid: StructuredGrid,
    gas: GasModel,
    t_end: float,
    cfl: float = 0.9,
    n_nodes: int = 100,
    flux: str = "hll",
    threads: int = 1,
) -> FieldStatistics:
    """Statistics from deterministic FV runs at Gauss nodes in the random variable.

    ``initial(x..., xi)`` returns the initial states for a fixed realization.
    Node results are combined in node order regardless of the worker count.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    weights = weights / 2.0
    centers = [grid.cell_centers(axis) for axis in range(grid.ndim)]
    coords = np.meshgrid(*centers, indexing="ij") if grid.ndim > 1 else [centers[0]]

    def run(xi):
        u0 = initial(*coords, xi)
        return deterministic_solve(u0, grid, gas, t_end, cfl, flux)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, nodes))
    else:
        results = [run(xi) for xi in nodes]
    mean = np.zeros(results[0].shape)
    second = np.zeros(results[0].shape)
    for w, u in zip(weights, results):
        mean += w * u
        second += w * u**2
    var = np.maximum(second - mean**2, 0.0)
    return FieldStatistics(grid=grid, mean=mean, variance=var)
