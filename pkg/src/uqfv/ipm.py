"""Multi-element entropy-closure moment method (dual-variable formulation).

The unknown per (cell, element) is the coefficient block of the entropic
variable; conserved states are recovered through the inverse entropy-gradient
map, which keeps every reconstructed state admissible by construction. Each
time step advances the carried moments with fluxes evaluated on those mapped
states, then re-solves the dual problems so the entropic expansion matches
the new moments.

The dual problems over all (cell, element) pairs are independent; they are
solved as one batched Newton iteration (with per-problem backtracking line
search), so results are bit-identical under any solve order and worker
count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import GpcBasis
from .euler import (
    GasModel,
    _dual_eval,
    _dual_to_state_unchecked,
    admissible_mask,
    dual_range_mask,
    entropy_gradient,
    entropy_hessian,
)
from .fv import (
    MomentField,
    RunResult,
    RunStats,
    _Timer,
    cfl_time_step,
    moment_flux_divergence,
)

__all__ = [
    "NewtonConfig",
    "DualSolveError",
    "dual_residual",
    "dual_hessian",
    "solve_duals",
    "initial_duals_from_states",
    "ipm_update",
    "run_ipm",
]

# problems per batched-solve chunk; fixed so results do not depend on threads
_CHUNK = 2048


class DualSolveError(RuntimeError):
    """Newton solve for the dual variables failed."""


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rule for the dual solves.

    ``tol`` bounds the max-norm of the moment residual; backtracking halves
    the step at most ``max_halvings`` times per iteration.
    """

    tol: float = 1e-7
    max_iter: int = 100
    max_halvings: int = 50

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError(f"newton tolerance must be positive, got {self.tol}")


@dataclass
class DualSolveStats:
    """Aggregate and per-(cell, element) convergence metadata of one solve."""

    iterations: int = 0
    max_residual: float = 0.0
    max_iterations_single: int = 0
    per_problem_iterations: np.ndarray | None = None
    per_problem_residuals: np.ndarray | None = None


def dual_residual(
    duals: np.ndarray, moments: np.ndarray, basis: GpcBasis, gas: GasModel
) -> np.ndarray:
    """Moment mismatch u_k - <map(Lambda) phi_k f> for one (cell, element)."""
    duals = np.asarray(duals, dtype=float)
    lam_nodes = np.einsum("kd,kq->qd", duals, basis.phi)
    if not np.all(dual_range_mask(lam_nodes, gas)):
        raise DualSolveError("entropic variable leaves the dual range at a quadrature node")
    u = _dual_to_state_unchecked(lam_nodes, gas)
    proj = np.einsum("qd,kq,q->kd", u, basis.phi, basis.rule.weights)
    return np.asarray(moments, dtype=float) - proj


def dual_hessian(duals: np.ndarray, basis: GpcBasis, gas: GasModel) -> np.ndarray:
    """Newton matrix <grad_Lambda u phi_k phi_j f>, flattened to 2D; SPD."""
    duals = np.asarray(duals, dtype=float)
    lam_nodes = np.einsum("kd,kq->qd", duals, basis.phi)
    if not np.all(dual_range_mask(lam_nodes, gas)):
        raise DualSolveError("entropic variable leaves the dual range at a quadrature node")
    u = _dual_to_state_unchecked(lam_nodes, gas)
    jac = np.linalg.inv(entropy_hessian(u, gas))
    n = basis.n_coeffs * duals.shape[-1]
    h = np.einsum(
        "kq,jq,q,qab->kajb", basis.phi, basis.phi, basis.rule.weights, jac
    )
    return h.reshape(n, n)


def _solve_batch(
    lam, moments, basis: GpcBasis, gas: GasModel, cfg: NewtonConfig, shape, offset=0
):
    """Newton with line search on a (P, K+1, d) batch; modifies lam in place.

    Map evaluations from the line search are cached (states, conjugate
    values, Jacobians, residuals), so each Newton iteration evaluates the
    inverse map once per trial and never re-evaluates accepted iterates.
    """
    phi, w = basis.phi, basis.rule.weights
    n_prob, k1, d = lam.shape
    n = k1 * d
    w2 = np.einsum("kq,jq,q->kjq", phi, phi, w).reshape(k1 * k1, -1)
    iters = np.zeros(n_prob, dtype=np.int64)

    # invalid warm starts fall back to the constant entropic ansatz of the mean
    lam_nodes = np.einsum("pkd,kq->pqd", lam, phi)
    bad = ~np.all(dual_range_mask(lam_nodes, gas), axis=-1)
    if np.any(bad):
        means = moments[bad, 0, :]
        if not np.all(admissible_mask(means, gas)):
            raise DualSolveError("unrealizable moments: inadmissible cell mean")
        lam[bad] = 0.0
        lam[bad, 0, :] = entropy_gradient(means, gas)
        lam_nodes[bad] = np.einsum("pkd,kq->pqd", lam[bad], phi)

    u, sstar, jac = _dual_eval(lam_nodes, gas)
    sstar_w = sstar @ w
    res = moments - np.einsum("pqd,kq,q->pkd", u, phi, w)
    rn = np.max(np.abs(res.reshape(n_prob, -1)), axis=1)
    active = np.flatnonzero(rn > cfg.tol)

    while active.size:
        exhausted = iters[active] >= cfg.max_iter
        if np.any(exhausted):
            p = active[np.flatnonzero(exhausted)[0]]
            raise DualSolveError(
                f"dual solve at (cells..., element) {np.unravel_index(p + offset, shape)} "
                f"did not reach tol={cfg.tol:g} within {cfg.max_iter} iterations "
                f"(residual {rn[p]:.3e})"
            )
        la = lam[active]
        mo = moments[active]
        hess = np.einsum("xq,pqab->pxab", w2, jac[active]).reshape(
            active.size, k1, k1, d, d
        )
        hess = hess.transpose(0, 1, 3, 2, 4).reshape(active.size, n, n)
        delta = np.linalg.solve(hess, res[active].reshape(active.size, n, 1))
        delta = delta.reshape(la.shape)
        if not np.all(np.isfinite(delta)):
            broken = ~np.all(np.isfinite(delta.reshape(active.size, -1)), axis=1)
            p = active[np.flatnonzero(broken)[0]]
            raise DualSolveError(
                f"non-finite Newton direction at (cells..., element) "
                f"{np.unravel_index(p + offset, shape)}"
            )
        obj0 = sstar_w[active] - np.einsum("pkd,pkd->p", la, mo)
        rn0 = rn[active]

        step = np.ones(active.size)
        accepted = np.zeros(active.size, dtype=bool)
        for _ in range(cfg.max_halvings + 1):
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            cand = la[todo] + step[todo, None, None] * delta[todo]
            cand_nodes = np.einsum("pkd,kq->pqd", cand, phi)
            valid = np.all(dual_range_mask(cand_nodes, gas), axis=-1)
            obj = np.full(todo.size, np.inf)
            rn_c = np.full(todo.size, np.inf)
            if np.any(valid):
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    u_v, sstar_v, jac_v = _dual_eval(cand_nodes[valid], gas)
                    sw_v = sstar_v @ w
                    proj_v = np.einsum("pqd,kq,q->pkd", u_v, phi, w)
                    res_v = mo[todo][valid] - proj_v
                    obj_v = sw_v - np.einsum("pkd,pkd->p", cand[valid], mo[todo][valid])
                rn_v = np.max(np.abs(res_v.reshape(res_v.shape[0], -1)), axis=1)
                obj[valid] = np.where(np.isfinite(obj_v), obj_v, np.inf)
                rn_c[valid] = np.where(np.isfinite(rn_v), rn_v, np.inf)
            # objective decrease governs globally; near roundoff that decrease
            # is unresolvable while the residual norm still falls along the
            # SPD-Hessian Newton direction
            ok = (obj <= obj0[todo]) | (rn_c <= rn0[todo])
            if np.any(ok):
                gidx = active[todo[ok]]
                # acceptance implies validity; map it through the valid subset
                ok_in_valid = ok[valid]
                lam[gidx] = cand[ok]
                lam_nodes[gidx] = cand_nodes[ok]
                u[gidx] = u_v[ok_in_valid]
                jac[gidx] = jac_v[ok_in_valid]
                sstar_w[gidx] = sw_v[ok_in_valid]
                res[gidx] = res_v[ok_in_valid]
                rn[gidx] = rn_v[ok_in_valid]
                accepted[todo[ok]] = True
            step[todo[~ok]] *= 0.5
        if not np.all(accepted):
            p = active[np.flatnonzero(~accepted)[0]]
            raise DualSolveError(
                f"line search stalled at (cells..., element) "
                f"{np.unravel_index(p + offset, shape)}"
            )
        iters[active] += 1
        active = active[rn[active] > cfg.tol]
    return iters, rn


def solve_duals(
    moments: np.ndarray,
    warm_start: np.ndarray,
    basis: GpcBasis,
    gas: GasModel,
    config: NewtonConfig | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, DualSolveStats]:
    """Dual coefficients matching the given moments, per (cell, element).

    ``moments`` and ``warm_start`` share the layout (cells..., element,
    K+1, component); every problem is solved independently. Threading splits
    the problem axis into fixed chunks, so results do not depend on the
    worker count.
    """
    if config is None:
        config = NewtonConfig()
    moments = np.asarray(moments, dtype=float)
    shape = moments.shape[:-2]
    lam = np.array(warm_start, dtype=float).reshape((-1,) + moments.shape[-2:])
    mom = moments.reshape(lam.shape)
    chunks = [slice(i, i + _CHUNK) for i in range(0, lam.shape[0], _CHUNK)]
    if threads > 1 and len(chunks) > 1:
        def work(sl):
            return _solve_batch(lam[sl], mom[sl], basis, gas, config, shape, sl.start)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [
            _solve_batch(lam[sl], mom[sl], basis, gas, config, shape, sl.start)
            for sl in chunks
        ]
    iters = np.concatenate([r[0] for r in results])
    res = np.concatenate([r[1] for r in results])
    stats = DualSolveStats(
        iterations=int(iters.sum()),
        max_residual=float(res.max(initial=0.0)),
        max_iterations_single=int(iters.max(initial=0)),
        per_problem_iterations=iters.reshape(shape),
        per_problem_residuals=res.reshape(shape),
    )
    return lam.reshape(moments.shape), stats


def initial_duals_from_states(node_states: np.ndarray, basis: GpcBasis, gas: GasModel) -> np.ndarray:
    """Projection of the entropy gradient of initial node states onto the basis."""
    grad = entropy_gradient(node_states, gas)
    return np.einsum("...qd,kq,q->...kd", grad, basis.phi, basis.rule.weights)


def dual_node_states(duals: np.ndarray, basis: GpcBasis, gas: GasModel) -> np.ndarray:
    """Admissible states mapped from the entropic expansion at the quadrature nodes."""
    lam_nodes = np.einsum("...kd,kq->...qd", duals, basis.phi)
    if not np.all(dual_range_mask(lam_nodes, gas)):
        raise DualSolveError("entropic variable leaves the dual range at a quadrature node")
    return _dual_to_state_unchecked(lam_nodes, gas)


def ipm_update(
    duals: np.ndarray,
    moments: np.ndarray,
    grid,
    basis: GpcBasis,
    gas: GasModel,
    dt: float,
    flux: str = "hll",
) -> np.ndarray:
    """Forward-Euler moment update with fluxes on dual-reconstructed states."""
    nodes = dual_node_states(duals, basis, gas)
    div = moment_flux_divergence(nodes, grid, basis, gas, flux)
    return moments - dt * div


def run_ipm(
    initial: MomentField,
    gas: GasModel,
    t_end: float,
    cfl: float = 0.9,
    flux: str = "hll",
    newton: NewtonConfig | None = None,
    initial_duals: np.ndarray | None = None,
    snapshot_times=(),
    threads: int = 1,
    max_steps: int | None = None,
) -> RunResult:
    """Time loop of the multi-element entropy-closure moment method.

    Per step: map duals to node states, advance the carried moments with the
    FV update, then re-solve the duals warm-started from the previous step.
    ``initial_duals`` seeds the first solve (defaulting to the constant
    entropic ansatz of each cell mean).
    """
    if t_end < 0.0:
        raise ValueError(f"end time must be >= 0, got {t_end}")
    if newton is None:
        newton = NewtonConfig()
    grid, basis = initial.grid, initial.basis
    mom = initial.coeffs.copy()
    stats = RunStats()
    timer_all, timer_flux, timer_dual = _Timer(), _Timer(), _Timer()
    snapshots = []
    pending = sorted(snapshot_times)
    t = 0.0
    lam = None
    with timer_all:
        while t < t_end and (max_steps is None or stats.steps < max_steps):
            if lam is None:
                if initial_duals is None:
                    warm = np.zeros_like(mom)
                    warm[..., 0, :] = entropy_gradient(mom[..., 0, :], gas)
                else:
                    warm = initial_duals
                with timer_dual:
                    lam, dstats = solve_duals(mom, warm, basis, gas, newton, threads)
                _absorb(stats, dstats)
            nodes = dual_node_states(lam, basis, gas)
            dt = cfl_time_step(nodes, grid, gas, cfl)
            dt = min(dt, t_end - t)
            with timer_flux:
                div = moment_flux_divergence(nodes, grid, basis, gas, flux)
                mom = mom - dt * div
            with timer_dual:
                lam, dstats = solve_duals(mom, lam, basis, gas, newton, threads)
            _absorb(stats, dstats)
            t += dt
            stats.steps += 1
            while pending and t >= pending[0] - 1e-14:
                snapshots.append((t, MomentField(grid, basis, mom.copy())))
                pending.pop(0)
    stats.wall_s = timer_all.total
    stats.flux_s = timer_flux.total
    stats.dual_solve_s = timer_dual.total
    return RunResult(
        field=MomentField(grid, basis, mom), stats=stats, snapshots=snapshots
    )


def _absorb(stats: RunStats, dstats: DualSolveStats):
    stats.newton_iterations += dstats.iterations
    stats.newton_max_residual = max(stats.newton_max_residual, dstats.max_residual)
