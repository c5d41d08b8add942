"""Compressible Euler equations in one and two space dimensions.

State vectors are (rho, momentum..., total energy) along the last axis:
three components in 1D, four in 2D. All functions broadcast over leading
axes. The physical entropy and its gradient map underpin the entropy-closure
moment method; the gradient inverse maps any dual vector with negative energy
component to a strictly admissible state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GasModel",
    "InadmissibleStateError",
    "DualRangeError",
    "pressure",
    "sound_speed",
    "physical_flux",
    "max_wave_speed",
    "is_admissible",
    "admissible_mask",
    "entropy",
    "entropy_gradient",
    "entropy_hessian",
    "entropy_gradient_inverse",
    "dual_state_jacobian",
    "legendre_dual",
]


class InadmissibleStateError(ValueError):
    """State outside the hyperbolicity set (rho <= 0 or p <= 0)."""


class DualRangeError(ValueError):
    """Dual vector outside the range of the entropy gradient."""


@dataclass(frozen=True)
class GasModel:
    """Ideal gas with constant heat capacity ratio."""

    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


def _parts(u: np.ndarray):
    """Split (..., d) state arrays into rho, momentum block, total energy."""
    return u[..., 0], u[..., 1:-1], u[..., -1]


def _internal_energy(u: np.ndarray) -> np.ndarray:
    rho, m, en = _parts(u)
    return en - 0.5 * np.sum(m * m, axis=-1) / rho


def pressure(u, gas: GasModel) -> np.ndarray:
    """p = (gamma - 1) * (E - |m|^2 / (2 rho)); requires positive density."""
    u = np.asarray(u, dtype=float)
    if np.any(u[..., 0] <= 0.0):
        raise InadmissibleStateError("non-positive density")
    return (gas.gamma - 1.0) * _internal_energy(u)


def sound_speed(u, gas: GasModel) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    p = pressure(u, gas)
    if np.any(p <= 0.0):
        raise InadmissibleStateError("non-positive pressure")
    return np.sqrt(gas.gamma * p / u[..., 0])


def admissible_mask(u, gas: GasModel) -> np.ndarray:
    """Elementwise hyperbolicity-set membership: rho > 0 and p > 0."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        e_int = _internal_energy(u)
    return np.isfinite(rho) & (rho > 0.0) & np.isfinite(e_int) & (e_int > 0.0)


def is_admissible(u, gas: GasModel) -> bool:
    """True iff every state in the array lies in the hyperbolicity set."""
    return bool(np.all(admissible_mask(u, gas)))


def _check_admissible(u, gas: GasModel, what: str = "state"):
    if not is_admissible(u, gas):
        raise InadmissibleStateError(f"inadmissible {what} (rho <= 0 or p <= 0)")


def physical_flux(u, gas: GasModel, axis: int = 0) -> np.ndarray:
    """Directional Euler flux: (rho v, v m + p e_axis, v (E + p))."""
    u = np.asarray(u, dtype=float)
    _check_admissible(u, gas)
    return _flux_unchecked(u, gas, axis)


def _flux_unchecked(u: np.ndarray, gas: GasModel, axis: int) -> np.ndarray:
    rho, m, en = _parts(u)
    p = (gas.gamma - 1.0) * _internal_energy(u)
    v = m[..., axis] / rho
    f = np.empty_like(u)
    f[..., 0] = m[..., axis]
    f[..., 1:-1] = m * v[..., None]
    f[..., 1 + axis] += p
    f[..., -1] = v * (en + p)
    return f


def max_wave_speed(u, gas: GasModel, axis: int = 0) -> np.ndarray:
    """|v_axis| + sound speed, the spectral radius of the directional Jacobian."""
    u = np.asarray(u, dtype=float)
    _check_admissible(u, gas)
    return _wave_speed_unchecked(u, gas, axis)


def _wave_speed_unchecked(u: np.ndarray, gas: GasModel, axis: int) -> np.ndarray:
    rho, m, _ = _parts(u)
    p = (gas.gamma - 1.0) * _internal_energy(u)
    return np.abs(m[..., axis] / rho) + np.sqrt(gas.gamma * p / rho)


def entropy(u, gas: GasModel) -> np.ndarray:
    """Strictly convex entropy -rho * log(rho^-gamma * (E - |m|^2/(2 rho)))."""
    u = np.asarray(u, dtype=float)
    _check_admissible(u, gas)
    return _entropy_unchecked(u, gas)


def _entropy_unchecked(u: np.ndarray, gas: GasModel) -> np.ndarray:
    rho = u[..., 0]
    e_int = _internal_energy(u)
    return -rho * (np.log(e_int) - gas.gamma * np.log(rho))


def entropy_gradient(u, gas: GasModel) -> np.ndarray:
    """Gradient of the entropy with respect to the conserved variables."""
    u = np.asarray(u, dtype=float)
    _check_admissible(u, gas)
    rho, m, _ = _parts(u)
    e_int = _internal_energy(u)
    q = np.sum(m * m, axis=-1)
    grad = np.empty_like(u)
    grad[..., 0] = (
        -np.log(e_int) + gas.gamma * np.log(rho) + gas.gamma - 0.5 * q / (rho * e_int)
    )
    grad[..., 1:-1] = m / e_int[..., None]
    grad[..., -1] = -rho / e_int
    return grad


def entropy_hessian(u, gas: GasModel) -> np.ndarray:
    """Hessian of the entropy, shape (..., d, d); symmetric positive definite."""
    u = np.asarray(u, dtype=float)
    _check_admissible(u, gas)
    rho, m, _ = _parts(u)
    e = _internal_energy(u)
    q = np.sum(m * m, axis=-1)
    d = u.shape[-1]
    h = np.empty(u.shape + (d,))
    h[..., 0, 0] = gas.gamma / rho + 0.25 * q * q / (rho**3 * e * e)
    cross = -0.5 * q / (rho * rho * e * e)
    h[..., 0, 1:-1] = m * cross[..., None]
    h[..., 1:-1, 0] = h[..., 0, 1:-1]
    h[..., 0, -1] = -1.0 / e + 0.5 * q / (rho * e * e)
    h[..., -1, 0] = h[..., 0, -1]
    nm = d - 2
    eye = np.eye(nm)
    h[..., 1:-1, 1:-1] = eye / e[..., None, None] + (
        m[..., :, None] * m[..., None, :] / (rho * e * e)[..., None, None]
    )
    h[..., 1:-1, -1] = -m / (e * e)[..., None]
    h[..., -1, 1:-1] = h[..., 1:-1, -1]
    h[..., -1, -1] = rho / (e * e)
    return h


def _dual_parts(lam: np.ndarray):
    return lam[..., 0], lam[..., 1:-1], lam[..., -1]


def dual_range_mask(lam, gas: GasModel) -> np.ndarray:
    """Duals that invert to admissible states: finite with negative energy slot."""
    lam = np.asarray(lam, dtype=float)
    return np.all(np.isfinite(lam), axis=-1) & (lam[..., -1] < 0.0)


def entropy_gradient_inverse(lam, gas: GasModel) -> np.ndarray:
    """Conserved state whose entropy gradient equals the given dual vector.

    The closed form inverts the gradient map: with (l_rho, l_m, l_E) and
    l_E < 0,

        rho = exp((l_rho - log(-l_E) - gamma - |l_m|^2/(2 l_E)) / (gamma - 1)),
        m   = -rho l_m / l_E,
        E   = -rho / l_E + |m|^2 / (2 rho).

    Every image state is strictly admissible. Raises DualRangeError when the
    dual lies outside the gradient's range (l_E >= 0 or non-finite input).
    """
    lam = np.asarray(lam, dtype=float)
    if not np.all(dual_range_mask(lam, gas)):
        raise DualRangeError("dual vector outside the entropy-gradient range")
    return _dual_to_state_unchecked(lam, gas)


def _dual_to_state_unchecked(lam: np.ndarray, gas: GasModel) -> np.ndarray:
    l_rho, l_m, l_en = _dual_parts(lam)
    qm = np.sum(l_m * l_m, axis=-1)
    rho = np.exp(
        (l_rho - np.log(-l_en) - gas.gamma - 0.5 * qm / l_en) / (gas.gamma - 1.0)
    )
    u = np.empty_like(lam)
    u[..., 0] = rho
    u[..., 1:-1] = -rho[..., None] * l_m / l_en[..., None]
    # E = e_int + |m|^2/(2 rho) with e_int = -rho/l_E
    u[..., -1] = -rho / l_en + 0.5 * rho * qm / (l_en * l_en)
    return u


def _dual_eval(lam: np.ndarray, gas: GasModel):
    """Fused evaluation of the gradient inverse on valid duals.

    Returns (u, sstar, jac): the mapped state, the conjugate entropy value
    s*(lam) = lam . u - s(u), and the closed-form Jacobian du/dlam (the
    Hessian of s*, symmetric positive definite). One exponential per dual
    vector; all other quantities are reused algebraically.
    """
    l_rho, l_m, l_en = _dual_parts(lam)
    ile = -1.0 / l_en
    log_neg = np.log(-l_en)
    gm = l_m * ile[..., None]  # g_m = -l_m / l_E, also m / rho
    g2 = np.sum(gm * gm, axis=-1)
    a = 1.0 / (gas.gamma - 1.0)
    log_rho = a * (l_rho - log_neg - gas.gamma - 0.5 * l_en * g2)
    rho = np.exp(log_rho)
    e_int = rho * ile
    d = lam.shape[-1]
    u = np.empty_like(lam)
    u[..., 0] = rho
    u[..., 1:-1] = rho[..., None] * gm
    u[..., -1] = e_int + 0.5 * rho * g2
    # s(u) = -rho ((1-gamma) log rho - log(-l_E))
    sstar = np.sum(lam * u, axis=-1) + rho * (
        (1.0 - gas.gamma) * log_rho - log_neg
    )
    ar = a * rho
    h = ile + 0.5 * g2
    jac = np.empty(lam.shape + (d,))
    jac[..., 0, 0] = ar
    jac[..., 0, 1:-1] = ar[..., None] * gm
    jac[..., 1:-1, 0] = jac[..., 0, 1:-1]
    jac[..., 0, -1] = ar * h
    jac[..., -1, 0] = jac[..., 0, -1]
    jac[..., 1:-1, 1:-1] = ar[..., None, None] * (
        gm[..., :, None] * gm[..., None, :]
    ) + e_int[..., None, None] * np.eye(d - 2)
    jac[..., 1:-1, -1] = (ar * h + e_int)[..., None] * gm
    jac[..., -1, 1:-1] = jac[..., 1:-1, -1]
    jac[..., -1, -1] = ar * h * h + e_int * (ile + g2)
    return u, sstar, jac


def dual_state_jacobian(lam, gas: GasModel) -> np.ndarray:
    """Jacobian of the gradient inverse, (..., d, d); SPD (Hessian of the dual)."""
    lam = np.asarray(lam, dtype=float)
    if not np.all(dual_range_mask(lam, gas)):
        raise DualRangeError("dual vector outside the entropy-gradient range")
    return _dual_eval(lam, gas)[2]


def legendre_dual(lam, gas: GasModel) -> np.ndarray:
    """Convex conjugate of the entropy, s*(lam) = lam . u(lam) - s(u(lam))."""
    lam = np.asarray(lam, dtype=float)
    u = entropy_gradient_inverse(lam, gas)
    return np.sum(lam * u, axis=-1) - entropy(u, gas)
