"""Quadratic forms, weighted norms and the Yamabe quotient on an assembly."""

import numpy as np

from discretize.assembly import OperatorAssembly
from discretize.grid import as_values
from utils.errors import ArgumentError


def _check_field(a: OperatorAssembly, v) -> np.ndarray:
    v = as_values(v)
    if v.shape != (a.size,):
        raise ArgumentError(f"field has shape {v.shape}, grid has {a.size} active nodes")
    return v


def check_exponent(a: OperatorAssembly, p: float) -> None:
    p_crit = a.model.p_crit
    if not 2.0 <= p <= p_crit * (1 + 1e-12):
        raise ArgumentError(f"exponent p={p} outside [2, {p_crit}]")


def energy(a: OperatorAssembly, v) -> float:
    """A(v,v) + S(v,v)."""
    return a.energy(_check_field(a, v))


def l2_mass(a: OperatorAssembly, v) -> float:
    v = _check_field(a, v)
    return float(v @ a.apply_mass(v))


def weighted_p_mass(a: OperatorAssembly, v, alpha: float, p: float) -> float:
    """Sum over quadrature points of theta rho^{alpha p} |v|^p."""
    v = _check_field(a, v)
    check_exponent(a, p)
    return float(np.sum(a.point_weights(alpha, p) * np.abs(a.interpolate(v)) ** p))


def weighted_p_norm(a: OperatorAssembly, v, alpha: float, p: float) -> float:
    return weighted_p_mass(a, v, alpha, p) ** (1.0 / p)


def nonlinear_load(a: OperatorAssembly, v, alpha: float, p: float) -> np.ndarray:
    """Discrete W |v|^{p-2} v: derivative of weighted_p_mass divided by p."""
    values = a.interpolate(_check_field(a, v))
    return a.load(a.point_weights(alpha, p) * np.abs(values) ** (p - 2.0) * values)


def quotient(a: OperatorAssembly, v, alpha: float, p: float) -> float:
    v = _check_field(a, v)
    norm = weighted_p_norm(a, v, alpha, p)
    if norm == 0.0:
        raise ArgumentError("quotient of the zero field")
    return energy(a, v) / norm**2


def quotient_gradient(a: OperatorAssembly, v, alpha: float, p: float) -> np.ndarray:
    """Exact gradient of quotient(a, ., alpha, p) with respect to the nodal values."""
    v = _check_field(a, v)
    N = weighted_p_mass(a, v, alpha, p)
    if N == 0.0:
        raise ArgumentError("quotient of the zero field")
    Kv = a.apply(v)
    E = a.energy(v)
    return 2.0 * (Kv - (E / N) * nonlinear_load(a, v, alpha, p)) / N ** (2.0 / p)


def dual_norm(a: OperatorAssembly, r: np.ndarray) -> float:
    """||r||_{M^{-1}} = sqrt(r . M^{-1} r)."""
    return float(np.sqrt(max(float(r @ a.mass_solve(r)), 0.0)))


def relative_dual_norm(a: OperatorAssembly, r: np.ndarray, reference: np.ndarray) -> float:
    """||r||_{M^{-1}} / ||reference||_{M^{-1}}, absolute when the reference vanishes."""
    scale = dual_norm(a, reference)
    norm = dual_norm(a, r)
    return norm / scale if scale > 0 else norm


def el_residual(a: OperatorAssembly, v, Q: float, alpha: float, p: float) -> float:
    """Residual of (A + S) v = Q W |v|^{p-2} v in the M^{-1} dual norm, relative to ||(A + S) v||."""
    v = _check_field(a, v)
    if not np.any(v):
        raise ArgumentError("residual of the zero field")
    Kv = a.apply(v)
    return relative_dual_norm(a, Kv - Q * nonlinear_load(a, v, alpha, p), Kv)
