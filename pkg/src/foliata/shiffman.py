"""The Shiffman field and second-variation diagnostics.

For any solution omega of the structure equation, the field

    u = omega_xy - tanh(omega) omega_x omega_y = -cosh(omega) d/dx k_h

is a Jacobi field:  lap(u) + (c0 + 2 |grad omega|^2 / cosh^2 omega) u = 0.
Its vanishing characterizes the fields whose horizontal level curves have
constant curvature.  Everything here is computed from omega alone on the
grid, with centered second-order stencils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewNodes
from .field import (
    OmegaField,
    ResidualStats,
    _interior_laplacian,
    _margin_blank,
    dilate_mask,
    stats_from,
)


@dataclass(frozen=True)
class JacobiReport:
    """Shiffman field, Jacobi residual and curvature grids of one field."""

    u: np.ndarray
    residual: ResidualStats
    potential: np.ndarray
    gauss: np.ndarray


def _masked_omega(field: OmegaField) -> np.ndarray:
    return np.where(field.mask, np.nan, field.omega)


def _gradient(field: OmegaField) -> tuple[np.ndarray, np.ndarray]:
    w = _masked_omega(field)
    wy, wx = np.gradient(w, field.grid.ys, field.grid.xs, edge_order=2)
    return wx, wy


def _cross_derivative(w: np.ndarray, hx: float, hy: float) -> np.ndarray:
    out = np.full_like(w, np.nan)
    out[1:-1, 1:-1] = (
        w[2:, 2:] - w[2:, :-2] - w[:-2, 2:] + w[:-2, :-2]
    ) / (4.0 * hx * hy)
    return out


def shiffman_field(field: OmegaField) -> np.ndarray:
    """u = omega_xy - tanh(omega) omega_x omega_y by centered differences.

    Defined on interior nodes clear of the dilated singular mask; NaN on the
    boundary ring and near the singular set.
    """
    if field.nx < 3 or field.ny < 3:
        raise TooFewNodes("need at least 3x3 nodes for the cross stencil")
    w = _masked_omega(field)
    hx, hy = field.grid.hx, field.grid.hy
    wxy = _cross_derivative(w, hx, hy)
    wy, wx = np.gradient(w, field.grid.ys, field.grid.xs, edge_order=2)
    u = wxy - np.tanh(w) * wx * wy
    u[dilate_mask(field.mask)] = np.nan
    u[[0, -1], :] = np.nan
    u[:, [0, -1]] = np.nan
    return u


def shiffman_from_curvature(field: OmegaField) -> np.ndarray:
    """Cross-check route: -cosh(omega) d/dx of the horizontal curvature."""
    from .field import level_curvatures

    k_h, _ = level_curvatures(field)
    _, dk = np.gradient(k_h, field.grid.ys, field.grid.xs, edge_order=2)
    return -np.cosh(_masked_omega(field)) * dk


def jacobi_residual(
    field: OmegaField, u: np.ndarray, margin: float = 0.0
) -> ResidualStats:
    """Residual of lap(u) + (c0 + 2 |grad omega|^2 / cosh^2) u.

    The identity holds in the continuum for the Shiffman field of any
    structure-equation solution; for an arbitrary u it has no reason to be
    small (that non-example is part of the test suite).
    """
    if field.nx < 5 or field.ny < 5:
        raise TooFewNodes("need at least 5x5 nodes for the Jacobi stencil")
    wx, wy = _gradient(field)
    cosh = np.cosh(_masked_omega(field))
    potential = field.c0 + 2.0 * (wx * wx + wy * wy) / (cosh * cosh)
    res = _interior_laplacian(np.asarray(u, dtype=float), field.grid.hx, field.grid.hy)
    res += potential * u
    res = _margin_blank(res, field.grid, margin)
    return stats_from(res, max(field.grid.hx, field.grid.hy))


def jacobi_potential(field: OmegaField) -> np.ndarray:
    """Second-variation potential Ric(N) + |dN|^2 on the grid.

    Equals c0 / cosh^2(omega) + 2 |grad omega|^2 / cosh^4(omega), with the
    gradient by finite differences.
    """
    wx, wy = _gradient(field)
    cosh2 = np.cosh(_masked_omega(field)) ** 2
    return field.c0 / cosh2 + 2.0 * (wx * wx + wy * wy) / (cosh2 * cosh2)


def potential_identity_linf(field: OmegaField) -> float:
    """Max of |cosh^2 * potential - c0 - 2 |grad omega|^2 / cosh^2|."""
    wx, wy = _gradient(field)
    cosh2 = np.cosh(_masked_omega(field)) ** 2
    lhs = cosh2 * jacobi_potential(field)
    rhs = field.c0 + 2.0 * (wx * wx + wy * wy) / cosh2
    diff = np.abs(lhs - rhs)
    vals = diff[np.isfinite(diff)]
    return float(np.max(vals)) if vals.size else float("nan")


def gauss_curvature(field: OmegaField) -> np.ndarray:
    """K = c0 tanh^2(omega) - |grad omega|^2 / cosh^4(omega)."""
    wx, wy = _gradient(field)
    w = _masked_omega(field)
    return field.c0 * np.tanh(w) ** 2 - (wx * wx + wy * wy) / np.cosh(w) ** 4


def gauss_curvature_log_route(field: OmegaField) -> np.ndarray:
    """Independent route K = -(1 / 2 lambda) lap(log lambda), lambda = cosh^2."""
    w = _masked_omega(field)
    log_lam = 2.0 * np.log(np.cosh(w))
    lap = _interior_laplacian(log_lam, field.grid.hx, field.grid.hy)
    return -lap / (2.0 * np.cosh(w) ** 2)


def gauss_dual_route_linf(field: OmegaField) -> float:
    diff = np.abs(gauss_curvature(field) - gauss_curvature_log_route(field))
    vals = diff[np.isfinite(diff)]
    return float(np.max(vals)) if vals.size else float("nan")


def shiffman_report(field: OmegaField, margin: float = 0.0) -> JacobiReport:
    u = shiffman_field(field)
    return JacobiReport(
        u=u,
        residual=jacobi_residual(field, u, margin=margin),
        potential=jacobi_potential(field),
        gauss=gauss_curvature(field),
    )


def shiffman_document(field: OmegaField, margin: float = 0.0) -> dict:
    """JSON-ready summary used by the verification CLI."""
    report = shiffman_report(field, margin=margin)
    finite_u = report.u[np.isfinite(report.u)]
    return {
        "max_u": float(np.max(np.abs(finite_u))) if finite_u.size else None,
        "jacobi_residual": {
            "linf": report.residual.linf,
            "l2": report.residual.l2,
            "h": report.residual.grid_h,
        },
        "potential_identity_linf": potential_identity_linf(field),
        "gauss_dual_route_linf": gauss_dual_route_linf(field),
    }
