"""Conformal exponent omega on 2-D grids, its singular set, and the
structure equation.

The metric of each surface is cosh^2(omega) |dz|^2 and omega solves the
sinh-Gordon equation  lap(omega) + c0 sinh(omega) cosh(omega) = 0.  Away from
the constant-profile family, omega is recovered pointwise from the two
one-variable profiles by

    sinh(omega) = (f' + g') / (c0 + f^2 + g^2)
                = (g^2 - f^2 - a) / (f' - g'),

where the second form extends the first by continuity when its denominator
vanishes but f' - g' does not.  Nodes where both denominators vanish, or
where |sinh(omega)| exceeds the overflow guard, belong to the singular set D
(omega = infinity there).  The constant-profile family has the closed form
sinh(omega) = -tan(alpha x + beta y) on the principal strip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    AllSingular,
    GridMismatch,
    InvalidParams,
    NonConverged,
    TooFewNodes,
)
from .moduli import DerivedParams
from .profile import ProfileFunction, ProfileSolution

#: Denominator threshold below which a reconstruction formula is unusable.
EPS_DEN = 1e-9
#: |sinh omega| beyond this marks the node singular (pre-arcsinh overflow).
OVERFLOW_GUARD = 1e8


@dataclass(frozen=True)
class GridSpec:
    """Node-centered uniform grid on [x0, x1] x [y0, y1], row-major, y outermost."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2 or not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidParams(f"degenerate grid {self}")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return (self.x0, self.x1, self.y0, self.y1)


@dataclass(frozen=True)
class ResidualStats:
    """Max and RMS residual over the evaluated nodes."""

    linf: float
    l2: float
    grid_h: float
    count: int


def stats_from(residual: np.ndarray, grid_h: float) -> ResidualStats:
    vals = residual[np.isfinite(residual)]
    if vals.size == 0:
        raise TooFewNodes("no nodes with a full non-singular stencil")
    return ResidualStats(
        linf=float(np.max(np.abs(vals))),
        l2=float(np.sqrt(np.mean(vals * vals))),
        grid_h=grid_h,
        count=int(vals.size),
    )


class FieldData:
    """Pointwise field data: sinh/cosh of omega, its gradient, validity."""

    __slots__ = ("sinh", "cosh", "wx", "wy", "ok")

    def __init__(self, sinh, cosh, wx, wy, ok):
        self.sinh, self.cosh, self.wx, self.wy, self.ok = sinh, cosh, wx, wy, ok

    @property
    def omega(self):
        return np.arcsinh(self.sinh)


class ReconstructedSource:
    """Closed-form field data from the two profile functions.

    Profile values at arbitrary abscissae come from re-running the profile
    march (never from interpolating a sampled grid), so the only error in the
    data is the profile integrator's.  The gradient uses omega_x = -f cosh,
    omega_y = -g cosh.
    """

    provenance = "Reconstructed"

    def __init__(
        self,
        c0: float,
        dp: DerivedParams,
        ffn: ProfileFunction,
        gfn: ProfileFunction,
        eps_den: float = EPS_DEN,
        guard: float = OVERFLOW_GUARD,
    ):
        self.c0 = float(c0)
        self.dp = dp
        self.ffn = ffn
        self.gfn = gfn
        self.eps_den = eps_den
        self.guard = guard
        # both profiles constant zero at c0 = 0: the quotients are 0/0 at
        # every point but the constants branch gives omega = 0 exactly
        self.flat_trivial = c0 == 0 and ffn.trivial and gfn.trivial
        self._point: dict[tuple[str, float], tuple[float, float]] = {}
        self._batch: dict[tuple[str, bytes], tuple[np.ndarray, np.ndarray]] = {}

    def prime_x(self, xs: np.ndarray) -> None:
        f, fx = self.ffn.eval_many(xs)
        self._point.update(zip((("x", float(v)) for v in xs), zip(f, fx)))

    def prime_y(self, ys: np.ndarray) -> None:
        g, gy = self.gfn.eval_many(ys)
        self._point.update(zip((("y", float(v)) for v in ys), zip(g, gy)))

    def _axis_profiles(self, vals: np.ndarray, axis: str):
        """Cache-backed profile values along one axis."""
        key = (axis, vals.tobytes())
        hit = self._batch.get(key)
        if hit is not None:
            return hit
        fn = self.ffn if axis == "x" else self.gfn
        misses = sorted({float(v) for v in vals.ravel() if (axis, float(v)) not in self._point})
        if misses:
            w, dw = fn.eval_many(np.array(misses))
            self._point.update(zip(((axis, m) for m in misses), zip(w, dw)))
        pairs = [self._point[(axis, float(v))] for v in vals.ravel()]
        w = np.array([p[0] for p in pairs]).reshape(vals.shape)
        dw = np.array([p[1] for p in pairs]).reshape(vals.shape)
        if len(self._batch) > 64:
            self._batch.clear()
        self._batch[key] = (w, dw)
        return w, dw

    def _combine(self, f, fx, g, gy) -> FieldData:
        if self.flat_trivial:
            z = np.zeros(np.broadcast(np.asarray(f), np.asarray(g)).shape)
            return FieldData(z, z + 1.0, z, z.copy(), np.ones(z.shape, dtype=bool))
        a = self.dp.a
        den = self.c0 + f * f + g * g
        num = fx + gy
        den_fb = fx - gy
        num_fb = g * g - f * f - a
        use_p = np.abs(den) > self.eps_den
        use_f = ~use_p & (np.abs(den_fb) > self.eps_den)
        sinh = np.where(
            use_p,
            num / np.where(use_p, den, 1.0),
            np.where(use_f, num_fb / np.where(use_f, den_fb, 1.0), np.nan),
        )
        ok = (use_p | use_f) & (np.abs(sinh) <= self.guard)
        sinh = np.where(ok, sinh, np.nan)
        cosh = np.sqrt(1.0 + sinh * sinh)
        return FieldData(sinh, cosh, -f * cosh, -g * cosh, ok)

    def eval_bc(self, x, y) -> FieldData:
        """Field data with numpy broadcasting of the two coordinates."""
        xa = np.asarray(x, dtype=float)
        ya = np.asarray(y, dtype=float)
        f, fx = self._axis_profiles(np.atleast_1d(xa), "x")
        g, gy = self._axis_profiles(np.atleast_1d(ya), "y")
        if xa.ndim == 0:
            f, fx = f[0], fx[0]
        if ya.ndim == 0:
            g, gy = g[0], gy[0]
        return self._combine(f, fx, g, gy)

    def eval_grid(self, xs: np.ndarray, ys: np.ndarray) -> FieldData:
        f, fx = self._axis_profiles(np.asarray(xs, dtype=float), "x")
        g, gy = self._axis_profiles(np.asarray(ys, dtype=float), "y")
        return self._combine(
            f[None, :], fx[None, :], g[:, None], gy[:, None]
        )


class DegenerateSource:
    """Closed-form field data for the constant-profile family (c0 = -1)."""

    provenance = "Degenerate"

    def __init__(self, alpha: float, beta: float, guard: float = OVERFLOW_GUARD):
        if abs(alpha * alpha + beta * beta - 1.0) > 1e-9:
            raise InvalidParams(
                f"constants must satisfy alpha^2 + beta^2 = 1, got {alpha}, {beta}"
            )
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.guard = guard
        self.c0 = -1.0

    def _from_phase(self, s) -> FieldData:
        s = np.asarray(s, dtype=float)
        inside = np.abs(s) < math.pi / 2.0
        t = np.where(inside, np.tan(np.where(inside, s, 0.0)), np.nan)
        ok = inside & (np.abs(t) <= self.guard)
        sinh = np.where(ok, -t, np.nan)
        sec = np.sqrt(1.0 + t * t)
        cosh = np.where(ok, sec, np.nan)
        return FieldData(sinh, cosh, -self.alpha * sec, -self.beta * sec, ok)

    def eval_bc(self, x, y) -> FieldData:
        """Field data with numpy broadcasting of the two coordinates."""
        return self._from_phase(
            self.alpha * np.asarray(x, dtype=float) + self.beta * np.asarray(y, dtype=float)
        )

    def eval_grid(self, xs: np.ndarray, ys: np.ndarray) -> FieldData:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return self._from_phase(self.alpha * xs[None, :] + self.beta * ys[:, None])


@dataclass(frozen=True)
class OmegaField:
    """The conformal exponent sampled on a grid.

    ``omega`` and ``sinh_omega`` carry NaN at singular nodes; ``mask`` is
    True exactly there.  ``source`` (when present) evaluates the same field
    at off-grid points and is what frame integration consumes.
    """

    grid: GridSpec
    c0: float
    omega: np.ndarray
    sinh_omega: np.ndarray
    mask: np.ndarray
    provenance: str
    source: object | None = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.omega, self.sinh_omega, self.mask):
            arr.setflags(write=False)

    @property
    def nx(self) -> int:
        return self.grid.nx

    @property
    def ny(self) -> int:
        return self.grid.ny

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return self.grid.domain


def _field_from_source(source, grid: GridSpec) -> OmegaField:
    data = source.eval_grid(grid.xs, grid.ys)
    mask = ~data.ok
    if mask.all():
        raise AllSingular("every grid node lies on the singular set")
    return OmegaField(
        grid=grid,
        c0=source.c0,
        omega=data.omega,
        sinh_omega=np.asarray(data.sinh, dtype=float),
        mask=mask,
        provenance=source.provenance,
        source=source,
    )


def source_from_profiles(
    fsol: ProfileSolution,
    gsol: ProfileSolution,
    eps_den: float = EPS_DEN,
    guard: float = OVERFLOW_GUARD,
) -> ReconstructedSource:
    if fsol.kind != "F" or gsol.kind != "G":
        raise GridMismatch("need one F profile and one G profile")
    if fsol.params != gsol.params:
        raise GridMismatch("profiles built from different derived parameters")
    dp = fsol.params
    c0 = (dp.cbar + dp.dbar) / 2.0
    return ReconstructedSource(c0, dp, fsol.fn, gsol.fn, eps_den=eps_den, guard=guard)


def assemble_omega(
    fsol: ProfileSolution,
    gsol: ProfileSolution,
    grid: GridSpec,
    eps_den: float = EPS_DEN,
    guard: float = OVERFLOW_GUARD,
) -> OmegaField:
    """Reconstruct omega on a grid from two profile solutions.

    Each node uses the primary quotient when |c0 + f^2 + g^2| > eps, the
    continuity extension when only |f' - g'| > eps, and is marked singular
    when both fail or the value overflows the guard.
    """
    if not (
        fsol.grid[0] - 1e-12 <= grid.x0
        and grid.x1 <= fsol.grid[-1] + 1e-12
        and gsol.grid[0] - 1e-12 <= grid.y0
        and grid.y1 <= gsol.grid[-1] + 1e-12
    ):
        raise GridMismatch("grid extends beyond the sampled profile ranges")
    return _field_from_source(source_from_profiles(fsol, gsol, eps_den, guard), grid)


def assemble_omega_degenerate(
    alpha: float, beta: float, grid: GridSpec, guard: float = OVERFLOW_GUARD
) -> OmegaField:
    """Closed-form field omega = arcsinh(-tan(alpha x + beta y)) on a grid.

    Nodes outside the principal strip |alpha x + beta y| < pi/2 are singular.
    """
    return _field_from_source(DegenerateSource(alpha, beta, guard=guard), grid)


def singular_set(
    dp: DerivedParams,
    fsol: ProfileSolution,
    gsol: ProfileSolution,
    grid: GridSpec,
) -> np.ndarray:
    """Boolean mask of the singular set D on the grid.

    The analytic case conditions are, with both profiles nontrivial,
    {f^2 + g^2 + c0 = 0 and f' + g' != 0}; with f = 0, {g^2 + c0 = 0}; with
    g = 0, {f^2 + c0 = 0}.  On a grid all three reduce to the dual-quotient
    test used in assembly (both denominators below eps, or a value beyond
    the overflow guard), so the mask agrees with assemble_omega's by
    construction.
    """
    if fsol.params != dp or gsol.params != dp:
        raise GridMismatch("profiles built from different derived parameters")
    source = source_from_profiles(fsol, gsol)
    return ~source.eval_grid(grid.xs, grid.ys).ok


def _interior_laplacian(w: np.ndarray, hx: float, hy: float) -> np.ndarray:
    lap = np.full_like(w, np.nan)
    lap[1:-1, 1:-1] = (
        (w[1:-1, 2:] - 2.0 * w[1:-1, 1:-1] + w[1:-1, :-2]) / (hx * hx)
        + (w[2:, 1:-1] - 2.0 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / (hy * hy)
    )
    return lap


def dilate_mask(mask: np.ndarray) -> np.ndarray:
    """One-cell dilation (8-neighborhood), so stencils never straddle D."""
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out[:, 1:] |= out[:, :-1].copy()
    out[:, :-1] |= out[:, 1:].copy()
    return out


def _margin_blank(res: np.ndarray, grid: GridSpec, margin: float) -> np.ndarray:
    if margin <= 0:
        return res
    xs, ys = grid.xs, grid.ys
    keep_x = (xs >= grid.x0 + margin) & (xs <= grid.x1 - margin)
    keep_y = (ys >= grid.y0 + margin) & (ys <= grid.y1 - margin)
    out = np.where(keep_y[:, None] & keep_x[None, :], res, np.nan)
    return out


def sinh_gordon_residual(field: OmegaField, margin: float = 0.0) -> ResidualStats:
    """Centered second-order residual of lap(omega) + c0 sinh(omega) cosh(omega).

    Evaluated at interior nodes whose full five-point stencil avoids the
    (dilated) singular mask; ``margin`` additionally excludes a border strip,
    in coordinate units, from the statistics.
    """
    if field.nx < 5 or field.ny < 5:
        raise TooFewNodes(f"need at least 5x5 nodes, got {field.nx}x{field.ny}")
    w = field.omega
    res = _interior_laplacian(w, field.grid.hx, field.grid.hy)
    res += np.where(field.mask, np.nan, field.c0 * field.sinh_omega * np.cosh(w))
    res[dilate_mask(field.mask)] = np.nan
    res = _margin_blank(res, field.grid, margin)
    return stats_from(res, max(field.grid.hx, field.grid.hy))


def solve_sinh_gordon(
    c0: float,
    grid: GridSpec,
    boundary,
    initial: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> OmegaField:
    """Damped Newton solve of the Dirichlet problem for the structure equation.

    ``boundary`` is either a callable (x, y) -> omega evaluated on the grid
    edge, or a full (ny, nx) array whose boundary ring supplies the data.
    Newton steps are halved until the residual norm decreases (factor at
    least 2^-10); convergence is declared when the applied update has
    max-norm below ``tol``.
    """
    nx, ny = grid.nx, grid.ny
    if nx < 5 or ny < 5:
        raise TooFewNodes(f"need at least a 5x5 grid, got {nx}x{ny}")
    xs, ys = grid.xs, grid.ys
    w = np.zeros((ny, nx))
    if callable(boundary):
        w[0, :] = [boundary(x, ys[0]) for x in xs]
        w[-1, :] = [boundary(x, ys[-1]) for x in xs]
        w[:, 0] = [boundary(xs[0], y) for y in ys]
        w[:, -1] = [boundary(xs[-1], y) for y in ys]
    else:
        b = np.asarray(boundary, dtype=float)
        if b.shape != (ny, nx):
            raise GridMismatch(f"boundary array must be shaped {(ny, nx)}")
        w[0, :], w[-1, :], w[:, 0], w[:, -1] = b[0, :], b[-1, :], b[:, 0], b[:, -1]
    if not np.all(np.isfinite(w[[0, -1], :])) or not np.all(np.isfinite(w[:, [0, -1]])):
        raise InvalidParams("boundary values must be finite")
    if initial is not None:
        w[1:-1, 1:-1] = np.asarray(initial, dtype=float)[1:-1, 1:-1]

    hx, hy = grid.hx, grid.hy
    mi, ni = ny - 2, nx - 2
    ax, ay = 1.0 / (hx * hx), 1.0 / (hy * hy)
    dxx = sp.diags([ax * np.ones(ni - 1), -2.0 * ax * np.ones(ni), ax * np.ones(ni - 1)], [-1, 0, 1])
    dyy = sp.diags([ay * np.ones(mi - 1), -2.0 * ay * np.ones(mi), ay * np.ones(mi - 1)], [-1, 0, 1])
    lap_op = (sp.kron(sp.identity(mi), dxx) + sp.kron(dyy, sp.identity(ni))).tocsr()

    def residual(arr: np.ndarray) -> np.ndarray:
        lap = (
            (arr[1:-1, 2:] - 2.0 * arr[1:-1, 1:-1] + arr[1:-1, :-2]) * ax
            + (arr[2:, 1:-1] - 2.0 * arr[1:-1, 1:-1] + arr[:-2, 1:-1]) * ay
        )
        return (lap + c0 * np.sinh(arr[1:-1, 1:-1]) * np.cosh(arr[1:-1, 1:-1])).ravel()

    for _ in range(max_iter):
        fv = residual(w)
        jac = lap_op + sp.diags(c0 * np.cosh(2.0 * w[1:-1, 1:-1]).ravel())
        delta = spla.spsolve(jac.tocsc(), -fv)
        norm0 = np.linalg.norm(fv)
        lam = 1.0
        while lam > 2.0 ** -10:
            trial = w.copy()
            trial[1:-1, 1:-1] += lam * delta.reshape(mi, ni)
            if np.linalg.norm(residual(trial)) < norm0:
                break
            lam *= 0.5
        w[1:-1, 1:-1] += lam * delta.reshape(mi, ni)
        if lam * np.max(np.abs(delta)) < tol:
            return OmegaField(
                grid=grid,
                c0=float(c0),
                omega=w,
                sinh_omega=np.sinh(w),
                mask=np.zeros((ny, nx), dtype=bool),
                provenance="Relaxation",
            )
    raise NonConverged(f"no convergence within {max_iter} Newton iterations")


def level_curvatures(field: OmegaField) -> tuple[np.ndarray, np.ndarray]:
    """Geodesic curvature grids of the horizontal and vertical level curves.

    k_h = -omega_y / cosh(omega) is defined at every non-singular node;
    k_v = omega_x / sinh(omega) only where omega != 0 (NaN elsewhere).
    """
    w = np.where(field.mask, np.nan, field.omega)
    wy, wx = np.gradient(w, field.grid.ys, field.grid.xs, edge_order=2)
    cosh = np.cosh(w)
    k_h = -wy / cosh
    with np.errstate(divide="ignore", invalid="ignore"):
        k_v = np.where(np.abs(w) >= EPS_DEN, wx / np.sinh(w), np.nan)
    return k_h, k_v


# ---------------------------------------------------------------------------
# identity diagnostics for reconstructed fields
# ---------------------------------------------------------------------------

def reconstruction_agreement(source: ReconstructedSource, grid: GridSpec) -> float:
    """Max relative gap between the two quotients where both are defined."""
    f, fx = source.ffn.eval_many(grid.xs)
    g, gy = source.gfn.eval_many(grid.ys)
    den = source.c0 + f[None, :] ** 2 + g[:, None] ** 2
    den_fb = fx[None, :] - gy[:, None]
    both = (np.abs(den) > source.eps_den) & (np.abs(den_fb) > source.eps_den)
    prim = (fx[None, :] + gy[:, None]) / np.where(both, den, 1.0)
    fall = (g[:, None] ** 2 - f[None, :] ** 2 - source.dp.a) / np.where(both, den_fb, 1.0)
    rel = np.abs(prim - fall) / np.maximum(1.0, np.abs(prim))
    return float(np.max(np.where(both, rel, 0.0)))


def quartic_identity_residual(source: ReconstructedSource, grid: GridSpec) -> float:
    """Max relative residual of f'^2 - g'^2 = (c0+f^2+g^2)(g^2-f^2-a)."""
    f, fx = source.ffn.eval_many(grid.xs)
    g, gy = source.gfn.eval_many(grid.ys)
    lhs = fx[None, :] ** 2 - gy[:, None] ** 2
    rhs = (source.c0 + f[None, :] ** 2 + g[:, None] ** 2) * (
        g[:, None] ** 2 - f[None, :] ** 2 - source.dp.a
    )
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def compatibility_residual(source: ReconstructedSource, grid: GridSpec) -> float:
    """Max absolute value of the two separation-compatibility expressions.

    Both must vanish identically once cbar = c0 + a and dbar = c0 - a:
    f (c0^2 - cbar c0 + c - d) + f g^2 (2 c0 - cbar - dbar) and its mirror.
    """
    dp = source.dp
    c0 = source.c0
    c, d = dp.c_const, dp.d_const
    f, _ = source.ffn.eval_many(grid.xs)
    g, _ = source.gfn.eval_many(grid.ys)
    f2 = f[None, :] ** 2
    g2 = g[:, None] ** 2
    expr_f = f[None, :] * (c0 * c0 - dp.cbar * c0 + c - d) + f[None, :] * g2 * (
        2.0 * c0 - dp.cbar - dp.dbar
    )
    expr_g = g[:, None] * (c0 * c0 - dp.dbar * c0 + d - c) + f2 * g[:, None] * (
        2.0 * c0 - dp.dbar - dp.cbar
    )
    return float(max(np.max(np.abs(expr_f)), np.max(np.abs(expr_g))))


# ---------------------------------------------------------------------------
# wire format
# ---------------------------------------------------------------------------

def field_document(field: OmegaField) -> dict:
    """JSON-ready document for a field (omega row-major, null at singular)."""
    flat_omega = [
        None if m else v
        for v, m in zip(field.omega.ravel().tolist(), field.mask.ravel().tolist())
    ]
    return {
        "c0": field.c0,
        "domain": list(field.domain),
        "nx": field.nx,
        "ny": field.ny,
        "provenance": field.provenance,
        "omega": flat_omega,
        "mask": field.mask.ravel().tolist(),
    }


def field_from_document(doc: dict) -> OmegaField:
    grid = GridSpec(*doc["domain"], nx=int(doc["nx"]), ny=int(doc["ny"]))
    mask = np.array(doc["mask"], dtype=bool).reshape(grid.ny, grid.nx)
    omega = np.array(
        [np.nan if v is None else float(v) for v in doc["omega"]]
    ).reshape(grid.ny, grid.nx)
    return OmegaField(
        grid=grid,
        c0=float(doc["c0"]),
        omega=omega,
        sinh_omega=np.sinh(omega),
        mask=mask,
        provenance=str(doc["provenance"]),
    )
