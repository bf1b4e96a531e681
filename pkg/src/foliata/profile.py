"""One-variable profile functions f(x), g(y) and their periods.

Both profiles solve the same pendulum-with-quartic-potential equation

    w'' = -(2 w^3 + k w),        w'^2 + w^4 + k w^2 + m0 = 0,

with (k, m0) = (cbar, c) for f and (dbar, d) for g.  The second-order form is
integrated with a classical fixed-step fourth-order scheme; the first
integral is never used for stepping (its square root is branch-ambiguous at
turning points) and instead serves as the conservation oracle.  w^2 ranges
over [max(0, r-), r+] where r-+ are the roots of R(s) = s^2 + k s + m0, and
the exact period is an elliptic integral evaluated after a sin-substitution
that absorbs the inverse-square-root endpoint singularities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (
    DriftExceeded,
    InvalidParams,
    NonOscillatory,
    NoRealSolution,
    NotDegenerate,
)
from .moduli import DerivedParams, ModuliPoint, derive_params

DRIFT_TOL_DEFAULT = 1e-9
#: Upper bound on the step used when marching to off-grid abscissae.
EVAL_MAX_STEP = 1e-3


def _kind_params(dp: DerivedParams, kind: str) -> tuple[float, float, float, float]:
    """(coef, const, lower root, upper root) for the requested profile."""
    kind = kind.upper()
    if kind == "F":
        return dp.cbar, dp.c_const, dp.xminus, dp.xplus
    if kind == "G":
        return dp.dbar, dp.d_const, dp.yminus, dp.yplus
    raise InvalidParams(f"kind must be 'F' or 'G', got {kind!r}")


def admissible_interval(dp: DerivedParams, kind: str) -> tuple[float, float]:
    """Range [m, M] of attainable squared profile values.

    Raises NoRealSolution when the discriminant is negative or the larger
    root is, i.e. when no real profile exists.
    """
    if dp.delta < 0 or dp.xplus is None:
        raise NoRealSolution(f"discriminant {dp.delta} < 0")
    _, _, lo, hi = _kind_params(dp, kind)
    if hi < 0:
        raise NoRealSolution(f"upper root {hi} < 0 for kind {kind}")
    return max(0.0, lo), hi


class ProfileFunction:
    """Evaluator for one profile, backed by fixed-step marching from x = 0.

    Canonical initial data: w(0) = 0, w'(0) = sqrt(-m0) when the admissible
    interval starts at 0 (sign-changing branch), else w(0) = sqrt(m),
    w'(0) = 0 (oscillation between positive roots).  A ``phase`` shifts the
    solution, and ``trivial`` selects the constant zero branch that exists
    when m0 = 0.
    """

    def __init__(
        self,
        dp: DerivedParams,
        kind: str,
        trivial: bool = False,
        phase: float = 0.0,
        max_step: float = EVAL_MAX_STEP,
    ):
        self.dp = dp
        self.kind = kind.upper()
        self.coef, self.const, _, _ = _kind_params(dp, self.kind)
        self.trivial = trivial
        self.phase = float(phase)
        self.max_step = float(max_step)
        if trivial:
            if abs(self.const) > 1e-12:
                raise InvalidParams(
                    f"constant zero branch needs vanishing constant, got {self.const}"
                )
            self.w0 = 0.0
            self.dw0 = 0.0
            return
        m, _ = admissible_interval(dp, self.kind)
        if m == 0.0 and self.const <= 0:
            self.w0 = 0.0
            self.dw0 = math.sqrt(-self.const)
        else:
            self.w0 = math.sqrt(m)
            self.dw0 = 0.0

    def _accel(self, w: float) -> float:
        return -(2.0 * w * w * w + self.coef * w)

    def _step(self, w: float, dw: float, h: float) -> tuple[float, float]:
        # classical RK4 increment of the state (w, w')
        k1w, k1v = dw, self._accel(w)
        k2w, k2v = dw + 0.5 * h * k1v, self._accel(w + 0.5 * h * k1w)
        k3w, k3v = dw + 0.5 * h * k2v, self._accel(w + 0.5 * h * k2w)
        k4w, k4v = dw + h * k3v, self._accel(w + h * k3w)
        return (
            h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
            h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )

    def _march(self, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives at sorted shifted abscissae (ascending |.|).

        State increments accumulate with compensated summation so the
        rounding floor stays well below the fourth-order truncation error
        (the drift-halving diagnostic depends on that).
        """
        w_out = np.empty(targets.size)
        dw_out = np.empty(targets.size)
        for sign in (1.0, -1.0):
            sel = np.nonzero(targets >= 0 if sign > 0 else targets < 0)[0]
            order = np.argsort(sign * targets[sel])
            pos, w, dw = 0.0, self.w0, self.dw0
            cw = cdw = 0.0
            for idx in sel[order]:
                gap = abs(targets[idx] - pos)
                if gap > 0:
                    n = max(1, math.ceil(gap / self.max_step))
                    h = sign * gap / n
                    for _ in range(n):
                        inc_w, inc_dw = self._step(w, dw, h)
                        y = inc_w - cw
                        t = w + y
                        cw = (t - w) - y
                        w = t
                        y = inc_dw - cdw
                        t = dw + y
                        cdw = (t - dw) - y
                        dw = t
                    pos = targets[idx]
                w_out[idx] = w
                dw_out[idx] = dw
        return w_out, dw_out

    def eval_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Profile value and derivative at arbitrary abscissae."""
        xs = np.asarray(xs, dtype=float)
        if self.trivial:
            return np.zeros_like(xs), np.zeros_like(xs)
        return self._march(xs.ravel() - self.phase)

    def first_integral(self, w: np.ndarray, dw: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        return dw * dw + w ** 4 + self.coef * w * w + self.const


@dataclass(frozen=True)
class ProfileSolution:
    """Sampled profile on a uniform grid plus conservation diagnostics."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    params: DerivedParams
    first_integral_drift: float
    period: float | None
    fn: ProfileFunction = field(repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.grid, self.values, self.derivs):
            arr.setflags(write=False)

    @property
    def trivial(self) -> bool:
        return self.fn.trivial


def integrate_profile(
    dp: DerivedParams,
    kind: str,
    x_range: tuple[float, float],
    step: float,
    trivial: bool = False,
    phase: float = 0.0,
    drift_tol: float = DRIFT_TOL_DEFAULT,
) -> ProfileSolution:
    """Integrate the second-order profile equation over a uniform grid.

    Raises DriftExceeded when the first-integral drift passes 100x the
    tolerance, which signals a step too large for the requested range.
    """
    x0, x1 = x_range
    if not (step > 0 and x1 > x0):
        raise InvalidParams(f"need step > 0 and x1 > x0, got {step}, {x_range}")
    fn = ProfileFunction(dp, kind, trivial=trivial, phase=phase, max_step=step)
    # round the count up so the samples always cover [x0, x1]
    n = max(2, math.ceil((x1 - x0) / step - 1e-9)) + 1
    grid = x0 + step * np.arange(n)
    values, derivs = fn.eval_many(grid)
    drift = float(np.max(np.abs(fn.first_integral(values, derivs))))
    if drift > 100.0 * drift_tol:
        raise DriftExceeded(
            f"first-integral drift {drift:.3e} exceeds 100 x {drift_tol:.1e}"
        )
    try:
        period = profile_period(dp, kind) if not trivial else None
    except (NonOscillatory, NoRealSolution):
        period = None
    return ProfileSolution(
        kind=kind.upper(),
        grid=grid,
        values=values,
        derivs=derivs,
        params=dp,
        first_integral_drift=drift,
        period=period,
        fn=fn,
    )


def profile_period(dp: DerivedParams, kind: str) -> float:
    """Exact period of the oscillating profile by quadrature.

    With roots m <= M of the quadratic in w^2, the period is

        4 * int_0^{pi/2} dt / sqrt(M sin^2 t - m)          (m <= 0, w crosses 0)
        2 * int_0^{pi/2} dt / sqrt(m + (M - m) sin^2 t)    (m > 0, w one-signed)

    both smooth integrands after substituting w = sqrt(M) sin t, respectively
    w^2 = m + (M - m) sin^2 t into dw / sqrt(-R(w^2)).
    """
    admissible_interval(dp, kind)
    _, const, rlo, rhi = _kind_params(dp, kind)
    if dp.delta == 0 or rhi == rlo:
        raise NonOscillatory("double root: profile is constant")
    if rhi <= 0:
        raise NonOscillatory("degenerate admissible interval")
    if rlo <= 0:
        if const == 0:
            raise NonOscillatory("homoclinic branch has infinite period")
        val, _ = quad(
            lambda t: 1.0 / math.sqrt(rhi * math.sin(t) ** 2 - rlo),
            0.0,
            math.pi / 2.0,
            epsabs=1e-13,
            epsrel=1e-13,
        )
        return 4.0 * val
    val, _ = quad(
        lambda t: 1.0 / math.sqrt(rlo + (rhi - rlo) * math.sin(t) ** 2),
        0.0,
        math.pi / 2.0,
        epsabs=1e-13,
        epsrel=1e-13,
    )
    return 2.0 * val


def _hermite_root(x0, h, w0, dw0, w1, dw1) -> float:
    """Zero of the cubic Hermite interpolant on [x0, x0+h] via Newton."""
    t = w0 / (w0 - w1) if w0 != w1 else 0.5
    for _ in range(40):
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        val = h00 * w0 + h10 * h * dw0 + h01 * w1 + h11 * h * dw1
        d00 = 6 * t**2 - 6 * t
        d10 = 3 * t**2 - 4 * t + 1
        d01 = -6 * t**2 + 6 * t
        d11 = 3 * t**2 - 2 * t
        der = d00 * w0 + d10 * h * dw0 + d01 * w1 + d11 * h * dw1
        if der == 0:
            break
        t_new = t - val / der
        if abs(t_new - t) < 1e-15:
            t = t_new
            break
        t = min(1.0, max(0.0, t_new))
    return x0 + t * h


def period_from_ode(
    dp: DerivedParams,
    kind: str,
    n_periods: int = 6,
    step: float = 1e-3,
    x_max: float = 1000.0,
) -> float:
    """Period measured from upward zero crossings of the integrated profile.

    Independent of :func:`profile_period`: crossings of w (sign-changing
    branch) or of w' (one-signed branch) are refined with cubic Hermite
    interpolation and the mean crossing gap over ``n_periods`` is returned.
    """
    m, bigm = admissible_interval(dp, kind)
    if dp.delta == 0 or bigm == m:
        raise NonOscillatory("constant profile has no period")
    fn = ProfileFunction(dp, kind, max_step=step)
    if fn.trivial or (fn.w0 == 0.0 and fn.dw0 == 0.0):
        raise NonOscillatory("profile sits at an equilibrium")
    use_deriv = m > 0.0
    crossings: list[float] = []
    w, dw = fn.w0, fn.dw0
    x = 0.0
    while x < x_max and len(crossings) < n_periods + 1:
        inc_w, inc_dw = fn._step(w, dw, step)
        w1, dw1 = w + inc_w, dw + inc_dw
        if use_deriv:
            # minima of w: upward crossings of w'
            if dw < 0.0 <= dw1:
                a0, a1 = fn._accel(w), fn._accel(w1)
                crossings.append(_hermite_root(x, step, dw, a0, dw1, a1))
        else:
            if w < 0.0 <= w1:
                crossings.append(_hermite_root(x, step, w, dw, w1, dw1))
        w, dw = w1, dw1
        x += step
    if len(crossings) < 2:
        raise NonOscillatory("no repeated crossings found")
    return (crossings[-1] - crossings[0]) / (len(crossings) - 1)


def degenerate_constants(p: ModuliPoint) -> tuple[float, float]:
    """Constant profile values (alpha, beta) on the discriminant-zero curve.

    Defined for c0 = -1 with delta = 0:  alpha^2 = (1 + c - d)/2 and
    beta^2 = (1 + d - c)/2, so alpha^2 + beta^2 = 1.
    """
    p.validate()
    if p.c0 != -1:
        raise InvalidParams("constant-profile family is specific to c0 = -1")
    dp = derive_params(p)
    if abs(dp.delta) > 1e-12:
        raise NotDegenerate(f"delta = {dp.delta} != 0")
    asq = (1.0 + p.c - p.d) / 2.0
    bsq = (1.0 + p.d - p.c) / 2.0
    if asq < -1e-12 or bsq < -1e-12:
        raise NotDegenerate(f"negative squared constants ({asq}, {bsq})")
    return math.sqrt(max(asq, 0.0)), math.sqrt(max(bsq, 0.0))
