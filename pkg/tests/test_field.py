import math

import numpy as np
import pytest

from foliata.errors import AllSingular, GridMismatch, InvalidParams, TooFewNodes
from foliata.field import (
    GridSpec,
    OmegaField,
    assemble_omega,
    assemble_omega_degenerate,
    compatibility_residual,
    field_document,
    field_from_document,
    level_curvatures,
    quartic_identity_residual,
    reconstruction_agreement,
    singular_set,
    sinh_gordon_residual,
    solve_sinh_gordon,
)
from foliata.moduli import ModuliPoint, derive_params
from foliata.profile import integrate_profile


def profiles(c0, c, d, xr=(0, 1), yr=(0, 1), a=None, trivial_f=False, trivial_g=False):
    dp = derive_params(ModuliPoint(c0, c, d), a)
    fsol = integrate_profile(dp, "F", xr, 1e-3, trivial=trivial_f)
    gsol = integrate_profile(dp, "G", yr, 1e-3, trivial=trivial_g)
    return fsol, gsol


@pytest.fixture(scope="module")
def sphere_field():
    fsol, gsol = profiles(1, -1, -1)
    return assemble_omega(fsol, gsol, GridSpec(0, 1, 0, 1, 101, 101))


def test_grid_spec_basics():
    g = GridSpec(0, 1, 0, 2, 11, 21)
    assert g.hx == pytest.approx(0.1)
    assert g.hy == pytest.approx(0.1)
    assert g.xs[0] == 0 and g.xs[-1] == 1
    with pytest.raises(InvalidParams):
        GridSpec(0, 0, 0, 1, 5, 5)


def test_trivial_profiles_give_zero_omega():
    fsol, gsol = profiles(-1, 0, 0, trivial_f=True, trivial_g=True)
    field = assemble_omega(fsol, gsol, GridSpec(0, 1, 0, 1, 11, 11))
    assert not field.mask.any()
    assert np.abs(field.omega).max() == 0.0


def test_positive_curvature_is_never_singular(sphere_field):
    assert not sphere_field.mask.any()
    assert np.isfinite(sphere_field.omega).all()
    assert np.allclose(sphere_field.sinh_omega, np.sinh(sphere_field.omega))


def test_reconstruction_formulas_agree(sphere_field):
    src = sphere_field.source
    assert reconstruction_agreement(src, sphere_field.grid) <= 1e-8


def test_quartic_identity(sphere_field):
    assert quartic_identity_residual(sphere_field.source, sphere_field.grid) <= 1e-8


def test_compatibility_constants_vanish(sphere_field):
    assert compatibility_residual(sphere_field.source, sphere_field.grid) <= 1e-10


def test_compatibility_constants_vanish_flat():
    fsol, gsol = profiles(0, -0.25, -0.25, xr=(0.5, 2.5), yr=(0.5, 2.5), a=0.0)
    grid = GridSpec(0.5, 2.5, 0.5, 2.5, 41, 41)
    field = assemble_omega(fsol, gsol, grid)
    assert compatibility_residual(field.source, grid) <= 1e-10
    assert quartic_identity_residual(field.source, grid) <= 1e-8


def test_assemble_rejects_mismatched_profiles():
    fsol, _ = profiles(1, -1, -1)
    _, gsol = profiles(1, -1, -0.5)
    with pytest.raises(GridMismatch):
        assemble_omega(fsol, gsol, GridSpec(0, 1, 0, 1, 11, 11))


def test_assemble_rejects_grid_outside_samples():
    fsol, gsol = profiles(1, -1, -1)
    with pytest.raises(GridMismatch):
        assemble_omega(fsol, gsol, GridSpec(0, 2, 0, 1, 11, 11))


def test_singular_rows_on_catenoid_family():
    # c = 0 with the f = 0 branch: omega blows up exactly where g^2 = 1
    dp = derive_params(ModuliPoint(-1, 0, 2))
    fsol = integrate_profile(dp, "F", (0, 1), 1e-3, trivial=True)
    gsol = integrate_profile(dp, "G", (-0.5, 0.5), 1e-3)
    # canonical start g(0) = sqrt(Y-) = 1, so y = 0 lies on the singular line
    grid = GridSpec(0, 1, -0.5, 0.5, 11, 11)
    field = assemble_omega(fsol, gsol, grid)
    assert field.mask[5, :].all()
    assert field.mask.sum() == 11
    assert (singular_set(dp, fsol, gsol, grid) == field.mask).all()


def test_flat_isolated_singular_points():
    fsol, gsol = profiles(0, -1, -1, xr=(-1, 1), yr=(-1, 1), a=0.0)
    grid = GridSpec(-1, 1, -1, 1, 21, 21)
    field = assemble_omega(fsol, gsol, grid)
    assert field.mask.sum() == 1
    assert field.mask[10, 10]


def test_all_singular_raises():
    # a grid confined to the singular row
    dp = derive_params(ModuliPoint(-1, 0, 2))
    fsol = integrate_profile(dp, "F", (0, 1), 1e-3, trivial=True)
    gsol = integrate_profile(dp, "G", (-1e-15, 1e-15), 1e-3)
    with pytest.raises(AllSingular):
        assemble_omega(fsol, gsol, GridSpec(0, 1, -1e-15, 1e-15, 5, 5))


def test_degenerate_field_values():
    grid = GridSpec(-0.5, 0.5, 0, math.pi / 4, 5, 5)
    field = assemble_omega_degenerate(0.0, 1.0, grid)
    assert field.provenance == "Degenerate"
    assert field.omega[0, 0] == 0.0  # the axis y = 0
    assert field.omega[-1, 0] == pytest.approx(-math.asinh(1.0), abs=1e-12)


def test_degenerate_marks_outside_strip_singular():
    grid = GridSpec(-0.2, 0.2, 0, 3.0, 9, 31)
    field = assemble_omega_degenerate(0.0, 1.0, grid)
    ys = grid.ys
    outside = np.abs(ys) >= math.pi / 2
    assert (field.mask[outside, :]).all()
    assert not field.mask[np.abs(ys) < 1.4, :].any()


def test_degenerate_overflow_guard_band():
    # nodes inside the strip but with |tan| beyond the overflow guard are
    # singular before arcsinh can blow up
    edge = math.pi / 2 - 1e-9
    grid = GridSpec(0, 1, 0, edge, 5, 5)
    field = assemble_omega_degenerate(0.0, 1.0, grid)
    assert field.mask[-1, :].all()
    assert not field.mask[0, :].any()


def test_degenerate_rejects_bad_constants():
    with pytest.raises(InvalidParams):
        assemble_omega_degenerate(0.5, 0.5, GridSpec(0, 1, 0, 1, 5, 5))


def test_degenerate_horizontal_curvature_is_one():
    # cosh(omega) = sec(y), omega_y = -sec(y) for (alpha, beta) = (0, 1),
    # so -omega_y / cosh(omega) == 1 everywhere on the strip
    grid = GridSpec(-0.6, 0.6, -0.6, 0.6, 41, 41)
    field = assemble_omega_degenerate(0.0, 1.0, grid)
    data = field.source.eval_grid(grid.xs, grid.ys)
    k_h = -data.wy / data.cosh
    assert np.abs(k_h - 1.0).max() <= 1e-12


@pytest.mark.parametrize(
    "make",
    [
        lambda n: assemble_omega(*profiles(1, -1, -1), GridSpec(0, 1, 0, 1, n, n)),
        lambda n: assemble_omega_degenerate(
            0.0, 1.0, GridSpec(-0.6, 0.6, -0.6, 0.6, n, n)
        ),
    ],
    ids=["reconstructed", "degenerate"],
)
def test_sinh_gordon_residual_second_order(make):
    linf = []
    for n in (51, 101):
        stats = sinh_gordon_residual(make(n))
        linf.append(stats.linf)
    ratio = linf[0] / linf[1]
    assert 3.5 <= ratio <= 4.5


def test_sinh_gordon_residual_zero_field():
    z = np.zeros((9, 9))
    field = OmegaField(
        grid=GridSpec(0, 1, 0, 1, 9, 9), c0=-1.0, omega=z, sinh_omega=z.copy(),
        mask=np.zeros((9, 9), bool), provenance="Synthetic",
    )
    assert sinh_gordon_residual(field).linf == 0.0
    with pytest.raises(TooFewNodes):
        sinh_gordon_residual(
            OmegaField(
                grid=GridSpec(0, 1, 0, 1, 4, 4), c0=-1.0, omega=np.zeros((4, 4)),
                sinh_omega=np.zeros((4, 4)), mask=np.zeros((4, 4), bool),
                provenance="Synthetic",
            )
        )


def test_newton_zero_boundary_gives_zero():
    grid = GridSpec(0, 1, 0, 1, 17, 17)
    field = solve_sinh_gordon(-1.0, grid, np.zeros((17, 17)))
    assert field.provenance == "Relaxation"
    assert np.abs(field.omega).max() == 0.0


def test_newton_matches_reconstruction_at_second_order():
    fsol, gsol = profiles(-1, -0.25, -0.25)
    errs = []
    for n in (26, 51):
        grid = GridSpec(0, 1, 0, 1, n, n)
        recon = assemble_omega(fsol, gsol, grid)
        solved = solve_sinh_gordon(-1.0, grid, recon.omega)
        errs.append(np.abs(solved.omega - recon.omega).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)


def test_newton_bump_boundary_converges():
    fsol, gsol = profiles(-1, -0.25, -0.25)
    grid = GridSpec(0, 1, 0, 1, 51, 51)
    recon = assemble_omega(fsol, gsol, grid)
    boundary = recon.omega.copy()
    boundary[-1, :] += 0.1 * grid.xs * (1 - grid.xs)
    solved = solve_sinh_gordon(-1.0, grid, boundary)
    assert sinh_gordon_residual(solved).linf < 1e-10


def test_newton_accepts_callable_boundary():
    grid = GridSpec(0, 1, 0, 1, 9, 9)
    field = solve_sinh_gordon(-1.0, grid, lambda x, y: 0.1 * x * y)
    assert field.omega[0, 0] == 0.0
    assert field.omega[-1, -1] == pytest.approx(0.1)


def test_level_curvature_matches_g_profile():
    fsol, gsol = profiles(1, 0, -0.25, trivial_f=True)
    grid = GridSpec(0, 1, 0, 1, 101, 101)
    field = assemble_omega(fsol, gsol, grid)
    k_h, _ = level_curvatures(field)
    g_vals = gsol.fn.eval_many(grid.ys)[0]
    assert np.nanmax(np.abs(k_h - g_vals[:, None])) <= 5e-5
    # horizontal curvature depends on y only
    assert np.nanmax(np.abs(k_h - k_h[:, :1])) <= 1e-12


def test_vertical_curvature_projection():
    fsol, gsol = profiles(1, -1, 0, xr=(0.2, 1.2), trivial_g=True)
    grid = GridSpec(0.2, 1.2, 0, 1, 101, 101)
    field = assemble_omega(fsol, gsol, grid)
    _, k_v = level_curvatures(field)
    f_vals = fsol.fn.eval_many(grid.xs)[0]
    prod = k_v * np.tanh(field.omega)
    assert np.nanmax(np.abs(prod + f_vals[None, :])) <= 5e-5


def test_level_curvature_zero_field():
    z = np.zeros((11, 11))
    field = OmegaField(
        grid=GridSpec(0, 1, 0, 1, 11, 11), c0=1.0, omega=z, sinh_omega=z.copy(),
        mask=np.zeros((11, 11), bool), provenance="Synthetic",
    )
    k_h, k_v = level_curvatures(field)
    assert np.nanmax(np.abs(k_h)) == 0.0
    assert np.isnan(k_v).all()


def test_field_document_round_trip():
    fsol, gsol = profiles(-1, 0, 2, trivial_f=True, yr=(-0.5, 0.5))
    grid = GridSpec(0, 1, -0.5, 0.5, 11, 11)
    field = assemble_omega(fsol, gsol, grid)
    doc = field_document(field)
    assert set(doc) == {"c0", "domain", "nx", "ny", "provenance", "omega", "mask"}
    assert doc["omega"][5 * 11] is None  # singular row serializes as null
    back = field_from_document(doc)
    assert back.c0 == field.c0
    assert (back.mask == field.mask).all()
    keep = ~field.mask
    assert np.allclose(back.omega[keep], field.omega[keep])


def test_omega_field_arrays_immutable(sphere_field):
    with pytest.raises(ValueError):
        sphere_field.omega[0, 0] = 1.0
