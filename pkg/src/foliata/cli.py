"""Command-line entry point.

Exit codes: 0 on success, 1 on domain errors (a point outside the moduli, a
non-oscillatory profile, ...), 2 on usage errors.  Data goes to --out or
standard output; diagnostics go to standard error.  Every JSON document
echoes the fully resolved configuration under the key "config".
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from ._jsonfmt import dumps
from .errors import FoliataError, PeriodUnavailable
from .field import (
    EPS_DEN,
    OVERFLOW_GUARD,
    GridSpec,
    OmegaField,
    assemble_omega,
    assemble_omega_degenerate,
    field_document,
    field_from_document,
    sinh_gordon_residual,
)
from .immersion import (
    build_mesh,
    chart_for_curvature,
    harmonic_residual,
    holonomy,
    hopf_deviation,
    integrate_frame,
    isometry_check,
    weierstrass_flat,
    write_obj,
)
from .moduli import (
    ModuliPoint,
    RegionLabel,
    classification_document,
    classify,
    derive_params,
    scan_csv,
)
from .profile import (
    degenerate_constants,
    integrate_profile,
    profile_period,
)
from .shiffman import shiffman_document

PROFILE_STEP_DEFAULT = 1e-3


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _config(args: argparse.Namespace) -> dict:
    cfg = {"subcommand": args.command, "version": __version__}
    skip = {"command", "func"}
    for key in sorted(vars(args)):
        if key not in skip:
            val = getattr(args, key)
            cfg[key.replace("_", "-")] = list(val) if isinstance(val, tuple) else val
    return cfg


def _derived_doc(dp) -> dict:
    return {
        "a": dp.a,
        "cbar": dp.cbar,
        "dbar": dp.dbar,
        "delta": dp.delta,
        "xminus": dp.xminus,
        "xplus": dp.xplus,
        "yminus": dp.yminus,
        "yplus": dp.yplus,
    }


def _build_field(args) -> OmegaField:
    point = ModuliPoint(args.c0, args.c, args.d)
    point.validate()
    use_degenerate = getattr(args, "degenerate", False)
    if not use_degenerate and args.c0 == -1:
        use_degenerate = derive_params(point).delta == 0
    grid = GridSpec(*args.domain, nx=args.nx, ny=args.ny)
    eps_den = getattr(args, "eps_den", EPS_DEN)
    guard = getattr(args, "overflow_guard", OVERFLOW_GUARD)
    if use_degenerate:
        alpha, beta = degenerate_constants(point)
        return assemble_omega_degenerate(alpha, beta, grid, guard=guard)
    dp = derive_params(point, args.a)
    fsol = integrate_profile(
        dp, "F", (args.domain[0], args.domain[1]), args.profile_step,
        trivial=getattr(args, "trivial_f", False),
    )
    gsol = integrate_profile(
        dp, "G", (args.domain[2], args.domain[3]), args.profile_step,
        trivial=getattr(args, "trivial_g", False),
    )
    return assemble_omega(fsol, gsol, grid, eps_den=eps_den, guard=guard)


def _frame_for(args, field):
    space = chart_for_curvature(field.c0)
    seed = None
    if args.seed is not None:
        seed = (args.seed[0], args.seed[1], args.psi0, (0.0, 0.0))
    return space, integrate_frame(field, space, seed=seed)


def _cmd_classify(args) -> int:
    point = ModuliPoint(args.c0, args.c, args.d)
    report = classify(point, args.a)
    doc = classification_document(point, report)
    doc["config"] = _config(args)
    _emit(dumps(doc), args.out)
    return 1 if report.label is RegionLabel.OUTSIDE_MODULI else 0


def _cmd_scan(args) -> int:
    _emit(scan_csv(args.c0, tuple(args.rect), args.nx, args.ny), args.out)
    return 0


def _cmd_profile(args) -> int:
    point = ModuliPoint(args.c0, args.c, args.d)
    point.validate()
    dp = derive_params(point, args.a)
    trivial = args.trivial_f if args.kind == "F" else args.trivial_g
    sol = integrate_profile(
        dp, args.kind, tuple(args.range), args.step,
        trivial=trivial, phase=args.phase, drift_tol=args.drift_tol,
    )
    rows = ["x,f,f_x"] + [
        f"{float(x)!r},{float(v)!r},{float(dv)!r}"
        for x, v, dv in zip(sol.grid, sol.values, sol.derivs)
    ]
    _emit("\n".join(rows) + "\n", args.out)
    sidecar = {
        "kind": sol.kind,
        "params": _derived_doc(dp),
        "period": sol.period,
        "first_integral_drift": sol.first_integral_drift,
        "config": _config(args),
    }
    if args.out:
        Path(args.out + ".json").write_text(dumps(sidecar), encoding="utf-8")
    else:
        sys.stderr.write(dumps(sidecar))
    return 0


def _cmd_field(args) -> int:
    field = _build_field(args)
    doc = field_document(field)
    doc["config"] = _config(args)
    _emit(dumps(doc), args.out)
    return 0


def _cmd_verify(args) -> int:
    doc = json.loads(Path(args.input).read_text(encoding="utf-8"))
    field = field_from_document(doc)
    if args.shiffman:
        out = shiffman_document(field, margin=args.margin)
    elif args.immersion:
        src_cfg = doc.get("config", {})
        rebuild = argparse.Namespace(
            c0=field.c0,
            c=src_cfg.get("c"),
            d=src_cfg.get("d"),
            a=src_cfg.get("a", 0.0),
            domain=tuple(doc["domain"]),
            nx=field.nx,
            ny=field.ny,
            profile_step=src_cfg.get("profile-step", PROFILE_STEP_DEFAULT),
            degenerate=src_cfg.get("degenerate", False),
            trivial_f=src_cfg.get("trivial-f", False),
            trivial_g=src_cfg.get("trivial-g", False),
        )
        if rebuild.c is None:
            raise FoliataError(
                "field file lacks the generating parameters needed for "
                "frame integration (no config.c/config.d)"
            )
        live = _build_field(rebuild)
        space, frame = _frame_for(args, live)
        iso = isometry_check(frame, live, space)
        hre, him = hopf_deviation(frame, space)
        harm = harmonic_residual(frame, space)
        try:
            period = args.period
            if period is None:
                period = profile_period(
                    derive_params(ModuliPoint(live.c0, rebuild.c, rebuild.d), rebuild.a), "F"
                )
            hol = holonomy(frame, live, period).document()
        except FoliataError:
            hol = None
        out = {
            "compat_linf": frame.compat_linf,
            "isometry_linf": iso.linf,
            "hopf_real_err": hre,
            "hopf_imag_err": him,
            "harmonic_linf": harm.linf,
            "holonomy": hol,
        }
    else:
        stats = sinh_gordon_residual(field, margin=args.margin)
        out = {
            "linf": stats.linf,
            "l2": stats.l2,
            "grid_h": stats.grid_h,
            "count": stats.count,
        }
    out["config"] = _config(args)
    _emit(dumps(out), args.out)
    return 0


def _cmd_mesh(args) -> int:
    field = _build_field(args)
    space, frame = _frame_for(args, field)
    if args.weierstrass:
        mesh = weierstrass_flat(field, frame)
    else:
        mesh = build_mesh(
            frame, field, space,
            metadata={"c": args.c, "d": args.d, "psi0": args.psi0},
        )
    _emit(write_obj(mesh), args.out)
    return 0


def _cmd_holonomy(args) -> int:
    field = _build_field(args)
    space, frame = _frame_for(args, field)
    period = args.period
    if period is None:
        point = ModuliPoint(args.c0, args.c, args.d)
        try:
            period = profile_period(derive_params(point, args.a), "F")
        except FoliataError as exc:
            raise PeriodUnavailable(str(exc)) from exc
    report = holonomy(frame, field, period)
    doc = report.document()
    doc["config"] = _config(args)
    _emit(dumps(doc), args.out)
    return 0


def _add_point_args(sp, with_a=True):
    sp.add_argument("--c0", type=float, required=True, help="ambient curvature")
    sp.add_argument("--c", type=float, required=True, help="first-integral constant of f")
    sp.add_argument("--d", type=float, required=True, help="first-integral constant of g")
    if with_a:
        sp.add_argument(
            "--a", type=float, default=0.0,
            help="separation constant, used only when c0 = 0 (default 0)",
        )


def _add_grid_args(sp):
    sp.add_argument(
        "--domain", type=float, nargs=4, required=True,
        metavar=("X0", "X1", "Y0", "Y1"),
    )
    sp.add_argument("--nx", type=int, required=True)
    sp.add_argument("--ny", type=int, required=True)
    sp.add_argument("--profile-step", type=float, default=PROFILE_STEP_DEFAULT)
    sp.add_argument("--trivial-f", action="store_true", help="select the f = 0 branch")
    sp.add_argument("--trivial-g", action="store_true", help="select the g = 0 branch")
    sp.add_argument("--degenerate", action="store_true",
                    help="force the constant-profile closed form")
    sp.add_argument("--eps-den", type=float, default=EPS_DEN,
                    help="denominator threshold for the reconstruction quotients")
    sp.add_argument("--overflow-guard", type=float, default=OVERFLOW_GUARD,
                    help="|sinh omega| beyond this marks the node singular")


def _add_seed_args(sp):
    sp.add_argument("--seed", type=float, nargs=2, default=None, metavar=("X", "Y"))
    sp.add_argument("--psi0", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foliata",
        description="Minimal surfaces foliated by constant-curvature horizontal curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("classify", help="classify a moduli point")
    _add_point_args(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_classify)

    sp = sub.add_parser("scan", help="label a rectangle of moduli cells as CSV")
    sp.add_argument("--c0", type=float, required=True)
    sp.add_argument("--rect", type=float, nargs=4, required=True,
                    metavar=("CMIN", "CMAX", "DMIN", "DMAX"))
    sp.add_argument("--nx", type=int, required=True)
    sp.add_argument("--ny", type=int, required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_scan)

    sp = sub.add_parser("profile", help="integrate one profile ODE to CSV")
    _add_point_args(sp)
    sp.add_argument("--kind", choices=["F", "G"], required=True)
    sp.add_argument("--range", type=float, nargs=2, required=True, metavar=("X0", "X1"))
    sp.add_argument("--step", type=float, default=PROFILE_STEP_DEFAULT)
    sp.add_argument("--phase", type=float, default=0.0)
    sp.add_argument("--drift-tol", type=float, default=1e-9)
    sp.add_argument("--trivial-f", action="store_true")
    sp.add_argument("--trivial-g", action="store_true")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_profile)

    sp = sub.add_parser("field", help="assemble the conformal exponent as JSON")
    _add_point_args(sp)
    _add_grid_args(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_field)

    sp = sub.add_parser("verify", help="residual diagnostics of a field file")
    sp.add_argument("--input", required=True, help="field JSON produced by 'field'")
    sp.add_argument("--shiffman", action="store_true")
    sp.add_argument("--immersion", action="store_true")
    sp.add_argument("--margin", type=float, default=0.0)
    sp.add_argument("--period", type=float, default=None)
    _add_seed_args(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("mesh", help="integrate the immersion and write an OBJ mesh")
    _add_point_args(sp)
    _add_grid_args(sp)
    _add_seed_args(sp)
    sp.add_argument("--weierstrass", action="store_true",
                    help="flat-space Weierstrass route instead of frame integration")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_mesh)

    sp = sub.add_parser("holonomy", help="chart isometry after one x-period")
    _add_point_args(sp)
    _add_grid_args(sp)
    _add_seed_args(sp)
    sp.add_argument("--period", type=float, default=None,
                    help="override the quadrature period")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_holonomy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except FoliataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
