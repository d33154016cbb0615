"""Command line front end: solve, sweep, area, mesh and verification suites."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .potential import PotentialParams


from ._parallel import worker_count


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("m", "k", "t"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    return cfg.validate()


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _solve_payload(cfg: RunConfig, result, k: int | None, cert: dict) -> dict:
    return {
        "config": cfg.as_dict(),
        "m": cfg.m,
        "k": k,
        "t": result.params.t,
        "params": result.params.to_json_dict(),
        "residual_inf": result.residual_norm,
        "iterations": result.iterations,
        "certificates": cert,
    }


def cmd_kappa(args) -> int:
    from .solver import kappa

    cfg = _config_from_args(args)
    print(f"{kappa(cfg.m):.10f}")
    return 0


def cmd_solve(args) -> int:
    from .solver import ContinuationTrace, certify_solution, continuation_solve

    cfg = _config_from_args(args)
    if cfg.k is None and cfg.t is None:
        print("solve needs --k or --t", file=sys.stderr)
        return 2
    opts = cfg.solve_options()
    trace = ContinuationTrace()
    if cfg.k is not None:
        result = continuation_solve(cfg.m, cfg.k, opts, trace)
    else:
        k_eff = max(1, int(round((1.0 / cfg.t - 2.0) / 2.0)))
        result = continuation_solve(cfg.m, k_eff, opts, trace)
    cert = certify_solution(result.params, cfg.k, opts)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / (
        f"params_m{cfg.m}_k{cfg.k if cfg.k is not None else 't'}.json")
    _json_dump(_solve_payload(cfg, result, cfg.k, cert), out)
    if args.trace:
        Path(args.trace).write_text(
            "\n".join(cfg.header_lines()) + "\n" + trace.to_csv())
    print(f"solved m={cfg.m} t={result.params.t:.8f} "
          f"residual={result.residual_norm:.3e} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    from .geometry import area_quadrature, area_residue
    from .solver import continuation_solve, pack_unknowns

    cfg = _config_from_args(args)
    opts = cfg.solve_options()
    ks = np.unique(np.geomspace(args.k_min, args.k_max, args.points).astype(int))
    rows = []
    start = None
    for k in ks:
        result = continuation_solve(cfg.m, int(k), opts, start=start)
        start = (result.params.t, pack_unknowns(result.params))
        ar = area_residue(result.params, cfg.m, int(k))
        if args.no_quadrature:
            aq, gap = float("nan"), float("nan")
        else:
            aq = area_quadrature(result.params, cfg.m, int(k),
                                 resolution=args.quad_resolution or cfg.quad_resolution)
            gap = abs(aq - ar) / ar
        rows.append((cfg.m, int(k), result.params.t, ar, aq, gap))
        print(f"k={k}: area_residue={ar:.8f} gap={gap:.2e}")
    lines = cfg.header_lines()
    lines.append("m,k,t,area_residue,area_quadrature,gap")
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"sweep_m{cfg.m}.csv"
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out}")
    return 0


def _load_params(path: str) -> tuple[PotentialParams, dict]:
    payload = json.loads(Path(path).read_text())
    if "params" in payload:
        return PotentialParams.from_json_dict(payload["params"]), payload
    return PotentialParams.from_json_dict(payload), {}


def cmd_area(args) -> int:
    from .geometry import AreaReport, area_quadrature, area_residue

    cfg = _config_from_args(args)
    params, payload = _load_params(args.params)
    k = payload.get("k") or cfg.k
    if k is None:
        k = max(1, int(round((1.0 / params.t - 2.0) / 2.0)))
    ar = area_residue(params, params.m, k)
    aq = area_quadrature(params, params.m, k,
                         resolution=args.resolution or cfg.quad_resolution)
    report = AreaReport(m=params.m, k=k, t=params.t,
                        area_residue=ar, area_quadrature=aq)
    body = {"config": cfg.as_dict(), **report.to_json_dict()}
    if args.out:
        _json_dump(body, Path(args.out))
    print(json.dumps(body, sort_keys=True, indent=1))
    return 0


def cmd_mesh(args) -> int:
    from .geometry import export_mesh, fundamental_patch, replicate_symmetry

    cfg = _config_from_args(args)
    params, payload = _load_params(args.params)
    k = payload.get("k") or cfg.k
    if k is None:
        k = max(1, int(round((1.0 / params.t - 2.0) / 2.0)))
    resolution = args.resolution or cfg.mesh_resolution
    patch = fundamental_patch(params, params.m, k, resolution=resolution)
    mesh = replicate_symmetry(patch, params.m, k)
    mesh.provenance.pop("_patch", None)
    mesh.provenance.update(cfg.as_dict())
    obj, csv = export_mesh(mesh, with_density=args.density_csv is not None)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"surface_m{params.m}_k{k}.obj"
    out.write_text(obj)
    if args.density_csv:
        Path(args.density_csv).write_text(csv)
    print(f"wrote {out}: {mesh.n_vertices} vertices, {len(mesh.faces)} faces, "
          f"euler characteristic {mesh.euler_characteristic()}")
    return 0


# -- verification suites ------------------------------------------------------


def _suite_iwasawa(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    from .iwasawa import iwasawa_decompose, random_sl2_loop
    from .loops import MatrixLoop

    rng = np.random.default_rng(20240817)
    worst_resid = worst_unit = worst_binv = 0.0
    for _ in range(100):
        Phi = random_sl2_loop(rng, N=16, rho=2.0)
        res = iwasawa_decompose(Phi)
        worst_resid = max(worst_resid, res.residual)
        worst_unit = max(worst_unit, res.unitarity_defect)
        th = rng.uniform(0, 2 * np.pi)
        U = np.array([[np.cos(th) + 0.1j, -np.sin(th)],
                      [np.sin(th), np.cos(th) - 0.1j]])
        U = U / np.sqrt(np.linalg.det(U))
        res2 = iwasawa_decompose(MatrixLoop.from_constant(U, 0, Phi.rho) @ Phi)
        worst_binv = max(worst_binv, (res.B - res2.B).norm_rho())
    return [
        ("round-trip residual <= 1e-8", worst_resid <= 1e-8, f"{worst_resid:.2e}"),
        ("unitarity defect <= 1e-8", worst_unit <= 1e-8, f"{worst_unit:.2e}"),
        ("left-unitary invariance of B <= 1e-9", worst_binv <= 1e-9, f"{worst_binv:.2e}"),
    ]


def _suite_monodromy(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    from .monodromy import monodromy_matrix

    params = PotentialParams.initial(cfg.m, cfg.trunc_degree, cfg.rho)
    rec = monodromy_matrix(params, rtol=cfg.ode_tol)
    dev_id = float(np.max(np.abs(rec.M_samples - np.eye(2))))
    pi_i = np.pi * 1j
    expect = {(0, 0): {1: pi_i, -1: pi_i}, (0, 1): {1: pi_i, -1: -pi_i},
              (1, 0): {1: -pi_i, -1: pi_i}, (1, 1): {1: -pi_i, -1: -pi_i}}
    worst = 0.0
    for (i, j), want in expect.items():
        e = rec.Mtilde.entry(i, j)
        for kk in range(-e.trunc_degree, e.trunc_degree + 1):
            worst = max(worst, abs(e.coeff(kk) - want.get(kk, 0.0)))
    res_norm = float(np.max(np.abs(rec.residuals.flatten(cfg.trunc_degree))))
    return [
        ("||M(0) - Id|| <= 1e-9", dev_id <= 1e-9, f"{dev_id:.2e}"),
        ("normalized log at seed matches closed form <= 1e-7", worst <= 1e-7, f"{worst:.2e}"),
        ("residuals vanish at the seed <= 1e-9", res_norm <= 1e-9, f"{res_norm:.2e}"),
    ]


def _suite_derivatives(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    from .solver import derivative_check

    rep = derivative_check(cfg.m, opts=cfg.solve_options())
    return [
        ("tangent of a reproduced <= 1e-5", rep.deviation_a <= 1e-5, f"{rep.deviation_a:.2e}"),
        ("tangent of b reproduced <= 1e-5", rep.deviation_b <= 1e-5, f"{rep.deviation_b:.2e}"),
        ("c' = 0 reproduced <= 1e-5", rep.deviation_c <= 1e-5, f"{rep.deviation_c:.2e}"),
        ("r' = 0 reproduced <= 1e-5", rep.deviation_r <= 1e-5, f"{rep.deviation_r:.2e}"),
        ("time parity <= 1e-9", rep.parity_defect <= 1e-9, f"{rep.parity_defect:.2e}"),
    ]


def _suite_blowup(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    from .geometry import blowup_compare

    rep = blowup_compare(cfg.m, opts=cfg.solve_options())
    ok = all(1.7 <= r <= 2.3 for r in rep.ratios)
    return [
        ("rescaled deviation halves with t", ok,
         " ".join(f"{r:.3f}" for r in rep.ratios)),
        ("limit Gauss map exact", rep.gauss_map_exact, "i/z^m"),
    ]


SUITES = {
    "iwasawa": _suite_iwasawa,
    "monodromy": _suite_monodromy,
    "derivatives": _suite_derivatives,
    "blowup": _suite_blowup,
}


def cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    checks = SUITES[args.suite](cfg)
    failed = False
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}  ({detail})")
        failed = failed or not ok
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dpwlawson",
        description="High-genus minimal surfaces in the 3-sphere via "
                    "loop-group factorization")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--m", type=int, default=None)

    sp = sub.add_parser("kappa", help="print the first-order area constant")
    common(sp)
    sp.set_defaults(func=cmd_kappa)

    sp = sub.add_parser("solve", help="continuation solve at t = 1/(2k+2)")
    common(sp)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--trace", default=None, help="write the continuation CSV here")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="areas over a range of k")
    common(sp)
    sp.add_argument("--k-min", type=int, default=10)
    sp.add_argument("--k-max", type=int, default=200)
    sp.add_argument("--points", type=int, default=12)
    sp.add_argument("--out", default=None)
    sp.add_argument("--no-quadrature", action="store_true")
    sp.add_argument("--quad-resolution", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("area", help="recompute both area paths from a params file")
    common(sp)
    sp.add_argument("--params", required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--resolution", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_area)

    sp = sub.add_parser("mesh", help="build and export the closed surface mesh")
    common(sp)
    sp.add_argument("--params", required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--resolution", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--density-csv", default=None)
    sp.set_defaults(func=cmd_mesh)

    sp = sub.add_parser("verify", help="run a named verification suite")
    common(sp)
    sp.add_argument("--suite", required=True, choices=sorted(SUITES))
    sp.set_defaults(func=cmd_verify)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
