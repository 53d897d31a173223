"""Command line front end.

Four subcommands: ``generate`` builds a finite element test system and
writes it to disk, ``bound`` reports the numerical-range rectangle and
condition estimate for a pencil, ``expmv`` runs the certified driver once,
and ``sweep`` drives a grid of (system, method, mode, eps, tau) combinations
into a CSV table. All randomness is seeded, and outputs carry no timestamps,
so identical configurations reproduce byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import fem, mmio
from .bounds import (
    Pencil,
    bounding_rectangle,
    cond_estimate,
    is_lhp_certified,
    raw_extremes,
    rectangle_from_extremes,
)
from .errors import DegreeExhausted, ExpmrectError, RefitFailed, ScalingExhausted
from .expmv import ExpmvRequest, expm_dense_oracle, expmv_controlled
from .linalg import lu_factor, norm2

FAILURE_MARK = "--"

SWEEP_COLUMNS = [
    "shape",
    "element",
    "d",
    "n",
    "h_bar",
    "kappa",
    "tau_factor",
    "method",
    "mode",
    "eps",
    "degree",
    "certified_bound",
    "measured_error",
    "status",
]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# --------------------------------------------------------------------------
# system construction
# --------------------------------------------------------------------------

def _build_system(domain: str, divisions: int, refine: int, d: float):
    if domain == "square":
        mesh = fem.mesh_square(divisions)
    elif domain == "star":
        mesh = fem.mesh_star(refine=refine)
    else:
        raise ValueError(f"unknown domain {domain!r}")
    return fem.assemble_p1(mesh, d=d, c=(1.0, 1.0), domain=domain), mesh


def _load_system(args):
    """System from files (--m/--k/--b) or generator parameters."""
    if args.m or args.k or args.b:
        if not (args.m and args.k and args.b):
            raise SystemExit("file input needs all of --m, --k and --b")
        M = mmio.read_matrix_market(args.m)
        K = mmio.read_matrix_market(args.k)
        b = mmio.read_vector(args.b)
        h_bar = None
        params = Path(args.m).with_name("params.json")
        if params.exists():
            h_bar = json.loads(params.read_text()).get("h_bar")
        return M, K, b, h_bar, {"shape": "file", "d": float("nan")}
    system, mesh = _build_system(args.domain, args.divisions, args.refine, args.d)
    meta = {"shape": args.domain, "d": args.d}
    return system.M, system.K, system.b0, mesh.h_bar, meta


def _resolve_tau(args, h_bar):
    if args.tau is not None:
        return float(args.tau)
    if h_bar is None:
        raise SystemExit("--tau-factor needs a generated system or a params.json with h_bar")
    return float(args.tau_factor) * float(h_bar)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system, mesh = _build_system(args.domain, args.divisions, args.refine, args.d)
    mmio.write_matrix_market(out / "M.mtx", system.M, symmetric=True)
    mmio.write_matrix_market(out / "K.mtx", system.K)
    mmio.write_vector(out / "b0.txt", system.b0)
    fem.write_mesh(out / "mesh.txt", mesh)
    params = {
        "schema": "expmrect/params-v1",
        "domain": args.domain,
        "divisions": args.divisions if args.domain == "square" else None,
        "refine": args.refine if args.domain == "star" else None,
        "d": args.d,
        "c": [1.0, 1.0],
        "n": int(system.n),
        "n_vertices": int(mesh.n_vertices),
        "n_triangles": int(mesh.n_triangles),
        "h_bar": mesh.h_bar,
        "seed": args.seed,
    }
    (out / "params.json").write_text(json.dumps(params, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.domain} system (n={system.n}, h_bar={mesh.h_bar:.6g}) to {out}")
    return 0


def cmd_bound(args) -> int:
    M, K, _, h_bar, _ = _load_system(args)
    tau = _resolve_tau(args, h_bar)
    p = Pencil(tau=tau, M=M, K=K)
    rect = bounding_rectangle(p, rel_resid_tol=args.rel_resid_tol, seed=args.seed)
    est = cond_estimate(M, seed=args.seed)
    payload = {
        "schema": "expmrect/bound-v1",
        "rectangle": rect.as_dict(),
        "lhp_certified": is_lhp_certified(rect),
        "kappa_tilde": est.kappa_tilde,
        "kappa_safe": est.kappa_safe,
        "delta": est.delta,
        "tau": tau,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "rectangle.json").write_text(text + "\n")
    print(text)
    return 0


def cmd_expmv(args) -> int:
    M, K, b, h_bar, meta = _load_system(args)
    tau = _resolve_tau(args, h_bar)
    p = Pencil(tau=tau, M=M, K=K)
    req = ExpmvRequest(
        pencil=p,
        b=b,
        eps=args.eps,
        method=args.method,
        mode=args.mode,
        rel_resid_tol=args.rel_resid_tol,
        seed=args.seed,
    )
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    try:
        x, cert = expmv_controlled(req)
    except (ScalingExhausted, DegreeExhausted, RefitFailed) as exc:
        failure = {
            "schema": "expmrect/certificate-v1",
            "status": type(exc).__name__,
            "message": str(exc),
            "context": exc.context,
        }
        text = json.dumps(failure, indent=2, sort_keys=True)
        if out:
            (out / "certificate.json").write_text(text + "\n")
        print(text, file=sys.stderr)
        return 1

    measured = ""
    if args.verify:
        A = tau * lu_factor(M).solve(K.toarray())
        ref = expm_dense_oracle(A) @ b
        measured = norm2(x - ref) / norm2(b)
    row = {
        "shape": meta["shape"],
        "element": "P1",
        "d": _fmt(meta["d"]),
        "n": p.n,
        "h_bar": _fmt(h_bar) if h_bar is not None else "",
        "kappa": _fmt(cert.kappa_safe),
        "tau_factor": _fmt(tau / h_bar) if h_bar else "",
        "method": cert.method,
        "mode": cert.mode,
        "eps": _fmt(args.eps),
        "degree": cert.degree,
        "certified_bound": _fmt(cert.operator_bound),
        "measured_error": _fmt(measured) if measured != "" else "",
        "status": "ok",
    }
    if out:
        mmio.write_vector(out / "result.txt", x)
        (out / "certificate.json").write_text(cert.to_json() + "\n")
        with open(out / "run.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
            writer.writeheader()
            writer.writerow(row)
    print(cert.to_json())
    if measured != "":
        print(f"measured relative error: {measured:.3e}")
    return 0


def _sweep_config(args) -> dict:
    config = {
        "systems": [
            {"domain": "square", "divisions": 32, "d": 1e-1},
            {"domain": "square", "divisions": 32, "d": 1e-3},
            {"domain": "star", "refine": 4, "d": 1e-1},
            {"domain": "star", "refine": 4, "d": 1e-3},
        ],
        "tau_factors": [1.0],
        "eps": [1e-2, 1e-4, 1e-6, 1e-8],
        "methods": ["sub-pade", "rat-interp"],
        "modes": ["ii"],
        "verify": bool(args.verify),
        "seed": args.seed,
    }
    if args.config:
        config.update(json.loads(Path(args.config).read_text()))
    return config


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    rows = run_sweep(config)
    out = Path(args.out or "sweep.csv")
    if out.is_dir():
        out = out / "sweep.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} sweep rows to {out}")
    return 0


def run_sweep(config: dict) -> list[dict]:
    """Execute a sweep configuration, returning CSV-ready row dicts.

    Rows appear in deterministic order (systems x tau x method x mode x
    eps). Failures are recorded with the ``--`` marker in the degree and
    bound columns and the exception class name in ``status``; the verifying
    oracle is cached per (system, tau).
    """
    rows: list[dict] = []
    seed = int(config.get("seed", 0))
    verify = bool(config.get("verify", False))
    for spec_sys in config.get("systems", []):
        domain = spec_sys["domain"]
        system, mesh = _build_system(
            domain,
            int(spec_sys.get("divisions", 32)),
            int(spec_sys.get("refine", 4)),
            float(spec_sys["d"]),
        )
        est = cond_estimate(system.M, seed=seed)
        ext = raw_extremes(system.M, system.K, seed=seed)
        base = {
            "shape": domain,
            "element": "P1",
            "d": _fmt(float(spec_sys["d"])),
            "n": system.n,
            "h_bar": _fmt(mesh.h_bar),
            "kappa": _fmt(est.kappa_tilde),
        }
        for tf in config.get("tau_factors", [1.0]):
            tau = float(tf) * mesh.h_bar
            p = Pencil(tau=tau, M=system.M, K=system.K)
            oracle = None
            if verify:
                A = tau * lu_factor(system.M).solve(system.K.toarray())
                oracle = expm_dense_oracle(A) @ system.b0
            for method in config.get("methods", ["sub-pade", "rat-interp"]):
                for mode in config.get("modes", ["ii"]):
                    for eps in config.get("eps", [1e-6]):
                        row = dict(
                            base,
                            tau_factor=_fmt(float(tf)),
                            method=method,
                            mode=mode,
                            eps=_fmt(float(eps)),
                        )
                        req = ExpmvRequest(
                            pencil=p,
                            b=system.b0,
                            eps=float(eps),
                            method=method,
                            mode=mode,
                            seed=seed,
                        )
                        try:
                            x, cert = expmv_controlled(req)
                        except (ScalingExhausted, DegreeExhausted, RefitFailed) as exc:
                            row.update(
                                degree=FAILURE_MARK,
                                certified_bound=FAILURE_MARK,
                                measured_error="",
                                status=type(exc).__name__,
                            )
                            rows.append(row)
                            continue
                        measured = ""
                        if oracle is not None:
                            measured = _fmt(norm2(x - oracle) / norm2(system.b0))
                        row.update(
                            degree=cert.degree,
                            certified_bound=_fmt(cert.operator_bound),
                            measured_error=measured,
                            status="ok",
                        )
                        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_system_args(sub):
    sub.add_argument("--m", help="mass matrix file (Matrix Market)")
    sub.add_argument("--k", help="stiffness matrix file (Matrix Market)")
    sub.add_argument("--b", help="initial vector file (one value per line)")
    sub.add_argument("--domain", choices=["square", "star"], default="square")
    sub.add_argument("--divisions", type=int, default=32, help="square grid divisions")
    sub.add_argument("--refine", type=int, default=4, help="star refinement rounds")
    sub.add_argument("--d", type=float, default=1e-1, help="diffusion coefficient")


def _add_run_args(sub):
    sub.add_argument("--tau", type=float, default=None, help="absolute time step")
    sub.add_argument(
        "--tau-factor", type=float, default=1.0, help="time step as a multiple of h_bar"
    )
    sub.add_argument("--rel-resid-tol", type=float, default=1e-3)
    sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expmrect",
        description="certified action of exp(tau inv(M) K) on a vector",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("generate", help="build and write a FEM test system")
    _add_system_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    b = subs.add_parser("bound", help="numerical-range rectangle and condition estimate")
    _add_system_args(b)
    _add_run_args(b)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bound)

    e = subs.add_parser("expmv", help="run the certified driver once")
    _add_system_args(e)
    _add_run_args(e)
    e.add_argument("--eps", type=float, default=1e-6)
    e.add_argument("--method", choices=["sub-pade", "rat-interp"], default="sub-pade")
    e.add_argument("--mode", choices=["i", "ii"], default="ii")
    e.add_argument("--verify", action="store_true", help="compare against the dense oracle")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_expmv)

    s = subs.add_parser("sweep", help="tabulate a grid of runs into CSV")
    s.add_argument("--config", help="JSON file overriding the default sweep grid")
    s.add_argument("--verify", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="sweep.csv")
    s.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExpmrectError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
