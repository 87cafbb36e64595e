"""Command-line entry point: ``oseen-vvp {converge,transient,solve,selftest}``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(including observed rates outside the expected band).
"""
import argparse
import inspect
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checks
from .diagnostics import (DegenerateError, enstrophy_oracle, error_norms, fit_rates,
                          write_diagnostics_csv, write_error_csv)
from .dg import InvalidStabilisation
from .driver import (SCENARIOS, SCHEMES, NumericalFailure, TimeLoopConfig, get_scenario, kh_initial_vorticity,
                     kh_params, run_transient, solve_steady)
from .linalg import SingularMatrix
from .mesh import read_mesh
from .mixed import NoPressureGauge
from .output import write_solution_vtk

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
RATE_BAND = 0.15
DIV_TOL = 1e-10
E0_TOL = 0.01
MANUFACTURED = ("test1", "sigma")
TRANSIENT = {"kh": dict(scheme="dg", k=1, mesh=64, steps=20),
             "open-cavity": dict(scheme="mixed", k=1, mesh=20, steps=4)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--scheme", choices=SCHEMES)
    common.add_argument("--k", type=int, choices=(0, 1, 2))
    common.add_argument("--levels", type=int)
    common.add_argument("--mesh", help="cells per unit length, or a mesh file")
    common.add_argument("--scenario")
    common.add_argument("--steps", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--nu", type=float)
    common.add_argument("--sigma", type=float)
    common.add_argument("--c11", type=float)
    common.add_argument("--a11", type=float)
    common.add_argument("--d11", type=float)
    common.add_argument("--stride", type=int, help="write fields every N steps (0: never)")
    common.add_argument("--out", help="output directory")
    p = _Parser(prog="oseen-vvp", description="Velocity-vorticity-pressure Oseen solver")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("converge", parents=[common], help="convergence study on a manufactured solution")
    sub.add_parser("transient", parents=[common], help="backward-Euler time stepping")
    sub.add_parser("solve", parents=[common], help="single steady solve")
    sub.add_parser("selftest", parents=[common], help="run the invariant checks")
    return p


_TYPES = {"scheme": str, "k": int, "levels": int, "mesh": str, "scenario": str, "steps": int,
          "dt": float, "nu": float, "sigma": float, "c11": float, "a11": float, "d11": float,
          "stride": int, "out": str}


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _TYPES:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
            try:
                out[key] = _TYPES[key](val)
            except ValueError:
                raise UsageError(f"{path}:{n}: bad value for {key}: {val!r}") from None
    return out


def merge_config(args):
    cfg = read_config(args.config) if args.config else {}
    for key in _TYPES:
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if cfg.get("scheme") not in (None, *SCHEMES):
        raise UsageError(f"unknown scheme {cfg['scheme']!r}")
    if cfg.get("k") not in (None, 0, 1, 2):
        raise UsageError("k must be 0, 1 or 2")
    cfg["command"] = args.command
    return cfg


def _scenario(cfg, default):
    name = cfg.get("scenario", default)
    factory_kw = {k: cfg[k] for k in ("nu", "sigma", "c11", "a11", "d11") if k in cfg}
    if name not in SCENARIOS:
        raise UsageError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    # nu and sigma go to the factory when it takes them (the exact solution depends on them)
    accepted = inspect.signature(SCENARIOS[name]).parameters
    direct = {k: v for k, v in factory_kw.items() if k in accepted or k in ("c11", "a11", "d11")}
    sc = get_scenario(name, **direct)
    rest = {k: v for k, v in factory_kw.items() if k not in direct}
    if rest:
        sc = replace(sc, params=replace(sc.params, **rest))
    return sc


def _mesh(cfg, scenario, default):
    spec = cfg.get("mesh", default)
    if spec is None:
        return scenario.make_mesh()
    spec = str(spec)
    if spec.isdigit():
        return scenario.make_mesh(int(spec))
    if not Path(spec).is_file():
        raise UsageError(f"mesh file not found: {spec}")
    return read_mesh(spec)


def _out_dir(cfg):
    out = Path(cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def expected_columns(scheme):
    return ("err_u", "err_w", "err_p") if scheme == "mixed" else ("err_A", "err_p")


def rates_ok(reports, scheme, k):
    """True if the finest-pair rates lie within the band around k + 1."""
    last = reports[-1].rates
    return all(abs(last[c] - (k + 1)) <= RATE_BAND for c in expected_columns(scheme))


def cmd_converge(cfg):
    scheme, k = cfg.get("scheme", "mixed"), cfg.get("k", 0)
    levels = cfg.get("levels", 5)
    if levels < 2:
        raise UsageError("converge needs --levels >= 2")
    if "mesh" in cfg:
        raise UsageError("converge uses the nested structured family; --mesh is not accepted")
    sc = _scenario(cfg, "test1")
    if sc.exact is None:
        raise UsageError(f"scenario {sc.name!r} has no exact solution; choose from {MANUFACTURED}")
    reports = []
    div_ok = True
    for lev in range(1, levels + 1):
        n = 2**lev
        t0 = time.perf_counter()
        sol = solve_steady(sc, sc.make_mesh(n), k, scheme)
        rep = error_norms(sol, sc.exact)
        reports.append(rep)
        if rep.div_linf is not None and not rep.div_linf < DIV_TOL:
            div_ok = False
        print(f"n={n:4d} dofs={rep.dofs:7d} err_u={rep.err_u:.4e} err_w={rep.err_w:.4e} "
              f"err_p={rep.err_p:.4e}" + (f" err_A={rep.err_A:.4e}" if rep.err_A is not None else "")
              + (f" div={rep.div_linf:.1e}" if rep.div_linf is not None else "")
              + f" ({time.perf_counter() - t0:.1f}s)", flush=True)
    fit_rates(reports)
    path = _out_dir(cfg) / f"errors_{sc.name}_{scheme}_k{k}.csv"
    write_error_csv(path, reports)
    last = reports[-1].rates
    print("finest-pair rates: " + " ".join(f"{c}={last[c]:.3f}" for c in expected_columns(scheme)))
    print(f"wrote {path}")
    ok = rates_ok(reports, scheme, k) and div_ok
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_transient(cfg):
    name = cfg.get("scenario", "kh")
    if name not in TRANSIENT:
        raise UsageError(f"transient scenarios: {sorted(TRANSIENT)}")
    d = TRANSIENT[name]
    sc = _scenario(cfg, name)
    mesh = _mesh(cfg, sc, d["mesh"])
    dt = cfg.get("dt", kh_params()[1] if name == "kh" else 1.0 / sc.params.sigma)
    tl = TimeLoopConfig(dt=dt, n_steps=cfg.get("steps", d["steps"]), scheme=cfg.get("scheme", d["scheme"]),
                        k=cfg.get("k", d["k"]))
    out = _out_dir(cfg)
    stride = cfg.get("stride", 1)

    def callback(n, sol):
        print(f"step {n:4d}  residual {sol.report.residual:.1e}", flush=True)
        if stride and n % stride == 0:
            write_solution_vtk(out / f"{name}_{n:05d}.vtk", sol)

    rows, _ = run_transient(tl, sc, mesh, callback)
    path = out / f"diagnostics_{name}.csv"
    write_diagnostics_csv(path, rows)
    print(f"wrote {path}")
    status = EXIT_OK
    if name == "kh":
        ref = enstrophy_oracle(kh_initial_vorticity, sc.params.nu)
        rel = abs(rows[0]["E"] - ref) / ref
        print(f"E(0) = {rows[0]['E']:.6e}, oracle {ref:.6e}, relative deviation {rel:.2e}")
        if not rel <= E0_TOL:
            status = EXIT_NUMERICAL
    for r in rows[1:]:
        bad = not (np.isfinite(r["E"]) and np.isfinite(r["P"]) and r["E"] > 0)
        if bad or ("div_linf" in r and not r["div_linf"] < DIV_TOL):
            print(f"step at t={r['t']:.4g} failed the sanity checks")
            status = EXIT_NUMERICAL
    return status


def cmd_solve(cfg):
    sc = _scenario(cfg, "test1")
    mesh = _mesh(cfg, sc, 8)
    scheme, k = cfg.get("scheme", "mixed"), cfg.get("k", 0)
    sol = solve_steady(sc, mesh, k, scheme)
    print(f"dofs={sol.system.size} residual={sol.report.residual:.1e} fill={sol.report.fill:.1f}")
    if sc.exact is not None:
        rep = error_norms(sol, sc.exact)
        print(f"err_u={rep.err_u:.4e} err_w={rep.err_w:.4e} err_p={rep.err_p:.4e}")
    path = _out_dir(cfg) / f"{sc.name}_{scheme}_k{k}.vtk"
    write_solution_vtk(path, sol)
    print(f"wrote {path}")
    return EXIT_OK if sol.report.success else EXIT_NUMERICAL


def cmd_selftest(cfg):
    stab = {k: cfg[k] for k in ("c11", "a11", "d11") if k in cfg}
    results = checks.run_all(**stab)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


COMMANDS = {"converge": cmd_converge, "transient": cmd_transient, "solve": cmd_solve,
            "selftest": cmd_selftest}


def _thread_limit():
    val = os.environ.get("OSEEN_THREADS")
    if val is None:
        return None
    try:
        n = int(val)
    except ValueError:
        raise UsageError(f"OSEEN_THREADS must be a positive integer, got {val!r}") from None
    if n < 1:
        raise UsageError(f"OSEEN_THREADS must be a positive integer, got {val!r}")
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        threads = _thread_limit()
        if threads is not None:
            try:
                from threadpoolctl import threadpool_limits
            except ImportError:
                threadpool_limits = None
            if threadpool_limits is not None:
                with threadpool_limits(limits=threads):
                    return COMMANDS[args.command](cfg)
        return COMMANDS[args.command](cfg)
    except (NumericalFailure, SingularMatrix, DegenerateError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, OSError, NoPressureGauge, InvalidStabilisation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
