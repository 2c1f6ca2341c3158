"""Command-line driver.

Subcommands: ``kernel-dump``, ``convolve``, ``convergence``, ``scatter`` and
``pb-solve``. Every option can also come from an INI file given with
``--config``; the section named after the subcommand supplies defaults,
and explicit flags win.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic, kernels, potential, solvers
from .grid import GridSpec, read_field, write_field

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

SCENARIOS = {
    "disk": (2, "disk", "plane_wave"),
    "luneburg": (2, "luneburg", "plane_wave"),
    "eaton": (2, "eaton", "gaussian_beam"),
    "cube": (3, "cube", "plane_wave"),
    "custom": (None, "custom-grid", "plane_wave"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _common(p, dim=True, family=True):
    if family:
        p.add_argument("--family", default="laplace", help="kernel family")
    if dim:
        p.add_argument("--dim", type=int, default=3, choices=(2, 3))
    p.add_argument("--k", type=float, default=None, help="wavenumber")
    p.add_argument("--L", type=float, default=None, help="truncation radius")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--config", default=None, help="INI file with per-command defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volpot", description="Truncated-kernel FFT volume potentials.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kernel-dump", help="tabulate a kernel transform")
    _common(p)
    p.add_argument("--s-max", type=float, default=40.0)
    p.add_argument("--n-samples", type=int, default=200)
    p.add_argument("--h-vec", default=None, help="convection vector, comma separated")

    p = sub.add_parser("convolve", help="potential of a Gaussian or a field file")
    _common(p)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--source", default="gaussian", help="'gaussian' or a field file path")
    p.add_argument("--gradient", action="store_true", help="also write the gradient")

    p = sub.add_parser("convergence", help="Gaussian-source error table")
    _common(p, dim=False, family=False)
    p.add_argument("--family", default="all", help="family name or 'all'")
    p.add_argument("--dim", default="2,3", help="dimensions, comma separated")
    p.add_argument("--n", default=None, help="grid sizes, comma separated")
    p.add_argument("--sigma", type=float, default=0.05)

    p = sub.add_parser("scatter", help="solve a scattering problem")
    _common(p, dim=False, family=False)
    p.add_argument("--scenario", default="disk", choices=sorted(SCENARIOS))
    p.add_argument("--size-lambda", type=float, default=1.0, help="box size in wavelengths")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--reference-n", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--method", default="bicgstab", choices=("bicgstab", "gmres"))
    p.add_argument("--normalization", default="green", choices=solvers.LS_NORMALIZATIONS)
    p.add_argument("--contrast-file", default=None, help="q field file for scenario 'custom'")
    p.add_argument("--dim", type=int, default=None, help="only for scenario 'custom'")

    p = sub.add_parser("pb-solve", help="solve the dielectric problem")
    _common(p, dim=False, family=False)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--atoms", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps-in", type=float, default=2.0)
    p.add_argument("--eps-out", type=float, default=80.0)
    p.add_argument("--sigma", type=float, default=0.03, help="width of the charge blobs")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--method", default="gmres", choices=("bicgstab", "gmres"))
    p.add_argument("--manufactured", action="store_true",
                   help="solve for a known density and report the recovery error")
    p.add_argument("--unscaled", action="store_true", help="iterate on the equation as written")
    return parser


def _apply_config(parser, argv):
    """Re-parse with INI defaults for the chosen subcommand."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = configparser.ConfigParser()
    try:
        with open(args.config) as fh:
            cfg.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {args.config}: {exc}") from exc
    if not cfg.has_section(args.command):
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, val in cfg.items(args.command):
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown option {key!r} in [{args.command}] of {args.config}")
        act = known[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = cfg.getboolean(args.command, key)
        else:
            defaults[dest] = act.type(val) if act.type else val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _kspec(family, dim, k=None, L=None, h_vec=None):
    if family in ("helmholtz", "laplace_helmholtz") and k is None:
        k = 2.0
    try:
        return kernels.KernelSpec(dim, family, k=k or 0.0, L=L, h_vec=h_vec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------- commands


def cmd_kernel_dump(args) -> int:
    h_vec = tuple(float(c) for c in args.h_vec.split(",")) if args.h_vec else None
    if args.family == "convected_helmholtz" and h_vec is None:
        raise UsageError("convected_helmholtz needs --h-vec")
    spec = _kspec(args.family, args.dim, args.k, args.L, h_vec)
    if args.n_samples < 1:
        raise UsageError("--n-samples must be positive")
    s = np.linspace(0.0, args.s_max, args.n_samples)
    g = kernels.eval_spectral_radial(spec, s)
    free = kernels.free_space_spectral(spec, s)
    path = _out(args) / f"kernel_{args.family}_{args.dim}d.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "re_G", "im_G", "re_free", "im_free", "re_oracle", "im_oracle"])
        for si, gi, fi in zip(s, g, free):
            o = kernels.radial_transform_oracle(spec, si)
            vals = (si, gi.real, gi.imag, fi.real, fi.imag, o.real, o.imag)
            w.writerow([repr(float(v)) for v in vals])
    print(f"wrote {path} ({args.n_samples} rows)")
    return EXIT_OK


def _gaussian_error(family, dim, sigma, k, grid, phi):
    if (dim, family) not in analytic.GAUSSIAN_PAIRS:
        return None
    ex = analytic.gaussian_exact(family, dim, sigma, grid.radius(), k=k or 0.0)
    return solvers.relative_errors(phi, ex)


def cmd_convolve(args) -> int:
    spec = _kspec(args.family, args.dim, args.k, args.L)
    grid = GridSpec(args.dim, args.n)
    if args.source == "gaussian":
        src = analytic.GaussianSource(args.sigma, args.dim).sample(grid)
    else:
        src, _ = read_field(args.source)
        if src.shape != grid.shape:
            raise UsageError(f"source field has shape {src.shape}, expected {grid.shape}")
    mult = potential.SpectralMultiplier(spec, grid)
    phi = potential.convolve_direct(mult, src)
    out = _out(args)
    meta = {"quantity": "potential", "family": spec.family, "dim": grid.dim, "n": grid.n,
            "k": spec.k, "L": spec.L, "source": args.source}
    write_field(out / "phi.fld", phi, meta)
    written = ["phi.fld"]
    if args.gradient:
        for a, comp in enumerate(potential.convolve_gradient(mult, src)):
            write_field(out / f"grad_{a}.fld", comp, dict(meta, quantity=f"d phi / d x{a}"))
            written.append(f"grad_{a}.fld")
    print(f"wrote {', '.join(written)} to {out}")
    if args.source == "gaussian":
        err = _gaussian_error(spec.family, grid.dim, args.sigma, spec.k, grid, phi)
        if err is not None:
            print(f"max relative error vs analytic = {err[1]:.3e}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    dims = _int_list(args.dim)
    fams = ["laplace", "helmholtz", "biharmonic"] if args.family == "all" else [args.family]
    k = 2.0 if args.k is None else args.k
    path = _out(args) / "convergence.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "dim", "n", "E2", "Einf"])
        for dim in dims:
            ns = _int_list(args.n) if args.n else ([16, 32, 64] if dim == 3 else [64, 128, 256])
            for fam in fams:
                if (dim, fam) not in analytic.GAUSSIAN_PAIRS:
                    raise UsageError(f"no Gaussian solution for {fam} in {dim}D")
                spec = _kspec(fam, dim, k if fam == "helmholtz" else None, args.L)
                for n in ns:
                    grid = GridSpec(dim, n)
                    src = analytic.GaussianSource(args.sigma, dim).sample(grid)
                    phi = potential.convolve_direct(potential.SpectralMultiplier(spec, grid), src)
                    e2, einf = _gaussian_error(fam, dim, args.sigma, spec.k, grid, phi)
                    w.writerow([fam, dim, n, f"{e2:.6e}", f"{einf:.6e}"])
                    print(f"{fam:10s} {dim}D n={n:5d}  E2={e2:.3e}  Einf={einf:.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def _scatter_setup(args, n):
    dim, kind, inc_kind = SCENARIOS[args.scenario]
    if args.scenario == "custom":
        if not args.contrast_file:
            raise UsageError("scenario 'custom' needs --contrast-file")
        dim = args.dim or 2
        contrast = analytic.ContrastFunction("custom-grid", path=args.contrast_file)
    else:
        contrast = analytic.ContrastFunction(kind)
    k = args.k if args.k is not None else 2 * math.pi * args.size_lambda
    grid = GridSpec(dim, n)
    q = analytic.contrast_on_grid(contrast, grid)
    inc = analytic.IncidentField(inc_kind, k)
    return grid, k, q, inc


def _scatter_run(args, n):
    grid, k, q, inc = _scatter_setup(args, n)
    cfg = solvers.SolverConfig(args.method, tol=args.tol)
    res = solvers.scatter_solve(grid, k, q, inc, cfg, args.normalization, args.L)
    if not res.report.converged:
        raise solvers.NumericalFailure(f"solve on n={n} did not converge", res.sigma, res.report)
    return res


def cmd_scatter(args) -> int:
    res = _scatter_run(args, args.n)
    out = _out(args)
    meta = {"scenario": args.scenario, "n": args.n, "dim": res.grid.dim,
            "size_lambda": args.size_lambda, "normalization": args.normalization}
    write_field(out / f"{args.scenario}_n{args.n}_scattered.fld", res.scattered, dict(meta, quantity="scattered"))
    write_field(out / f"{args.scenario}_n{args.n}_total.fld", res.total, dict(meta, quantity="total"))
    e2 = einf = math.nan
    if args.reference_n:
        ref = _scatter_run(args, args.reference_n)
        e2, einf = solvers.self_convergence_errors(res, ref)
        del ref
    row = solvers.table_row(res.report, args.size_lambda, res.grid, e2, einf)
    path = out / f"{args.scenario}_table.csv"
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=solvers.CSV_COLUMNS)
        if new:
            w.writeheader()
        w.writerow(row)
    print(res.report.as_text(), end="")
    print(", ".join(f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


def cmd_pb_solve(args) -> int:
    grid = GridSpec(3, args.n)
    atoms = analytic.AtomSet.synthetic(args.atoms, seed=args.seed, eps_in=args.eps_in, eps_out=args.eps_out)
    system = solvers.pb_operator(grid, atoms, L=args.L)
    cfg = solvers.SolverConfig(args.method, tol=args.tol)
    if args.manufactured:
        truth = solvers.manufactured_density(grid, seed=args.seed)
        rho = system.operator(truth)
    else:
        rho = solvers.pb_charge_density(grid, atoms, args.sigma)
    sigma, rep = system.solve(rho, cfg, scaled=not args.unscaled)
    out = _out(args)
    meta = {"n": args.n, "atoms": args.atoms, "seed": args.seed, "eps_in": args.eps_in,
            "eps_out": args.eps_out}
    write_field(out / "pb_sigma.fld", sigma, dict(meta, quantity="sigma"))
    write_field(out / "pb_phi.fld", system.potential(sigma), dict(meta, quantity="phi"))
    print(rep.as_text(), end="")
    if args.manufactured:
        err = float(np.abs(sigma - truth).max() / np.abs(truth).max())
        print(f"recovery_error = {err:.3e}")
    if not rep.converged:
        raise solvers.NumericalFailure("dielectric solve did not converge", sigma, rep)
    return EXIT_OK


COMMANDS = {
    "kernel-dump": cmd_kernel_dump,
    "convolve": cmd_convolve,
    "convergence": cmd_convergence,
    "scatter": cmd_scatter,
    "pb-solve": cmd_pb_solve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"volpot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except solvers.NumericalFailure as exc:
        print(f"volpot: numerical failure: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.as_text(), end="", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"volpot: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"volpot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
