"""Command-line interface: ``stabmor <subcommand> MANIFEST [options]``.

Subcommands
-----------
reduce      Arnoldi basis, optional stabilised projection, per-r stability table.
stabilize   Compute and store ``V``, ``W~`` and ``W'`` only.
regularize  Regularise a descriptor system for each beta and compare reductions.
bode        Frequency response table of a system or reduced model.
sweep       Stable-count table over quadrature rules.
oracle      Dense certification of ``M~`` against a direct Lyapunov solve.

Exit codes: 0 success, 1 requested target not met, 2 usage error,
3 runtime error (a JSON error record is written to stderr).
The worker-thread count is read from ``STABMOR_NUM_THREADS``.
"""

import argparse
import json
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .arnoldi import arnoldi_basis, biorthogonalize
from .dae import regularize
from .exceptions import StabmorError
from .io import (RunRecord, load_manifest, load_system, save_system, write_csv,
                 write_matrix_market)
from .parallel import ordered_map
from .quadrature import (AdaptiveConfig, MidpointRefinement, adaptive_gk15,
                         gauss_legendre_rule, graded_breakpoints,
                         nested_midpoint_sequence)
from .stabilize import (certify_perturbation_bound, lyapunov_dense_oracle, mtilde_dense,
                        stability_sweep, stabilized_projection, transformed_integrand)
from .system import (FrequencyGrid, ReducedModel, _h2_from_samples, frequency_response,
                     is_asymptotically_stable, reduce_with_pair, transfer_eval)

REDUCE_COLUMNS = ("r", "spectral_abscissa", "stable", "rel_h2_error")
REGULARIZE_COLUMNS = ("beta", "h2_error", "regularised_stable", "r_count",
                      "stable_conventional", "stable_stabilised", "node_evals", "failure")
BODE_COLUMNS = ("omega", "output", "input", "magnitude", "phase", "pole")
BODE_COMPARE_COLUMNS = ("rom_magnitude", "rom_phase", "abs_error")
SWEEP_COLUMNS = ("scheme", "nodes", "node_evals", "stable_count", "r_count", "all_stable")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- arguments

def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed expansion point {text!r}") from None


def _add_system_args(p):
    p.add_argument("manifest", help="system manifest (key = value file)")


def _add_basis_args(p):
    p.add_argument("--s0", type=_complex, default=None,
                   help="expansion point (default: manifest s0, else 1)")
    p.add_argument("--r-max", type=_positive_int, default=None,
                   help="largest reduced order (default: manifest r_max, else min(100, n))")


def _add_quadrature_args(p):
    p.add_argument("--quadrature", choices=("adaptive", "gauss-legendre", "midpoint"),
                   default="adaptive")
    p.add_argument("--nodes", type=_positive_int, default=16,
                   help="Gauss-Legendre node count K")
    p.add_argument("--abs-tol", type=_positive_float, default=0.1)
    p.add_argument("--rel-tol", type=_positive_float, default=0.1)
    p.add_argument("--max-intervals", type=_positive_int, default=10_000)
    p.add_argument("--max-iterations", type=_positive_int, default=10,
                   help="midpoint refinement cap")
    p.add_argument("--graded-levels", type=int, default=0,
                   help="start adaptive GK15 from intervals graded toward xi = 1 "
                        "(useful for strongly regularised systems)")


def _add_grid_args(p, points=2000):
    p.add_argument("--grid-min", type=_positive_float, default=1e-4)
    p.add_argument("--grid-max", type=_positive_float, default=1e4)
    p.add_argument("--grid-points", type=_positive_int, default=points)


def _add_output_args(p, record=True):
    p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
    if record:
        p.add_argument("--record", default=None, help="write a JSON run record here")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stabmor", description="Stability-preserving Galerkin model order reduction.")
    parser.add_argument("--version", action="version", version=f"stabmor {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="per-r stability table of Galerkin models")
    _add_system_args(p)
    _add_basis_args(p)
    p.add_argument("--method", choices=("plain", "stabilized"), default="stabilized")
    _add_quadrature_args(p)
    _add_grid_args(p)
    p.add_argument("--no-h2", action="store_true", help="skip relative H2 errors")
    p.add_argument("--require-stable", default=None,
                   help="'all' or a minimum stable count; exit 1 if not met")
    p.add_argument("--save-rom", default=None, metavar="DIR",
                   help="store the reduced model of order --save-rom-r here")
    p.add_argument("--save-rom-r", type=_positive_int, default=None)
    _add_output_args(p)

    p = sub.add_parser("stabilize", help="compute V, W~ and W' only")
    _add_system_args(p)
    _add_basis_args(p)
    _add_quadrature_args(p)
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("regularize", help="regularise a descriptor system per beta")
    _add_system_args(p)
    p.add_argument("--betas", type=_positive_float, nargs="+", required=True)
    _add_basis_args(p)
    _add_quadrature_args(p)
    _add_grid_args(p)
    p.add_argument("--no-reduce", action="store_true",
                   help="only regularise and measure the H2 distance")
    _add_output_args(p)

    p = sub.add_parser("bode", help="frequency response table")
    _add_system_args(p)
    _add_grid_args(p, points=200)
    p.add_argument("--compare-r", type=_positive_int, default=None,
                   help="also tabulate a reduced model of this order")
    p.add_argument("--method", choices=("plain", "stabilized"), default="stabilized")
    p.add_argument("--s0", type=_complex, default=None)
    _add_quadrature_args(p)
    _add_output_args(p, record=False)

    p = sub.add_parser("sweep", help="stable counts over quadrature rules")
    _add_system_args(p)
    _add_basis_args(p)
    p.add_argument("--gl-nodes", type=_positive_int, nargs="*",
                   default=[1, 2, 4, 8, 16, 32, 64, 128])
    p.add_argument("--midpoint-levels", type=_positive_int, default=0,
                   help="also tabulate midpoint levels 1..L")
    p.add_argument("--adaptive", action="store_true", help="also tabulate adaptive GK15")
    p.add_argument("--abs-tol", type=_positive_float, default=0.1)
    p.add_argument("--rel-tol", type=_positive_float, default=0.1)
    p.add_argument("--max-intervals", type=_positive_int, default=10_000)
    _add_output_args(p)

    p = sub.add_parser("oracle", help="dense certification (small n only)")
    _add_system_args(p)
    _add_basis_args(p)
    _add_quadrature_args(p)
    p.add_argument("--norm", choices=("inf-norm", "one-norm", "spectral"), default="inf-norm")
    p.add_argument("--lyapunov", choices=("bartels-stewart", "kronecker"),
                   default="bartels-stewart")
    p.add_argument("-o", "--output", default=None)
    return parser


# ---------------------------------------------------------------- helpers

def _load(args):
    manifest = load_manifest(args.manifest)
    return load_system(manifest), manifest


def _s0(args, manifest):
    if getattr(args, "s0", None) is not None:
        return args.s0
    return manifest.s0 if manifest.s0 is not None else 1.0


def _r_max(args, manifest, n):
    if getattr(args, "r_max", None) is not None:
        return min(args.r_max, n)
    if "r_max" in manifest.extra:
        return min(int(manifest.extra["r_max"]), n)
    return min(100, n)


def _quadrature(args):
    if args.quadrature == "gauss-legendre":
        return gauss_legendre_rule(args.nodes)
    if args.quadrature == "midpoint":
        return MidpointRefinement(args.max_iterations)
    if args.graded_levels < 0:
        raise UsageError("--graded-levels must be non-negative")
    return AdaptiveConfig(args.abs_tol, args.rel_tol, args.max_intervals,
                          graded_breakpoints(args.graded_levels))


def _grid(args):
    if args.grid_min >= args.grid_max:
        raise UsageError("--grid-min must be smaller than --grid-max")
    return FrequencyGrid.logspace(args.grid_min, args.grid_max, args.grid_points)


def _require_sparse(sys_, command):
    if isinstance(sys_, ReducedModel):
        raise UsageError(f"'{command}' needs a full-order system, not a reduced model")


def _final_projection(sys_, V, quadrature):
    """``W~`` for a fixed rule or adaptive config; midpoint iterates to all-stable."""
    if isinstance(quadrature, MidpointRefinement):
        report = stability_sweep(sys_, V, quadrature)
        return stabilized_projection(sys_, V, nested_midpoint_sequence(report.iterations))
    return stabilized_projection(sys_, V, quadrature)


def _rom(sys_, V, W_tilde, r):
    Vr = V[:, :r]
    if W_tilde is None:
        return reduce_with_pair(sys_, Vr, Vr, method="galerkin")
    return reduce_with_pair(sys_, Vr, biorthogonalize(Vr, W_tilde[:, :r]), method="stabilized")


def _emit_csv(args, columns, rows):
    if args.output:
        write_csv(args.output, columns, rows, __version__)
    else:
        write_csv(_sys.stdout, columns, rows, __version__)


def _parameters(args):
    return {k: (str(v) if isinstance(v, complex) else v) for k, v in vars(args).items()
            if k not in ("func",)}


# ---------------------------------------------------------------- commands

def cmd_reduce(args):
    t0 = time.perf_counter()
    sys_, manifest = _load(args)
    _require_sparse(sys_, "reduce")
    s0 = _s0(args, manifest)
    V = arnoldi_basis(sys_, s0, _r_max(args, manifest, sys_.n))
    t_basis = time.perf_counter()
    grid = None if args.no_h2 else _grid(args)
    quadrature = None if args.method == "plain" else _quadrature(args)
    report = stability_sweep(sys_, V, quadrature, grid=grid)
    t_sweep = time.perf_counter()
    rows = [(rec.r, rec.spectral_abscissa, rec.stable, rec.rel_h2_error)
            for rec in report.records]
    _emit_csv(args, REDUCE_COLUMNS, rows)

    if args.save_rom:
        r = args.save_rom_r or V.shape[1]
        if not 1 <= r <= V.shape[1]:
            raise UsageError(f"--save-rom-r must lie in 1..{V.shape[1]}")
        W = None
        if quadrature is not None:
            W = stabilized_projection(sys_, V, nested_midpoint_sequence(report.iterations)
                                      if isinstance(quadrature, MidpointRefinement)
                                      else quadrature).W_tilde
        save_system(args.save_rom, _rom(sys_, V, W, r), f"{manifest.name}_r{r}")

    target = args.require_stable
    if target is None:
        met = True
    elif target == "all":
        met = report.all_stable
    else:
        try:
            met = report.stable_count >= int(target)
        except ValueError:
            raise UsageError("--require-stable takes 'all' or an integer") from None
    summary = {"stable_count": report.stable_count, "r_count": len(report),
               "unstable_r": report.unstable_r, "target_met": met}
    print(f"stable {report.stable_count}/{len(report)} "
          f"(method={report.method}, node_evals={report.node_evals})", file=_sys.stderr)
    if args.record:
        RunRecord("reduce", _parameters(args),
                  timings={"basis": t_basis - t0, "sweep": t_sweep - t_basis},
                  node_counts={"scheme": report.scheme, "nodes": report.nodes,
                               "node_evals": report.node_evals,
                               "iterations": report.iterations},
                  results=[dict(zip(REDUCE_COLUMNS, row)) for row in rows],
                  summary=summary).write(args.record)
    return 0 if met else 1


def cmd_stabilize(args):
    sys_, manifest = _load(args)
    _require_sparse(sys_, "stabilize")
    V = arnoldi_basis(sys_, _s0(args, manifest), _r_max(args, manifest, sys_.n))
    proj = _final_projection(sys_, V, _quadrature(args))
    Wp, cond = biorthogonalize(V, proj.W_tilde, return_cond=True)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out / "V.mtx", V)
    write_matrix_market(out / "W_tilde.mtx", proj.W_tilde)
    write_matrix_market(out / "W_prime.mtx", Wp)
    info = {"r": V.shape[1], "scheme": proj.scheme, "nodes": proj.rule.K,
            "node_evals": proj.node_evals, "coupling_condition": cond}
    print(json.dumps(info, sort_keys=True))
    return 0


def cmd_regularize(args):
    sys_, manifest = _load(args)
    _require_sparse(sys_, "regularize")
    grid = _grid(args)
    Hd = frequency_response(sys_, grid.omegas)
    s0 = _s0(args, manifest)
    quadrature = _quadrature(args)
    rows = []
    for beta in sorted(args.betas, reverse=True):
        row = {"beta": beta, "h2_error": float("nan"), "regularised_stable": False,
               "r_count": 0, "stable_conventional": -1, "stable_stabilised": -1,
               "node_evals": 0, "failure": ""}
        try:
            ode = regularize(sys_, beta)
            row["regularised_stable"] = is_asymptotically_stable(ode)
            row["h2_error"] = _h2_from_samples(Hd - frequency_response(ode, grid.omegas), grid)
            if not args.no_reduce:
                V = arnoldi_basis(ode, s0, _r_max(args, manifest, ode.n))
                plain = stability_sweep(ode, V)
                stab = stability_sweep(ode, V, quadrature)
                row.update(r_count=len(plain), stable_conventional=plain.stable_count,
                           stable_stabilised=stab.stable_count, node_evals=stab.node_evals)
        except StabmorError as exc:
            row["failure"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    _emit_csv(args, REGULARIZE_COLUMNS, [[row[c] for c in REGULARIZE_COLUMNS] for row in rows])
    if args.record:
        RunRecord("regularize", _parameters(args), results=rows).write(args.record)
    return 0


def _pointwise_response(model, omegas):
    def one(w):
        try:
            return transfer_eval(model, 1j * w), False
        except StabmorError:
            return None, True
    return ordered_map(one, omegas)


def cmd_bode(args):
    sys_, manifest = _load(args)
    grid = _grid(args)
    omegas = grid.omegas
    fom = _pointwise_response(sys_, omegas)
    rom = None
    if args.compare_r is not None:
        _require_sparse(sys_, "bode --compare-r")
        V = arnoldi_basis(sys_, _s0(args, manifest), min(args.compare_r, sys_.n))
        W = None
        if args.method == "stabilized":
            W = _final_projection(sys_, V, _quadrature(args)).W_tilde
        rom = _pointwise_response(_rom(sys_, V, W, V.shape[1]), omegas)
    columns = BODE_COLUMNS + (BODE_COMPARE_COLUMNS if rom is not None else ())
    rows = []
    nan = float("nan")
    for k, w in enumerate(omegas):
        H, pole = fom[k]
        for i in range(sys_.n_out):
            for j in range(sys_.n_in):
                h = H[i, j] if not pole else nan
                row = [w, i, j, abs(h), float(np.angle(h)) if not pole else nan, pole]
                if rom is not None:
                    Hr, rpole = rom[k]
                    hr = Hr[i, j] if not rpole else nan
                    row += [abs(hr), float(np.angle(hr)) if not rpole else nan,
                            abs(h - hr) if not (pole or rpole) else nan]
                rows.append(row)
    _emit_csv(args, columns, rows)
    return 0


def cmd_sweep(args):
    sys_, manifest = _load(args)
    _require_sparse(sys_, "sweep")
    V = arnoldi_basis(sys_, _s0(args, manifest), _r_max(args, manifest, sys_.n))
    rows = []
    plain = stability_sweep(sys_, V)
    rows.append(("plain", 0, 0, plain.stable_count, len(plain), plain.all_stable))
    for K in args.gl_nodes:
        rep = stability_sweep(sys_, V, gauss_legendre_rule(K))
        rows.append(("gauss-legendre", K, rep.node_evals, rep.stable_count, len(rep),
                     rep.all_stable))
    evals = 0
    for i in range(1, args.midpoint_levels + 1):
        rule = nested_midpoint_sequence(i)
        rep = stability_sweep(sys_, V, rule)
        evals += rule.K
        rows.append(("nested-midpoint", rule.K, evals, rep.stable_count, len(rep),
                     rep.all_stable))
    if args.adaptive:
        rep = stability_sweep(sys_, V, AdaptiveConfig(args.abs_tol, args.rel_tol,
                                                      args.max_intervals))
        rows.append(("adaptive-gk15", rep.nodes, rep.node_evals, rep.stable_count, len(rep),
                     rep.all_stable))
    _emit_csv(args, SWEEP_COLUMNS, rows)
    if args.record:
        RunRecord("sweep", _parameters(args),
                  results=[dict(zip(SWEEP_COLUMNS, row)) for row in rows]).write(args.record)
    return 0


def cmd_oracle(args):
    sys_, manifest = _load(args)
    _require_sparse(sys_, "oracle")
    M = lyapunov_dense_oracle(sys_.E, sys_.A, args.lyapunov)
    if args.quadrature == "adaptive":
        cfg = _quadrature(args)
        value, evals = adaptive_gk15(
            lambda x: transformed_integrand(sys_, x, np.eye(sys_.n)),
            cfg.abs_tol, cfg.rel_tol, cfg.max_intervals, breakpoints=cfg.breakpoints)
        Mt = value / np.pi
    else:
        rule = (gauss_legendre_rule(args.nodes) if args.quadrature == "gauss-legendre"
                else nested_midpoint_sequence(args.nodes))
        Mt, evals = mtilde_dense(sys_, rule), rule.K
    cert = certify_perturbation_bound(Mt, M, sys_.E, sys_.A, args.norm)
    V = arnoldi_basis(sys_, _s0(args, manifest), _r_max(args, manifest, sys_.n))
    W = Mt @ (sys_.E @ V)
    stable = 0
    failures = []
    for r in range(1, V.shape[1] + 1):
        try:
            stable += bool(is_asymptotically_stable(_rom(sys_, V, W, r)))
        except StabmorError as exc:
            failures.append({"r": r, "error": f"{type(exc).__name__}: {exc}"})
    E, A = sys_.E.toarray(), sys_.A.toarray()
    residual = np.linalg.norm(A.T @ M @ E + E.T @ M @ A + np.eye(sys_.n))
    out = {
        "system": manifest.name, "n": sys_.n, "norm": cert.norm_tag, "eta": cert.eta,
        "threshold": cert.threshold, "error_norm": cert.error_norm,
        "satisfied": cert.satisfied, "relative_error": cert.relative_error,
        "relative_frobenius_error": float(np.linalg.norm(Mt - M) / np.linalg.norm(M)),
        "oracle_residual": float(residual), "node_evals": evals,
        "r_count": V.shape[1], "stable_count": stable, "failures": failures,
    }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        _sys.stdout.write(text)
    return 0


COMMANDS = {"reduce": cmd_reduce, "stabilize": cmd_stabilize, "regularize": cmd_regularize,
            "bode": cmd_bode, "sweep": cmd_sweep, "oracle": cmd_oracle}


def _error_record(command, exc, kind):
    return json.dumps({"error": type(exc).__name__, "kind": kind, "message": str(exc),
                       "command": command}, sort_keys=True)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(_sys.stderr)
        print(_error_record(args.command, exc, "usage"), file=_sys.stderr)
        return 2
    except (StabmorError, ValueError, OSError) as exc:
        print(_error_record(args.command, exc, "runtime"), file=_sys.stderr)
        return 3


if __name__ == "__main__":
    _sys.exit(main())
