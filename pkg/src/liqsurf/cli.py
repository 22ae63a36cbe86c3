"""Command-line entry point: liqsurf <subcommand> [options].

Exit status is 0 on success, 2 on usage errors and 1 on data or validation
errors. Outputs are written to temporary files and renamed into place only
after the whole subcommand succeeds, together with a JSON run manifest.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import basis as B
from . import factor as F
from . import ingest as I
from . import pipeline as P
from . import report as R
from . import synth as S
from .artifacts import AtomicOutputs, build_manifest, write_json
from .exceptions import LiqSurfError
from .tsmodel import diagnostics as D
from .tsmodel import distributions as dists
from .tsmodel import estimation as E
from .tsmodel.recursions import VOL_MODELS

COMMANDS = ("ingest", "synth", "decompose", "roll", "fit", "sweep", "shock", "forecast", "report")


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=1, help="worker processes for parallel steps")
    common.add_argument("--seed", type=int, default=0)

    center = argparse.ArgumentParser(add_help=False)
    center.add_argument("--center", dest="center", action="store_true", default=True)
    center.add_argument("--no-center", dest="center", action="store_false")

    parser = argparse.ArgumentParser(prog="liqsurf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="snapshots -> surface CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=I.FORMATS, default="snapshot-json")
    p.add_argument("--block-spacing", type=_positive_int, required=True)
    p.add_argument("--M", type=_int_list, default=[201])
    p.add_argument("--allow-gaps", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthetic surface with known factors")
    p.add_argument("--T", type=_positive_int, default=800)
    p.add_argument("--M", type=_int_list, default=[201])
    p.add_argument("--K", type=_positive_int, default=5)
    p.add_argument("--noise-sd", type=float, default=None)
    p.add_argument("--block-spacing", type=_positive_int, default=2400)
    p.add_argument("--snapshots", default=None, help="also write snapshot-json")
    p.add_argument("--truth", default=None, help="also write the true scores CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", parents=[common, center], help="PCA or Legendre decomposition")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--M", type=_int_list, default=None)
    p.add_argument("--K", type=_positive_int, default=10, help="leading components written out")
    p.add_argument("--basis", choices=("pca", "legendre"), default="pca")
    p.add_argument("--quadrature", choices=B.PROJECTION_METHODS, default="gls")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("roll", parents=[common, center], help="rolling-window spectra and drift")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--window", type=_int_list, default=[400])
    p.add_argument("--step", type=_positive_int, default=10)
    p.add_argument("--K", type=_int_list, default=[3, 4, 5, 6, 7])
    p.add_argument("--M", type=_int_list, default=[201])
    p.add_argument("--out", required=True, help="output directory")

    demean = argparse.ArgumentParser(add_help=False)
    demean.add_argument(
        "--demean", choices=("none", "level", "all"), default="level",
        help="subtract the sample mean from the first series (level) or from every series",
    )

    p = sub.add_parser("fit", parents=[common, demean], help="fit one score series")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--factor", type=_positive_int, default=1)
    p.add_argument("--mean", choices=E.MEAN_MODELS, default="AR(1)")
    p.add_argument("--vol", choices=VOL_MODELS, default="GARCH(1,1)")
    p.add_argument("--dist", choices=dists.DISTRIBUTIONS, default="normal")
    p.add_argument("--include-sigma", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", parents=[common, demean], help="BIC sweep over model grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--factors", type=_int_list, default=None)
    p.add_argument("--mean", nargs="+", choices=E.MEAN_MODELS, default=["AR(1)"])
    p.add_argument("--vol", nargs="+", choices=VOL_MODELS, default=list(VOL_MODELS))
    p.add_argument("--dist", nargs="+", choices=dists.DISTRIBUTIONS, default=list(dists.DISTRIBUTIONS))
    p.add_argument("--out", required=True)

    p = sub.add_parser("shock", parents=[common], help="one-sd score shocks on a cross-section")
    p.add_argument("--scores", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--row", type=int, default=-1, help="score row to shock (default: last)")
    p.add_argument("--amount", type=float, default=None, help="default: sample sd of each score")
    p.add_argument("--window", type=_positive_int, default=400, help="rows used for the default amount")
    p.add_argument("--out", required=True)

    p = sub.add_parser("forecast", parents=[common, demean], help="AR(1) and VAR-GARCH forecasts")
    p.add_argument("--scores", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--horizon", type=_positive_int, default=10)
    p.add_argument("--paths", type=_positive_int, default=10000)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", parents=[common], help="SVG plots and summary from CSV artifacts")
    p.add_argument("--in", dest="input", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _validate(args):
    """Config checks that need no data; failures are usage errors."""
    for M in getattr(args, "M", None) or []:
        if M < 3 or M % 2 == 0:
            raise UsageError(f"--M values must be odd integers >= 3, got {M}")
    if args.command == "roll":
        if any(w < 2 for w in args.window):
            raise UsageError("--window values must be >= 2")
        for K in args.K:
            if K < 1 or any(K > M for M in args.M):
                raise UsageError(f"--K value {K} must lie in 1..M")
    if args.command == "synth":
        if args.K > min(args.M):
            raise UsageError("--K cannot exceed M")
        if args.noise_sd is not None and args.noise_sd < 0:
            raise UsageError("--noise-sd must be non-negative")


def _require(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    return path


def _suffixed(path, tag, multi):
    path = Path(path)
    return path if not multi else path.with_name(f"{path.stem}_{tag}{path.suffix}")


def _manifest_path(out, is_dir):
    return Path(out) / "manifest.json" if is_dir else Path(str(out) + ".manifest.json")


def _series(scores, k, demean):
    y = scores[:, k - 1].copy()
    m = 0.0
    if demean == "all" or (demean == "level" and k == 1):
        m = float(y.mean())
        y -= m
    return y, m


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args, out):
    snaps = I.parse_snapshot_file(_require(args.input), args.format)
    written = []
    for M in args.M:
        surface = I.build_surface(snaps, args.block_spacing, M, allow_gaps=args.allow_gaps)
        dest = _suffixed(args.out, f"M{M}", len(args.M) > 1)
        I.write_surface_csv(surface, out.path(dest))
        written.append(dest)
    config = {"format": args.format, "block_spacing": args.block_spacing, "M": args.M,
              "allow_gaps": args.allow_gaps}
    return [args.input], written, config, False


def cmd_synth(args, out):
    written = []
    for M in args.M:
        spec = S.SynthSpec(T=args.T, M=M, factors=S.default_factors(args.K), noise_sd=args.noise_sd,
                           seed=args.seed, block_spacing=args.block_spacing)
        surface, truth = S.generate_surface(spec)
        multi = len(args.M) > 1
        dest = _suffixed(args.out, f"M{M}", multi)
        I.write_surface_csv(surface, out.path(dest))
        written.append(dest)
        if args.snapshots:
            sdest = _suffixed(args.snapshots, f"M{M}", multi)
            I.write_snapshot_file(S.surface_to_snapshots(surface), out.path(sdest))
            written.append(sdest)
        if args.truth:
            tdest = _suffixed(args.truth, f"M{M}", multi)
            B.write_coefficients_csv(surface.block_numbers, truth.scores, out.path(tdest))
            written.append(tdest)
    config = {"T": args.T, "M": args.M, "K": args.K, "noise_sd": args.noise_sd,
              "block_spacing": args.block_spacing}
    return [], written, config, False


def cmd_decompose(args, out):
    surface = I.read_surface_csv(_require(args.input))
    Ms = args.M or [surface.M]
    odir = out.directory(args.out)
    written = []
    for M in Ms:
        sub = surface.central(M) if M != surface.M else surface
        K = min(args.K, M)
        tag = f"_M{M}" if len(Ms) > 1 else ""
        if args.basis == "pca":
            dec = F.decompose(sub, center=args.center)
            files = {
                f"decomposition{tag}.json": lambda p: dec.to_json(p, k_max=K),
                f"eigenvalues{tag}.csv": lambda p: F.write_eigenvalue_csv(dec.eigenvalues, p),
                f"scores{tag}.csv": lambda p: B.write_coefficients_csv(sub.block_numbers, dec.scores[:, :K], p),
                f"basis{tag}.csv": lambda p: B.write_basis_csv(sub.grid_x, dec.mean_row, dec.basis[:, :K], p),
            }
        else:
            fb = B.FixedBasis.legendre(sub.grid_x, K)
            coef = B.project_fixed_basis(sub, fb, method=args.quadrature)
            files = {
                f"scores{tag}.csv": lambda p: B.write_coefficients_csv(sub.block_numbers, coef, p),
                f"basis{tag}.csv": lambda p: B.write_basis_csv(sub.grid_x, None, fb.columns, p),
            }
        for name, writer in files.items():
            writer(out.path(odir / name))
            written.append(odir / name)
    config = {"M": Ms, "K": args.K, "basis": args.basis, "quadrature": args.quadrature,
              "center": args.center if args.basis == "pca" else False}
    return [args.input], written, config, True


def cmd_roll(args, out):
    surface = I.read_surface_csv(_require(args.input))
    odir = out.directory(args.out)
    combos = [(M, W) for M in args.M for W in args.window]
    written = []
    for M, W in combos:
        if M > surface.M:
            raise LiqSurfError(f"surface has {surface.M} grid points, cannot use M={M}")
        cfg = P.RollingConfig(window=W, step=args.step, K_set=tuple(args.K), M=M)
        windows = P.rolling_decompose(surface, cfg, center=args.center, n_jobs=args.threads)
        drift = P.drift_series(windows, cfg.K_set)
        tag = f"_M{M}_T{W}" if len(combos) > 1 else ""
        for name, writer in (
            (f"drift{tag}.csv", drift.to_csv),
            (f"rolling_eigenvalues{tag}.csv", lambda p: P.write_eigenvalue_csv(windows, p, n_eigen=20)),
            (f"cpve{tag}.csv", lambda p: P.write_cpve_csv(windows, p)),
        ):
            writer(out.path(odir / name))
            written.append(odir / name)
    config = {"window": args.window, "step": args.step, "K": args.K, "M": args.M, "center": args.center}
    return [args.input], written, config, True


def cmd_fit(args, out):
    _, scores = B.read_coefficients_csv(_require(args.input))
    if args.factor > scores.shape[1]:
        raise LiqSurfError(f"--factor {args.factor} exceeds the {scores.shape[1]} score columns")
    y, m = _series(scores, args.factor, args.demean)
    fit = E.fit_mle(y, E.ModelSpec(args.mean, args.vol, args.dist), random_state=args.seed)
    rec = fit.to_dict(include_sigma=args.include_sigma)
    rec["series_mean"] = m
    write_json(rec, out.path(args.out))
    config = {"factor": args.factor, "mean": args.mean, "vol": args.vol, "dist": args.dist,
              "demean": args.demean, "include_sigma": args.include_sigma}
    return [args.input], [Path(args.out)], config, False


def cmd_sweep(args, out):
    _, scores = B.read_coefficients_csv(_require(args.input))
    factors = args.factors or list(range(1, scores.shape[1] + 1))
    if max(factors) > scores.shape[1] or min(factors) < 1:
        raise LiqSurfError(f"--factors must lie in 1..{scores.shape[1]}")
    rows = []
    for k in factors:
        y, _ = _series(scores, k, args.demean)
        rows.extend(E.bic_sweep(y, args.mean, args.vol, args.dist, series_id=f"beta_{k}",
                                n_jobs=args.threads, random_state=args.seed))
    E.write_sweep_csv(rows, out.path(args.out))
    config = {"factors": factors, "mean": args.mean, "vol": args.vol, "dist": args.dist,
              "demean": args.demean}
    return [args.input], [Path(args.out)], config, False


def _scores_and_basis(args):
    _, scores = B.read_coefficients_csv(_require(args.scores))
    grid, mean_row, U = B.read_basis_csv(_require(args.basis))
    if U.shape[1] != scores.shape[1]:
        raise LiqSurfError(f"basis has {U.shape[1]} columns but scores have {scores.shape[1]}")
    return scores, grid, mean_row, U


def cmd_shock(args, out):
    scores, grid, mean_row, U = _scores_and_basis(args)
    T = scores.shape[0]
    if not -T <= args.row < T:
        raise LiqSurfError(f"--row {args.row} outside the {T} score rows")
    row = args.row % T
    window = scores[max(0, row + 1 - args.window): row + 1]
    if args.amount is None and window.shape[0] < 2:
        raise LiqSurfError("need at least two rows in the window for a default shock size")
    curves, amounts = [], []
    for k in range(1, U.shape[1] + 1):
        base, shocked = P.shock_cross_section(scores[row], U, mean_row, k, args.amount, window)
        curves.append(shocked)
        amounts.append(args.amount if args.amount is not None else float(np.std(window[:, k - 1], ddof=1)))
    with open(out.path(args.out), "w") as fh:
        fh.write(",".join(["x", "baseline"] + [f"shock_{k}" for k in range(1, U.shape[1] + 1)]) + "\n")
        for m, x in enumerate(grid):
            fh.write(",".join([f"{x:.6f}", repr(float(base[m]))] + [repr(float(c[m])) for c in curves]) + "\n")
    config = {"row": row, "window": args.window, "amounts": amounts}
    return [args.scores, args.basis], [Path(args.out)], config, False


def cmd_forecast(args, out):
    scores, grid, mean_row, U = _scores_and_basis(args)
    K = scores.shape[1]
    series = [_series(scores, k, args.demean) for k in range(1, K + 1)]
    phis = [D.fit_ar1(y)[0] for y, _ in series]
    means = np.array([m for _, m in series])
    odir = out.directory(args.out)
    with open(out.path(odir / "ar1_forecast.csv"), "w") as fh:
        fh.write("h,x,forecast\n")
        for h in range(args.horizon + 1):
            curve = P.forecast_curve(phis, scores[-1], U, mean_row, h, score_means=means)
            for x, v in zip(grid, curve):
                fh.write(f"{h},{x:.6f},{float(v)!r}\n")
    params, s2_next = P.fit_var_garch(scores, random_state=args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        paths = P.simulate_var_garch(params, scores[-1], args.horizon, args.paths, args.seed,
                                     sigma2_next=s2_next, n_jobs=args.threads)
    q = P.curve_quantiles(paths, U, mean_row)
    P.write_quantile_csv(q, grid, out.path(odir / "quantiles.csv"))
    write_json(
        {"a": params.a.tolist(), "A": params.A.tolist(), "omega": params.omega.tolist(),
         "alpha": params.alpha.tolist(), "beta": params.beta.tolist(), "R": params.R.tolist(),
         "nu": params.nu, "sigma2_next": s2_next.tolist(), "spectral_radius": params.spectral_radius,
         "ar1_phi": phis, "mean_reversion_time": [D.mean_reversion_time(p) for p in phis]},
        out.path(odir / "var_garch.json"),
    )
    written = [odir / "ar1_forecast.csv", odir / "quantiles.csv", odir / "var_garch.json"]
    config = {"horizon": args.horizon, "paths": args.paths, "demean": args.demean}
    return [args.scores, args.basis], written, config, True


def cmd_report(args, out):
    csvs = R.collect_csvs(args.input)
    odir = out.directory(args.out)
    written = []

    def svg_path(name):
        written.append(odir / name)
        return out.path(odir / name)

    summary = R.build_report(csvs, svg_path)
    write_json(summary, out.path(odir / "summary.json"))
    with open(out.path(odir / "summary.md"), "w") as fh:
        fh.write(R.summary_markdown(summary))
    written += [odir / "summary.json", odir / "summary.md"]
    return [str(p) for p in csvs], written, {"inputs": [str(p) for p in args.input]}, True


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        with AtomicOutputs() as out:
            inputs, outputs, config, is_dir = HANDLERS[args.command](args, out)
            mpath = _manifest_path(args.out, is_dir)
            config = {**config, "threads": args.threads}
            manifest = build_manifest(args.command, inputs, [str(p) for p in outputs], config, args.seed)
            write_json(manifest, out.path(mpath))
    except (LiqSurfError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"liqsurf {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
