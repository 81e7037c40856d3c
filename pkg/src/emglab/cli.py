"""Command-line entry point: ``emg-lab <subcommand> ...``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
import argparse
from dataclasses import asdict
import json
import logging
import sys
import time

import numpy as np

from . import __version__
from .em import FitOptions, LineSearchOptions
from .errors import EmgLabError
from .io import (Series, emit_plot_svg, read_matrix_csv, read_report_json, write_dataset_csv,
                 write_matrix_csv, write_report_json)
from .regression import (Contamination, RegressionConfig, fit_line, gen_regression, run_trials,
                         SLOPE_TRUE, INTERCEPT_TRUE)
from .spectro import (SpectraGenConfig, background_errors, fit_background, gen_spectra, imodpoly,
                      pmf_bench_options, run_pmf_bench)

logger = logging.getLogger("emglab")

DEFAULT_METHODS = "l2,huber:0.2,l1,pinball:0.2,emgm"
DEFAULT_OBJECTIVES = "l2,l1,pinball:0.3,pinball:0.2,emgm"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_fit_options(p, pmf=False):
    d = pmf_bench_options() if pmf else FitOptions()
    g = p.add_argument_group("optimizer")
    g.add_argument("--max-em-iters", type=int, default=d.max_em_iters)
    g.add_argument("--max-inner-iters", type=int, default=d.max_inner_iters)
    g.add_argument("--rel-tol", type=float, default=d.loglik_rel_tol,
                   help="relative change of the objective that stops iteration")
    g.add_argument("--curvature-floor", type=float, default=d.curvature_floor)
    g.add_argument("--ls-shrink", type=float, default=d.line_search.shrink)
    g.add_argument("--ls-c", type=float, default=d.line_search.c)
    g.add_argument("--ls-max-backtracks", type=int, default=d.line_search.max_backtracks)


def _fit_options(args):
    return FitOptions(max_em_iters=args.max_em_iters, max_inner_iters=args.max_inner_iters,
                      loglik_rel_tol=args.rel_tol, curvature_floor=args.curvature_floor,
                      line_search=LineSearchOptions(args.ls_shrink, args.ls_c,
                                                    args.ls_max_backtracks))


def _add_contamination(p):
    p.add_argument("--contamination", choices=["exp", "lognormal", "none"], default="exp")
    p.add_argument("--rate", type=float, default=0.5, help="exponential contamination rate")
    p.add_argument("--ln-mu", type=float, default=0.0)
    p.add_argument("--ln-sigma", type=float, default=1.0)
    p.add_argument("--frac", type=float, default=0.25, help="contaminated fraction")
    p.add_argument("--noise-sigma", type=float, default=0.5)


def _regression_config(args, n=256, seed=0):
    return RegressionConfig(
        n=n, seed=seed, contaminated_fraction=args.frac, noise_sigma=args.noise_sigma,
        contamination=Contamination(args.contamination, args.rate, args.ln_mu, args.ln_sigma))


def _add_spectra_config(p):
    d = SpectraGenConfig()
    p.add_argument("--n", type=int, default=d.n, help="channels per spectrogram")
    p.add_argument("--m", type=int, default=d.m, help="number of spectrograms")
    p.add_argument("--k", type=int, default=d.k, help="background rank")
    p.add_argument("--peaks", type=_int_list, default=[d.peaks_min, d.peaks_max],
                   help="min,max peaks per spectrogram")
    p.add_argument("--widths", type=str, default=f"{d.width_min},{d.width_max}",
                   help="min,max peak width in channels")
    p.add_argument("--amplitude", choices=["exp", "uniform"], default=d.amplitude)
    p.add_argument("--lorentzian-fraction", type=float, default=d.lorentzian_fraction)
    p.add_argument("--noise-sigma", type=float, default=d.noise_sigma)
    p.add_argument("--lengthscale", type=float, default=d.lengthscale)
    p.add_argument("--background-lengthscale", type=float, default=d.background_lengthscale)
    p.add_argument("--tol", type=float, default=d.rank_tol, help="kernel truncation tolerance")
    p.add_argument("--mask-fraction", type=float, default=d.mask_fraction)


def _spectra_config(args, seed):
    if len(args.peaks) != 2:
        raise UsageError("--peaks takes min,max")
    widths = [float(w) for w in _csv_list(args.widths)]
    if len(widths) != 2:
        raise UsageError("--widths takes min,max")
    return SpectraGenConfig(
        n=args.n, m=args.m, k=args.k, peaks_min=args.peaks[0], peaks_max=args.peaks[1],
        width_min=widths[0], width_max=widths[1], amplitude=args.amplitude,
        lorentzian_fraction=args.lorentzian_fraction, noise_sigma=args.noise_sigma,
        lengthscale=args.lengthscale, background_lengthscale=args.background_lengthscale,
        rank_tol=args.tol, mask_fraction=args.mask_fraction, seed=seed)


def build_parser():
    p = _Parser(prog="emg-lab", description="EMG mixture residual models: regression and "
                "low-rank spectroscopic background experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-regression", help="generate a contaminated regression dataset")
    s.add_argument("--n", type=int, default=256)
    _add_contamination(s)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="CSV with columns x, y, contaminated")

    s = sub.add_parser("fit-regression", help="fit a line under several objectives")
    s.add_argument("--in", dest="inp", required=True, help="CSV from gen-regression (x, y, ...)")
    s.add_argument("--methods", default=DEFAULT_METHODS)
    s.add_argument("--out", required=True, help="JSON report")
    s.add_argument("--plot", help="SVG of the data and fitted lines")
    _add_fit_options(s)

    s = sub.add_parser("bench-regression", help="repeated regression trials over sample sizes")
    _add_contamination(s)
    s.add_argument("--sizes", type=_int_list, default=[256, 16384])
    s.add_argument("--reps", type=int, default=32)
    s.add_argument("--methods", default=DEFAULT_METHODS)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="JSON report")
    s.add_argument("--csv", help="also write the statistics table as CSV")
    s.add_argument("--plot", help="SVG of MAE(b) against N")
    _add_fit_options(s)

    s = sub.add_parser("gen-spectra", help="generate a synthetic spectroscopic dataset")
    _add_spectra_config(s)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="CSV: grid column then spectrograms")
    s.add_argument("--truth", help="CSV for the true background")

    s = sub.add_parser("fit-background", help="low-rank background fit of a spectra CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--truth", help="true background CSV, for error statistics")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--objective", default="emgm")
    s.add_argument("--lengthscale", type=float, default=5.0)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--prior-scale", type=float, default=None,
                   help="half-Normal prior scale on sigma (default 0.1 x mean column max)")
    s.add_argument("--nonneg-v", action="store_true")
    s.add_argument("--seed", type=int, default=0, help="factor initialization seed")
    s.add_argument("--out", required=True, help="JSON report")
    s.add_argument("--background-out", help="CSV of the fitted background U V")
    s.add_argument("--u-out", help="CSV of U")
    s.add_argument("--v-out", help="CSV of V (rows = spectrograms)")
    s.add_argument("--plot", help="SVG of one spectrogram with its background")
    s.add_argument("--column", type=int, default=0)
    _add_fit_options(s, pmf=True)

    s = sub.add_parser("bench-pmf", help="background benchmark over synthetic datasets")
    _add_spectra_config(s)
    s.add_argument("--objectives", default=DEFAULT_OBJECTIVES)
    s.add_argument("--datasets", type=int, default=8)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    _add_fit_options(s, pmf=True)

    s = sub.add_parser("imodpoly", help="iterative polynomial baseline per spectrogram")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--out", required=True, help="CSV of baselines")

    s = sub.add_parser("plot", help="SVG from a JSON report")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    return p


def _print_config(args):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    print(json.dumps({"resolved_config": cfg}, sort_keys=True, default=str))


def cmd_gen_regression(args):
    cfg = _regression_config(args, n=args.n, seed=args.seed)
    x, y, bad = gen_regression(cfg)
    write_matrix_csv(args.out, x, np.column_stack([y, bad.astype(float)]),
                     header=["x", "y", "contaminated"])
    print(f"wrote {args.out}: {cfg.n} points, {int(bad.sum())} contaminated")


def _read_xy(path):
    ds = read_matrix_csv(path)
    if not np.all(ds.mask[:, 0]):
        raise EmgLabError(f"{path}: y column has empty cells")
    return ds.grid, ds.S[:, 0]


def cmd_fit_regression(args):
    x, y = _read_xy(args.inp)
    opts = _fit_options(args)
    fits = []
    for m in _csv_list(args.methods):
        t0 = time.perf_counter()
        a, b, res = fit_line(x, y, m, opts)
        logger.info("%s: %.3f s", m, time.perf_counter() - t0)
        fit = {"method": m, "a": a, "b": b, "iterations": res.iterations,
               "converged": res.converged, "trace": res.trace}
        if res.mix is not None:
            fit["mixture"] = {"mu": res.mix.emg.mu, "sigma": res.mix.emg.sigma,
                              "lam": res.mix.emg.lam, "epsilon": res.mix.epsilon}
        if res.objective is not None:
            fit["objective"] = res.objective
        fits.append(fit)
        print(f"{m:>12s}: a = {a:.6f}  b = {b:.6f}")
    report = {"kind": "regression_fit", "input": args.inp, "options": asdict(opts),
              "truth": {"a": SLOPE_TRUE, "b": INTERCEPT_TRUE}, "fits": fits, "records": fits}
    write_report_json(report, args.out)
    if args.plot:
        regression_plot(x, y, fits, args.plot)


def regression_plot(x, y, fits, path):
    xs = np.array([np.min(x), np.max(x)])
    series = [Series("data", x, y, "scatter")]
    series += [Series(f["method"], xs, f["a"] * xs + f["b"]) for f in fits]
    emit_plot_svg(series, path, title="Line fits", xlabel="x", ylabel="y")


def cmd_bench_regression(args):
    cfg = _regression_config(args)
    table = run_trials(cfg, _csv_list(args.methods), args.reps, args.sizes, args.seed,
                       _fit_options(args))
    d = table.to_dict()
    d["options"] = asdict(_fit_options(args))
    write_report_json(d, args.out)
    for s in table.stats:
        print(f"N={s.n:>6d} {s.method:>12s}: MAE b {s.mae_b:.3e}  mean b {s.mean_b:+.3e}  "
              f"std b {s.std_b:.3e}  MAE a {s.mae_a:.3e}")
    if args.csv:
        _write_stats_csv(table, args.csv)
    if args.plot:
        trials_plot(d, args.plot)


def _write_stats_csv(table, path):
    import csv
    fields = ["method", "n", "reps", "mae_a", "mean_a", "std_a", "mae_b", "mean_b", "std_b"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for s in table.stats:
            row = asdict(s)
            w.writerow([row[f] if isinstance(row[f], (str, int)) else format(row[f], ".17g")
                        for f in fields])


def trials_plot(d, path):
    sizes = d["sizes"]
    series = []
    for m in d["methods"]:
        mae = [next(s["mae_b"] for s in d["stats"] if s["method"] == m and s["n"] == n)
               for n in sizes]
        series.append(Series(m, sizes, mae))
    emit_plot_svg(series, path, title="MAE of b", xlabel="N", ylabel="MAE b", logx=True, logy=True)


def cmd_gen_spectra(args):
    cfg = _spectra_config(args, args.seed)
    ds = gen_spectra(cfg)
    write_dataset_csv(args.out, ds)
    if args.truth:
        write_matrix_csv(args.truth, ds.grid, ds.truth_B,
                         header=["grid"] + [f"b{j}" for j in range(cfg.m)])
    print(f"wrote {args.out}: {cfg.n} x {cfg.m}, rank {cfg.k}")


def cmd_fit_background(args):
    ds = read_matrix_csv(args.inp)
    if args.truth:
        truth = read_matrix_csv(args.truth)
        if truth.S.shape != ds.S.shape:
            raise EmgLabError("truth and data shapes differ")
        ds.truth_B = truth.S
    opts = _fit_options(args)
    t0 = time.perf_counter()
    model, res = fit_background(ds, args.k, args.objective, opts, lengthscale=args.lengthscale,
                                tol=args.tol, seed=args.seed, sigma_prior_scale=args.prior_scale,
                                nonneg_v=args.nonneg_v)
    logger.info("fit took %.2f s", time.perf_counter() - t0)
    report = {"kind": "background_fit", "input": args.inp, "objective": args.objective,
              "k": args.k, "rank_W": int(model.W.shape[1]), "options": asdict(opts),
              "iterations": res.iterations, "converged": res.converged, "trace": res.trace,
              "seed": args.seed}
    if res.mix is not None:
        report["mixture"] = {"mu": res.mix.emg.mu, "sigma": res.mix.emg.sigma,
                             "lam": res.mix.emg.lam, "epsilon": res.mix.epsilon}
    if ds.truth_B is not None:
        keys = ("mean_l2", "std_l2", "mean_l1", "std_l1")
        report["errors"] = dict(zip(keys, background_errors(model.B, ds.truth_B)))
        print("errors: " + "  ".join(f"{k} {v:.4e}" for k, v in report["errors"].items()))
    write_report_json(report, args.out)
    if args.background_out:
        write_matrix_csv(args.background_out, ds.grid, model.B)
    if args.u_out:
        write_matrix_csv(args.u_out, ds.grid, model.U)
    if args.v_out:
        write_matrix_csv(args.v_out, np.arange(model.V.shape[1]), model.V.T)
    if args.plot:
        j = args.column
        series = [Series("data", ds.grid[ds.mask[:, j]], ds.S[ds.mask[:, j], j]),
                  Series(f"background ({args.objective})", ds.grid, model.B[:, j])]
        if ds.truth_B is not None:
            series.append(Series("truth", ds.grid, ds.truth_B[:, j]))
        emit_plot_svg(series, args.plot, title=f"spectrogram {j}", xlabel="channel",
                      ylabel="intensity")


def cmd_bench_pmf(args):
    cfg = _spectra_config(args, args.seed)
    bench = run_pmf_bench(cfg, _csv_list(args.objectives), args.datasets, args.seed,
                          _fit_options(args))
    write_report_json(bench, args.out)
    for obj, st in bench.stats.items():
        print(f"{obj:>12s}: mean l2 {st['mean_l2']:.4e}  std l2 {st['std_l2']:.4e}  "
              f"mean l1 {st['mean_l1']:.4e}  std l1 {st['std_l1']:.4e}")


def cmd_imodpoly(args):
    ds = read_matrix_csv(args.inp)
    out = np.full(ds.S.shape, np.nan)
    for j in range(ds.S.shape[1]):
        keep = ds.mask[:, j]
        base = imodpoly(ds.S[keep, j], args.degree, args.max_iter, grid=ds.grid[keep])
        out[keep, j] = base
    write_matrix_csv(args.out, ds.grid, out, mask=ds.mask)
    print(f"wrote {args.out}")


def cmd_plot(args):
    d = read_report_json(args.inp)
    kind = d.get("kind")
    if kind == "regression_trials":
        trials_plot(d, args.out)
    elif kind == "pmf_bench":
        objs = d["objectives"]
        idx = np.arange(len(objs), dtype=float)
        emit_plot_svg([Series("mean l2", idx, [d["stats"][o]["mean_l2"] for o in objs],
                              "scatter")],
                      args.out, title="background error by objective (" + ", ".join(objs) + ")",
                      xlabel="objective index", ylabel="mean l2")
    elif "trace" in d:
        emit_plot_svg([Series("trace", np.arange(len(d["trace"])), d["trace"])], args.out,
                      title="objective trace", xlabel="iteration", ylabel="value")
    elif kind == "regression_fit":
        series = [Series(f["method"], np.arange(len(f["trace"])), f["trace"]) for f in d["fits"]]
        emit_plot_svg(series, args.out, title="traces", xlabel="iteration", ylabel="value")
    else:
        raise EmgLabError(f"don't know how to plot a report of kind {kind!r}")
    print(f"wrote {args.out}")


COMMANDS = {
    "gen-regression": cmd_gen_regression,
    "fit-regression": cmd_fit_regression,
    "bench-regression": cmd_bench_regression,
    "gen-spectra": cmd_gen_spectra,
    "fit-background": cmd_fit_background,
    "bench-pmf": cmd_bench_pmf,
    "imodpoly": cmd_imodpoly,
    "plot": cmd_plot,
}


def run_cli(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    _print_config(args)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"emg-lab: error: {exc}", file=sys.stderr)
        return 2
    except (EmgLabError, OSError, ValueError) as exc:
        print(f"emg-lab: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
