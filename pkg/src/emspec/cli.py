"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from emspec.config import PipelineConfig, load_config_file, resolve_config
from emspec.errors import EmspecError, InputError, NumericalError

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

logger = logging.getLogger("emspec")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


# flag -> (config key, type, help)
_CONFIG_FLAGS = {
    "--prices": ("prices_path", str, "price file"),
    "--format": ("prices_format", str, "wide_csv or long_csv"),
    "--index": ("index_path", str, "optional index price file (wide CSV, first column used)"),
    "--align": ("alignment", str, "intersect_dates or forward_fill:<max_gap>"),
    "--epoch": ("epoch_len", int, "epoch length M in rows (default 20)"),
    "--shift": ("shift", int, "epoch shift in rows (default 1)"),
    "--epsilon": ("epsilon", float, "power-map exponent offset (default 0.01)"),
    "--degenerate": ("degenerate", str, "zero-variance instruments: error or drop"),
    "--lags": ("lags", int, "regression lags p (default 3)"),
    "--window": ("regression_window", int, "rolling regression window W (default 126)"),
    "--step": ("regression_step", int, "rows between regression windows (default 1)"),
    "--bootstrap": ("bootstrap", int, "bootstrap replicates B (default 500)"),
    "--level": ("level", float, "significance level (default 0.001)"),
    "--seed": ("seed", int, "random seed (required for outliers)"),
    "--max-iter": ("garch_max_iter", int, "GARCH optimizer iteration cap"),
    "--tol": ("garch_tol", float, "GARCH simplex tolerance"),
    "--out": ("output_dir", str, "output directory"),
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for flag, (key, kind, text) in _CONFIG_FLAGS.items():
        p.add_argument(flag, dest=key, type=kind, default=None, help=text)
    p.add_argument("--diff", dest="garch_diff", action="store_const", const=True, default=None,
                   help="first-difference mu and lambda_min before GARCH fitting")
    p.add_argument("--threads", type=int, default=None, help="worker threads (overrides EMSPEC_THREADS)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emspec", description="Emerging-spectrum crash indicators for return panels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("run-all", "run every stage"),
        ("ingest", "load and align prices"),
        ("indicators", "epoch correlations, spectra and indicator series"),
        ("outliers", "mode test on each epoch's emerging spectrum"),
        ("regress", "rolling lagged regression of mu on lambda_min"),
        ("garch-fit", "GARCH(1,1) fits to r, mu and lambda_min"),
    ]:
        _add_config_flags(sub.add_parser(name, help=text, aliases=["run_all"] if name == "run-all" else []))

    p = sub.add_parser("plot", help="SVG figures from stage outputs")
    _add_config_flags(p)
    p.add_argument("which", choices=["indicators", "spectra", "outliers", "garch"])
    p.add_argument("--start", help="first date to show")
    p.add_argument("--end", help="last date to show")
    p.add_argument("--date", dest="end_date", help="epoch end date for the spectra plot")
    p.add_argument("--mp", action="store_true", help="overlay the Marchenko-Pastur density")

    s = sub.add_parser("simulate", help="seeded synthetic series and panels")
    s.add_argument("--garch", nargs=3, type=float, metavar=("ALPHA0", "ALPHA1", "BETA1"))
    s.add_argument("--len", dest="length", type=int, default=1000)
    s.add_argument("--regime", action="store_true", help="two-regime factor price panel")
    s.add_argument("--regime-outlier", action="store_true",
                   help="two-regime panel with one planted dependency (disjoint epochs)")
    s.add_argument("--assets", type=int, default=None)
    s.add_argument("--days", type=int, default=None)
    s.add_argument("--rho-low", type=float, default=0.1)
    s.add_argument("--rho-high", type=float, default=0.7)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--output", "-o", required=True)
    s.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _config(args) -> PipelineConfig:
    file_values = load_config_file(args.config) if args.config else {}
    cli_values = {key: getattr(args, key) for key, *_ in _CONFIG_FLAGS.values()}
    cli_values["garch_diff"] = args.garch_diff
    return resolve_config(file_values, cli_values)


def _simulate(args) -> str:
    from emspec.garch import GarchParams
    from emspec.ingest import write_prices
    from emspec.pipeline import simulate_garch
    from emspec.synthetic import regime_fixture, two_regime_panel

    chosen = sum([args.garch is not None, args.regime, args.regime_outlier])
    if chosen != 1:
        raise _UsageError("simulate: choose exactly one of --garch, --regime, --regime-outlier")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.garch is not None:
        a0, a1, b1 = args.garch
        n = simulate_garch(GarchParams(a0, (a1,), (b1,)), args.length, args.seed, out)
        return f"wrote {n} rows to {out}"
    if args.regime:
        panel = two_regime_panel(args.assets or 10, args.days or 300, args.rho_low, args.rho_high, args.seed)
        write_prices(panel, out)
        return f"wrote {panel.T} x {panel.N} prices to {out}"
    fx = regime_fixture(args.assets or 120, args.days or 1000, args.rho_low, args.rho_high, seed=args.seed)
    write_prices(fx.panel, out)
    return f"wrote {fx.panel.T} x {fx.panel.N} prices to {out}; planted epoch ends {fx.injected_end_date}"


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            print(_simulate(args))
            return EXIT_OK
        from emspec.pipeline import Pipeline

        cfg = _config(args)
        pipe = Pipeline(cfg, threads=args.threads)
        if args.command == "plot":
            from emspec.plotting import plot

            print(plot(cfg, args.which, args.start, args.end, args.end_date, args.mp))
        elif args.command in ("run-all", "run_all"):
            manifest = pipe.run_all()
            for name, info in manifest.get("outputs", {}).items():
                print(f"{name}: {info['rows']} rows")
        else:
            result = pipe.stage(args.command)
            print(f"{args.command}: {result}")
        return EXIT_OK
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"emspec: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"emspec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EmspecError as exc:
        print(f"emspec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
