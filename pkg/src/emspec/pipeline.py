"""Stage runners behind the command line.

Stages talk to each other only through files in the output directory, so
running one stage by hand gives the same bytes as ``run_all``:

    ingest      -> prices_aligned.csv, alignment_report.json
    indicators  -> indicators.csv, spectra.csv, emerging.csv
    outliers    -> outliers.csv
    regress     -> regression.csv
    garch-fit   -> garch.csv, garch_paths.csv

Every stage merges its hashes, row counts and wall time into manifest.json.
"""

from __future__ import annotations

import json
import logging
import platform
import time
from pathlib import Path

import numpy as np

from emspec import __version__
from emspec.config import PipelineConfig
from emspec.corr import EpochSpec
from emspec.csvio import column, read_csv, sha256, write_csv, write_json
from emspec.errors import EmspecError, InputError
from emspec.garch import GarchParams, fit_indicator_volatility, garch_simulate
from emspec.indicators import build_indicators
from emspec.ingest import align, load_prices, to_returns, write_prices
from emspec.lagreg import rolling_t_series
from emspec.modetest import SkippedEpoch, outlier_series
from emspec.spectrum import PowerMapParams

logger = logging.getLogger(__name__)

STAGE_OUTPUTS = {
    "ingest": ["prices_aligned.csv", "alignment_report.json"],
    "indicators": ["indicators.csv", "spectra.csv", "emerging.csv"],
    "outliers": ["outliers.csv"],
    "regress": ["regression.csv"],
    "garch-fit": ["garch.csv", "garch_paths.csv"],
}
GARCH_SERIES = ("r", "mu", "lambda_min")
MANIFEST = "manifest.json"


def _versions() -> dict:
    import numba
    import scipy

    return {
        "emspec": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


class Pipeline:
    def __init__(self, config: PipelineConfig, threads: int | None = None):
        self.config = config.validate()
        self.out = Path(config.output_dir)
        self.threads = threads

    def path(self, name: str) -> Path:
        return self.out / name

    # manifest -----------------------------------------------------------

    def _manifest(self) -> dict:
        p = self.path(MANIFEST)
        if p.is_file():
            return json.loads(p.read_text(encoding="utf-8"))
        return {}

    def _record(self, stage: str, seconds: float, rows: dict, extra: dict | None = None) -> None:
        m = self._manifest()
        m["config"] = self.config.to_dict()
        m["versions"] = _versions()
        inputs = {}
        for key in ("prices_path", "index_path"):
            value = getattr(self.config, key)
            if value and Path(value).is_file():
                inputs[key] = {"path": str(value), "sha256": sha256(value)}
        m["inputs"] = inputs
        outputs = m.setdefault("outputs", {})
        for name in STAGE_OUTPUTS[stage]:
            outputs[name] = {"sha256": sha256(self.path(name)), "rows": rows.get(name)}
        m.setdefault("stages", {})[stage] = {"wall_time_s": round(seconds, 6), **(extra or {})}
        write_json(self.path(MANIFEST), m)

    # stages -------------------------------------------------------------

    def ingest(self) -> dict:
        t0 = time.perf_counter()
        cfg = self.config
        if not cfg.prices_path:
            raise InputError("prices_path is not set")
        raw = load_prices(cfg.prices_path, cfg.prices_format)
        panel, report = align(raw, cfg.alignment)
        self.out.mkdir(parents=True, exist_ok=True)
        tmp = self.path("prices_aligned.csv.part")
        write_prices(panel, tmp)
        tmp.replace(self.path("prices_aligned.csv"))
        write_json(self.path("alignment_report.json"), report.to_dict())
        counts = {"price_rows": panel.T, "return_rows": panel.T - 1, "instruments": panel.N}
        self._record("ingest", time.perf_counter() - t0, {"prices_aligned.csv": panel.T}, {"counts": counts})
        return counts

    def _returns(self):
        p = self.path("prices_aligned.csv")
        if not p.is_file():
            read_csv(p, prerequisite="ingest")
        return to_returns(load_prices(p, "wide_csv"))

    def indicators(self) -> int:
        t0 = time.perf_counter()
        cfg = self.config
        returns = self._returns()
        index = load_prices(cfg.index_path, "wide_csv") if cfg.index_path else None
        spec = EpochSpec(cfg.epoch_len, cfg.shift)
        ind = build_indicators(returns, spec, PowerMapParams(cfg.epsilon), index, cfg.degenerate, self.threads)

        n = write_csv(
            self.path("indicators.csv"),
            ["date", "r", "mu", "lambda_min", "lambda_max", "separation_gap", "flags"],
            zip(ind.dates.astype(str), ind.r, ind.mu, ind.lambda_min, ind.lambda_max, ind.separation_gap, ind.flags),
        )
        write_csv(
            self.path("spectra.csv"),
            ["end_date", "lambda_max", "lambda_min_emerging", "separation_gap", "emerging_kurtosis"],
            zip(ind.dates.astype(str), ind.lambda_max, ind.lambda_min, ind.separation_gap, ind.emerging_kurtosis),
        )
        m = write_csv(
            self.path("emerging.csv"),
            ["end_date", "index", "eigenvalue"],
            ((str(d), k, v) for d, em in zip(ind.dates, ind.emerging) for k, v in enumerate(em)),
        )
        extra = {
            "epochs": n,
            "market_return": ind.market_source,
            "lambda_min_present": ind.has_lambda_min,
            "flagged_epochs": sum(1 for f in ind.flags if f),
        }
        self._record(
            "indicators",
            time.perf_counter() - t0,
            {"indicators.csv": n, "spectra.csv": n, "emerging.csv": m},
            extra,
        )
        return n

    def _emerging(self) -> list[tuple[np.datetime64, np.ndarray]]:
        header, rows = read_csv(self.path("emerging.csv"), prerequisite="indicators")
        ih, irows = read_csv(self.path("indicators.csv"), prerequisite="indicators")
        dates = column(ih, irows, "date", "date")
        values: dict = {d: [] for d in dates.tolist()}
        for d, v in zip(column(header, rows, "end_date", "date").tolist(), column(header, rows, "eigenvalue")):
            values[d].append(v)
        return [(np.datetime64(d, "D"), np.array(v)) for d, v in values.items()]

    def outliers(self) -> int:
        t0 = time.perf_counter()
        cfg = self.config
        if cfg.seed is None:
            raise InputError("the outlier test needs a seed (config key 'seed' or --seed)")
        epochs = self._emerging()
        skipped: list[SkippedEpoch] = []
        results = {r.end_date: r for r in outlier_series(epochs, cfg.bootstrap, cfg.seed, cfg.level, self.threads, skipped)}
        reasons = {s.end_date: s for s in skipped}

        def rows():
            for d, _ in epochs:
                if d in results:
                    r = results[d]
                    yield str(d), r.sample_size, r.critical_bandwidth, r.p_value, r.neg_log10_p, r.reject
                else:
                    yield str(d), reasons[d].sample_size, None, None, None, None

        n = write_csv(
            self.path("outliers.csv"),
            ["end_date", "sample_size", "critical_bandwidth", "p_value", "neg_log10_p", "reject"],
            rows(),
        )
        extra = {
            "tested": len(results),
            "rejected": sum(r.reject for r in results.values()),
            "skipped": len(skipped),
            "skip_reasons": sorted({s.reason for s in skipped}),
        }
        self._record("outliers", time.perf_counter() - t0, {"outliers.csv": n}, extra)
        return n

    def _indicator_columns(self):
        header, rows = read_csv(self.path("indicators.csv"), prerequisite="indicators")
        return {
            "date": column(header, rows, "date", "date"),
            **{name: column(header, rows, name) for name in ("r", "mu", "lambda_min")},
        }

    def regress(self) -> int:
        t0 = time.perf_counter()
        cfg = self.config
        ind = self._indicator_columns()
        p = cfg.lags
        header = ["window_end", *[f"beta{j}" for j in range(p + 1)], "se1", "t_beta1", "significant", "r_squared", "n_obs"]
        skipped: list = []
        notes: list[str] = []
        results = []
        if not np.isfinite(ind["lambda_min"]).any():
            notes.append("lambda_min absent (epoch_len >= N): no regression")
        elif np.isfinite(ind["lambda_min"][p:]).sum() < cfg.regression_window:
            notes.append(f"fewer aligned rows than the window ({cfg.regression_window})")
        else:
            results = list(
                rolling_t_series(
                    ind["mu"], ind["lambda_min"], p, cfg.regression_window, cfg.regression_step, ind["date"], skipped
                )
            )
        for note in notes:
            logger.warning(note)
        n = write_csv(
            self.path("regression.csv"),
            header,
            (
                (str(r.window_end), *r.beta, r.se[1], r.t_beta1, r.significant, r.r_squared, r.n_obs)
                for r in results
            ),
        )
        extra = {
            "significant": sum(r.significant for r in results),
            "skipped_windows": [[str(d), why] for d, why in skipped],
            "notes": notes,
            "perfect_fits": sum("perfect_fit" in r.flags for r in results),
        }
        self._record("regress", time.perf_counter() - t0, {"regression.csv": n}, extra)
        return n

    def garch_fit(self) -> int:
        t0 = time.perf_counter()
        cfg = self.config
        ind = self._indicator_columns()
        fits, paths, problems, flags = [], [], {}, {}
        for name in GARCH_SERIES:
            values = ind[name]
            ok = np.isfinite(values)
            dates = ind["date"][ok]
            diff = cfg.garch_diff and name != "r"
            if diff:
                dates = dates[1:]
            try:
                fit = fit_indicator_volatility(values, diff=diff, max_iter=cfg.garch_max_iter, tol=cfg.garch_tol)
            except EmspecError as exc:
                logger.warning("garch fit for %s skipped: %s", name, exc)
                problems[name] = str(exc)
                fits.append((name, None, None, None, None, False))
                continue
            prm = fit.params
            fits.append((name, prm.alpha0, prm.alpha[0], prm.beta[0], fit.log_likelihood, fit.converged))
            flags[name] = fit.flags
            paths.extend((str(d), name, s) for d, s in zip(dates, fit.sigma_path))
        n = write_csv(
            self.path("garch.csv"), ["series_name", "alpha0", "alpha1", "beta1", "log_likelihood", "converged"], fits
        )
        m = write_csv(self.path("garch_paths.csv"), ["date", "series_name", "sigma"], paths)
        extra = {"differenced": cfg.garch_diff, "flags": flags, "skipped": problems}
        self._record("garch-fit", time.perf_counter() - t0, {"garch.csv": n, "garch_paths.csv": m}, extra)
        return n

    def run_all(self) -> dict:
        """Every stage in order; returns the final manifest."""
        self.out.mkdir(parents=True, exist_ok=True)
        stale = self.path(MANIFEST)
        if stale.is_file():
            stale.unlink()
        for stage in ("ingest", "indicators", "outliers", "regress", "garch-fit"):
            logger.info("stage %s", stage)
            try:
                self.stage(stage)
            except EmspecError as exc:
                raise type(exc)(f"[{stage}] {exc}") from exc
        return self._manifest()

    def stage(self, name: str):
        return {
            "ingest": self.ingest,
            "indicators": self.indicators,
            "outliers": self.outliers,
            "regress": self.regress,
            "garch-fit": self.garch_fit,
        }[name]()


def simulate_garch(params: GarchParams, length: int, seed: int, path) -> int:
    x, s2 = garch_simulate(params, length, seed, return_sigma2=True)
    return write_csv(path, ["t", "x", "sigma2"], zip(range(length), x, s2))

