"""Static SVG figures drawn from stage outputs."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from emspec.config import PipelineConfig  # noqa: E402
from emspec.corr import EpochSpec, epoch_correlation  # noqa: E402
from emspec.csvio import column, read_csv  # noqa: E402
from emspec.errors import InputError  # noqa: E402
from emspec.ingest import load_prices, to_returns  # noqa: E402
from emspec.spectrum import eigvalsh, marchenko_pastur, power_map, split_spectrum  # noqa: E402

KINDS = ("indicators", "spectra", "outliers", "garch")
_RC = {"svg.hashsalt": "emspec", "svg.fonttype": "path", "figure.dpi": 100}


def threshold(level: float) -> float:
    """-log10 of the significance level (3 for 0.001)."""
    return -math.log10(level)


def _window(dates: np.ndarray, start=None, end=None) -> np.ndarray:
    keep = np.ones(dates.shape, dtype=bool)
    if start is not None:
        keep &= dates >= np.datetime64(start, "D")
    if end is not None:
        keep &= dates <= np.datetime64(end, "D")
    if not keep.any():
        if start is None and end is None:
            raise InputError("nothing to plot: the input table has no rows")
        raise InputError(f"date filter selects no rows (start={start}, end={end})")
    return keep


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_indicators(out: Path, start=None, end=None) -> Path:
    h, rows = read_csv(out / "indicators.csv", prerequisite="indicators")
    dates = column(h, rows, "date", "date")
    keep = _window(dates, start, end)
    panels = [("r", "r(t)"), ("mu", "mu(t)"), ("lambda_min", "lambda_min(t)"), ("lambda_max", "lambda_max(t)")]
    reg = out / "regression.csv"
    if reg.is_file():
        panels.append(("t_beta1", "t(beta1)"))
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(len(panels), 1, sharex=True, figsize=(9, 2 * len(panels)))
        for ax, (name, label) in zip(axes, panels):
            if name == "t_beta1":
                rh, rrows = read_csv(reg)
                if rrows:
                    rd = column(rh, rrows, "window_end", "date")
                    t = column(rh, rrows, "t_beta1")
                    sel = (rd >= dates[keep][0]) & (rd <= dates[keep][-1])
                    ax.plot(rd[sel], t[sel], lw=0.8)
                for y in (-2.0, 2.0):
                    ax.axhline(y, color="k", ls="--", lw=0.6)
            else:
                ax.plot(dates[keep], column(h, rows, name)[keep], lw=0.8)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("epoch end date")
        fig.tight_layout()
        return _save(fig, out / "plots" / "indicators.svg")


def plot_spectra(out: Path, config: PipelineConfig, end_date=None, mp_overlay: bool = False, bins: int = 30) -> Path:
    """Normal and emerging spectra of one epoch (default: the last one)."""
    h, rows = read_csv(out / "indicators.csv", prerequisite="indicators")
    dates = column(h, rows, "date", "date")
    if end_date is None:
        target = dates[-1]
    else:
        target = np.datetime64(end_date, "D")
        if target not in dates:
            raise InputError(f"no epoch ends on {end_date}")
    read_csv(out / "prices_aligned.csv", prerequisite="ingest")
    returns = to_returns(load_prices(out / "prices_aligned.csv"))
    spec = EpochSpec(config.epoch_len, config.shift)
    end_index = int(np.flatnonzero(returns.dates == target)[0])
    ec = epoch_correlation(returns, end_index, spec, config.degenerate)
    split = split_spectrum(eigvalsh(power_map(ec, config.epsilon)), ec.N, spec.epoch_len, target)
    with plt.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
        a1.hist(split.normal, bins=bins, density=True, alpha=0.7)
        a1.set_title(f"normal spectrum, lambda_max = {split.lambda_max:.2f}")
        a1.set_xlabel("lambda")
        if mp_overlay:
            law = marchenko_pastur(spec.epoch_len / ec.N)
            grid = np.linspace(law.lambda_minus, law.lambda_plus, 400)
            a1.plot(grid, law.density(grid), "r-", lw=1, label=f"MP, Q = {law.q:.3g}")
            a1.legend()
        if split.emerging.size:
            a2.hist(split.emerging, bins=bins, density=True, alpha=0.7, color="tab:orange")
            a2.set_title(f"emerging spectrum, lambda_min = {split.lambda_min_emerging:.4g}")
        else:
            a2.set_title("emerging spectrum empty (M >= N)")
        a2.set_xlabel("lambda")
        fig.suptitle(f"epoch ending {target}")
        fig.tight_layout()
        return _save(fig, out / "plots" / f"spectra_{target}.svg")


def plot_outliers(out: Path, level: float, start=None, end=None) -> Path:
    h, rows = read_csv(out / "outliers.csv", prerequisite="outliers")
    dates = column(h, rows, "end_date", "date")
    keep = _window(dates, start, end)
    y = column(h, rows, "neg_log10_p")[keep]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(9, 3))
        ax.plot(dates[keep], y, ".", ms=3)
        ax.axhline(threshold(level), color="r", ls="--", lw=0.8, label=f"p = {level:g}")
        ax.set_ylabel("-log10 p")
        ax.set_xlabel("epoch end date")
        ax.legend()
        fig.tight_layout()
        return _save(fig, out / "plots" / "outliers.svg")


def plot_garch(out: Path, start=None, end=None) -> Path:
    h, rows = read_csv(out / "garch_paths.csv", prerequisite="garch-fit")
    dates = column(h, rows, "date", "date")
    names = np.array(column(h, rows, "series_name", str))
    sigma = column(h, rows, "sigma")
    keep = _window(dates, start, end)
    series = [s for s in dict.fromkeys(names[keep].tolist())]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(len(series), 1, sharex=True, figsize=(9, 2.2 * len(series)), squeeze=False)
        for ax, name in zip(axes[:, 0], series):
            sel = keep & (names == name)
            ax.plot(dates[sel], sigma[sel], lw=0.8)
            ax.set_ylabel(f"sigma_t [{name}]")
        axes[-1, 0].set_xlabel("date")
        fig.tight_layout()
        return _save(fig, out / "plots" / "garch.svg")


def plot(config: PipelineConfig, which: str, start=None, end=None, end_date=None, mp_overlay=False) -> Path:
    out = Path(config.output_dir)
    if which == "indicators":
        return plot_indicators(out, start, end)
    if which == "spectra":
        return plot_spectra(out, config, end_date, mp_overlay)
    if which == "outliers":
        return plot_outliers(out, config.level, start, end)
    if which == "garch":
        return plot_garch(out, start, end)
    raise InputError(f"unknown plot {which!r}; expected one of {KINDS}")
