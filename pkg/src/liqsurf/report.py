"""SVG plots and a summary built only from CSV artifacts already on disk."""

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import ValidationError  # noqa: E402
from .schemas import CSV_LAYOUTS, check_csv_header  # noqa: E402

# fixed ids and no date stamp keep the SVG output byte-identical across runs
matplotlib.rcParams["svg.hashsalt"] = "liqsurf"
matplotlib.rcParams["svg.fonttype"] = "none"

# order matters: more specific layouts first
_DETECT_ORDER = (
    "drift", "cpve", "rolling_eigenvalues", "eigenvalues", "sweep", "quantiles",
    "forecast", "shock", "basis", "coefficients", "surface",
)


def detect_kind(header):
    for kind in _DETECT_ORDER:
        try:
            check_csv_header(header, kind)
        except ValidationError:
            continue
        return kind
    return None


def _read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


def _numeric(rows):
    return np.array([[float(v) for v in r] for r in rows], dtype=float)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_drift(header, rows, path):
    data = _numeric(rows)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for K in np.unique(data[:, 1]).astype(int):
        sel = data[data[:, 1] == K]
        for ax, col in zip(axes, (2, 3)):
            (line,) = ax.plot(sel[:, 0], sel[:, col], label=f"K={K}")
            ax.axhline(sel[0, 4], color=line.get_color(), ls="--", lw=0.8)
    axes[0].set_title("distance to first window")
    axes[1].set_title("distance to Legendre span")
    for ax in axes:
        ax.set_xlabel("window start block")
    axes[0].set_ylabel("projection distance")
    axes[1].legend(fontsize=8)
    _save(fig, path)
    d0 = data[:, 2]
    return {"windows": int(np.unique(data[:, 0]).size), "max_d_to_inception": float(d0.max()),
            "max_d_to_legendre": float(data[:, 3].max())}


def _plot_cpve(header, rows, path):
    data = _numeric(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    out = {}
    for K in np.unique(data[:, 1]).astype(int):
        sel = data[data[:, 1] == K]
        ax.plot(sel[:, 0], sel[:, 2], label=f"K={K}")
        out[f"K={K}"] = {"min": float(sel[:, 2].min()), "max": float(sel[:, 2].max())}
    ax.set_xlabel("window start block")
    ax.set_ylabel("cumulative variance explained")
    ax.legend(fontsize=8)
    _save(fig, path)
    return out


def _plot_rolling_eigen(header, rows, path):
    data = _numeric(rows)
    lam = np.log10(np.maximum(data[:, 1:], 1e-300))
    n = min(lam.shape[1], 20)
    fig, ax = plt.subplots(figsize=(7, 4))
    im = ax.imshow(lam[:, :n].T, aspect="auto", origin="lower",
                   extent=(data[0, 0], data[-1, 0], 0.5, n + 0.5))
    fig.colorbar(im, ax=ax, label="log10 eigenvalue")
    ax.set_xlabel("window start block")
    ax.set_ylabel("eigenvalue index")
    _save(fig, path)
    return {"windows": int(data.shape[0])}


def _plot_eigen(header, rows, path):
    data = _numeric(rows)
    n = min(data.shape[0], 20)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(data[:n, 0], np.maximum(data[:n, 1], 1e-300), "o-")
    ax2 = ax.twinx()
    ax2.plot(data[:n, 0], data[:n, 3], "s--", color="tab:orange")
    ax.set_xlabel("k")
    ax.set_ylabel("eigenvalue")
    ax2.set_ylabel("CPVE")
    _save(fig, path)
    return {f"cpve_{k}": float(data[k - 1, 3]) for k in range(1, min(n, 7) + 1)}


def _sweep_summary(header, rows, path):
    best = {}
    counts = defaultdict(int)
    for r in rows:
        rec = dict(zip(header, r))
        counts[rec["series_id"]] += 1
        if rec["label"] == "—":
            best[rec["series_id"]] = {
                "spec": f'{rec["mean"]}-{rec["vol"]}-{rec["dist"]}', "bic": float(rec["bic"]),
            }
    fig, ax = plt.subplots(figsize=(6, 0.4 * max(len(best), 1) + 1))
    ax.axis("off")
    cells = [[sid, b["spec"], f'{b["bic"]:.2f}'] for sid, b in sorted(best.items())]
    if cells:
        ax.table(cellText=cells, colLabels=["series", "minimum-BIC model", "BIC"], loc="center")
    _save(fig, path)
    return {"best": best, "models_per_series": dict(counts)}


def _plot_quantiles(header, rows, path):
    data = _numeric(rows)
    H = int(data[:, 0].max())
    fig, ax = plt.subplots(figsize=(6, 4))
    for h, alpha in ((1, 0.5), (H, 0.25)):
        sel = data[data[:, 0] == h]
        ax.fill_between(sel[:, 1], sel[:, 2], sel[:, 6], alpha=alpha, label=f"h={h} 5-95%")
        ax.plot(sel[:, 1], sel[:, 4], lw=1)
    ax.set_xlabel("x")
    ax.set_ylabel("log liquidity")
    ax.legend(fontsize=8)
    _save(fig, path)
    last = data[data[:, 0] == H]
    return {"horizon": H, "mean_band_width_last_h": float(np.mean(last[:, 6] - last[:, 2]))}


def _plot_forecast(header, rows, path):
    data = _numeric(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    hs = np.unique(data[:, 0]).astype(int)
    for h in hs[:: max(1, len(hs) // 6)]:
        sel = data[data[:, 0] == h]
        ax.plot(sel[:, 1], sel[:, 2], label=f"h={h}")
    ax.set_xlabel("x")
    ax.set_ylabel("log liquidity")
    ax.legend(fontsize=8)
    _save(fig, path)
    return {"horizons": int(hs.size)}


def _plot_shock(header, rows, path):
    data = _numeric(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, name in enumerate(header[2:], start=2):
        ax.plot(data[:, 0], data[:, j] - data[:, 1], label=name)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("x")
    ax.set_ylabel("shocked - baseline")
    ax.legend(fontsize=8)
    _save(fig, path)
    return {"components": len(header) - 2}


def _plot_basis(header, rows, path):
    data = _numeric(rows)
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, name in enumerate(header[2:], start=2):
        ax.plot(data[:, 0], data[:, j], label=name)
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    _save(fig, path)
    return {"K": len(header) - 2}


def _plot_coefficients(header, rows, path):
    data = _numeric(rows)
    K = data.shape[1] - 1
    fig, axes = plt.subplots(K, 1, figsize=(7, 1.4 * K + 1), sharex=True, squeeze=False)
    for k in range(K):
        axes[k, 0].plot(data[:, 0], data[:, k + 1], lw=0.7)
        axes[k, 0].set_ylabel(header[k + 1])
    axes[-1, 0].set_xlabel("block")
    _save(fig, path)
    return {"rows": int(data.shape[0]), "sd": [float(s) for s in data[:, 1:].std(axis=0)]}


def _plot_surface(header, rows, path):
    data = _numeric(rows)
    x = np.array([float(v) for v in header[1:]])
    fig, ax = plt.subplots(figsize=(7, 4))
    im = ax.imshow(data[:, 1:].T, aspect="auto", origin="lower",
                   extent=(data[0, 0], data[-1, 0], x[0], x[-1]))
    fig.colorbar(im, ax=ax, label="log liquidity")
    ax.set_xlabel("block")
    ax.set_ylabel("x")
    _save(fig, path)
    return {"T": int(data.shape[0]), "M": int(x.size)}


_HANDLERS = {
    "drift": _plot_drift,
    "cpve": _plot_cpve,
    "rolling_eigenvalues": _plot_rolling_eigen,
    "eigenvalues": _plot_eigen,
    "sweep": _sweep_summary,
    "quantiles": _plot_quantiles,
    "forecast": _plot_forecast,
    "shock": _plot_shock,
    "basis": _plot_basis,
    "coefficients": _plot_coefficients,
    "surface": _plot_surface,
}
assert set(_HANDLERS) == set(CSV_LAYOUTS)


def collect_csvs(paths):
    """Expand directories to their CSV files (sorted); keep explicit files."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix == ".csv" and not q.name.startswith(".")))
        elif p.is_file():
            out.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {p}")
    if not out:
        raise ValidationError("no CSV artifacts found")
    return out


def build_report(csv_paths, svg_path_for):
    """Plot every recognized CSV; ``svg_path_for(name)`` maps an output name to a path.

    Returns the summary dict (per input: kind, svg name, key statistics).
    """
    summary = {}
    used = set()
    for p in csv_paths:
        header, rows = _read(p)
        kind = detect_kind(header)
        if kind is None or not rows:
            summary[str(p)] = {"kind": None}
            continue
        name = f"{p.stem}.svg"
        if name in used:
            name = f"{p.parent.name}_{p.stem}.svg"
        used.add(name)
        stats = _HANDLERS[kind](header, rows, svg_path_for(name))
        summary[str(p)] = {"kind": kind, "svg": name, "stats": stats}
    return summary


def summary_markdown(summary):
    lines = ["# Run summary", ""]
    for src, rec in summary.items():
        if rec["kind"] is None:
            lines.append(f"- `{src}`: not a recognized artifact")
            continue
        lines.append(f"- `{src}` ({rec['kind']}) -> `{rec['svg']}`")
        for key, val in rec["stats"].items():
            if isinstance(val, float):
                val = f"{val:.6g}" if math.isfinite(val) else str(val)
            lines.append(f"  - {key}: {val}")
    return "\n".join(lines) + "\n"
