"""Optional PNG figures written next to the CLI's CSV output.

matplotlib is imported lazily so that the library and the data path never
depend on it.
"""
from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError("--plot needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path):
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-stable
    fig.savefig(path, dpi=120, metadata={"Software": None})


def plot_tail_curves(curves, path: Path, title: str = ""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for curve in curves:
        keep = curve.values > 0
        ax.loglog(curve.grid[keep], curve.values[keep], marker=".", label=curve.method)
    ax.set_xlabel("x")
    ax.set_ylabel("P(XY > x)")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
    plt.close(fig)


def plot_ruin_comparison(rows, path: Path, title: str = ""):
    plt = _pyplot()
    xs = [r.x for r in rows]
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6, 6.5), sharex=True)
    top.set_xscale("log")
    top.set_yscale("log")
    hit = [r for r in rows if r.psi_hat > 0]
    top.errorbar([r.x for r in hit], [r.psi_hat for r in hit],
                 yerr=[[r.psi_hat - r.ci_lo for r in hit], [r.ci_hi - r.psi_hat for r in hit]],
                 fmt="o", ms=3, label="Monte Carlo")
    top.plot(xs, [r.asym_sum for r in rows], label="sum of H_i tails")
    top.set_ylabel("ruin probability")
    top.legend()
    top.set_title(title)
    bottom.errorbar([r.x for r in hit], [r.ratio for r in hit], yerr=[1.96 * r.ratio_se for r in hit], fmt="o", ms=3)
    bottom.axhline(1.0, color="grey", lw=0.8)
    bottom.set_xlabel("x")
    bottom.set_ylabel("ratio")
    _save(fig, path)
    plt.close(fig)


def plot_probe_deviations(reports, path: Path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, rep in enumerate(reports):
        xs = [r.x for r in rep.rows]
        dev = [max(r.deviation, 1e-17) for r in rep.rows]
        ax.loglog(xs, dev, marker=".", label=f"{i}: {rep.probe}")
    ax.set_xlabel("x")
    ax.set_ylabel("|ratio / target - 1|")
    ax.legend(fontsize=8)
    _save(fig, path)
    plt.close(fig)
