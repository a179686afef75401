"""Static figures written next to the delimited output (matplotlib, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _error_curve(report, ax):
    probes = sorted({r["probe"] for r in report.rows if r.get("abs_err") is not None}, key=str)
    for p in probes:
        rows = [r for r in report.rows if r["probe"] == p and r.get("abs_err") is not None]
        eps = [r["epsilon"] for r in rows]
        err = [r["abs_err"] for r in rows]
        lo = [r["abs_err"] - r["err_lo"] for r in rows]
        hi = [r["err_hi"] - r["abs_err"] for r in rows]
        ax.errorbar(eps, err, yerr=[lo, hi], marker="o", capsize=3, label=f"probe {p}")
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.set_xlabel("lattice scale")
    ax.set_ylabel("|C_eps - C_0|")
    if len(probes) > 1:
        ax.legend(fontsize=7)


def _rings(report, ax):
    for eps in sorted({r["epsilon"] for r in report.rows}, reverse=True):
        rows = [r for r in report.rows if r["epsilon"] == eps]
        ax.errorbar(
            [r["level"] for r in rows],
            [r["value"] for r in rows],
            yerr=[r["half_width"] for r in rows],
            marker="o",
            capsize=3,
            label=f"eps={eps:.4g}",
        )
    ax.set_xlabel("annulus level")
    ax.set_ylabel("circuit probability")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7)


def _envelope(report, ax):
    for block in report.summary.get("envelopes", []):
        env = block["envelope"]
        d = [e["delta"] for e in env]
        ax.errorbar(d, [e["mc"] for e in env], yerr=[e["mc_half_width"] for e in env], marker="o", capsize=3,
                    label=f"Monte Carlo eps={block['epsilon']:.4g}")
        ax.plot(d, [e["c0"] for e in env], "k--", marker="x", label="continuum")
    ax.set_xscale("log")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("max |difference|")
    ax.legend(fontsize=7)


def render(report, out_dir) -> list:
    """Write ``figure.png`` for kinds with a natural picture; returns the paths written."""
    draw = {
        "cardy_sweep": _error_curve,
        "boundary_decay": _error_curve,
        "harris_rings": _rings,
        "equicontinuity": _envelope,
    }.get(report.kind)
    if draw is None or not report.rows:
        return []
    fig, ax = plt.subplots(figsize=(5, 3.6))
    draw(report, ax)
    ax.set_title(f"{report.kind} (seed {report.seed})", fontsize=9)
    fig.tight_layout()
    path = Path(out_dir) / "figure.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
