"""Figure rendering for the CLI report paths.

Each renderer takes the data object produced by the corresponding command
and writes a PNG next to the delimited output.  Figures carry no run
metadata beyond the plotted values, so repeated runs produce identical
files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_DPI = 150


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata={"Software": "lenslab"})
    plt.close(fig)


def render_family_scan(scan, path):
    """Scattering data of the bump family across shifts, and their spread."""
    fig, axes = plt.subplots(1, 3, figsize=(12.5, 3.8))
    by_shift = {}
    for s, phi, da, tt, _ in scan.rows:
        by_shift.setdefault(s, ([], [], []))
        by_shift[s][0].append(phi)
        by_shift[s][1].append(da)
        by_shift[s][2].append(tt)
    for s, (phis, das, tts) in sorted(by_shift.items()):
        axes[0].plot(phis, das, marker=".", lw=1, label=f"shift {s:g}")
        axes[1].plot(phis, tts, marker=".", lw=1, label=f"shift {s:g}")
    axes[0].set_xlabel("entry angle [rad]")
    axes[0].set_ylabel("angular advance")
    axes[0].legend(fontsize=8)
    axes[1].set_xlabel("entry angle [rad]")
    axes[1].set_ylabel("travel time")
    dev = [max(d, 1e-18) for d in scan.per_angle_deviation]
    axes[2].semilogy(scan.angles, dev, marker=".", lw=1, color="crimson")
    axes[2].set_xlabel("entry angle [rad]")
    axes[2].set_ylabel("max spread across shifts")
    for ax in axes:
        ax.grid(True, alpha=0.3)
    _save(fig, path)


def render_family_compare(angles, deviations_by_shift, path):
    """Per-angle lens deviations of each family member against the base."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for s, devs in sorted(deviations_by_shift.items()):
        ax.semilogy(angles, [max(d, 1e-18) for d in devs],
                    marker=".", lw=1, label=f"shift {s:g} vs base")
    ax.set_xlabel("entry angle [rad]")
    ax.set_ylabel("max record deviation")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def render_trapped_ladder(estimates, oracle, path):
    """Trapped fraction against the budget ladder, with the exact tail."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    budgets = [e.budget for e in estimates]
    fracs = [max(e.fraction, 1e-12) for e in estimates]
    errs = [3 * e.stderr for e in estimates]
    ax.errorbar(budgets, fracs, yerr=errs, fmt="o-", capsize=3,
                label="measured fraction")
    if oracle is not None:
        ax.plot(budgets, [max(v, 1e-12) for v in oracle], "s--",
                color="gray", label="exact tail")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("budget")
    ax.set_ylabel("trapped fraction")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def render_volume(labels, estimates, reference, path):
    """Volume estimates with 3-sigma bars and an optional reference line."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    xs = range(len(labels))
    ax.errorbar(xs, [e.volume for e in estimates],
                yerr=[3 * e.stderr for e in estimates], fmt="o", capsize=4)
    if reference is not None:
        ax.axhline(reference, color="gray", ls="--", lw=1, label="reference")
        ax.legend(fontsize=8)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("volume estimate")
    ax.grid(True, alpha=0.3)
    _save(fig, path)
