"""Static charts from a serialised PrecisionReport (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

SCOPE_ORDER = ("Country", "Region", "Continent", "Global")


def _macro(entry_metrics: dict):
    value = entry_metrics.get("macro_auc")
    return float("nan") if value is None else value


def _heatmap(ax, rows: list[str], cols: list[str], lookup, title: str) -> None:
    import numpy as np

    grid = np.full((len(rows), len(cols)), np.nan)
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            value = lookup(r, c)
            if value is not None:
                grid[i, j] = value
    im = ax.imshow(grid, vmin=0.5, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(cols)), cols, rotation=45, ha="right")
    ax.set_yticks(range(len(rows)), rows)
    for i in range(len(rows)):
        for j in range(len(cols)):
            if not np.isnan(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", fontsize=7, color="w")
    ax.set_title(title)
    ax.figure.colorbar(im, ax=ax, label="macro AUC")


def render_report(report: dict, out_dir: str | Path) -> list[Path]:
    """Write overview, location, intersection and gender/age PNG panels."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loc = report["location_section"]
    scopes = [s for s in SCOPE_ORDER if s in loc]
    gender = report.get("gender_section") or {}
    ages = list(report["age_section"])
    baselines = (report.get("baselines") or {}).get("entries", {})
    written = []

    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    axes[0].bar(scopes, [_macro(loc[s]["metrics"]) for s in scopes], color="tab:blue", label="AI")
    for i, s in enumerate(scopes):
        if s in baselines and baselines[s]["mean"]["macro_auc"] is not None:
            axes[0].plot([i - 0.4, i + 0.4], [baselines[s]["mean"]["macro_auc"]] * 2, "r-", lw=2)
    axes[0].set_title("Location")
    axes[1].bar(list(gender), [_macro(g["metrics"]) for g in gender.values()], color="tab:orange")
    axes[1].set_title("Gender" if gender else "Gender (not featured)")
    axes[2].bar(ages, [_macro(report["age_section"][a]["metrics"]) for a in ages], color="tab:green")
    axes[2].set_title("Age")
    for ax in axes:
        ax.set_ylim(0, 1)
        ax.set_ylabel("macro AUC")
    fig.suptitle(f"{report['condition_name']}: precision evaluation")
    fig.tight_layout()
    path = out_dir / "overview.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    xs = range(len(scopes))
    acc = [loc[s]["metrics"].get("accuracy") for s in scopes]
    ax.bar([x - width / 2 for x in xs], [a if a is not None else float("nan") for a in acc], width, label="accuracy")
    ax.bar([x + width / 2 for x in xs], [_macro(loc[s]["metrics"]) for s in scopes], width, label="macro AUC")
    ax.set_xticks(list(xs), scopes)
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title("Location sub-categories")
    fig.tight_layout()
    path = out_dir / "location.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(1, 2, figsize=(12, 4))
    genders = sorted({g for s in scopes for g in loc[s].get("by_gender", {})})
    _heatmap(
        axes[0], scopes, genders,
        lambda r, c: loc[r].get("by_gender", {}).get(c, {}).get("macro_auc"),
        "Location x Gender",
    )
    _heatmap(
        axes[1], scopes, ages,
        lambda r, c: loc[r]["by_age"].get(c, {}).get("macro_auc"),
        "Location x Age",
    )
    fig.tight_layout()
    path = out_dir / "intersections.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if gender:
        fig, ax = plt.subplots(figsize=(7, 3))
        _heatmap(
            ax, list(gender), ages,
            lambda r, c: gender[r]["by_age"].get(c, {}).get("macro_auc"),
            "Gender x Age",
        )
        fig.tight_layout()
        path = out_dir / "gender.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
