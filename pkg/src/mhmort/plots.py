"""Figure rendering for the CLI reports (bar charts, ROC curves, importances).

Figures are written next to the CSV/JSON they illustrate; the delimited
files remain the primary outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}
DIED_COLOR = "#b2182b"
SURVIVED_COLOR = "#4393c3"
ALGORITHM_LABELS = {
    "logistic_regression": "Logistic Regression",
    "random_forest": "Random Forest",
    "svm_rbf": "SVM (RBF)",
    "knn": "KNN",
}


def _save(fig, path):
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def mortality_bars(rows, feature: str, path) -> None:
    """Side-by-side died/survived bars per category, in the order given."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(rows) + 1.5), 3.2))
        x = range(len(rows))
        ax.bar([i - 0.2 for i in x], [r[1] for r in rows], width=0.4,
               color=DIED_COLOR, label="Died within 30 days")
        ax.bar([i + 0.2 for i in x], [r[2] for r in rows], width=0.4,
               color=SURVIVED_COLOR, label="Survived")
        ax.set_xticks(list(x))
        ax.set_xticklabels([r[0] for r in rows], rotation=30, ha="right")
        ax.set_ylabel("Patients")
        ax.set_title(f"Mortality by {feature.replace('_', ' ')}")
        ax.legend(frameon=False)
        _save(fig, path)


def roc_figure(report, path) -> None:
    """Faint per-fold curves with the vertically averaged curve on top."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        for i, (name, result) in enumerate(report.results.items()):
            color = f"C{i}"
            for c in result.curves:
                ax.plot(c.fpr, c.tpr, color=color, alpha=0.2, lw=0.8)
            grid, tpr = result.mean_curve()
            label = f"{ALGORITHM_LABELS.get(name, name)} (AUC {result.mean_auc:.3f})"
            ax.plot(grid, tpr, color=color, lw=1.8, label=label)
        ax.plot([0, 1], [0, 1], ls="--", color="0.6", lw=0.8)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title("ROC curves")
        ax.legend(loc="lower right", frameon=False)
        _save(fig, path)


def importance_figure(report, path) -> None:
    rows = list(report.rows)[::-1]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 0.35 * len(rows) + 1.2))
        ax.barh(range(len(rows)), [r.mean for r in rows], xerr=[r.std for r in rows],
                color=SURVIVED_COLOR, ecolor="0.3")
        ax.set_yticks(range(len(rows)))
        ax.set_yticklabels([r.feature if len(r.feature) <= 48 else r.feature[:45] + "..."
                            for r in rows])
        ax.axvline(0, color="0.5", lw=0.8)
        ax.set_xlabel(f"Mean decrease in {report.metric.replace('_', ' ').upper()}")
        ax.set_title("Permutation importance")
        _save(fig, path)
