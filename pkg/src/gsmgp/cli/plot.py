"""SVG chart of a fit: training data, test data and the predictive band."""
from __future__ import annotations

import csv
import logging

log = logging.getLogger(__name__)


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def write_predictions(path, series, pred):
    """``t,y,split,mean,std``; train rows leave ``mean`` and ``std`` blank."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,y,split,mean,std\n")
        for t, y in zip(series.t_train, series.y_train):
            fh.write(f"{int(t)},{float(y)!r},train,,\n")
        for t, y, mu, sd in zip(series.t_test, series.y_test, pred.mean, pred.std):
            fh.write(f"{int(t)},{float(y)!r},test,{float(mu)!r},{float(sd)!r}\n")


def render_svg(pred_csv, svg_path) -> bool:
    """Render ``pred_csv`` to ``svg_path``; returns False when matplotlib is missing."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping the plot")
        return False
    rows = read_predictions(pred_csv)
    train = [(int(r["t"]), float(r["y"])) for r in rows if r["split"] == "train"]
    test = [(int(r["t"]), float(r["y"]), float(r["mean"]), float(r["std"])) for r in rows if r["split"] == "test"]
    plt.rcParams["svg.hashsalt"] = "gsmgp"
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot([t for t, _ in train], [y for _, y in train], color="black", lw=1, label="training data")
    if test:
        tt = [r[0] for r in test]
        mean = [r[2] for r in test]
        lo = [r[2] - 2 * r[3] for r in test]
        hi = [r[2] + 2 * r[3] for r in test]
        ax.fill_between(tt, lo, hi, color="tab:blue", alpha=0.2, label="mean +/- 2 std")
        ax.plot(tt, mean, color="tab:blue", lw=1.5, label="prediction")
        ax.plot(tt, [r[1] for r in test], color="tab:red", lw=1, ls="--", label="test data")
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True
