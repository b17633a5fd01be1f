"""Key-rate-versus-distance figures rendered from scan rows."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .keyrate import Method  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.6),
    "savefig.dpi": 150,
}

LABELS = {
    Method.DECOY: "GLLP + decoy",
    Method.GLLP: "GLLP, no decoy",
    Method.IDEAL: "decoy, Shannon limit",
}


def plot_scan(rows, path, ceiling_km=None, title=None):
    """Semilog plot of rate against distance, one curve per method.

    Zero rates are dropped from each curve (they cannot be drawn on a log axis).
    """
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for method in sorted({r.method for r in rows}, key=lambda m: m.value):
            pts = [(r.distance_km, r.rate) for r in rows if r.method is method and r.rate > 0.0]
            if pts:
                xs, ys = zip(*pts)
                ax.semilogy(xs, ys, label=LABELS.get(method, method.value))
        if ceiling_km is not None:
            ax.axvline(ceiling_km, color="0.4", ls="--", lw=0.8, label=f"e1 = 1/4 ({ceiling_km:.0f} km)")
        ax.set_xlabel("distance (km)")
        ax.set_ylabel("key rate (bits per pulse)")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
