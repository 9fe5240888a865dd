"""Figures for benchmark and diagnostics output."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 5,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

MARKERS = "osD^v<>"


def new_figure(width=5.0, height=3.5):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_iterations(results, path, title=None):
    """Iterations against 1/h, one line per (preconditioner, degree)."""
    with plt.rc_context(STYLE):
        fig, ax = new_figure()
        groups = {}
        for r in results:
            if r.get("iterations") is None or r.get("status") == "*":
                continue
            groups.setdefault((r["precond"], r["p"]), []).append((r["num_elements"], r["iterations"]))
        for i, ((prec, p), pts) in enumerate(sorted(groups.items())):
            pts.sort()
            x, y = zip(*pts)
            ls = "-" if prec in ("fd", "bs") else "--"
            ax.plot(x, y, ls, marker=MARKERS[i % len(MARKERS)], label="%s, p=%d" % (prec, p))
        ax.set_xscale("log", base=2)
        ax.set_xlabel("1/h")
        ax.set_ylabel("BiCGStab iterations")
        if title:
            ax.set_title(title)
        if groups:
            ax.legend(ncol=2)
    return save(fig, path)


def plot_e_h(rows, path):
    """e_h against 1/h on log-log axes with an O(h) guide."""
    with plt.rc_context(STYLE):
        fig, ax = new_figure()
        data = {}
        for r in rows:
            if r["quantity"] == "e_h":
                data.setdefault(r["p"], []).append((1.0 / r["h"], r["value"]))
        for i, (p, pts) in enumerate(sorted(data.items())):
            pts.sort()
            x, y = map(np.array, zip(*pts))
            ax.loglog(x, y, "-", marker=MARKERS[i % len(MARKERS)], label="p=%d" % p)
        if data:
            x, y = map(np.array, zip(*sorted(next(iter(data.values())))))
            ax.loglog(x, 0.5 * y[0] * x[0] / x, "k:", label="O(h)")
            ax.legend()
        ax.set_xlabel("1/h")
        ax.set_ylabel("e_h")
    return save(fig, path)
