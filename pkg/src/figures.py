"""
Figures

Plane plot of roots, derivative roots and their annuli (SVG), and the
quotient histogram of a c1 experiment (PNG).
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Wedge  # noqa: E402

from src.errors import ReportError  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed id salt and no date stamp keep SVG output byte-stable
SVG_RC = {"svg.hashsalt": "drroots", "svg.fonttype": "path"}
SVG_METADATA = {"Date": None}

FRAME_MARGIN = 1.2


def _frame(roots):
    """Square window of FRAME_MARGIN times the root bounding box."""
    lo = np.array([roots.real.min(), roots.imag.min()])
    hi = np.array([roots.real.max(), roots.imag.max()])
    mid = (lo + hi) / 2
    half = FRAME_MARGIN * float(np.max(hi - lo)) / 2
    if half == 0:
        half = max(1.0, float(np.abs(mid).max()))
    return (mid[0] - half, mid[0] + half), (mid[1] - half, mid[1] + half)


def render_annuli_svg(p, disks, rings, path, title=None):
    path = Path(path)
    roots = np.asarray(p.roots)
    centers = np.array([d.center for d in disks], dtype=complex)

    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(7, 7))
        for ring, disk in zip(rings, disks):
            c = (ring.center.real, ring.center.imag)
            if ring.outer > ring.inner:
                ax.add_patch(
                    Wedge(c, ring.outer, 0, 360, width=ring.outer - ring.inner, facecolor="tab:blue", alpha=0.2, edgecolor="none")
                )
            if 0 < disk.radius < np.inf:
                ax.add_patch(Circle(c, disk.radius, fill=False, linestyle=":", linewidth=0.8, edgecolor="tab:blue"))
        if centers.size:
            ax.plot(centers.real, centers.imag, ".", color="black", label="derivative roots")
        ax.plot(roots.real, roots.imag, "x", color="tab:red", markersize=8, label="roots")

        xlim, ylim = _frame(roots)
        ax.set_xlim(*xlim)
        ax.set_ylim(*ylim)
        ax.set_aspect("equal")
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        ax.set_title(title or f"DR-annuli, degree {p.degree}")
        ax.legend(loc="upper right")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata=SVG_METADATA)
        except OSError as exc:
            raise ReportError(f"cannot write figure {path}: {exc}") from exc
        finally:
            plt.close(fig)
    logger.info("[OK] Figure saved to: %s", path)
    return path


def plot_quotient_histogram(report, path, lower_bound=None):
    """Bar chart of the c1 quotient histogram with the estimated scalars marked."""
    path = Path(path)
    hist = report.quotient_histogram
    if hist is None:
        raise ValueError("report carries no quotient histogram")
    edges = np.asarray(hist.edges)
    fig, ax = plt.subplots(figsize=(10, 5))
    ax.bar(edges[:-1], hist.counts, width=np.diff(edges), align="edge", alpha=0.7, edgecolor="black")
    ax.axvline(report.iota1_estimate, color="tab:red", linestyle="--", label=f"iota1 = {report.iota1_estimate:.4f}")
    ax.axvline(report.iota2_estimate, color="tab:green", linestyle="--", label=f"iota2 = {report.iota2_estimate:.4f}")
    if lower_bound is not None:
        ax.axvline(lower_bound, color="gray", linestyle=":", label=f"lower bound {lower_bound:.4f}")
    cfg = report.ensemble
    ax.set_xlabel("|z - zeta| / rho")
    ax.set_ylabel("roots")
    ax.set_title(f"Quotient closest to 1 - degree {cfg.degree}, {report.trials_completed} trials")
    ax.legend()
    ax.grid(True, alpha=0.3)
    plt.tight_layout()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        plt.savefig(path, dpi=150, bbox_inches="tight")
    except OSError as exc:
        raise ReportError(f"cannot write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
    logger.info("[OK] Histogram saved to: %s", path)
    return path
