"""Static SVG figures for study reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "wavecheck"


def study_figure(study, path):
    """Left: errors and estimator against k (log-log).  Right: IEI over time per level."""
    rows = study.rows
    ks = [r.k for r in rows]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))

    ax0.loglog(ks, [r.sup_eR for r in rows], "o-", label=r"$\sup\,|||e_R|||$")
    ax0.loglog(ks, [r.sup_eL for r in rows], "s-", label=r"$\sup\,|||e_L|||$")
    ax0.loglog(ks, [r.eta1 for r in rows], "^-", label=r"$\eta_1$")
    if len(ks) > 1 and rows[-1].eta1 > 0:
        ref = [rows[-1].eta1 * (k / ks[-1]) ** 2 for k in ks]
        ax0.loglog(ks, ref, "k--", lw=0.8, label=r"$O(k^2)$")
    ax0.set_xlabel("k")
    ax0.set_title("errors and estimator")
    ax0.legend(fontsize=8)
    ax0.grid(True, which="both", alpha=0.3)

    for res in study.results:
        ax1.plot(res.node_times[1:], res.iei_profile[1:], label=f"k={res.row.k:.3g}")
    ax1.axhline(1.0, color="k", lw=0.8, ls="--")
    ax1.set_xlabel("t")
    ax1.set_ylabel("IEI")
    ax1.set_title("inverse effectivity index")
    ax1.legend(fontsize=8)
    ax1.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
