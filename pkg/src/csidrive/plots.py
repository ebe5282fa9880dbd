"""SVG figures of a run: speed, angle tracking and currents."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from csidrive.controller import Terminal  # noqa: E402

PLOT_FILES = (
    "speed.svg",
    "theta_hat_vs_star.svg",
    "theta_e_vs_hat.svg",
    "currents_true.svg",
    "currents_est_frame.svg",
)

_LABELS = {int(Terminal.ALIGN): "ALIGN", int(Terminal.T2_EST): "T2",
           int(Terminal.T3_SENSORLESS): "T3", int(Terminal.FAULT): "FAULT"}


def _col(trace, name):
    return np.asarray(trace[name], dtype=float)


def terminal_switches(trace):
    """(time, new terminal) for every change of the active terminal."""
    term = _col(trace, "terminal").astype(int)
    t = _col(trace, "t")
    idx = np.flatnonzero(np.diff(term)) + 1
    return [(float(t[k]), int(term[k])) for k in idx]


def _wrap_deg(a):
    return np.degrees(np.angle(np.exp(1j * a)))


def _angle_pair(t, a, b, la, lb, path):
    fig, (ax, ax_err) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    ax.plot(t, np.mod(a, 2 * np.pi), label=la, lw=0.8)
    ax.plot(t, np.mod(b, 2 * np.pi), label=lb, lw=0.8, ls="--")
    ax.set_ylabel("angle [rad]")
    ax.legend(loc="upper right")
    ax_err.plot(t, _wrap_deg(a - b), color="tab:red", lw=0.8)
    ax_err.set_ylabel("error [deg]")
    ax_err.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_plots(trace, out_dir):
    """
    Write the five SVG figures into `out_dir`.

    Parameters
    ----------
    trace : Trace or mapping of column name to array
        Must hold at least one record.
    out_dir : str or Path

    Returns
    -------
    list of Path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = _col(trace, "t")
    if t.size == 0:
        raise ValueError("cannot plot an empty trace")
    paths = [out / name for name in PLOT_FILES]

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, _col(trace, "omega_m_rpm"), label="rotor", lw=0.9)
    ax.plot(t, _col(trace, "omega_hat_rpm"), label="estimated", lw=0.7, alpha=0.7)
    for ts, term in terminal_switches(trace):
        ax.axvline(ts, color="0.4", ls=":", lw=0.8)
        ax.annotate(_LABELS.get(term, str(term)), (ts, 1.0), xycoords=("data", "axes fraction"),
                    ha="left", va="top", fontsize=8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("speed [rpm]")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(paths[0], format="svg")
    plt.close(fig)

    _angle_pair(t, _col(trace, "theta_hat"), _col(trace, "theta_star"),
                "estimated", "virtual frame", paths[1])
    _angle_pair(t, _col(trace, "theta_e"), _col(trace, "theta_hat"),
                "rotor", "estimated", paths[2])

    fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    for name in ("i_a", "i_b", "i_c"):
        ax.plot(t, _col(trace, name), label=name, lw=0.6)
    ax.set_ylabel("phase current [A]")
    ax.legend(loc="upper right", ncol=3)
    ax2.plot(t, _col(trace, "i_d_true"), label="i_d")
    ax2.plot(t, _col(trace, "i_q_true"), label="i_q")
    ax2.set_ylabel("rotor frame [A]")
    ax2.set_xlabel("t [s]")
    ax2.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(paths[3], format="svg")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, _col(trace, "i_d_hat"), label="i_d (control frame)")
    ax.plot(t, _col(trace, "i_q_hat"), label="i_q (control frame)")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("current [A]")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(paths[4], format="svg")
    plt.close(fig)
    return paths
