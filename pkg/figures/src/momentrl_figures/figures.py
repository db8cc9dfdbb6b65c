"""The six figure renderers.

Each renderer takes the directory written by one `momentrl run` and
returns a matplotlib Figure:

  fig1  parameter count and computing time vs. system dimension
        (curse-demo outputs)
  fig2  successive value/policy differences vs. system dimension
        (curse-demo outputs)
  fig3  hierarchy cost and iteration count vs. truncation order
        (lqr-finite or bloch outputs)
  fig4  the policy learned by every hierarchy, with the min/max
        envelope of the last three hierarchies shaded
  fig5  final first component x1(T) across the sampled ensemble
        (bloch outputs)
  fig6  state trajectories of representative ensemble members on the
        unit sphere (bloch outputs)
"""

from __future__ import annotations

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FigureDataError, load_columns, load_summary, require_columns  # noqa: E402

__all__ = ["RENDERERS", "policy_envelope"]

_BAND_HIERARCHIES = 3  # stabilization band spans the last three hierarchies


def _convergence(input_dir: Path):
    path = input_dir / "convergence.csv"
    columns = load_columns(path)
    require_columns(columns, ("n_or_N", "value_diff", "policy_diff",
                              "param_count"), path)
    return columns, path


def fig1(input_dir: Path):
    columns, _ = _convergence(input_dir)
    summary = load_summary(input_dir)
    per_index = summary.get("wall_time_s", {}).get("per_index")
    if per_index is None:
        raise FigureDataError(
            f"{input_dir / 'summary.json'}: missing key wall_time_s.per_index")
    n = columns["n_or_N"]
    try:
        times = np.array([float(per_index[str(int(v))]) for v in n])
    except KeyError as err:
        raise FigureDataError(
            f"{input_dir / 'summary.json'}: wall_time_s.per_index lacks entry {err}"
        ) from err

    figure, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.6))
    top.bar(n, columns["param_count"], color="tab:blue")
    top.set_ylabel("training parameters")
    top.set_title("parameter count and computing time vs. dimension")
    bottom.bar(n, times, color="tab:orange")
    bottom.set_ylabel("computing time [s]")
    bottom.set_xlabel("system dimension n")
    figure.tight_layout()
    return figure


def fig2(input_dir: Path):
    columns, _ = _convergence(input_dir)
    n = columns["n_or_N"]
    keep = ~np.isnan(columns["value_diff"])  # the first row has no predecessor
    figure, axis = plt.subplots(figsize=(6.4, 4.4))
    axis.semilogy(n[keep], columns["value_diff"][keep], "o-",
                  color="tab:blue", label="value difference")
    axis.semilogy(n[keep], columns["policy_diff"][keep], "s-",
                  color="tab:red", label="policy difference")
    axis.set_xlabel("system dimension n")
    axis.set_ylabel("successive difference (sup norm)")
    axis.set_title("non-convergence of the sampled synthesis")
    axis.legend()
    figure.tight_layout()
    return figure


def fig3(input_dir: Path):
    path = input_dir / "hierarchy.csv"
    columns = load_columns(path)
    require_columns(columns, ("N", "iterations", "cost"), path)
    order = columns["N"]
    figure, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.6))
    top.plot(order, columns["cost"], "o-", color="tab:blue")
    top.set_ylabel("cumulative cost")
    top.set_title("filtrated chain per hierarchy")
    bottom.bar(order, columns["iterations"], color="tab:gray")
    bottom.set_ylabel("policy-search iterations")
    bottom.set_xlabel("truncation order N")
    bottom.set_xticks(order)
    figure.tight_layout()
    return figure


def _policies(input_dir: Path):
    """All per-hierarchy policy tables, sorted by order."""
    found = []
    for path in input_dir.glob("policy_N*.csv"):
        match = re.fullmatch(r"policy_N(\d+)\.csv", path.name)
        if match:
            columns = load_columns(path)
            require_columns(columns, ("t",), path)
            found.append((int(match.group(1)), path, columns))
    if not found:
        raise FigureDataError(f"no policy_N*.csv files in {input_dir}")
    found.sort(key=lambda item: item[0])
    control_names = [name for name in found[0][2] if name != "t"]
    for _, path, columns in found:
        require_columns(columns, tuple(control_names), path)
    return found, control_names


def policy_envelope(policies, control_names, band=_BAND_HIERARCHIES):
    """Min/max envelope of each control over the last `band` hierarchies."""
    tail = policies[-band:]
    envelope = {}
    for name in control_names:
        stacked = np.vstack([columns[name] for _, _, columns in tail])
        envelope[name] = (stacked.min(axis=0), stacked.max(axis=0))
    return envelope


def fig4(input_dir: Path):
    policies, control_names = _policies(input_dir)
    envelope = policy_envelope(policies, control_names)
    colors = plt.cm.viridis(np.linspace(0.0, 0.9, len(policies)))
    figure, axes = plt.subplots(len(control_names), 1, sharex=True,
                                figsize=(6.4, 3.2 * len(control_names)),
                                squeeze=False)
    t = policies[0][2]["t"]
    for axis, name in zip(axes[:, 0], control_names):
        low, high = envelope[name]
        axis.fill_between(t, low, high, color="tab:gray", alpha=0.3,
                          label=f"last {_BAND_HIERARCHIES} hierarchies")
        for (order, _, columns), color in zip(policies, colors):
            axis.plot(t, columns[name], color=color, linewidth=1.0,
                      label=f"N={order}")
        axis.set_ylabel(name)
    axes[0, 0].set_title("policies learned by each hierarchy")
    axes[0, 0].legend(fontsize=7, ncol=2)
    axes[-1, 0].set_xlabel("t")
    figure.tight_layout()
    return figure


def fig5(input_dir: Path):
    path = input_dir / "bloch_final.csv"
    columns = load_columns(path)
    require_columns(columns, ("beta", "x1"), path)
    figure, axis = plt.subplots(figsize=(6.4, 4.4))
    axis.plot(columns["beta"], columns["x1"], "o-", color="tab:blue",
              markersize=3)
    axis.axhline(1.0, color="tab:gray", linestyle="--", linewidth=1.0,
                 label="full excitation")
    axis.set_xlabel(r"inhomogeneity $\beta$")
    axis.set_ylabel("$x_1(T)$")
    axis.set_title("final excitation profile across the ensemble")
    axis.legend()
    figure.tight_layout()
    return figure


def fig6(input_dir: Path):
    path = input_dir / "bloch_trajectory.csv"
    columns = load_columns(path)
    require_columns(columns, ("t", "beta", "x1", "x2", "x3"), path)
    figure = plt.figure(figsize=(6.0, 6.0))
    axis = figure.add_subplot(projection="3d")

    phi = np.linspace(0.0, np.pi, 13)
    theta = np.linspace(0.0, 2.0 * np.pi, 25)
    phi, theta = np.meshgrid(phi, theta)
    axis.plot_wireframe(np.sin(phi) * np.cos(theta),
                        np.sin(phi) * np.sin(theta), np.cos(phi),
                        color="lightgray", linewidth=0.4, alpha=0.6)

    betas = np.unique(columns["beta"])
    colors = plt.cm.plasma(np.linspace(0.0, 0.9, betas.size))
    for beta, color in zip(betas, colors):
        select = columns["beta"] == beta
        axis.plot(columns["x1"][select], columns["x2"][select],
                  columns["x3"][select], color=color, linewidth=1.2,
                  label=f"$\\beta$={beta:g}")
    axis.scatter([0.0], [0.0], [1.0], color="black", s=25, label="start")
    axis.scatter([1.0], [0.0], [0.0], color="tab:green", s=40, marker="*",
                 label="target")
    axis.set_xlabel("$x_1$")
    axis.set_ylabel("$x_2$")
    axis.set_zlabel("$x_3$")
    axis.set_title("ensemble trajectories on the unit sphere")
    axis.set_box_aspect((1.0, 1.0, 1.0))
    axis.legend(fontsize=7, loc="upper left")
    return figure


RENDERERS = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
}
