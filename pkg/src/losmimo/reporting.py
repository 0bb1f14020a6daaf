"""Campaign output: delimited files, run manifests, and rendered figures.

CSV files are the primary, plot-ready artifacts (dot decimal separator, LF
line endings, deterministic formatting); the PNG figures rendered next to
them are a convenience view of the same data.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .montecarlo import CampaignResult
from .units import watt_to_dbm

_FLOAT_FMT = "{:.12g}"


def write_ccdf_csv(result: CampaignResult, path) -> None:
    """Columns: power_dBm, prob (the empirical Pr{required power >= x})."""
    with open(path, "w", newline="\n") as fh:
        fh.write("power_dBm,prob\n")
        for power_w, prob in result.ccdf:
            fh.write(
                f"{_FLOAT_FMT.format(watt_to_dbm(power_w))},"
                f"{_FLOAT_FMT.format(prob)}\n"
            )


def write_rate_surface_csv(result: CampaignResult, path) -> None:
    """Columns: rho_ul_dBm, rho_dl_dBm, rate_bit_per_s_per_Hz."""
    with open(path, "w", newline="\n") as fh:
        fh.write("rho_ul_dBm,rho_dl_dBm,rate_bit_per_s_per_Hz\n")
        for j, rho_ul in enumerate(result.rho_ul_grid):
            for l, rho_dl in enumerate(result.rho_dl_grid):
                fh.write(
                    f"{_FLOAT_FMT.format(watt_to_dbm(rho_ul))},"
                    f"{_FLOAT_FMT.format(watt_to_dbm(rho_dl))},"
                    f"{_FLOAT_FMT.format(result.surface[j, l])}\n"
                )


def write_manifest(path, *, command: str, config_dict: dict, config_sha256: str,
                   seed: int, outputs: list[str], extra: dict | None = None) -> None:
    """JSON record sufficient to reproduce the run exactly."""
    payload = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_sha256": config_sha256,
        "config": config_dict,
        "outputs": sorted(outputs),
    }
    if extra:
        payload.update(extra)
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _new_axes(figsize=(7.0, 5.0)):
    fig, ax = plt.subplots(figsize=figsize)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def render_ccdf_figure(results: dict[str, CampaignResult], path) -> None:
    """Survival curves of required transmit power, one line per topology."""
    fig, ax = _new_axes()
    for label, result in results.items():
        mask = result.ccdf[:, 1] > 0
        ax.semilogy(
            watt_to_dbm(result.ccdf[mask, 0]), result.ccdf[mask, 1], label=label
        )
    ax.set_xlabel("Required transmit power [dBm]")
    ax.set_ylabel("Pr(required power ≥ abscissa)")
    ax.set_ylim(bottom=max(1e-5, ax.get_ylim()[0]))
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rate_surface_figure(result: CampaignResult, path) -> None:
    """Heatmap of the percentile rate over the (uplink, downlink) power grid."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    ul_dbm = watt_to_dbm(result.rho_ul_grid)
    dl_dbm = watt_to_dbm(result.rho_dl_grid)
    im = ax.pcolormesh(dl_dbm, ul_dbm, result.surface, shading="nearest")
    fig.colorbar(im, ax=ax, label="rate [bit/s/Hz]")
    ax.set_xlabel("Downlink power [dBm]")
    ax.set_ylabel("Uplink pilot power [dBm]")
    ax.set_title(f"{100 * result.percentile:g}% likely per-user rate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_topology_figure(topology, path) -> None:
    """3-D scatter of element positions with a room wireframe."""
    fig = plt.figure(figsize=(7.0, 5.5))
    ax = fig.add_subplot(projection="3d")
    p = topology.positions()
    ax.scatter(p[:, 0], p[:, 1], p[:, 2], s=4)
    room = topology.room
    for z in (0.0, room.lz):
        xs = [0, room.lx, room.lx, 0, 0]
        ys = [0, 0, room.ly, room.ly, 0]
        ax.plot(xs, ys, [z] * 5, color="gray", lw=0.6)
    for x, y in ((0, 0), (room.lx, 0), (room.lx, room.ly), (0, room.ly)):
        ax.plot([x, x], [y, y], [0, room.lz], color="gray", lw=0.6)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title(topology.kind.value)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
