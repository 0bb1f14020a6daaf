"""Command-line front end.

Subcommands wrap one module pipeline each: `design-patch` (patch geometry),
`dump-topology` (deployment CSV), `power-ccdf` (required-power survival
curves), `rate-map` (percentile rate over a power grid). Every run writes
its outputs plus a manifest.json recording config, seed, and version;
figures are rendered alongside the CSVs unless --no-figures is given.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, parse_config
from .errors import ConfigError, SimulationError
from .geometry import TopologyKind, build_topology, write_topology_csv
from .montecarlo import run_power_campaign, run_rate_campaign
from .units import dbm_to_watt

_KIND_CHOICES = [k.value for k in TopologyKind]


def _add_common(parser, *, topology=False, topology_all=False):
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--seed", type=int, metavar="U64", help="campaign seed")
    parser.add_argument("--drops", type=int, metavar="N", help="number of user drops")
    parser.add_argument("--out", default=".", metavar="DIR", help="output directory")
    parser.add_argument("--workers", type=int, metavar="N", help="worker processes")
    parser.add_argument(
        "--no-figures", action="store_true", help="emit CSV only, skip PNG rendering"
    )
    if topology:
        choices = _KIND_CHOICES + (["all"] if topology_all else [])
        parser.add_argument("--topology", choices=choices, help="deployment kind")


def _load_config(args) -> RunConfig:
    overrides = {
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "topology": getattr(args, "topology", None),
    }
    return parse_config(args.config, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: RunConfig, outputs, extra=None):
    from .reporting import write_manifest

    write_manifest(
        out / "manifest.json",
        command=command,
        config_dict=cfg.to_dict(),
        config_sha256=cfg.sha256(),
        seed=cfg.seed,
        outputs=[str(p.name) for p in outputs],
        extra=extra,
    )


def cmd_design_patch(args) -> int:
    cfg = _load_config(args)
    dims = cfg.patch_dims()
    labeled = (
        f"W        = {dims.w:.6f} m\n"
        f"L        = {dims.l:.6f} m\n"
        f"eps_reff = {dims.eps_reff:.6f}\n"
        f"delta_L  = {dims.delta_l:.6e} m\n"
        f"alpha^2  = {dims.alpha ** 2:.6f}\n"
    )
    csv_text = (
        "W_m,L_m,eps_reff,delta_L_m,alpha_sq\n"
        f"{dims.w:.12g},{dims.l:.12g},{dims.eps_reff:.12g},"
        f"{dims.delta_l:.12g},{dims.alpha ** 2:.12g}\n"
    )
    sys.stdout.write(labeled)
    sys.stdout.write(csv_text)
    out = _out_dir(args)
    csv_path = out / "patch_design.csv"
    csv_path.write_text(csv_text, newline="\n")
    _write_manifest(out, "design-patch", cfg, [csv_path])
    return 0


def cmd_dump_topology(args) -> int:
    if getattr(args, "kind", None) and not args.topology:
        args.topology = args.kind
    cfg = _load_config(args)
    out = _out_dir(args)
    outputs = []
    for kind in cfg.topology_kinds():
        topology = build_topology(
            kind, cfg.room_obj(), cfg.m_antennas, cfg.wavelength_m,
            candelabrum=cfg.candelabrum_spec(),
        )
        csv_path = out / f"topology_{kind.value}.csv"
        write_topology_csv(topology, csv_path)
        outputs.append(csv_path)
        if not args.no_figures:
            from .reporting import render_topology_figure

            fig_path = out / f"topology_{kind.value}.png"
            render_topology_figure(topology, fig_path)
            outputs.append(fig_path)
    _write_manifest(out, "dump-topology", cfg, outputs)
    return 0


def cmd_power_ccdf(args) -> int:
    cfg = _load_config(args)
    from .reporting import render_ccdf_figure, write_ccdf_csv

    out = _out_dir(args)
    dims = cfg.patch_dims()
    room = cfg.room_obj()
    spec = cfg.drop_spec(args.drops)
    budget = cfg.link_budget()
    pilot_cfg = cfg.pilot_config()
    outputs, results, failures = [], {}, {}
    for kind in cfg.topology_kinds():
        topology = build_topology(
            kind, room, cfg.m_antennas, cfg.wavelength_m,
            candelabrum=cfg.candelabrum_spec(),
        )
        result = run_power_campaign(
            topology, dims, spec, budget, pilot_cfg,
            use_estimates=cfg.use_estimated_channel,
            workers=cfg.workers, ccdf_points=cfg.ccdf_points,
        )
        csv_path = out / f"ccdf_{kind.value}.csv"
        write_ccdf_csv(result, csv_path)
        outputs.append(csv_path)
        results[kind.value] = result
        failures[kind.value] = len(result.failed_drops)
    if not args.no_figures:
        fig_path = out / "ccdf.png"
        render_ccdf_figure(results, fig_path)
        outputs.append(fig_path)
    _write_manifest(
        out, "power-ccdf", cfg, outputs,
        extra={"n_drops": spec.n_drops, "failed_drops": failures},
    )
    return 0


def cmd_rate_map(args) -> int:
    cfg = _load_config(args)
    from .reporting import render_rate_surface_figure, write_rate_surface_csv

    out = _out_dir(args)
    dims = cfg.patch_dims()
    kind = cfg.topology_kinds()[0]
    topology = build_topology(
        kind, cfg.room_obj(), cfg.m_antennas, cfg.wavelength_m,
        candelabrum=cfg.candelabrum_spec(),
    )
    n_drops = args.drops if args.drops is not None else cfg.rate_n_drops
    result = run_rate_campaign(
        topology, dims, cfg.drop_spec(n_drops),
        dbm_to_watt(list(cfg.rho_ul_grid_dbm)),
        dbm_to_watt(list(cfg.rho_dl_grid_dbm)),
        cfg.pilot_config(),
        percentile=cfg.percentile,
        n_realizations=cfg.n_realizations,
        statistic=cfg.rate_statistic,
        workers=cfg.workers,
    )
    csv_path = out / f"rate_surface_{kind.value}.csv"
    write_rate_surface_csv(result, csv_path)
    outputs = [csv_path]
    if not args.no_figures:
        fig_path = out / f"rate_surface_{kind.value}.png"
        render_rate_surface_figure(result, fig_path)
        outputs.append(fig_path)
    _write_manifest(
        out, "rate-map", cfg, outputs,
        extra={
            "n_drops": n_drops,
            "failed_drops": len(result.failed_drops),
            "discarded_draws": result.discarded_draws,
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="losmimo",
        description="Indoor line-of-sight massive MIMO deployment simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-patch", help="print and save the patch design")
    _add_common(p)
    p.set_defaults(func=cmd_design_patch)

    p = sub.add_parser("dump-topology", help="write antenna poses as CSV")
    _add_common(p, topology=True, topology_all=True)
    p.add_argument("--kind", choices=_KIND_CHOICES, help="alias for --topology")
    p.set_defaults(func=cmd_dump_topology)

    p = sub.add_parser("power-ccdf", help="required-power survival curves")
    _add_common(p, topology=True, topology_all=True)
    p.set_defaults(func=cmd_power_ccdf)

    p = sub.add_parser("rate-map", help="percentile rate over a power grid")
    _add_common(p, topology=True)
    p.set_defaults(func=cmd_rate_map)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
