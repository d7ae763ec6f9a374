"""Command-line front end: run, datagen, score, dump, plot."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import datagen
from .e2 import store as metric_store
from .runner import RunError, format_summary, run, summarize
from .scenario import ScenarioError, resolve_scenario
from .xapp_kpm import import_series

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_IO = 4

_CATEGORY_EXIT = {"config": EXIT_CONFIG, "protocol": EXIT_PROTOCOL, "io": EXIT_IO}


def _cmd_run(args) -> int:
    scenario = resolve_scenario(args.scenario)
    arts = run(scenario, args.out, seed=args.seed, transport=args.transport)
    print(format_summary(summarize(arts.points, scenario.xapp.bin_m)))
    print(f"{arts.indications_delivered} indications, outputs in {arts.out_dir}")
    return EXIT_OK


def _cmd_datagen(args) -> int:
    curve = datagen.read_curve(args.input)
    model = datagen.RateModel.from_config(rb_share=args.rb_share)
    out = datagen.power_shift_curve(curve, args.power_dbm, model)
    datagen.write_curve(out, args.out)
    return EXIT_OK


def _cmd_score(args) -> int:
    s = datagen.score_generated(datagen.read_curve(args.gen), datagen.read_curve(args.oracle))
    print(f"median_rel_err={s.median_rel_err:.4f} max_rel_err={s.max_rel_err:.4f} "
          f"within_10pct={s.fraction_within_10pct:.3f} n={s.n_points}")
    return EXIT_OK


def _cmd_dump(args) -> int:
    if not Path(args.store).is_file():
        raise FileNotFoundError(f"no metric store at {args.store}")
    n = metric_store.dump(args.store, args.out)
    print(f"{n} rows -> {args.out}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plot import plot_series

    for path in plot_series(import_series(args.series), args.out):
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavric", description="Deterministic O-RAN aerial-UE KPM experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a scenario and export metrics")
    r.add_argument("--scenario", required=True, help="YAML file or bundled scenario name")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--transport", choices=("inproc", "socket"))
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("datagen", help="shift a throughput-distance curve to another transmit power")
    d.add_argument("--input", required=True)
    d.add_argument("--power-dbm", type=float, required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--rb-share", type=float, default=1.0, help="fraction of the carrier the UE gets")
    d.set_defaults(func=_cmd_datagen)

    s = sub.add_parser("score", help="compare a generated curve to an oracle curve")
    s.add_argument("--gen", required=True)
    s.add_argument("--oracle", required=True)
    s.set_defaults(func=_cmd_score)

    dm = sub.add_parser("dump", help="export a metric store to CSV")
    dm.add_argument("--store", required=True)
    dm.add_argument("--out", required=True)
    dm.set_defaults(func=_cmd_dump)

    pl = sub.add_parser("plot", help="render series plots (SVG)")
    pl.add_argument("--series", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=_cmd_plot)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as exc:
        print(f"{exc.category} error: {exc}", file=sys.stderr)
        return _CATEGORY_EXIT.get(exc.category, 1)
    except (ValueError, datagen.CappedPointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
