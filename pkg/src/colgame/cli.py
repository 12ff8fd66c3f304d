"""Command-line interface: ``colgame <command> [options]``."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fixtures
from .game import (GameConfig, PlayerWeights, br_dynamics, caas_equilibrium,
                   default_strategy_grid, price_of_privacy)
from .pipeline import (DEFAULT_SIZE_RATIOS, ExperimentPlan, StageError, game_surfaces,
                       reproduce_alone_vs_together, reproduce_ne_table, run_full_process,
                       write_csv)
from .recsys import (RESIDUAL_BOUND, RatingDataset, TrainConfig, ingest, preprocess,
                     split_players, split_train_test)
from .tradeoff import PlayerData, TradeoffGrid, interpolate, measure_grid, self_division


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ratio_range(text):
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        return np.round(np.arange(lo, hi + step / 2, step), 9).tolist()
    return _floats(text)


def _load_grid(spec):
    if spec in ("fixture:true", "fixture:approx"):
        return fixtures.true_grid() if spec.endswith("true") else fixtures.approx_grid()
    return TradeoffGrid.from_json(spec)


def _weights(text):
    b1, c1, b2, c2 = _floats(text)
    return PlayerWeights(b1, c1), PlayerWeights(b2, c2)


def _out(args, name):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _train_config(args):
    return TrainConfig(seed=args.seed)


def _game(args):
    grid = _load_grid(args.grid)
    scale = args.scale if args.scale is not None else (1.0 if grid.provenance == "fixture" else 100.0)
    return GameConfig(_weights(args.weights), game_surfaces(grid, scale),
                      default_strategy_grid(args.grid_step))


def cmd_ingest(args):
    ds = ingest(args.path, args.format)
    print(json.dumps({"ratings": len(ds), "users": ds.n_users, "items": ds.n_items,
                      "density": ds.density, "r_min": ds.r_min, "r_max": ds.r_max}))
    if args.out:
        ds.to_csv(_out(args, "ratings.csv"))


def cmd_preprocess(args):
    pre = preprocess(ingest(args.path, args.format), args.min_ratings)
    pre.residual.to_csv(_out(args, "preprocessed.csv"))
    with open(_out(args, "averages.json"), "w") as fh:
        json.dump({"items": pre.item_averages, "users": pre.user_averages}, fh)
    r = pre.residual
    print(json.dumps({"ratings": len(r), "users": r.n_users, "items": r.n_items, "density": r.density}))


def cmd_split(args):
    ds = ingest(args.path, args.format)
    d1, d2 = split_players(ds, args.ratio, args.seed)
    d1.to_csv(_out(args, "player1.csv"))
    d2.to_csv(_out(args, "player2.csv"))
    print(json.dumps({"player1": len(d1), "player2": len(d2), "ratio": len(d1) / len(d2)}))


def _residual(path):
    # preprocessed CSVs carry residual ratings in [-2, 2]
    ds = ingest(path, "csv")
    return RatingDataset(ds.users, ds.items, ds.ratings, -RESIDUAL_BOUND, RESIDUAL_BOUND)


def cmd_measure(args):
    players = [PlayerData(*split_train_test(_residual(p), 0.8, args.seed + n))
               for n, p in enumerate((args.player1, args.player2))]
    grid = measure_grid(players[0], players[1], args.mech, _floats(args.axes),
                        _train_config(args), args.repeats)
    grid.to_json(_out(args, "grid.json"))
    grid.to_csv(_out(args, "grid.csv"))
    print(grid.to_json())


def cmd_selfdiv(args):
    grid = self_division(_residual(args.path), args.mech, _floats(args.axes), _train_config(args),
                         args.repeats, player=args.player, seed=args.seed)
    grid.to_json(_out(args, "selfdiv.json"))
    grid.to_csv(_out(args, "selfdiv.csv"))
    print(grid.to_json())


def cmd_interpolate(args):
    surface = interpolate(_load_grid(args.grid))
    p1, p2 = _floats(args.at)
    print(json.dumps({"p1": p1, "p2": p2, "y1": surface[1](p1, p2), "y2": surface[2](p1, p2)}))


def cmd_caas(args):
    print(caas_equilibrium(_game(args)).to_json())


def cmd_dynamics(args):
    start = tuple(_floats(args.start))
    print(br_dynamics(_game(args), start).to_json())


def cmd_pop(args):
    print(json.dumps({"pop": price_of_privacy(tuple(_floats(args.strategies)), _game(args))}))


def cmd_table(args):
    grid = _load_grid(args.grid)
    scale = args.scale if args.scale is not None else (1.0 if grid.provenance == "fixture" else 100.0)
    rows = reproduce_ne_table(game_surfaces(grid, scale), _ratio_range(args.ratios), args.grid_step)
    path = _out(args, "ne_table.csv")
    write_csv(rows, path)
    print(path)


def cmd_sizes(args):
    plan = _plan(args)
    rows = reproduce_alone_vs_together(plan, _floats(args.ratios) if args.ratios else DEFAULT_SIZE_RATIOS)
    path = _out(args, "alone_vs_together.csv")
    write_csv(rows, path)
    print(path)


def _plan(args):
    plan = ExperimentPlan.from_json(args.config) if args.config else ExperimentPlan()
    overrides = {}
    if args.path:
        overrides["data_path"] = args.path
        overrides["data_format"] = args.format
    for name, attr in (("seed", "seed"), ("repeats", "repeats"), ("mech", "mechanism"),
                       ("grid_step", "grid_step"), ("out", "out_dir")):
        value = getattr(args, name, None)
        if value is not None and value != argparse.SUPPRESS:
            overrides[attr] = value
    if getattr(args, "axes", None):
        overrides["axes"] = tuple(_floats(args.axes))
    return replace(plan, **overrides)


def cmd_pipeline(args):
    plan = _plan(args)
    if args.compare_measured:
        plan = replace(plan, compare_measured=True)
    report = run_full_process(plan)
    print(json.dumps({"strategies": report.strategies, "utilities": report.utilities,
                      "pop": report.pop, "recommendation": report.recommendation,
                      "out": str(plan.out_dir)}))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--repeats", type=int, default=None)
    common.add_argument("--mech", choices=("sup", "bdp"), default=None)
    common.add_argument("--axes", default=None, help="comma-separated privacy levels")
    common.add_argument("--grid-step", type=float, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--config", default=None, help="JSON experiment plan")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--path")
    data.add_argument("--format", choices=("csv", "movielens-dat"), default="csv")

    game = argparse.ArgumentParser(add_help=False)
    game.add_argument("--grid", default="fixture:true",
                      help="grid JSON, or fixture:true / fixture:approx")
    game.add_argument("--weights", default="1,0.1,1,0.1", help="B1,C1,B2,C2")
    game.add_argument("--scale", type=float, default=None,
                      help="benefit scale (default 100 for measured grids, 1 for fixtures)")

    parser = argparse.ArgumentParser(prog="colgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, parents, help_text):
        p = sub.add_parser(name, parents=parents, help=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("ingest", cmd_ingest, [common, data], "load a rating file and summarize it")
    p = add("preprocess", cmd_preprocess, [common, data], "filter, de-mean and clamp ratings")
    p.add_argument("--min-ratings", type=int, default=10)
    p = add("split", cmd_split, [common, data], "split users between two players")
    p.add_argument("--ratio", type=float, default=1.0)
    p = add("measure", cmd_measure, [common], "measure a trade-off grid for two players")
    p.add_argument("--player1", required=True)
    p.add_argument("--player2", required=True)
    p = add("selfdiv", cmd_selfdiv, [common, data], "approximate a grid by self-division")
    p.add_argument("--player", type=int, choices=(1, 2), default=1)
    p = add("interpolate", cmd_interpolate, [common, game], "evaluate a grid's surfaces")
    p.add_argument("--at", required=True, help="p1,p2")
    add("caas", cmd_caas, [common, game], "equilibrium with one unconcerned player")
    p = add("dynamics", cmd_dynamics, [common, game], "best-response dynamics")
    p.add_argument("--start", default="0,0")
    p = add("pop", cmd_pop, [common, game], "price of privacy at given strategies")
    p.add_argument("--strategies", required=True, help="p1,p2")
    p = add("table", cmd_table, [common, game], "equilibria over a grid of weight ratios")
    p.add_argument("--ratios", default="0:2:0.1", help="lo:hi:step or a comma list")
    p = add("sizes", cmd_sizes, [common, data], "alone vs together over size ratios")
    p.add_argument("--ratios", default=None)
    p = add("pipeline", cmd_pipeline, [common, data], "run the full pre-collaboration process")
    p.add_argument("--compare-measured", action="store_true")
    return parser


_DEFAULTS = {"seed": 0, "repeats": 3, "mech": "bdp", "axes": "0,0.2,0.4,0.6",
             "grid_step": 0.1, "out": "."}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command not in ("pipeline", "sizes"):
        for k, v in _DEFAULTS.items():
            # ingest only writes a copy when --out is given
            if getattr(args, k, None) is None and not (k == "out" and args.command == "ingest"):
                setattr(args, k, v)
    if getattr(args, "path", "x") is None and args.command in ("ingest", "preprocess", "split", "selfdiv"):
        parser.error("--path is required")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
