"""End-to-end experiment orchestration and persistence.

``run_full_process`` walks through the pre-collaboration steps: load and
preprocess the data, split it between two players, let each player approximate
its trade-off surface by self-division, solve the game on the approximation and
decide whether to collaborate. Every intermediate artifact is written to the
plan's output directory.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .game import EquilibriumResult, GameConfig, PlayerWeights, br_dynamics, default_strategy_grid
from .recsys import (TrainConfig, ingest, preprocess, rmse, split_players, split_train_test,
                     train_alone, train_together)
from .seeding import derive_seed
from .tradeoff import (DEFAULT_AXES, BilinearSurface, PlayerData, TradeoffGrid, measure_grid,
                       self_division)

log = logging.getLogger(__name__)

DEFAULT_SIZE_RATIOS = (1 / 5, 1 / 4, 1 / 3, 1 / 2, 1, 2, 3, 4, 5)

# sub-seed stage indices
_SPLIT, _TRAIN_TEST, _THETA, _SELFDIV, _MEASURE, _ALONE_VS_TOGETHER = range(1, 7)


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclass
class ExperimentPlan:
    data_path: str = "data/ml-100k.csv"
    data_format: str = "csv"
    min_ratings: int = 10
    size_ratio: float = 1.0
    train_fraction: float = 0.8
    train: TrainConfig = field(default_factory=TrainConfig)
    mechanism: str = "bdp"
    axes: tuple = DEFAULT_AXES
    repeats: int = 3
    weights: tuple = ((1.0, 0.1), (1.0, 0.1))
    grid_step: float = 0.1
    # measured y is a fraction; the game reads it in percentage points
    benefit_scale: float = 100.0
    out_dir: str = "runs/default"
    seed: int = 0
    compare_measured: bool = False

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.axes = tuple(float(a) for a in self.axes)
        self.weights = tuple(tuple(float(x) for x in w) for w in self.weights)
        if self.mechanism not in ("sup", "bdp"):
            raise ValueError("mechanism must be 'sup' or 'bdp'")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def player_weights(self):
        return tuple(PlayerWeights(b, c) for b, c in self.weights)

    def stage_seed(self, stage, *keys):
        return derive_seed(self.seed, stage, *keys)

    def to_dict(self):
        d = asdict(self)
        d["axes"] = list(self.axes)
        d["weights"] = [list(w) for w in self.weights]
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path):
        return cls(**json.loads(Path(path).read_text()))


@dataclass
class ProcessReport:
    theta: tuple
    grids: tuple                # per player's self-division TradeoffGrid
    approx: tuple               # per player's EquilibriumResult on its own approximation
    strategies: tuple           # (player 1's p1*, player 2's p2*)
    utilities: tuple            # each player's approximated utility at its own NE
    pop: tuple                  # each player's approximated price of privacy
    recommendation: str         # collaborate | train-alone
    measured_grid: TradeoffGrid = None
    measured: EquilibriumResult = None

    def to_dict(self):
        return {
            "theta": list(self.theta),
            "grids": [g.to_dict() for g in self.grids],
            "approx": [r.to_dict() for r in self.approx],
            "strategies": list(self.strategies),
            "utilities": list(self.utilities),
            "pop": list(self.pop),
            "recommendation": self.recommendation,
            "measured_grid": None if self.measured_grid is None else self.measured_grid.to_dict(),
            "measured": None if self.measured is None else self.measured.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(d["theta"]),
            tuple(TradeoffGrid.from_dict(g) for g in d["grids"]),
            tuple(EquilibriumResult.from_dict(r) for r in d["approx"]),
            tuple(d["strategies"]), tuple(d["utilities"]), tuple(d["pop"]),
            d["recommendation"],
            None if d["measured_grid"] is None else TradeoffGrid.from_dict(d["measured_grid"]),
            None if d["measured"] is None else EquilibriumResult.from_dict(d["measured"]),
        )

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def game_surfaces(grid, scale=1.0):
    return (BilinearSurface(grid.p1_axis, grid.p2_axis, scale * grid.y1),
            BilinearSurface(grid.p1_axis, grid.p2_axis, scale * grid.y2))


def game_config(grid, weights, grid_step=0.1, scale=1.0):
    return GameConfig(weights, game_surfaces(grid, scale), default_strategy_grid(grid_step))


def play(grid, plan):
    """Solve the game on one grid with the plan's weights."""
    cfg = game_config(grid, plan.player_weights(), plan.grid_step, plan.benefit_scale)
    return br_dynamics(cfg)


def decide(approx):
    """Collaborate only if both players expect a positive utility."""
    u = (approx[0].utilities[0], approx[1].utilities[1])
    return "collaborate" if u[0] > 0 and u[1] > 0 else "train-alone"


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def load_players(plan):
    """Ingest, preprocess and split the data into the two players' datasets."""
    ds = _stage("ingest", ingest, plan.data_path, plan.data_format)
    pre = _stage("preprocess", preprocess, ds, plan.min_ratings)
    d1, d2 = _stage("split", split_players, pre.residual, plan.size_ratio, plan.stage_seed(_SPLIT))
    return pre, (d1, d2)


def train_test(plan, datasets):
    return tuple(
        PlayerData(*split_train_test(d, plan.train_fraction, plan.stage_seed(_TRAIN_TEST, n)))
        for n, d in enumerate(datasets, 1)
    )


def run_full_process(plan):
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan.to_json(out / "plan.json")

    pre, datasets = load_players(plan)
    pre.residual.to_csv(out / "preprocessed.csv")
    for n, d in enumerate(datasets, 1):
        d.to_csv(out / f"player{n}.csv")
    players = _stage("split", train_test, plan, datasets)
    cfg_theta = replace(plan.train, seed=plan.stage_seed(_THETA))
    theta = tuple(_stage("initialization", lambda p: rmse(train_alone(p.train, cfg_theta), p.test), p)
                  for p in players)

    grids, approx = [], []
    for n, d in enumerate(datasets, 1):
        other = datasets[2 - n]
        ratio = len(d) / len(other)
        cfg = replace(plan.train, seed=plan.stage_seed(_SELFDIV, n))
        grid = _stage("approximation", self_division, d, plan.mechanism, plan.axes, cfg,
                      plan.repeats, player=n, size_ratio=1.0 if np.isclose(ratio, 1, atol=0.05) else ratio,
                      train_fraction=plan.train_fraction, seed=plan.stage_seed(_SELFDIV, n, 0))
        grid.to_json(out / f"selfdiv_player{n}.json")
        grids.append(grid)
        approx.append(_stage("game", play, grid, plan))

    strategies = (approx[0].strategies[0], approx[1].strategies[1])
    utilities = (approx[0].utilities[0], approx[1].utilities[1])
    report = ProcessReport(theta, tuple(grids), tuple(approx), strategies, utilities,
                           (approx[0].pop, approx[1].pop), decide(approx))

    if plan.compare_measured:
        cfg = replace(plan.train, seed=plan.stage_seed(_MEASURE))
        mgrid = _stage("measure", measure_grid, players[0], players[1], plan.mechanism,
                       plan.axes, cfg, plan.repeats)
        mgrid.to_json(out / "measured.json")
        report.measured_grid = mgrid
        report.measured = _stage("game", play, mgrid, plan)

    report.to_json(out / "report.json")
    return report


def reproduce_alone_vs_together(plan, ratios=DEFAULT_SIZE_RATIOS):
    """Improvement of training together over alone for several size ratios.

    Each repeat re-splits the users with its own seed; RMSEs are averaged over
    repeats before normalizing. A failing ratio is recorded and skipped.
    """
    pre = _stage("preprocess", preprocess, _stage("ingest", ingest, plan.data_path, plan.data_format),
                 plan.min_ratings)
    rows = []
    for ratio in ratios:
        try:
            theta, phi = np.zeros(2), np.zeros(2)
            for k in range(plan.repeats):
                seed = plan.stage_seed(_ALONE_VS_TOGETHER, k)
                d1, d2 = split_players(pre.residual, ratio, derive_seed(seed, 0))
                p1 = PlayerData(*split_train_test(d1, plan.train_fraction, derive_seed(seed, 1)))
                p2 = PlayerData(*split_train_test(d2, plan.train_fraction, derive_seed(seed, 2)))
                cfg = replace(plan.train, seed=derive_seed(seed, 3))
                theta += [rmse(train_alone(p.train, cfg), p.test) for p in (p1, p2)]
                m1, m2, _ = train_together(p1.train, p2.train, cfg)
                phi += [rmse(m1, p1.test), rmse(m2, p2.test)]
            y = (theta - phi) / theta
            rows.append({"size_ratio": ratio, "y1": float(y[0]), "y2": float(y[1]), "error": ""})
        except Exception as exc:
            log.warning("size ratio %s failed: %s", ratio, exc)
            rows.append({"size_ratio": ratio, "y1": float("nan"), "y2": float("nan"), "error": str(exc)})
    return rows


def reproduce_ne_table(surfaces, ratios, grid_step=0.1, start=(0.0, 0.0)):
    """Best-response equilibria for every pair of weight ratios (B = 1, C = ratio)."""
    grid = default_strategy_grid(grid_step)
    rows = []
    for r1 in ratios:
        for r2 in ratios:
            cfg = GameConfig.from_ratios(float(r1), float(r2), surfaces, strategy_grid=grid)
            res = br_dynamics(cfg, start)
            rows.append({"ratio1": float(r1), "ratio2": float(r2),
                         "p1": res.strategies[0], "p2": res.strategies[1],
                         "u1": res.utilities[0], "u2": res.utilities[1],
                         "pop": res.pop, "status": res.status})
    return rows


def write_csv(rows, path, columns=None):
    rows = list(rows)
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
