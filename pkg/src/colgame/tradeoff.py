"""Measuring and modelling the privacy-accuracy trade-off.

A :class:`TradeoffGrid` stores, for both players, the normalized improvement
``y = (theta - phi) / theta`` of training together over training alone, on a
grid of privacy levels ``(p1, p2)``. Arrays are indexed ``[i, j]`` with ``i``
along the p1 axis and ``j`` along the p2 axis for *both* players.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import isotonic_regression

from .privacy import MechanismSpec, SensitivityParams, sensitivity
from .recsys import (TrainConfig, rmse, split_players, split_train_test, train_alone,
                     train_together)
from .seeding import derive_seed

DEFAULT_AXES = (0.0, 0.2, 0.4, 0.6)
PROVENANCES = ("measured", "self-division", "fixture")


class PlayerData(NamedTuple):
    train: object
    test: object


def _check_axis(axis, name):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or len(axis) == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if (axis < 0).any() or (axis > 1).any():
        raise ValueError(f"{name} values must lie in [0, 1]")
    if (np.diff(axis) <= 0).any():
        raise ValueError(f"{name} must be strictly increasing")
    return axis


@dataclass(eq=False)
class TradeoffGrid:
    p1_axis: np.ndarray
    p2_axis: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    theta1: float = 1.0
    theta2: float = 1.0
    mechanism: Optional[str] = None
    repeats: int = 1
    provenance: str = "measured"
    seeds: list = field(default_factory=list)
    # raw together-RMSE per cell, kept for measured grids
    phi1: Optional[np.ndarray] = None
    phi2: Optional[np.ndarray] = None

    def __post_init__(self):
        self.p1_axis = _check_axis(self.p1_axis, "p1_axis")
        self.p2_axis = _check_axis(self.p2_axis, "p2_axis")
        shape = (len(self.p1_axis), len(self.p2_axis))
        self.y1 = np.asarray(self.y1, dtype=float).reshape(shape)
        self.y2 = np.asarray(self.y2, dtype=float).reshape(shape)
        for name in ("phi1", "phi2"):
            if getattr(self, name) is not None:
                setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(shape))
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise ValueError("theta values must be positive")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")

    def same_axes(self, other):
        return (self.p1_axis.shape == other.p1_axis.shape and self.p2_axis.shape == other.p2_axis.shape
                and np.allclose(self.p1_axis, other.p1_axis) and np.allclose(self.p2_axis, other.p2_axis))

    def __eq__(self, other):
        if not isinstance(other, TradeoffGrid):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self):
        def arr(a):
            return None if a is None else a.ravel().tolist()
        return {
            "p1_axis": self.p1_axis.tolist(), "p2_axis": self.p2_axis.tolist(),
            "y1": arr(self.y1), "y2": arr(self.y2),
            "theta1": self.theta1, "theta2": self.theta2,
            "mechanism": self.mechanism, "repeats": self.repeats,
            "provenance": self.provenance, "seeds": list(self.seeds),
            "phi1": arr(self.phi1), "phi2": arr(self.phi2),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["p1", "p2", "y1", "y2"])
            for i, a in enumerate(self.p1_axis):
                for j, b in enumerate(self.p2_axis):
                    writer.writerow([a, b, self.y1[i, j], self.y2[i, j]])


class BilinearSurface:
    """Piecewise-bilinear interpolation of one player's grid values.

    Outside the measured range each coordinate is clamped to the nearest axis
    value. At p=1 (when 1 is not itself an axis value) the result is capped at
    0, so full protection never beats training alone.
    """

    def __init__(self, p1_axis, p2_axis, values):
        self.p1_axis = _check_axis(p1_axis, "p1_axis")
        self.p2_axis = _check_axis(p2_axis, "p2_axis")
        if len(self.p1_axis) < 2 or len(self.p2_axis) < 2:
            raise ValueError("interpolation needs at least two values per axis")
        self.values = np.asarray(values, dtype=float).reshape(len(self.p1_axis), len(self.p2_axis))

    @staticmethod
    def _locate(axis, p):
        q = np.clip(p, axis[0], axis[-1])
        i = np.clip(np.searchsorted(axis, q, side="right") - 1, 0, len(axis) - 2)
        t = (q - axis[i]) / (axis[i + 1] - axis[i])
        full = (p >= 1.0) & (axis[-1] < 1.0)
        return i, t, full

    def __call__(self, p1, p2):
        p1, p2 = np.broadcast_arrays(np.asarray(p1, float), np.asarray(p2, float))
        i, t, full1 = self._locate(self.p1_axis, p1)
        j, s, full2 = self._locate(self.p2_axis, p2)
        v = self.values
        out = ((1 - t) * (1 - s) * v[i, j] + t * (1 - s) * v[i + 1, j]
               + (1 - t) * s * v[i, j + 1] + t * s * v[i + 1, j + 1])
        out = np.where(full1 | full2, np.minimum(out, 0.0), out)
        return float(out) if out.ndim == 0 else out


@dataclass
class TradeoffSurface:
    grid: TradeoffGrid
    players: tuple

    def __getitem__(self, n):
        return self.players[n - 1]


def interpolate(grid):
    return TradeoffSurface(grid, (BilinearSurface(grid.p1_axis, grid.p2_axis, grid.y1),
                                  BilinearSurface(grid.p1_axis, grid.p2_axis, grid.y2)))


def _nodes_for(surface, nodes):
    if nodes is not None:
        n = np.asarray(nodes, float)
        return n, n
    if isinstance(surface, BilinearSurface):
        return (np.union1d(surface.p1_axis, [1.0]), np.union1d(surface.p2_axis, [1.0]))
    n = np.linspace(0.0, 1.0, 11)
    return n, n


@dataclass
class PhiReport:
    full_protection: list   # nodes with a coordinate at 1 where y > tol
    monotonicity: list      # (axis, node, next_node) where y increases by more than tol
    positive_at_origin: bool

    @property
    def ok(self):
        return not self.full_protection and not self.monotonicity and self.positive_at_origin


def validate_phi_properties(surface, nodes=None, tol=0.0):
    """Check one player's surface for the expected shape of the trade-off.

    y must be non-positive whenever a privacy level is 1, non-increasing along
    both axes (up to ``tol``), and positive at (0, 0).
    """
    a1, a2 = _nodes_for(surface, nodes)
    Y = np.array([[surface(a, b) for b in a2] for a in a1])
    full = [(float(a), float(b)) for i, a in enumerate(a1) for j, b in enumerate(a2)
            if (a == 1.0 or b == 1.0) and Y[i, j] > tol]
    mono = []
    for i in range(len(a1) - 1):
        for j in range(len(a2)):
            if Y[i + 1, j] > Y[i, j] + tol:
                mono.append(("p1", (float(a1[i]), float(a2[j])), (float(a1[i + 1]), float(a2[j]))))
    for i in range(len(a1)):
        for j in range(len(a2) - 1):
            if Y[i, j + 1] > Y[i, j] + tol:
                mono.append(("p2", (float(a1[i]), float(a2[j])), (float(a1[i]), float(a2[j + 1]))))
    return PhiReport(full, mono, bool(surface(0.0, 0.0) > 0))


def _own_view(surface, player):
    # (own, other) coordinates
    if player == 1:
        return surface
    return lambda own, other: surface(other, own)


def check_symmetric_derivatives(surface1, surface2, tol, nodes=None, h=None):
    """True when both players' first and second own-parameter derivatives agree.

    Derivatives are central differences taken in (own, other) coordinates, so
    a pair with ``surface2(a, b) == surface1(b, a)`` always passes.
    """
    grids = [s for s in (surface1, surface2) if isinstance(s, BilinearSurface)]
    if len(grids) == 2:
        g1, g2 = grids
        if not (np.allclose(g1.p1_axis, g2.p1_axis) and np.allclose(g1.p2_axis, g2.p2_axis)
                and np.allclose(g1.p1_axis, g1.p2_axis)):
            raise ValueError("surfaces must share the same square axes")
    if nodes is None:
        if grids:
            axis = grids[0].p1_axis
            steps = np.diff(axis)
            if not np.allclose(steps, steps[0]):
                raise ValueError("finite differences on a grid need uniform spacing")
            nodes, h = axis[1:-1], steps[0] if h is None else h
            other = axis
        else:
            nodes = np.linspace(0.1, 0.9, 9)
            other = nodes
    else:
        nodes = np.asarray(nodes, float)
        other = nodes
    h = 1e-3 if h is None else h
    if len(nodes) == 0:
        raise ValueError("no interior nodes for central differences")
    f1, f2 = _own_view(surface1, 1), _own_view(surface2, 2)
    worst1 = worst2 = 0.0
    for a in nodes:
        for b in other:
            d1 = [(f(a + h, b) - f(a - h, b)) / (2 * h) for f in (f1, f2)]
            d2 = [(f(a + h, b) - 2 * f(a, b) + f(a - h, b)) / h ** 2 for f in (f1, f2)]
            worst1 = max(worst1, abs(d1[0] - d1[1]))
            worst2 = max(worst2, abs(d2[0] - d2[1]))
    return worst1 < tol and worst2 < tol


def _alone_rmse(data, cfg):
    return rmse(train_alone(data.train, cfg), data.test)


def measure_grid(player1, player2, mechanism, axes=DEFAULT_AXES, cfg=None, repeats=3,
                 p2_axis=None, sensitivity_variant="paper-eq6"):
    """Measure both players' improvement over a (p1, p2) grid.

    ``player1``/``player2`` are :class:`PlayerData` (preprocessed, already
    split into train/test). Each repeat uses its own training seed; a player's
    mechanism draw for a given privacy level is shared across the cells of
    that repeat. RMSEs are averaged over repeats before normalizing.
    """
    cfg = cfg or TrainConfig()
    p1_axis = _check_axis(axes, "p1_axis")
    p2_axis = p1_axis if p2_axis is None else _check_axis(p2_axis, "p2_axis")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    sens = None
    if mechanism == "bdp":
        rng_r = max(player1.train.rating_range, player2.train.rating_range)
        sens = sensitivity(SensitivityParams.from_config(cfg, rng_r, sensitivity_variant))

    seeds = [derive_seed(cfg.seed, r) for r in range(repeats)]
    theta = np.zeros(2)
    phi = np.zeros((2, len(p1_axis), len(p2_axis)))
    for r, seed in enumerate(seeds):
        cfg_r = replace(cfg, seed=seed)
        theta += [_alone_rmse(player1, cfg_r), _alone_rmse(player2, cfg_r)]
        prot1 = [MechanismSpec(mechanism, float(p), derive_seed(seed, 1, i)).apply(player1.train, sens)
                 for i, p in enumerate(p1_axis)]
        prot2 = [MechanismSpec(mechanism, float(p), derive_seed(seed, 2, j)).apply(player2.train, sens)
                 for j, p in enumerate(p2_axis)]
        for i in range(len(p1_axis)):
            for j in range(len(p2_axis)):
                try:
                    m1, m2, _ = train_together(prot1[i], prot2[j], cfg_r)
                    phi[0, i, j] += rmse(m1, player1.test)
                    phi[1, i, j] += rmse(m2, player2.test)
                except Exception as exc:
                    raise RuntimeError(
                        f"cell (p1={p1_axis[i]}, p2={p2_axis[j]}) repeat {r} failed: {exc}") from exc
    theta /= repeats
    phi /= repeats
    return TradeoffGrid(
        p1_axis, p2_axis,
        (theta[0] - phi[0]) / theta[0], (theta[1] - phi[1]) / theta[1],
        float(theta[0]), float(theta[1]), mechanism, repeats, "measured", seeds,
        phi[0], phi[1],
    )


def self_division(data, mechanism, axes=DEFAULT_AXES, cfg=None, repeats=3, *, player=1,
                  size_ratio=1.0, train_fraction=0.8, seed=0):
    """Approximate a player's trade-off grid from its own data alone.

    The player's users are split into two parts that stand in for itself and
    the other player, and the collaboration is measured on them. With equal
    parts both halves serve as "own" in turn and their RMSEs are averaged.
    """
    cfg = cfg or TrainConfig()
    if data.n_users < 2:
        raise ValueError("self-division needs at least two users")
    half_a, half_b = split_players(data, size_ratio, seed=derive_seed(seed, 0))
    parts = []
    for k, half in enumerate((half_a, half_b)):
        parts.append(PlayerData(*split_train_test(half, train_fraction, derive_seed(seed, 1, k))))
    g = measure_grid(parts[0], parts[1], mechanism, axes, cfg, repeats)

    if size_ratio == 1.0:
        theta = (g.theta1 + g.theta2) / 2
        phi_own = (g.phi1 + g.phi2.T) / 2
        own = (theta - phi_own) / theta
        other = own.T
        phi_other = phi_own.T
        thetas = (theta, theta)
    else:
        own, other = g.y1, g.y2
        phi_own, phi_other = g.phi1, g.phi2
        thetas = (g.theta1, g.theta2)
    if player == 1:
        y1, y2, ph1, ph2, th = own, other, phi_own, phi_other, thetas
    elif player == 2:
        y1, y2, ph1, ph2, th = other.T, own.T, phi_other.T, phi_own.T, thetas[::-1]
    else:
        raise ValueError("player must be 1 or 2")
    return TradeoffGrid(g.p1_axis, g.p2_axis, y1, y2, th[0], th[1], mechanism, repeats,
                        "self-division", g.seeds, ph1, ph2)


def heuristic_score(ds):
    """``density * |D|``; self-division works best near 1e5."""
    if len(ds) == 0:
        raise ValueError("empty dataset")
    return len(ds) ** 2 / (ds.n_users * ds.n_items)


def grid_rmse(a, b):
    if not a.same_axes(b):
        raise ValueError("grids have different axes")
    diff = np.concatenate([(a.y1 - b.y1).ravel(), (a.y2 - b.y2).ravel()])
    return math.sqrt(float(np.mean(diff ** 2)))


def _project_monotone(values, max_iter=500, atol=1e-12):
    # Dykstra's alternating projections onto the row- and column-wise
    # non-increasing cones; converges to the joint L2 projection.
    x = values.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = np.array([isotonic_regression(row, increasing=False).x for row in (x + p).T]).T
        p = x + p - y
        x_new = np.array([isotonic_regression(row, increasing=False).x for row in y + q])
        q = y + q - x_new
        if np.max(np.abs(x_new - x)) < atol:
            return x_new
        x = x_new
    return x


def smooth_monotone(grid):
    """Least-squares monotone (non-increasing in p1 and p2) version of a grid."""
    return replace(grid, y1=_project_monotone(grid.y1), y2=_project_monotone(grid.y2))
