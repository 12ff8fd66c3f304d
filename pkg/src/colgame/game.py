"""The two-player collaborative learning game.

Each player n picks a privacy level p_n on a finite strategy grid and gets

    u_n(p1, p2) = B_n * max(y_n(p1, p2), 0) - C_n * (1 - p_n)

where y_n is its normalized accuracy improvement surface (any callable of
``(p1, p2)``; usually a :class:`~colgame.tradeoff.BilinearSurface`).
Players are numbered 1 and 2 throughout.
"""

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

# utilities closer than this count as a tie (broken toward smaller p)
TIE_TOL = 1e-12


def default_strategy_grid(step=0.1):
    n = int(round(1.0 / step))
    if not np.isclose(n * step, 1.0):
        raise ValueError("grid step must divide 1")
    return np.round(np.linspace(0.0, 1.0, n + 1), 12)


@dataclass(frozen=True)
class PlayerWeights:
    accuracy: float = 1.0   # B
    privacy: float = 0.0    # C

    def __post_init__(self):
        if not self.accuracy > 0:
            raise ValueError("accuracy weight must be positive")
        if self.privacy < 0:
            raise ValueError("privacy weight must be non-negative")

    @property
    def ratio(self):
        return self.privacy / self.accuracy


@dataclass
class GameConfig:
    weights: tuple
    surfaces: tuple
    strategy_grid: np.ndarray = field(default_factory=default_strategy_grid)
    cost: str = "linear"
    benefit: str = "linear-normalized"

    def __post_init__(self):
        self.weights = tuple(self.weights)
        self.surfaces = tuple(self.surfaces)
        if len(self.weights) != 2 or len(self.surfaces) != 2:
            raise ValueError("the game has exactly two players")
        g = np.asarray(self.strategy_grid, dtype=float)
        if (np.diff(g) <= 0).any() or g[0] != 0.0 or g[-1] != 1.0:
            raise ValueError("strategy grid must be increasing and contain 0 and 1")
        self.strategy_grid = g
        if self.cost != "linear" or self.benefit != "linear-normalized":
            raise ValueError("only linear cost and linear-normalized benefit are supported")

    @classmethod
    def from_ratios(cls, r1, r2, surfaces, **kw):
        return cls((PlayerWeights(1.0, r1), PlayerWeights(1.0, r2)), surfaces, **kw)

    def with_weights(self, w1, w2):
        return replace(self, weights=(w1, w2))

    def to_dict(self):
        d = {"weights": [asdict(w) for w in self.weights],
             "strategy_grid": self.strategy_grid.tolist(),
             "cost": self.cost, "benefit": self.benefit}
        grids = [getattr(s, "values", None) for s in self.surfaces]
        if all(g is not None for g in grids):
            d["surfaces"] = [{"p1_axis": s.p1_axis.tolist(), "p2_axis": s.p2_axis.tolist(),
                              "values": s.values.ravel().tolist()} for s in self.surfaces]
        return d

    @classmethod
    def from_dict(cls, d, surfaces=None):
        from .tradeoff import BilinearSurface

        if surfaces is None:
            surfaces = [BilinearSurface(s["p1_axis"], s["p2_axis"], s["values"]) for s in d["surfaces"]]
        return cls(tuple(PlayerWeights(**w) for w in d["weights"]), tuple(surfaces),
                   np.asarray(d["strategy_grid"]), d.get("cost", "linear"),
                   d.get("benefit", "linear-normalized"))


@dataclass
class EquilibriumResult:
    strategies: tuple
    utilities: tuple
    pop: float
    trace: list = field(default_factory=list)
    status: str = "converged"   # converged | trivial | no-positive-utility | not-converged

    def to_dict(self):
        return {"strategies": [float(s) for s in self.strategies],
                "utilities": [float(u) for u in self.utilities],
                "pop": float(self.pop),
                "trace": [[float(a), float(b)] for a, b in self.trace],
                "status": self.status}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["strategies"]), tuple(d["utilities"]), d["pop"],
                   [tuple(t) for t in d["trace"]], d["status"])


class UndefinedPoPError(ValueError):
    pass


def _check_player(n):
    if n not in (1, 2):
        raise ValueError("player must be 1 or 2")


def benefit(n, p1, p2, cfg):
    return max(float(cfg.surfaces[n - 1](p1, p2)), 0.0)


def utility(n, p1, p2, cfg):
    _check_player(n)
    w = cfg.weights[n - 1]
    own = p1 if n == 1 else p2
    return w.accuracy * benefit(n, p1, p2, cfg) - w.privacy * (1.0 - own)


def _pair(n, own, other):
    return (own, other) if n == 1 else (other, own)


def _own_utilities(n, p_other, cfg):
    return np.array([utility(n, *_pair(n, p, p_other), cfg) for p in cfg.strategy_grid])


def _argmax_low(values):
    return int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])


def best_response(n, p_other, cfg):
    """Grid argmax of player n's utility; ties go to the smallest p."""
    _check_player(n)
    return float(cfg.strategy_grid[_argmax_low(_own_utilities(n, p_other, cfg))])


def price_of_privacy(strategies, cfg):
    p1, p2 = strategies
    base = benefit(1, 0.0, 0.0, cfg) + benefit(2, 0.0, 0.0, cfg)
    if base <= 0:
        raise UndefinedPoPError("no benefit at (0, 0); price of privacy is undefined")
    at = benefit(1, p1, p2, cfg) + benefit(2, p1, p2, cfg)
    return min(max(1.0 - at / base, 0.0), 1.0)


def _safe_pop(strategies, cfg):
    try:
        return price_of_privacy(strategies, cfg)
    except UndefinedPoPError:
        return float("nan")


def _result(strategies, cfg, trace, status):
    strategies = (float(strategies[0]), float(strategies[1]))
    utils = (utility(1, *strategies, cfg), utility(2, *strategies, cfg))
    return EquilibriumResult(strategies, utils, _safe_pop(strategies, cfg), trace, status)


def _train_alone_result(cfg, trace):
    return _result((1.0, 1.0), cfg, trace, "no-positive-utility")


@dataclass
class ThresholdBounds:
    alpha: float        # largest ratio whose best response is 0
    beta: float         # smallest ratio whose best response is 1
    positivity: float   # largest ratio whose best response (< 1) has u >= 0
    interior: tuple     # (lo, hi) ratios with an interior best response and u > 0, or None


def threshold_bounds(n, cfg, ratios=None, step=1e-3):
    """Scan C/B for player n against an opponent playing 0.

    Utilities are normalized by B, so only the ratio matters.
    """
    _check_player(n)
    grid = cfg.strategy_grid
    b = np.array([benefit(n, *_pair(n, p, 0.0), cfg) for p in grid])
    cost = 1.0 - grid
    if ratios is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            top = np.max(np.where(cost > 0, b / cost, 0.0))
        ratios = np.arange(0.0, max(1.0, 2.0 * top) + step, step)
    ratios = np.round(np.asarray(ratios, dtype=float), 9)
    alpha, beta, positivity = 0.0, float("inf"), 0.0
    interior = []
    for r in ratios:
        u = b - r * cost
        k = _argmax_low(u)
        if k == 0:
            alpha = max(alpha, r)
        if k == len(grid) - 1:
            beta = min(beta, r)
        elif u[k] >= 0:
            positivity = max(positivity, r)
        if 0 < k < len(grid) - 1 and u[k] > 0:
            interior.append(r)
    span = (float(min(interior)), float(max(interior))) if interior else None
    return ThresholdBounds(float(alpha), float(beta), float(positivity), span)


def caas_equilibrium(cfg):
    """Equilibrium when exactly one player is privacy-unconcerned (C = 0).

    The unconcerned player plays 0. For the concerned player every discrete
    local maximum of its utility with u > 0 is a candidate (p = 0 qualifies
    exactly when the benefit at 0 exceeds C/B); the best candidate wins. With
    no candidate both players train alone, reported as (1, 1).
    """
    zero = [w.privacy == 0 for w in cfg.weights]
    if sum(zero) != 1:
        raise ValueError("caas_equilibrium needs exactly one unconcerned player; use br_dynamics")
    n = 1 if zero[1] else 2
    u = _own_utilities(n, 0.0, cfg)
    last = len(u) - 1
    candidates = [
        k for k in range(last + 1)
        if u[k] > 0
        and (k == 0 or u[k] >= u[k - 1] - TIE_TOL)
        and (k == last or u[k] >= u[k + 1] - TIE_TOL)
    ]
    if not candidates:
        return _train_alone_result(cfg, [])
    best = max(u[k] for k in candidates)
    k = next(k for k in candidates if u[k] >= best - TIE_TOL)
    rho = float(cfg.strategy_grid[k])
    return _result(_pair(n, rho, 0.0), cfg, [], "converged")


def br_dynamics(cfg, start=(0.0, 0.0), first=1, max_rounds=None):
    """Alternating best responses until a full round changes nothing.

    If the fixed point leaves some player with negative utility, that player
    would rather train alone and (1, 1) is reported instead.
    """
    _check_player(first)
    grid = cfg.strategy_grid
    if max_rounds is None:
        max_rounds = len(grid) ** 2
    p = [float(start[0]), float(start[1])]
    trace = [tuple(p)]
    order = (first, 3 - first)
    for _ in range(max_rounds):
        before = tuple(p)
        for n in order:
            p[n - 1] = best_response(n, p[2 - n], cfg)
            trace.append(tuple(p))
        if tuple(p) == before:
            break
    else:
        return _result(tuple(p), cfg, trace, "not-converged")
    if utility(1, *p, cfg) < 0 or utility(2, *p, cfg) < 0:
        return _train_alone_result(cfg, trace)
    status = "trivial" if tuple(p) == (1.0, 1.0) else "converged"
    return _result(tuple(p), cfg, trace, status)


def verify_ne(candidate, cfg, tol=TIE_TOL):
    """True when no player has a strictly better unilateral deviation on the grid."""
    p1, p2 = float(candidate[0]), float(candidate[1])
    for n, own, other in ((1, p1, p2), (2, p2, p1)):
        current = utility(n, *_pair(n, own, other), cfg)
        if _own_utilities(n, other, cfg).max() > current + tol:
            return False
    return True


def pure_equilibria(cfg):
    grid = cfg.strategy_grid
    return [(float(a), float(b)) for a in grid for b in grid if verify_ne((a, b), cfg)]


def check_potential(cfg, nodes=None, h=1e-3):
    """Largest gap between the players' mixed partials of u/B.

    A zero residual means the normalized game is an exact potential game.
    """
    nodes = np.linspace(0.0, 1.0, 21)[1:-1] if nodes is None else np.asarray(nodes, float)
    if len(nodes) < 3:
        raise ValueError("need at least 3 interior nodes per axis")

    def mixed(n, a, b):
        f = lambda x, y: utility(n, x, y, cfg) / cfg.weights[n - 1].accuracy
        return (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4 * h * h)

    return max(abs(mixed(1, a, b) - mixed(2, a, b)) for a in nodes for b in nodes)
