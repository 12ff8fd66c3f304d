"""Input-perturbation mechanisms and the privacy-parameter scale.

Both mechanisms act on the training ratings before any training starts. The
common privacy scale is ``p`` in [0, 1]: 0 means no protection and 1 means
the data is withheld entirely.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

KINDS = ("sup", "bdp")


def epsilon_to_p(eps):
    if eps < 0 or math.isnan(eps):
        raise ValueError(f"epsilon must be non-negative, got {eps}")
    if math.isinf(eps):
        return 0.0
    return 1.0 / (eps + 1.0)


def p_to_epsilon(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return math.inf
    return 1.0 / p - 1.0


@dataclass(frozen=True)
class SensitivityParams:
    features: int
    iterations: int
    learning_rate: float
    regularization: float
    rating_range: float
    p_max: float
    q_max: float
    variant: str = "paper-eq6"

    @classmethod
    def from_config(cls, cfg, rating_range, variant="paper-eq6"):
        return cls(cfg.features, cfg.iterations, cfg.learning_rate, cfg.regularization,
                   rating_range, cfg.feature_bound, cfg.feature_bound, variant)


def sensitivity(params):
    """Bound on one rating's influence on the shared item features.

    ``paper-eq6`` subtracts the regularization term (reproduces the published
    1.197); ``appendix-c`` adds it, which is the conservative per-update bound.
    """
    values = (params.features, params.iterations, params.learning_rate,
              params.regularization, params.rating_range, params.p_max, params.q_max)
    if any(v < 0 for v in values):
        raise ValueError("sensitivity parameters must be non-negative")
    reg = params.regularization * params.q_max
    if params.variant == "paper-eq6":
        per_update = params.rating_range * params.p_max - reg
    elif params.variant == "appendix-c":
        per_update = params.rating_range * params.p_max + reg
    else:
        raise ValueError(f"unknown variant {params.variant!r}")
    if per_update < 0:
        raise ValueError("regularization term exceeds the rating term; sensitivity would be negative")
    return params.features * params.iterations * params.learning_rate * per_update


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def apply_suppression(ds, p, seed):
    """Keep a uniform random ``round((1-p)|D|)`` ratings."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    keep = _round_half_up((1.0 - p) * len(ds))
    idx = np.random.default_rng(seed).choice(len(ds), size=keep, replace=False)
    return ds.take(np.sort(idx))


def laplace_noise(size, scale, seed):
    return np.random.default_rng(seed).laplace(0.0, scale, size=size)


def apply_bdp(ds, eps, sens, seed):
    """Add Laplace(sens/eps) noise to every rating and clamp to the rating bounds."""
    if math.isinf(eps):
        return ds.with_ratings(ds.ratings.copy())
    if not eps > 0:
        raise ValueError("epsilon must be positive; p=1 means withholding the data")
    noisy = ds.ratings + laplace_noise(len(ds), sens / eps, seed)
    return ds.with_ratings(np.clip(noisy, ds.r_min, ds.r_max))


@dataclass(frozen=True)
class MechanismSpec:
    kind: str
    p: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def epsilon(self):
        return p_to_epsilon(self.p)

    def apply(self, ds, sens=None):
        if self.p == 1.0:
            return ds.take(np.array([], dtype=np.int64))
        if self.kind == "sup":
            return apply_suppression(ds, self.p, self.seed)
        if sens is None:
            raise ValueError("bounded DP needs a sensitivity")
        return apply_bdp(ds, self.epsilon, sens, self.seed)

    def to_json(self):
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["kind"], float(d["p"]), int(d["seed"]))
