"""Rating data, preprocessing, splitting and SGD matrix factorization.

Datasets are kept as parallel numpy arrays of (user, item, rating). A dataset
also carries the *declared* user and item universes: subsetting ratings (by a
privacy mechanism or a train/test split) keeps them, so a user whose ratings
were all removed still owns a row in the factor model.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

# App. D clamp range for user averages and residual ratings.
RESIDUAL_BOUND = 2.0


class DataError(ValueError):
    """Raised for unusable rating data (parse failures, empty sets)."""


class ParseError(DataError):
    def __init__(self, path, lineno, line, reason):
        super().__init__(f"{path}:{lineno}: {reason}: {line!r}")
        self.lineno = lineno


class EmptyDatasetError(DataError):
    pass


class InfeasibleSplitError(DataError):
    pass


@dataclass(eq=False)
class RatingDataset:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    r_min: float = None
    r_max: float = None
    user_ids: np.ndarray = None
    item_ids: np.ndarray = None

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)
        if not (len(self.users) == len(self.items) == len(self.ratings)):
            raise ValueError("users, items and ratings must have equal length")
        if self.r_min is None or self.r_max is None:
            if len(self.ratings) == 0:
                raise EmptyDatasetError("cannot infer rating bounds of an empty dataset")
            self.r_min = float(self.ratings.min()) if self.r_min is None else self.r_min
            self.r_max = float(self.ratings.max()) if self.r_max is None else self.r_max
        self.r_min, self.r_max = float(self.r_min), float(self.r_max)
        if self.r_min > self.r_max:
            raise ValueError("r_min > r_max")
        if len(self.ratings) and (self.ratings.min() < self.r_min or self.ratings.max() > self.r_max):
            raise ValueError("rating outside declared bounds")
        self.user_ids = np.unique(self.users if self.user_ids is None else self.user_ids)
        self.item_ids = np.unique(self.items if self.item_ids is None else self.item_ids)
        if not np.isin(self.users, self.user_ids).all() or not np.isin(self.items, self.item_ids).all():
            raise ValueError("rating refers to an undeclared user or item")
        keys = self.users * (int(self.items.max(initial=0)) + 1) + self.items
        if len(np.unique(keys)) != len(keys):
            raise DataError("duplicate (user, item) pair")

    def __len__(self):
        return len(self.ratings)

    def __eq__(self, other):
        if not isinstance(other, RatingDataset):
            return NotImplemented
        return (
            self.r_min == other.r_min and self.r_max == other.r_max
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.ratings, other.ratings)
            and np.array_equal(self.user_ids, other.user_ids)
            and np.array_equal(self.item_ids, other.item_ids)
        )

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def rating_range(self):
        return self.r_max - self.r_min

    @property
    def density(self):
        if self.n_users == 0 or self.n_items == 0:
            return 0.0
        return len(self) / (self.n_users * self.n_items)

    def take(self, index, user_ids=None):
        """Subset of ratings at ``index``; universes are kept unless given."""
        index = np.asarray(index)
        if index.dtype != bool:
            index = index.astype(np.int64)
        return RatingDataset(
            self.users[index], self.items[index], self.ratings[index],
            self.r_min, self.r_max,
            user_ids=self.user_ids if user_ids is None else user_ids,
            item_ids=self.item_ids,
        )

    def with_ratings(self, ratings):
        return RatingDataset(self.users, self.items, ratings, self.r_min, self.r_max,
                             user_ids=self.user_ids, item_ids=self.item_ids)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["user", "item", "rating"])
            for u, i, r in zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()):
                writer.writerow([u, i, repr(r)])


def ingest(path, fmt="csv"):
    """Read ratings from a MovieLens ``.dat`` file or a ``user,item,rating`` CSV."""
    path = Path(path)
    if fmt not in ("movielens-dat", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    users, items, ratings = [], [], []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv":
                if lineno == 1 and line.replace(" ", "") == "user,item,rating":
                    continue
                fields = line.split(",")
                if len(fields) != 3:
                    raise ParseError(path, lineno, line, "expected 3 comma-separated fields")
            else:
                fields = line.split("::")
                if len(fields) != 4:
                    raise ParseError(path, lineno, line, "expected user::item::rating::timestamp")
            try:
                users.append(int(fields[0]))
                items.append(int(fields[1]))
                ratings.append(float(fields[2]))
            except ValueError:
                raise ParseError(path, lineno, line, "non-numeric field") from None
    if not ratings:
        raise EmptyDatasetError(f"{path}: no ratings")
    try:
        return RatingDataset(users, items, ratings)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


@dataclass
class PreprocessResult:
    residual: RatingDataset
    item_averages: dict
    user_averages: dict


def preprocess(ds, min_ratings=10):
    """Filter sparse users/items, subtract item then user means, clamp.

    The filter alternates item and user removal until nothing changes, so every
    survivor has at least ``min_ratings`` ratings.
    """
    if len(ds) == 0:
        raise EmptyDatasetError("cannot preprocess an empty dataset")
    keep = np.ones(len(ds), dtype=bool)
    while True:
        changed = False
        for ids in (ds.items, ds.users):
            uniq, inv, counts = np.unique(ids[keep], return_inverse=True, return_counts=True)
            sparse = counts[inv] < min_ratings
            if sparse.any():
                keep[np.flatnonzero(keep)[sparse]] = False
                changed = True
        if not changed:
            break
    if not keep.any():
        raise EmptyDatasetError(f"no user/item has {min_ratings} ratings after filtering")

    users, items, r = ds.users[keep], ds.items[keep], ds.ratings[keep]
    item_ids, item_inv = np.unique(items, return_inverse=True)
    item_avg = np.bincount(item_inv, weights=r) / np.bincount(item_inv)
    item_avg = np.clip(item_avg, ds.r_min, ds.r_max)
    r1 = r - item_avg[item_inv]

    user_ids, user_inv = np.unique(users, return_inverse=True)
    user_avg = np.bincount(user_inv, weights=r1) / np.bincount(user_inv)
    user_avg = np.clip(user_avg, -RESIDUAL_BOUND, RESIDUAL_BOUND)
    r2 = np.clip(r1 - user_avg[user_inv], -RESIDUAL_BOUND, RESIDUAL_BOUND)

    residual = RatingDataset(users, items, r2, -RESIDUAL_BOUND, RESIDUAL_BOUND)
    return PreprocessResult(
        residual,
        dict(zip(item_ids.tolist(), item_avg.tolist())),
        dict(zip(user_ids.tolist(), user_avg.tolist())),
    )


def split_players(ds, size_ratio=1.0, seed=0, tolerance=0.05):
    """Assign whole users to two players so |D1|/|D2| is close to ``size_ratio``.

    Users are visited in a seeded random order and given to Player 1 until its
    share of ratings reaches ``size_ratio / (1 + size_ratio)``.
    """
    if size_ratio <= 0:
        raise ValueError("size_ratio must be positive")
    uniq, counts = np.unique(ds.users, return_counts=True)
    if len(uniq) < 2:
        raise InfeasibleSplitError("need at least two users with ratings")
    order = np.random.default_rng(seed).permutation(len(uniq))
    cum = np.cumsum(counts[order])
    target = len(ds) * size_ratio / (1.0 + size_ratio)
    k = int(np.searchsorted(cum, target))  # first prefix reaching target
    candidates = [c for c in (k, k + 1) if 1 <= c < len(uniq)]
    if not candidates:
        raise InfeasibleSplitError(f"ratio {size_ratio} leaves one player without users")
    # prefix length c means users order[:c]
    best = min(candidates, key=lambda c: abs(cum[c - 1] / (len(ds) - cum[c - 1]) - size_ratio))
    n1 = cum[best - 1]
    realized = n1 / (len(ds) - n1)
    if abs(realized - size_ratio) > tolerance * size_ratio:
        raise InfeasibleSplitError(
            f"realized ratio {realized:.4f} is not within {tolerance:.0%} of {size_ratio}")
    users1 = np.sort(uniq[order[:best]])
    users2 = np.sort(uniq[order[best:]])
    in1 = np.isin(ds.users, users1)
    return ds.take(np.flatnonzero(in1), users1), ds.take(np.flatnonzero(~in1), users2)


def split_train_test(ds, train_fraction=0.8, seed=0):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    if len(ds) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_train = int(round(train_fraction * len(ds)))
    return ds.take(np.sort(perm[:n_train])), ds.take(np.sort(perm[n_train:]))


@dataclass(frozen=True)
class TrainConfig:
    features: int = 4
    iterations: int = 20
    learning_rate: float = 0.0075
    regularization: float = 0.01
    feature_bound: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.features < 1 or self.iterations < 1:
            raise ValueError("features and iterations must be >= 1")
        if self.learning_rate <= 0 or self.regularization < 0 or self.feature_bound <= 0:
            raise ValueError("invalid learning rate, regularization or bound")


@dataclass(eq=False)
class FactorModel:
    user_features: np.ndarray  # |U| x k
    item_features: np.ndarray  # k x |I|
    user_ids: np.ndarray
    item_ids: np.ndarray
    feature_bound: float
    _user_index: dict = field(init=False, repr=False)
    _item_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.user_features.shape[1] != self.item_features.shape[0]:
            raise ValueError("feature dimensions disagree")
        self._user_index = {u: k for k, u in enumerate(self.user_ids.tolist())}
        self._item_index = {i: k for k, i in enumerate(self.item_ids.tolist())}

    def user_rows(self, users):
        return np.array([self._user_index.get(u, -1) for u in users.tolist()], dtype=np.int64)

    def item_cols(self, items):
        return np.array([self._item_index.get(i, -1) for i in items.tolist()], dtype=np.int64)

    def predict(self, users, items):
        rows, cols = self.user_rows(np.asarray(users)), self.item_cols(np.asarray(items))
        if (rows < 0).any() or (cols < 0).any():
            raise KeyError("unknown user or item")
        return np.einsum("nk,kn->n", self.user_features[rows], self.item_features[:, cols])


def sgd_update(p_u, q_i, r, gamma, lam, bound, descend=True):
    """One SGD step on a single rating.

    With ``descend=False`` the update is applied with ``e = p.q - r`` and plus
    signs as literally printed in the source formula; that variant climbs the
    squared error and exists only for comparison.
    """
    p_u, q_i = np.asarray(p_u, float), np.asarray(q_i, float)
    if p_u.shape != q_i.shape:
        raise ValueError("p_u and q_i must have the same length")
    e = r - p_u @ q_i if descend else p_u @ q_i - r
    p_new = p_u + gamma * (e * q_i - lam * p_u)
    q_new = q_i + gamma * (e * p_u - lam * q_i)
    return np.clip(p_new, -bound, bound), np.clip(q_new, -bound, bound)


@njit(cache=True)
def _sgd_pass(rows, cols, ratings, order, P, Q, gamma, lam, bound):
    k = P.shape[1]
    for idx in order:
        u = rows[idx]
        i = cols[idx]
        e = ratings[idx]
        for f in range(k):
            e -= P[u, f] * Q[f, i]
        for f in range(k):
            p = P[u, f]
            q = Q[f, i]
            p_new = p + gamma * (e * q - lam * p)
            q_new = q + gamma * (e * p - lam * q)
            P[u, f] = min(max(p_new, -bound), bound)
            Q[f, i] = min(max(q_new, -bound), bound)


def _streams(seed):
    # init, player-1 order, player-2 order: independent so an empty second
    # player leaves the first player's stream untouched.
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _init(rng, n, k, bound):
    return rng.uniform(-bound / 2, bound / 2, size=(n, k))


def train_alone(train, cfg):
    if len(train) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    m1, _, _ = train_together(train, None, cfg)
    return m1


def train_together(train1, train2, cfg):
    """Sequential collaborative training sharing only the item features.

    Each round Player 1 makes one shuffled pass over its ratings updating
    (P1, Q), then Player 2 does the same with (P2, Q). ``train2=None`` (or an
    empty dataset) gives training alone.
    """
    if train2 is not None and np.intersect1d(train1.user_ids, train2.user_ids).size:
        raise ValueError("players must have disjoint user sets")
    item_ids = train1.item_ids if train2 is None else np.union1d(train1.item_ids, train2.item_ids)
    init_rng, *order_rngs = _streams(cfg.seed)
    k, bound = cfg.features, cfg.feature_bound

    players = [train1] if train2 is None else [train1, train2]
    P = [_init(init_rng, players[0].n_users, k, bound)]
    Q = np.ascontiguousarray(_init(init_rng, len(item_ids), k, bound).T)
    if train2 is not None:
        P.append(_init(init_rng, train2.n_users, k, bound))

    item_pos = np.searchsorted(item_ids, np.concatenate([d.items for d in players]))
    data = []
    start = 0
    for d in players:
        rows = np.searchsorted(d.user_ids, d.users)
        cols = item_pos[start:start + len(d)]
        start += len(d)
        data.append((rows, cols, d.ratings))

    for _ in range(cfg.iterations):
        for n, (rows, cols, r) in enumerate(data):
            if len(r) == 0:
                continue
            order = order_rngs[n].permutation(len(r))
            _sgd_pass(rows, cols, r, order, P[n], Q, cfg.learning_rate,
                      cfg.regularization, bound)

    models = [FactorModel(P[n], Q, d.user_ids, item_ids, bound) for n, d in enumerate(players)]
    if train2 is None:
        return models[0], None, Q
    return models[0], models[1], Q


def rmse(model, test):
    """Root mean squared error in residual space; cold users/items are skipped."""
    rows, cols = model.user_rows(test.users), model.item_cols(test.items)
    known = (rows >= 0) & (cols >= 0)
    skipped = int((~known).sum())
    if skipped:
        log.warning("rmse: skipped %d test ratings with cold users or items", skipped)
    if not known.any():
        raise EmptyDatasetError("no test rating has a known user and item")
    pred = np.einsum("nk,kn->n", model.user_features[rows[known]],
                     model.item_features[:, cols[known]])
    return math.sqrt(float(np.mean((pred - test.ratings[known]) ** 2)))


def synthetic_ratings(n_users=2000, n_items=500, density=0.1, rank=4, noise=0.5, seed=0):
    """Dense low-rank surrogate with integer ratings in [1, 5].

    Ratings are ``3 + <u, v>/sqrt(rank) + noise`` rounded and clipped, with
    standard normal user/item factors and each pair observed with probability
    ``density``.
    """
    rng = np.random.default_rng(seed)
    U = rng.normal(0.0, 1.0, (n_users, rank))
    V = rng.normal(0.0, 1.0, (n_items, rank))
    users, items = np.nonzero(rng.random((n_users, n_items)) < density)
    raw = np.einsum("nk,nk->n", U[users], V[items]) / math.sqrt(rank)
    ratings = np.clip(np.round(3.0 + raw + rng.normal(0.0, noise, len(users))), 1.0, 5.0)
    return RatingDataset(users, items, ratings, 1.0, 5.0)
