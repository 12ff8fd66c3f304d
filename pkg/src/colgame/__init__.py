"""Two-player collaborative learning game with a matrix-factorization testbed."""

from .game import (EquilibriumResult, GameConfig, PlayerWeights, best_response, br_dynamics,
                   caas_equilibrium, check_potential, price_of_privacy, pure_equilibria,
                   threshold_bounds, utility, verify_ne)
from .privacy import (MechanismSpec, SensitivityParams, apply_bdp, apply_suppression,
                      epsilon_to_p, p_to_epsilon, sensitivity)
from .recsys import (FactorModel, PreprocessResult, RatingDataset, TrainConfig, ingest,
                     preprocess, rmse, sgd_update, split_players, split_train_test,
                     synthetic_ratings, train_alone, train_together)
from .tradeoff import (BilinearSurface, PlayerData, TradeoffGrid, TradeoffSurface,
                       check_symmetric_derivatives, grid_rmse, heuristic_score, interpolate,
                       measure_grid, self_division, smooth_monotone, validate_phi_properties)

__version__ = "0.1.0"
