"""Published per-player trade-off tables (Netflix-subset experiment).

Values are normalized improvements y on the axes {0, 0.2, 0.4, 0.6}, stored
in this package's ``[p1, p2]`` orientation. The source prints Player 2's
tables with rows indexed by p2, so those are transposed here. The alone
errors were not published; theta is set to 1 as a placeholder.
"""

import numpy as np

from .tradeoff import DEFAULT_AXES, TradeoffGrid

# rows p1, columns p2
_APPROX_1 = [[0.28, 0.26, 0.24, -0.05],
             [0.25, 0.16, 0.15, -0.05],
             [-0.07, -0.10, -0.19, -0.37],
             [-1.01, -1.16, -1.37, -1.72]]
# rows p2, columns p1
_APPROX_2 = [[0.17, 0.16, 0.15, -0.05],
             [0.14, 0.12, 0.12, -0.07],
             [-0.14, -0.17, -0.28, -0.60],
             [-1.19, -1.21, -1.28, -1.83]]
# rows p1, columns p2
_TRUE_1 = [[0.17, 0.14, 0.11, -0.03],
           [0.15, 0.12, 0.08, -0.26],
           [-0.13, -0.19, -0.33, -0.69],
           [-1.16, -1.32, -1.49, -2.08]]
# rows p2, columns p1
_TRUE_2 = [[0.31, 0.23, 0.17, -0.05],
           [0.31, 0.22, 0.11, -0.18],
           [-0.14, -0.16, -0.22, -0.52],
           [-1.13, -1.25, -1.30, -1.85]]


def _grid(y1, y2_rows_p2):
    return TradeoffGrid(DEFAULT_AXES, DEFAULT_AXES, np.array(y1), np.array(y2_rows_p2).T,
                        mechanism="bdp", provenance="fixture")


def approx_grid():
    """Self-division approximations of both players' surfaces."""
    return _grid(_APPROX_1, _APPROX_2)


def true_grid():
    """Surfaces interpolated from the jointly measured data."""
    return _grid(_TRUE_1, _TRUE_2)
