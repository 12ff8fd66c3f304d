import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from colgame.recsys import RatingDataset  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
ML100K = ROOT / "data" / "ml-100k.csv"


@pytest.fixture
def toy_residual():
    """40 users x 30 items, residual-scale ratings, every pair present."""
    rng = np.random.default_rng(7)
    users, items = np.meshgrid(np.arange(40), np.arange(30), indexing="ij")
    r = np.clip(rng.normal(0, 0.8, users.size), -2, 2)
    return RatingDataset(users.ravel(), items.ravel(), r, -2.0, 2.0)


def pytest_collection_modifyitems(config, items):
    if ML100K.exists():
        return
    skip = pytest.mark.skip(reason="data/ml-100k.csv missing; run scripts/fetch_ml100k.py")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
