import numpy as np


def derive_seed(*keys):
    """Deterministic 32-bit seed from a master seed and stage/cell indices."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
