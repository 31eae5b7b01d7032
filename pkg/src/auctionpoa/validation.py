"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .dataset import AuctionDataset

MODES = ("joint", "independent")


def check_dataset(X) -> AuctionDataset:
    if not isinstance(X, AuctionDataset):
        raise TypeError(f"expected an AuctionDataset, got {type(X).__name__}")
    return X


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def check_scalar(x, name, *, min_val=None, max_val=None, include_min=True, integer=False):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(x, bool) or not isinstance(x, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a real number'}, got {x!r}")
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite")
    if min_val is not None and (x < min_val or (not include_min and x == min_val)):
        op = ">=" if include_min else ">"
        raise ValueError(f"{name} must be {op} {min_val}, got {x}")
    if max_val is not None and x > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {x}")
    return x


def check_seed(seed, name="random_state"):
    if seed is None:
        raise ValueError(f"{name} is required for stochastic steps")
    return check_scalar(seed, name, min_val=0, integer=True)
