"""Process-wide knobs shared by the modules."""

import os

DEFAULT_MAX_DIM = 256
PSD_TOL = 1e-10
TP_TOL = 1e-9


def max_dim() -> int:
    """Dense dimension cap; ``CONVLAB_MAX_DIM`` overrides the default of 256."""
    raw = os.environ.get("CONVLAB_MAX_DIM")
    if not raw:
        return DEFAULT_MAX_DIM
    value = int(raw)
    if value < 1:
        raise ValueError("CONVLAB_MAX_DIM must be a positive integer")
    return value


class DimensionCapError(ValueError):
    """Raised when a dense object would exceed the configured dimension cap."""


def check_dim(dim: int, what: str = "dimension") -> None:
    cap = max_dim()
    if dim > cap:
        raise DimensionCapError(f"{what} {dim} exceeds cap {cap} (set CONVLAB_MAX_DIM)")
