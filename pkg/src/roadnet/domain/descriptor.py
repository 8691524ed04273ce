from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ..core.errors import ShapeMismatchError

DEFAULT_BINS = 36

# coord (2, normalised by extent) followed by the direction bins
NodeFeature = npt.NDArray[np.float64]


@dataclass(slots=True, frozen=True, eq=False)
class NodeDescriptor:
    coord: tuple[float, float]
    bins: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim != 1:
            raise ShapeMismatchError(f"direction bins must be 1-D, got shape {bins.shape}")
        if bins.size and (bins.min() < 0.0 or bins.max() > 1.0):
            raise ShapeMismatchError("direction bins must lie in [0, 1]")
        object.__setattr__(self, "bins", bins)

    @property
    def n_bins(self) -> int:
        return int(self.bins.shape[0])

    def set_bins(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.bins >= 0.5)]
