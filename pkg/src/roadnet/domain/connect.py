from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from ..core.errors import ShapeMismatchError


@dataclass(slots=True, frozen=True, eq=False)
class ConnectBatch:
    """Pair features of one center node against its candidate neighbours.

    ``features`` has one row per candidate slot; rows with ``mask == False``
    are padding and are excluded from attention and loss.
    """

    features: npt.NDArray[np.float64]
    mask: npt.NDArray[np.bool_]
    center: int = -1
    candidates: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ShapeMismatchError(f"features must be 2-D, got ndim={self.features.ndim}")
        if self.mask.shape != (self.features.shape[0],):
            raise ShapeMismatchError(
                f"mask length {self.mask.shape} != rows {self.features.shape[0]}"
            )

    @property
    def rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def width(self) -> int:
        return int(self.features.shape[1])


@dataclass(slots=True, frozen=True, eq=False)
class LabeledBatch:
    batch: ConnectBatch
    labels: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.labels.shape != (self.batch.rows,):
            raise ShapeMismatchError(
                f"labels length {self.labels.shape} != rows {self.batch.rows}"
            )


@dataclass(slots=True)
class TrainResult:
    loss_curve: list[float] = field(default_factory=list)
    accuracy: float = 0.0
