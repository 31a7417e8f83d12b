"""Network architecture description and shape arithmetic.

The default stand-in architecture: three conv blocks
(conv3x3 same-pad -> ReLU -> maxpool2x2 -> dropout) with 8/16/32 channels,
then flatten -> dense -> ReLU -> dropout -> dense(n_classes). Dropout is
applied after every layer except the final one. Everything is configurable
so alternative readings of the architecture can be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InvalidConfigError


@dataclass(frozen=True)
class ArchSpec:
    input_shape: tuple[int, int, int] = (1, 51, 199)  # channels, height, width
    conv_channels: tuple[int, ...] = (8, 16, 32)
    dense_units: int = 64
    n_classes: int = 3
    dropout: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise InvalidConfigError(f"bad input_shape {self.input_shape}")
        if not self.conv_channels or any(c < 1 for c in self.conv_channels):
            raise InvalidConfigError(f"bad conv_channels {self.conv_channels}")
        if self.dense_units < 1 or self.n_classes < 2:
            raise InvalidConfigError("dense_units >= 1 and n_classes >= 2 required")
        if not (0.0 <= self.dropout < 1.0):
            raise InvalidConfigError(f"dropout {self.dropout} outside [0, 1)")
        h, w = self.input_shape[1], self.input_shape[2]
        for i, _ in enumerate(self.conv_channels):
            h, w = h // 2, w // 2
            if h < 1 or w < 1:
                raise InvalidConfigError(
                    f"input {self.input_shape} too small for {len(self.conv_channels)} pool stages"
                )

    def block_spatial_shapes(self) -> list[tuple[int, int]]:
        """Spatial dims after each conv+pool block (pooling floors odd dims)."""
        h, w = self.input_shape[1], self.input_shape[2]
        shapes = []
        for _ in self.conv_channels:
            h, w = h // 2, w // 2
            shapes.append((h, w))
        return shapes

    def flat_features(self) -> int:
        h, w = self.block_spatial_shapes()[-1]
        return self.conv_channels[-1] * h * w

    def to_json(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "conv_channels": list(self.conv_channels),
            "dense_units": self.dense_units,
            "n_classes": self.n_classes,
            "dropout": self.dropout,
        }

    @staticmethod
    def from_json(d: dict) -> "ArchSpec":
        return ArchSpec(
            input_shape=tuple(d["input_shape"]),
            conv_channels=tuple(d["conv_channels"]),
            dense_units=d["dense_units"],
            n_classes=d["n_classes"],
            dropout=d["dropout"],
        )
