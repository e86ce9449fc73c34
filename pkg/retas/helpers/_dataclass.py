# Copyright (c) 2025 RETAS contributors
# Licensed under the MIT License.
# This file is part of retas


from dataclasses import asdict, dataclass, fields, replace
from enum import Enum

import numpy as np

from ._errors import DomainError

PARAM_NAMES = ("kappa", "beta", "p", "c", "sigma1_sq", "sigma2_sq", "A", "alpha")
# A = 0 is a valid model but has no log; the optimizer starts just above it
A_FLOOR = 1e-8


class WindowKind(str, Enum):
    WHOLE_PLANE = "whole_plane"
    RECTANGLE = "rectangle"


@dataclass(frozen=True)
class SpatialWindow:
    kind: WindowKind = WindowKind.WHOLE_PLANE
    x_min: float = -np.inf
    x_max: float = np.inf
    y_min: float = -np.inf
    y_max: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if self.kind is WindowKind.RECTANGLE:
            if not (self.x_min < self.x_max and self.y_min < self.y_max):
                raise DomainError(
                    f"Rectangle window needs x_min < x_max and y_min < y_max, got "
                    f"[{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
                )

    @classmethod
    def whole_plane(cls) -> "SpatialWindow":
        return cls()

    @classmethod
    def rectangle(cls, x_min: float, x_max: float, y_min: float, y_max: float) -> "SpatialWindow":
        return cls(WindowKind.RECTANGLE, float(x_min), float(x_max), float(y_min), float(y_max))

    @property
    def is_whole_plane(self) -> bool:
        return self.kind is WindowKind.WHOLE_PLANE

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.is_whole_plane:
            return np.isfinite(x) & np.isfinite(y)
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    def to_dict(self) -> dict:
        if self.is_whole_plane:
            return {"kind": self.kind.value}
        return {
            "kind": self.kind.value,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> "SpatialWindow":
        if not data or WindowKind(data.get("kind", "whole_plane")) is WindowKind.WHOLE_PLANE:
            return cls.whole_plane()
        return cls.rectangle(data["x_min"], data["x_max"], data["y_min"], data["y_max"])


@dataclass(frozen=True)
class RetasParams:
    """
    Intensity parameters of the RETAS model.

    Renewal hazard (kappa, beta), Omori response (p, c), Gaussian spatial
    response (sigma1_sq, sigma2_sq) and boost function (A, alpha).
    """

    kappa: float
    beta: float
    p: float
    c: float
    sigma1_sq: float
    sigma2_sq: float
    A: float
    alpha: float

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))

    def check(self) -> None:
        """Raise DomainError if any positivity constraint is violated."""
        bad = [
            name
            for name in ("kappa", "beta", "c", "sigma1_sq", "sigma2_sq")
            if not getattr(self, name) > 0
        ]
        if not self.p > 1:
            bad.append("p")
        if not self.A >= 0:
            bad.append("A")
        if not np.isfinite(self.alpha):
            bad.append("alpha")
        if bad:
            raise DomainError(f"Invalid RETAS parameters: {', '.join(bad)} ({self})")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "RetasParams":
        return cls(*[float(v) for v in values])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RetasParams":
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise DomainError(f"Unknown parameter names: {', '.join(sorted(unknown))}")
        return cls(**{name: data[name] for name in PARAM_NAMES})

    def with_values(self, **changes) -> "RetasParams":
        return replace(self, **changes)

    def to_unconstrained(self) -> np.ndarray:
        """Map to the optimizer space: log for the positive parameters, log(p - 1), alpha as is."""
        return np.array(
            [
                np.log(self.kappa),
                np.log(self.beta),
                np.log(self.p - 1.0),
                np.log(self.c),
                np.log(self.sigma1_sq),
                np.log(self.sigma2_sq),
                np.log(max(self.A, A_FLOOR)),
                self.alpha,
            ]
        )

    @classmethod
    def from_unconstrained(cls, z) -> "RetasParams":
        z = np.asarray(z, dtype=float)
        return cls(
            kappa=np.exp(z[0]),
            beta=np.exp(z[1]),
            p=1.0 + np.exp(z[2]),
            c=np.exp(z[3]),
            sigma1_sq=np.exp(z[4]),
            sigma2_sq=np.exp(z[5]),
            A=np.exp(z[6]),
            alpha=z[7],
        )


@dataclass(frozen=True)
class MagnitudeParams:
    gamma: float
    m0: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError(f"Magnitude rate gamma must be positive, got {self.gamma}")

    @property
    def mean_excess(self) -> float:
        """Mean of m - m0, the reciprocal of the rate."""
        return 1.0 / self.gamma


@dataclass(frozen=True)
class BandwidthMatrix:
    h11: float
    h12: float
    h22: float

    def __post_init__(self):
        if not (self.h11 > 0 and self.det > 0):
            raise DomainError(
                f"Bandwidth matrix must be symmetric positive definite, got "
                f"[[{self.h11}, {self.h12}], [{self.h12}, {self.h22}]]"
            )

    @property
    def det(self) -> float:
        return self.h11 * self.h22 - self.h12 * self.h12

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])

    def scaled(self, zeta: float) -> "BandwidthMatrix":
        if not zeta > 0:
            raise DomainError(f"Smoothing multiplier must be positive, got {zeta}")
        return BandwidthMatrix(self.h11 * zeta, self.h12 * zeta, self.h22 * zeta)

    @classmethod
    def from_matrix(cls, h) -> "BandwidthMatrix":
        h = np.asarray(h, dtype=float)
        return cls(h[0, 0], 0.5 * (h[0, 1] + h[1, 0]), h[1, 1])

    def to_dict(self) -> dict:
        return {"h11": self.h11, "h12": self.h12, "h22": self.h22}
