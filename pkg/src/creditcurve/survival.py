"""Parametric survival curves and the rating grid.

Single-name curves use the three-parameter family

    Q(T) = (1 + cT)^((b-a)/c) * exp(-bT)

whose forward hazard (a + bcT)/(1 + cT) runs monotonically from ``a``
at T = 0 to ``b`` as T grows, with ``c`` (per annum) setting how fast.

For sector work the same family is indexed by credit rating on the
linear 18-point scale (AAA = 1 ... CCC = 18).  Anchors for (a, b) live
at AA = 3, BBB = 9 and B = 15; between and beyond them ln a and ln b
are linear in the rating index, so spreads move in geometric
progression across ratings and curves of different ratings never cross
when the anchors are ordered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SurvivalParams",
    "RatingGrid",
    "RecoverySchedule",
    "RATING_SYMBOLS",
    "ANCHOR_RATINGS",
    "validate_rating",
]

RATING_SYMBOLS = (
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-",
    "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-",
    "B+", "B", "B-", "CCC+", "CCC",
)

ANCHOR_RATINGS = (3, 9, 15)  # AA, BBB, B

C_BOUNDS = (0.05, 0.2)  # suggested range for the shape parameter when fitting


def validate_rating(r: int) -> int:
    if not isinstance(r, (int, np.integer)) or isinstance(r, bool):
        raise ValueError(f"rating must be an integer on the 1..18 scale, got {r!r}")
    if not 1 <= r <= 18:
        raise ValueError(f"rating index {r} outside the 1..18 scale")
    return int(r)


@dataclass(frozen=True)
class SurvivalParams:
    """Hazard parameters: short-end ``a``, long-end ``b``, shape ``c``.

    ``a`` and ``b`` may be zero (riskless limit); ``c`` must be positive.
    """

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise ValueError("hazard parameters a, b must be >= 0")
        if self.c <= 0:
            raise ValueError("shape parameter c must be > 0")

    @classmethod
    def flat(cls, hazard: float, c: float = 0.1) -> "SurvivalParams":
        return cls(a=hazard, b=hazard, c=c)

    def scaled(self, factor: float) -> "SurvivalParams":
        """Multiplicative shift of both hazard levels; shape preserved."""
        if factor < 0:
            raise ValueError("scale factor must be >= 0")
        return SurvivalParams(a=self.a * factor, b=self.b * factor, c=self.c)

    def survival_probability(self, t) -> np.ndarray | float:
        """Q(T); strictly decreasing, Q(0) = 1."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0):
            raise ValueError("tenor must be >= 0")
        q = np.exp(((self.b - self.a) / self.c) * np.log1p(self.c * t_arr)
                   - self.b * t_arr)
        return q if t_arr.ndim else float(q)

    def forward_hazard(self, t) -> np.ndarray | float:
        """-d ln Q / dT = (a + bcT)/(1 + cT)."""
        t_arr = np.asarray(t, dtype=float)
        h = (self.a + self.b * self.c * t_arr) / (1.0 + self.c * t_arr)
        return h if t_arr.ndim else float(h)


def _log_interp(r: float, anchors: tuple[float, float, float]) -> float:
    # linear in rating index through (3, 9, 15); linear extrapolation outside
    la = [math.log(x) for x in anchors]
    r1, r2, r3 = ANCHOR_RATINGS
    if r <= r2:
        t = (r - r1) / (r2 - r1)
        return math.exp(la[0] + t * (la[1] - la[0]))
    t = (r - r2) / (r3 - r2)
    return math.exp(la[1] + t * (la[2] - la[1]))


@dataclass(frozen=True)
class RatingGrid:
    """Seven-parameter rating grid: (a, b) anchors at AA/BBB/B, shared c.

    Anchors must be positive and non-decreasing in rating; violating
    that raises rather than silently repairing, since a crossing grid
    has no sound interpretation.
    """

    anchors_a: tuple[float, float, float]
    anchors_b: tuple[float, float, float]
    c: float

    def __post_init__(self) -> None:
        for name, anchors in (("a", self.anchors_a), ("b", self.anchors_b)):
            if len(anchors) != 3:
                raise ValueError(f"anchors_{name} must have 3 entries (AA, BBB, B)")
            if any(x <= 0 for x in anchors):
                raise ValueError(f"anchors_{name} must be positive")
            if not (anchors[0] <= anchors[1] <= anchors[2]):
                raise ValueError(
                    f"anchors_{name} must be non-decreasing in rating (no-crossing)")
        if self.c <= 0:
            raise ValueError("shape parameter c must be > 0")

    def params_for_rating(self, r: int) -> SurvivalParams:
        """Log-linear interpolation of the anchors at rating ``r``."""
        r = validate_rating(r)
        return SurvivalParams(
            a=_log_interp(r, self.anchors_a),
            b=_log_interp(r, self.anchors_b),
            c=self.c,
        )


@dataclass(frozen=True)
class RecoverySchedule:
    """Rating-linked recovery: max(0.70 - 0.03 * rating, floor)."""

    floor: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("recovery floor must be in [0, 1)")

    def recovery_for_rating(self, r: int) -> float:
        r = validate_rating(r)
        return max(0.70 - 0.03 * r, self.floor)
