"""Problem instances: margins, block parameters and the critical value."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass


class MarginError(ValueError):
    """Margins are malformed or infeasible."""


@dataclass(frozen=True)
class Margins:
    """Row and column sums of a contingency table.

    Stored as tuples of Python ints, so ``N`` is exact at any size.
    """

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows)
        cols = tuple(int(c) for c in self.cols)
        if not rows or not cols:
            raise MarginError("need at least one row and one column")
        if min(rows) < 0 or min(cols) < 0:
            raise MarginError("margins must be nonnegative")
        if sum(rows) != sum(cols):
            raise MarginError(f"row total {sum(rows)} != column total {sum(cols)}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.cols)

    @property
    def N(self) -> int:
        return sum(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    def is_positive(self) -> bool:
        return min(self.rows) > 0 and min(self.cols) > 0

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "cols": list(self.cols)}

    @classmethod
    def from_dict(cls, d: dict) -> Margins:
        return cls(tuple(d["rows"]), tuple(d["cols"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> Margins:
        return cls.from_dict(json.loads(s))

    def check_table(self, table) -> None:
        """Raise MarginError unless ``table`` is a nonnegative integer table with these margins."""
        rows = [int(sum(int(x) for x in row)) for row in table]
        if len(rows) != self.m or any(len(row) != self.n for row in table):
            raise MarginError("table shape does not match margins")
        if any(int(x) < 0 for row in table for x in row):
            raise MarginError("table has negative entries")
        cols = [sum(int(table[i][j]) for i in range(self.m)) for j in range(self.n)]
        if tuple(rows) != self.rows or tuple(cols) != self.cols:
            raise MarginError("table margins do not match")


def _floor_pow(n: int, delta: float) -> int:
    # the epsilon keeps exact powers such as 8**(1/3) from flooring down
    return max(math.floor(n**delta + 1e-9), 1)


@dataclass(frozen=True)
class BlockSpec:
    """Parameters (n, delta, B, C) of the block margins.

    The first ``k = floor(n**delta)`` rows and columns carry sum
    ``floor(B*C*n)``, the last ``n`` carry ``floor(C*n)``.  ``delta = 1`` is
    accepted (then ``k = n``) although the asymptotics need ``delta < 1``.
    """

    n: int
    delta: float
    B: float
    C: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta!r}")
        if not self.B > 0 or not self.C > 0:
            raise ValueError("B and C must be positive")
        object.__setattr__(self, "n", int(self.n))

    @property
    def k(self) -> int:
        return _floor_pow(self.n, self.delta)

    @property
    def size(self) -> int:
        return self.k + self.n

    @property
    def r_big(self) -> int:
        return math.floor(self.B * self.C * self.n)

    @property
    def r_small(self) -> int:
        return math.floor(self.C * self.n)

    @property
    def Bc(self) -> float:
        return critical_B(self.C)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": self.delta, "B": self.B, "C": self.C}


class BlockLabel(enum.Enum):
    TopLeft = "TL"
    TopRight = "TR"
    BottomLeft = "BL"
    BottomRight = "BR"


def block_margins(spec: BlockSpec) -> Margins:
    """Square block margins; heavy rows/columns first."""
    if spec.r_small < 1:
        # zero light margins would make the typical table degenerate
        raise MarginError(f"floor(C*n) = 0 for {spec}")
    v = (spec.r_big,) * spec.k + (spec.r_small,) * spec.n
    return Margins(v, v)


def critical_B(C: float) -> float:
    """B_c = 1 + sqrt(1 + 1/C)."""
    if not C > 0:
        raise ValueError(f"C must be positive, got {C!r}")
    return 1.0 + math.sqrt(1.0 + 1.0 / C)


def block_of(spec: BlockSpec, i: int, j: int) -> BlockLabel:
    """Block label of the 0-based index ``(i, j)``."""
    size = spec.size
    if not (0 <= i < size and 0 <= j < size):
        raise IndexError(f"({i}, {j}) outside a {size}x{size} table")
    k = spec.k
    if i < k:
        return BlockLabel.TopLeft if j < k else BlockLabel.TopRight
    return BlockLabel.BottomLeft if j < k else BlockLabel.BottomRight
