"""Exact counting and enumeration of contingency tables, and the g(Z) bound."""
from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from margin_phase.core import Margins
from margin_phase.typical import g_value, solve_typical

DEFAULT_BUDGET = 10**7


class BudgetExceeded(RuntimeError):
    """The counting DP would need more memo entries than allowed."""


def default_budget() -> int:
    return int(os.environ.get("MARGIN_PHASE_BUDGET", DEFAULT_BUDGET))


def _group_moves(groups, c):
    """Ways to subtract a total of ``c`` from a residual multiset.

    ``groups`` is a list of (value, multiplicity).  Rows sharing a residual
    value are exchangeable, so within a group we choose a multiset of
    amounts and weight it by the number of distinct assignments.  Yields
    (new residual values, weight).
    """
    if not groups:
        if c == 0:
            yield [], 1
        return
    (v, mult), rest = groups[0], groups[1:]
    cap_rest = sum(val * mu for val, mu in rest)

    def multisets(slots, total, top):
        # nonincreasing sequences of length `slots`, entries <= top, summing to total
        if slots == 0:
            if total == 0:
                yield []
            return
        if total > slots * top:
            return
        for t in range(min(top, total), -1, -1):
            if t * slots < total:
                break
            for tail in multisets(slots - 1, total - t, t):
                yield [t] + tail

    for s in range(max(0, c - cap_rest), min(c, v * mult) + 1):
        for takes in multisets(mult, s, v):
            counts = Counter(takes)
            w = math.factorial(mult)
            for q in counts.values():
                w //= math.factorial(q)
            left = [v - t for t in takes]
            for tail, wt in _group_moves(rest, c - s):
                yield left + tail, w * wt


class TableCounter:
    """Column-by-column DP over sorted residual row sums.

    Columns are processed in decreasing order of their sums, so the
    remaining column multiset is identified by the column position; the
    memo key is (position, sorted nonzero residual rows).
    """

    def __init__(self, margins: Margins, budget: int | None = None):
        self.margins = margins
        self.budget = default_budget() if budget is None else budget
        self.col_order = sorted(range(margins.n), key=lambda j: -margins.cols[j])
        self.cols = [margins.cols[j] for j in self.col_order]
        self.memo: dict = {}

    def count(self, j: int, resid) -> int:
        key = (j, tuple(sorted((r for r in resid if r), reverse=True)))
        got = self.memo.get(key)
        if got is not None:
            return got
        rows = key[1]
        if j == len(self.cols) - 1:
            val = 1 if sum(rows) == self.cols[j] else 0
        else:
            groups = [(v, q) for v, q in sorted(Counter(rows).items(), reverse=True)]
            val = 0
            for new, w in _group_moves(groups, self.cols[j]):
                val += w * self.count(j + 1, new)
        if len(self.memo) >= self.budget:
            raise BudgetExceeded(f"counting needs more than {self.budget} memo entries")
        self.memo[key] = val
        return val

    def total(self) -> int:
        if sum(self.margins.rows) == 0:
            return 1
        return self.count(0, self.margins.rows)


def count_exact(margins: Margins, budget: int | None = None) -> int:
    """|M(r, c)| as an exact integer.

    The DP state is a residual row vector, so the orientation with fewer
    rows is counted (transposing does not change the count).
    """
    if margins.m > margins.n:
        margins = Margins(margins.cols, margins.rows)
    return TableCounter(margins, budget).total()


def enumerate_tables(margins: Margins, budget: int | None = None) -> Iterator[np.ndarray]:
    """Every table with the given margins, in row-major lexicographic order."""
    limit = default_budget() if budget is None else budget
    if count_exact(margins, limit) > limit:
        raise BudgetExceeded(f"more than {limit} tables to enumerate")
    m, n = margins.shape
    table = np.zeros((m, n), dtype=np.int64)
    rows = list(margins.rows)
    cols = list(margins.cols)

    def fill(i, j):
        if i == m:
            yield table.copy()
            return
        if j == n - 1:
            x = rows[i]
            if x > cols[j]:
                return
            table[i, j] = x
            rows[i] -= x
            cols[j] -= x
            yield from fill(i + 1, 0)
            rows[i] += x
            cols[j] += x
            return
        later = sum(cols[j + 1 :])
        for x in range(max(0, rows[i] - later), min(rows[i], cols[j]) + 1):
            table[i, j] = x
            rows[i] -= x
            cols[j] -= x
            yield from fill(i, j + 1)
            rows[i] += x
            cols[j] += x
        table[i, j] = 0

    yield from fill(0, 0)


@dataclass
class CountResult:
    """Barvinok's bounds for |M(r, c)|.

    The upper bound is exp(log_upper).  The lower bound
    N^(-gamma (m+n)) exp(log_upper) involves an unspecified absolute
    constant gamma, so only its ingredients are reported.
    """

    log_upper: float
    N: int
    m_plus_n: int
    exact: int | None = None

    @property
    def log_exact(self) -> float | None:
        return None if self.exact is None else math.log(self.exact)

    def to_dict(self) -> dict:
        out = {
            "log_upper": self.log_upper,
            "lower_bound": {"log_upper": self.log_upper, "N": self.N, "m_plus_n": self.m_plus_n},
        }
        if self.exact is not None:
            out["exact"] = str(self.exact)
            out["log_exact"] = self.log_exact
        return out


def barvinok_log_bounds(margins: Margins, tol: float = 1e-10, budget: int | None = None) -> CountResult:
    log_upper = g_value(solve_typical(margins, tol=tol).z)
    try:
        exact = count_exact(margins, budget)
    except BudgetExceeded:
        exact = None
    return CountResult(log_upper, margins.N, margins.m + margins.n, exact)


def fisher_yates_log_pmf(table, margins: Margins) -> float:
    """log of the hypergeometric probability of ``table``."""
    margins.check_table(np.asarray(table).tolist())
    lg = math.lgamma
    log_phi = -lg(margins.N + 1) + sum(lg(r + 1) for r in margins.rows) + sum(lg(c + 1) for c in margins.cols)
    return log_phi - sum(lg(int(y) + 1) for y in np.asarray(table).ravel())
