"""Typical tables: the maximizer of g(X) = sum f(x_ij) over the transportation polytope.

At the optimum ``z_ij = 1/(exp(lam_i + mu_j) - 1)``; the solvers work on the
duals ``(lam, mu)`` and rebuild ``z`` from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import xlogy

from margin_phase.core import BlockSpec, MarginError, Margins, critical_B


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def f_barvinok(x):
    """(x+1) ln(x+1) - x ln x, with f(0) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("f is defined on x >= 0")
    out = xlogy(x + 1.0, x + 1.0) - xlogy(x, x)
    return float(out) if out.ndim == 0 else out


def g_value(z) -> float:
    return float(np.sum(f_barvinok(np.asarray(z, dtype=float))))


@dataclass
class TypicalTable:
    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    residual: float
    sweeps: int = 0

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "residual": self.residual,
        }


def _z_from_duals(lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    return 1.0 / np.expm1(lam[:, None] + mu[None, :])


def _solve_side(targets: np.ndarray, other: np.ndarray, xtol: float = 1e-13) -> np.ndarray:
    """Solve sum_j 1/expm1(x_i + other_j) = targets_i for every i at once.

    With t = x + min(other) the left side is convex and strictly decreasing
    in t, and the root lies in [log1p(1/r), log1p(len(other)/r)].  Newton
    started from the left end of that bracket never overshoots; the clip to
    the bracket is the bisection safeguard.
    """
    base = other.min()
    s = other - base
    lo = np.log1p(1.0 / targets)
    hi = np.log1p(len(other) / targets)
    t = lo.copy()
    for _ in range(200):
        z = 1.0 / np.expm1(t[:, None] + s[None, :])
        val = z.sum(axis=1) - targets
        deriv = -(z * (1.0 + z)).sum(axis=1)
        # val > 0 means t is left of the root
        lo = np.where(val > 0, t, lo)
        hi = np.where(val < 0, t, hi)
        step = -val / deriv
        t_new = t + step
        bad = (t_new <= lo) | (t_new >= hi) | ~np.isfinite(t_new)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        done = np.abs(t_new - t) <= xtol * (1.0 + np.abs(t))
        t = t_new
        if done.all():
            break
    return t - base


def solve_typical(margins: Margins, tol: float = 1e-10, max_iter: int = 10_000) -> TypicalTable:
    """Typical table by alternating dual coordinate ascent.

    Each half-sweep solves the row (column) equations exactly for fixed
    column (row) duals.  The gauge ``lam + t, mu - t`` is fixed after every
    sweep by shifting so that ``lam[0] == mu[0]``.
    """
    if not margins.is_positive():
        raise MarginError("typical table needs strictly positive margins")
    r = np.asarray(margins.rows, dtype=float)
    c = np.asarray(margins.cols, dtype=float)
    N = float(margins.N)
    rbar = N / margins.m
    mu = 0.5 * np.log1p(N / (c * rbar))
    lam = np.zeros_like(r)
    residual = math.inf
    for sweep in range(1, max_iter + 1):
        lam = _solve_side(r, mu)
        mu = _solve_side(c, lam)
        shift = 0.5 * (lam[0] - mu[0])
        lam -= shift
        mu += shift
        z = _z_from_duals(lam, mu)
        residual = max(
            float(np.abs(z.sum(axis=1) - r).max()),
            float(np.abs(z.sum(axis=0) - c).max()),
        )
        if residual <= tol:
            return TypicalTable(z, lam, mu, residual, sweep)
    raise ConvergenceError(f"no convergence in {max_iter} sweeps", residual)


@dataclass
class BlockTypical:
    """Typical table of block margins, described by its three distinct entries."""

    spec: BlockSpec
    P: float
    Q: float
    z11: float
    z1n1: float
    znn: float
    residual: float
    alpha: float = field(repr=False, default=math.nan)
    beta: float = field(repr=False, default=math.nan)

    @property
    def scaled_z11(self) -> float:
        """n^(delta-1) * z11."""
        return self.spec.n ** (self.spec.delta - 1.0) * self.z11

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "P": self.P,
            "Q": self.Q,
            "z11": self.z11,
            "z1n1": self.z1n1,
            "znn": self.znn,
            "scaled_z11": self.scaled_z11,
            "residual": self.residual,
        }

    def matrix(self) -> np.ndarray:
        k, size = self.spec.k, self.spec.size
        z = np.full((size, size), self.znn)
        z[:k, :] = self.z1n1
        z[:, :k] = self.z1n1
        z[:k, :k] = self.z11
        return z


def solve_typical_block(spec: BlockSpec, tol: float = 1e-12) -> BlockTypical:
    """Two-unknown reduced system for block margins.

    With P = exp(alpha), Q = exp(beta) the margin conditions read
        kappa/expm1(2 alpha) + 1/expm1(alpha + beta) = floor(BCn)/n
        kappa/expm1(alpha + beta) + 1/expm1(2 beta) = floor(Cn)/n
    where kappa = floor(n^delta)/n.  For fixed beta the first equation is
    strictly decreasing in alpha; the resulting second equation is strictly
    decreasing in beta.  Both are solved by bracketed Brent iterations.
    """
    n = spec.n
    kappa = spec.k / n
    a = spec.r_big / n
    b = spec.r_small / n
    if a <= 0 or b <= 0:
        raise MarginError(f"block margins vanish for {spec}")

    def eq1(alpha, beta):
        return kappa / math.expm1(2 * alpha) + 1.0 / math.expm1(alpha + beta) - a

    def alpha_of(beta):
        # each term alone may not exceed a; both at most a/2 forces a sign change
        lo = max(0.5 * math.log1p(kappa / a), math.log1p(1.0 / a) - beta)
        hi = max(0.5 * math.log1p(2 * kappa / a), math.log1p(2.0 / a) - beta)
        if eq1(lo, beta) <= 0:
            return lo
        if eq1(hi, beta) >= 0:
            # both terms equal a/2 at hi: hi is the root up to rounding
            return hi
        return brentq(eq1, lo, hi, args=(beta,), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def eq2(beta):
        alpha = alpha_of(beta)
        return kappa / math.expm1(alpha + beta) + 1.0 / math.expm1(2 * beta) - b

    beta_lo = 0.5 * math.log1p(1.0 / b)
    beta_hi = max(0.5 * math.log1p(2.0 / b), math.log1p(2 * kappa / b))
    e_lo, e_hi = eq2(beta_lo), eq2(beta_hi)
    if not (e_lo >= 0 >= e_hi):
        raise ConvergenceError(f"failed to bracket the block system for {spec}", math.nan)
    if e_lo == 0 or e_hi == 0:
        beta = beta_lo if e_lo == 0 else beta_hi
    else:
        beta = brentq(eq2, beta_lo, beta_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    alpha = alpha_of(beta)
    z11 = 1.0 / math.expm1(2 * alpha)
    z1n1 = 1.0 / math.expm1(alpha + beta)
    znn = 1.0 / math.expm1(2 * beta)
    res1 = abs(kappa * z11 + z1n1 - a)
    res2 = abs(kappa * z1n1 + znn - b)
    # residuals are per unit of n; compare in the units of the margins
    residual = n * max(res1, res2)
    scale = max(1.0, spec.r_big)
    if residual > max(tol, 64 * np.finfo(float).eps * scale):
        raise ConvergenceError(f"block solver residual too large for {spec}", residual)
    return BlockTypical(spec, math.exp(alpha), math.exp(beta), z11, z1n1, znn, residual, alpha, beta)


def subcritical_limit_z11(B: float, C: float) -> float:
    """Limit of z11 as n -> infinity for B < B_c: B^2 (C+1) / ((B_c-B)(B_c+B-2))."""
    Bc = critical_B(C)
    if not 0 < B < Bc:
        raise ValueError(f"subcritical limit needs 0 < B < B_c = {Bc}, got B={B}")
    return B * B * (C + 1.0) / ((Bc - B) * (Bc + B - 2.0))


def supercritical_scaled_z11(B: float, C: float) -> float:
    """Limit of n^(delta-1) z11 for B > B_c: C (B - B_c)."""
    Bc = critical_B(C)
    if not B > Bc:
        raise ValueError(f"supercritical limit needs B > B_c = {Bc}, got B={B}")
    return C * (B - Bc)


def side_limit(B: float, C: float) -> float:
    """Limit of z_{1,n+1}: BC below B_c, B_c C above."""
    Bc = critical_B(C)
    if B == Bc:
        raise ValueError("the side limit is not classified at B = B_c")
    return B * C if B < Bc else Bc * C


def independence_table(margins: Margins) -> np.ndarray:
    if margins.N <= 0:
        raise MarginError("independence table needs N > 0")
    r = np.asarray(margins.rows, dtype=float)
    c = np.asarray(margins.cols, dtype=float)
    return np.outer(r, c) / float(margins.N)


def entropy_H(W, N: float) -> float:
    """sum (w/N) ln(N/w), zero entries contributing 0."""
    W = np.asarray(W, dtype=float)
    if N <= 0:
        raise ValueError("N must be positive")
    if np.any(W < 0):
        raise ValueError("entries must be nonnegative")
    p = W / N
    return float(-np.sum(xlogy(p, p)))
