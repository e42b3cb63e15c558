"""Monte Carlo studies of uniform tables with block margins.

Every experiment draws ``trials`` tables and records, per table, one
designated entry per block class.  The designated entry is a uniformly
random cell of its block, redrawn every trial.  Entries within a block are
exchangeable under the uniform law, so the marginal law is the same as for
a fixed cell, while consecutive MCMC states no longer report the same
(slowly moving) coordinate.

Streams: chain ``c`` of stream ``s`` draws its tables from
``make_rng(seed, s, c)`` and its cell choices from ``make_rng(seed, s, c, 1)``.
Chains run in a thread pool and their outputs are concatenated in chain
order, so results do not depend on the number of threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from margin_phase.core import BlockLabel, BlockSpec, Margins, block_margins, block_of, critical_B
from margin_phase.distributions import (
    EmpiricalDist,
    GeomDist,
    empirical_tv_to_geom,
    tv_distance,
    tv_geom_bound,
)
from margin_phase.sampling import SamplerConfig, chain_samples, chain_shares, make_rng, sample_geom_matrix
from margin_phase.typical import (
    BlockTypical,
    side_limit,
    solve_typical,
    solve_typical_block,
    subcritical_limit_z11,
    supercritical_scaled_z11,
)

CLASSES = ("TL", "TR", "BR")
CRITICAL_WINDOW = 0.1
CSV_FIELDS = (
    "experiment",
    "n",
    "delta",
    "B",
    "C",
    "class",
    "trials",
    "seed",
    "sampler",
    "mean",
    "stderr",
    "z_ref",
    "limit_ref",
    "tv_typical",
    "tv_limit",
)


# --- references --------------------------------------------------------------


def eta_exponents(delta: float) -> dict[str, float]:
    """Reference rate exponents for a set of entries, keyed by the worst block it touches."""
    return {"BR": 0.5, "TL": delta - 0.5, "TR": delta / 2.0}


def regime(B: float, C: float) -> str:
    Bc = critical_B(C)
    if B < Bc:
        return "subcritical"
    return "supercritical" if B > Bc else "critical"


def limit_means(B: float, C: float) -> dict[str, float | None]:
    """Limiting geometric means per class; None where no finite limit exists."""
    reg = regime(B, C)
    if reg == "critical":
        return {"TL": None, "TR": None, "BR": C}
    return {
        "TL": subcritical_limit_z11(B, C) if reg == "subcritical" else None,
        "TR": side_limit(B, C),
        "BR": C,
    }


def class_z(bt: BlockTypical) -> dict[str, float]:
    return {"TL": bt.z11, "TR": bt.z1n1, "BR": bt.znn}


# --- plumbing ----------------------------------------------------------------


@dataclass(frozen=True)
class TrialPlan:
    """What to sample and how often."""

    spec: BlockSpec
    trials: int
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    targets: tuple[str, ...] = CLASSES
    stream: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.targets) - set(CLASSES)
        if bad or not self.targets:
            raise ValueError(f"targets must be a nonempty subset of {CLASSES}, got {self.targets}")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "trials": self.trials,
            "sampler": self.sampler.to_dict(),
            "targets": list(self.targets),
            "stream": self.stream,
        }


@dataclass
class TrialBatch:
    """Per-trial statistics (one row per table) and the count of invalid tables."""

    values: np.ndarray
    margin_violations: int


def _valid(table: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> bool:
    return bool(
        table.min() >= 0 and np.array_equal(table.sum(axis=1), rows) and np.array_equal(table.sum(axis=0), cols)
    )


def collect(
    margins: Margins,
    cfg: SamplerConfig,
    trials: int,
    stat: Callable[[np.ndarray, np.random.Generator], Sequence[float]],
    *,
    stream: int = 0,
    threads: int = 1,
    z=None,
) -> TrialBatch:
    """Run ``stat`` on ``trials`` uniform tables, validating every table's margins."""
    rows = np.asarray(margins.rows)
    cols = np.asarray(margins.cols)
    shares = chain_shares(trials, cfg.chains)

    def work(c: int):
        sel = make_rng(cfg.seed, stream, c, 1)
        out, bad = [], 0
        for table in chain_samples(margins, cfg, shares[c], stream, c, z):
            if not _valid(table, rows, cols):
                bad += 1
            out.append(stat(table, sel))
        return out, bad

    if threads > 1 and cfg.chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(cfg.chains)))
    else:
        parts = [work(c) for c in range(cfg.chains)]
    values = [row for part, _ in parts for row in part]
    return TrialBatch(np.asarray(values, dtype=float), sum(bad for _, bad in parts))


def _class_stat(spec: BlockSpec):
    """Random cell per class: returns (X_TL, X_TR, X_BR)."""
    k, n = spec.k, spec.n

    def stat(table, sel):
        i = sel.integers(0, k, size=2)
        b = k + sel.integers(0, n, size=3)
        return table[i[0], i[1]], table[i[0], b[0]], table[b[1], b[2]]

    return stat


def mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def lag1_autocorr(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 3 or x.std() == 0:
        return 0.0
    d = x - x.mean()
    return float(np.dot(d[:-1], d[1:]) / np.dot(d, d))


@dataclass
class MassBalance:
    """Averaged margin identity (k/n) X_TL + X_TR = floor(BCn)/n."""

    mean: float
    stderr: float
    target: float

    @property
    def zscore(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == self.target else math.inf
        return (self.mean - self.target) / self.stderr

    def ok(self, sigmas: float = 3.0) -> bool:
        return abs(self.zscore) <= sigmas

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "target": self.target, "zscore": self.zscore}


def mass_balance(spec: BlockSpec, x_tl, x_tr) -> MassBalance:
    per_trial = (spec.k / spec.n) * np.asarray(x_tl, float) + np.asarray(x_tr, float)
    mean, se = mean_stderr(per_trial)
    return MassBalance(mean, se, spec.r_big / spec.n)


# --- entry laws --------------------------------------------------------------


@dataclass
class ClassReport:
    cls: str
    hist: EmpiricalDist
    z_ref: float
    limit_ref: float | None
    tv_typical: float
    tv_limit: float | None
    geom_gap_bound: float | None  # bound on TV(Geom(z_ref), Geom(limit_ref))
    eta: float

    @property
    def mean(self) -> float:
        return self.hist.mean

    @property
    def stderr(self) -> float:
        t = self.hist.total
        return math.sqrt(self.hist.variance * t / (t - 1) / t) if t > 1 else math.nan

    @property
    def triangle_ok(self) -> bool | None:
        """TV to the limit law is within TV to Geom(z_ref) plus the geometric gap bound."""
        if self.tv_limit is None:
            return None
        return self.tv_limit <= self.tv_typical + self.geom_gap_bound + 1e-12

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "mean": self.mean,
            "stderr": self.stderr,
            "z_ref": self.z_ref,
            "limit_ref": self.limit_ref,
            "tv_typical": self.tv_typical,
            "tv_limit": self.tv_limit,
            "geom_gap_bound": self.geom_gap_bound,
            "triangle_ok": self.triangle_ok,
            "eta": self.eta,
            "hist": self.hist.to_dict(),
        }


def class_report(cls: str, values, z_ref: float, limit_ref: float | None, eta: float) -> ClassReport:
    hist = EmpiricalDist.from_samples(np.asarray(values, dtype=np.int64))
    tv_typ = empirical_tv_to_geom(hist, z_ref)
    if limit_ref is None:
        tv_lim = gap = None
    else:
        tv_lim = empirical_tv_to_geom(hist, limit_ref)
        gap = tv_geom_bound(z_ref, limit_ref)
    return ClassReport(cls, hist, z_ref, limit_ref, tv_typ, tv_lim, gap, eta)


@dataclass
class EntryLawResult:
    plan: TrialPlan
    typical: BlockTypical
    classes: dict[str, ClassReport]
    mass: MassBalance
    margin_violations: int
    lag1: dict[str, float]

    @property
    def diagnostic(self) -> bool:
        # at delta = 0 the limit theory is conjectural
        return self.plan.spec.delta == 0

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "typical": self.typical.to_dict(),
            "regime": regime(self.plan.spec.B, self.plan.spec.C),
            "eta": eta_exponents(self.plan.spec.delta),
            "classes": {c: r.to_dict() for c, r in self.classes.items()},
            "mass_balance": self.mass.to_dict(),
            "margin_violations": self.margin_violations,
            "lag1": self.lag1,
            "diagnostic": self.diagnostic,
        }

    def csv_rows(self) -> list[dict]:
        s, cfg = self.plan.spec, self.plan.sampler
        return [
            {
                "experiment": "entrylaw",
                "n": s.n,
                "delta": s.delta,
                "B": s.B,
                "C": s.C,
                "class": r.cls,
                "trials": self.plan.trials,
                "seed": cfg.seed,
                "sampler": cfg.method,
                "mean": r.mean,
                "stderr": r.stderr,
                "z_ref": r.z_ref,
                "limit_ref": r.limit_ref,
                "tv_typical": r.tv_typical,
                "tv_limit": r.tv_limit,
            }
            for r in self.classes.values()
        ]


def entry_law_experiment(plan: TrialPlan, threads: int = 1) -> EntryLawResult:
    """Empirical law of one random entry per block class, against geometric references."""
    spec = plan.spec
    margins = block_margins(spec)
    bt = solve_typical_block(spec)
    z = solve_typical(margins).z if plan.sampler.method == "rejection" else None
    batch = collect(margins, plan.sampler, plan.trials, _class_stat(spec), stream=plan.stream, threads=threads, z=z)
    cols = dict(zip(CLASSES, batch.values.T))
    zs = class_z(bt)
    limits = limit_means(spec.B, spec.C)
    eta = eta_exponents(spec.delta)
    reports = {c: class_report(c, cols[c], zs[c], limits[c], eta[c]) for c in plan.targets}
    return EntryLawResult(
        plan,
        bt,
        reports,
        mass_balance(spec, cols["TL"], cols["TR"]),
        batch.margin_violations,
        {c: lag1_autocorr(cols[c]) for c in plan.targets},
    )


def sampler_agreement(a: EntryLawResult, b: EntryLawResult) -> dict[str, float]:
    """Per-class TV between two runs' empirical entry laws."""
    return {c: tv_distance(a.classes[c].hist, b.classes[c].hist) for c in a.classes if c in b.classes}


# --- phase sweep -------------------------------------------------------------


@dataclass
class SweepRow:
    B: float
    n: int
    delta: float
    C: float
    trials: int
    seed: int
    sampler: str
    regime: str
    mean_X11: float
    se_X11: float
    scaled_mean: float
    se_scaled: float
    mean_X1n1: float
    se_X1n1: float
    mean_Xnn: float
    se_Xnn: float
    z11: float
    z1n1: float
    znn: float
    scaled_z11: float
    limit_z11: float | None  # subcritical limit of z11
    limit_scaled: float | None  # supercritical limit of n^(delta-1) z11
    tv_TL: float
    tv_TR: float
    tv_BR: float
    mass_mean: float
    mass_se: float
    mass_target: float
    margin_violations: int
    lag1_X11: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def csv_rows(self) -> list[dict]:
        out = []
        for r in self.rows:
            per_class = {
                "TL": (r.mean_X11, r.se_X11, r.z11, r.limit_z11, r.tv_TL),
                "TR": (r.mean_X1n1, r.se_X1n1, r.z1n1, None if r.regime == "critical" else side_limit(r.B, r.C), r.tv_TR),
                "BR": (r.mean_Xnn, r.se_Xnn, r.znn, r.C, r.tv_BR),
            }
            for cls, (mean, se, z, lim, tv) in per_class.items():
                out.append(
                    {
                        "experiment": "sweep",
                        "n": r.n,
                        "delta": r.delta,
                        "B": r.B,
                        "C": r.C,
                        "class": cls,
                        "trials": r.trials,
                        "seed": r.seed,
                        "sampler": r.sampler,
                        "mean": mean,
                        "stderr": se,
                        "z_ref": z,
                        "limit_ref": lim,
                        "tv_typical": tv,
                        "tv_limit": None,
                    }
                )
        return out


def phase_sweep(
    C: float,
    delta: float,
    n: int,
    B_grid: Sequence[float],
    trials: int,
    cfg: SamplerConfig,
    *,
    window: float = CRITICAL_WINDOW,
    include_critical: bool = False,
    threads: int = 1,
) -> SweepResult:
    """Mean of X11 (raw and scaled by n^(delta-1)) across B, beside the typical table.

    Grid points within ``window`` of B_c are refused unless
    ``include_critical`` is set.
    """
    Bc = critical_B(C)
    near = [B for B in B_grid if abs(B - Bc) < window]
    if near and not include_critical:
        raise ValueError(f"B values {near} lie within {window} of B_c = {Bc:.6f}; pass include_critical to run them")
    rows = []
    for idx, B in enumerate(B_grid):
        res = entry_law_experiment(TrialPlan(BlockSpec(n, delta, B, C), trials, cfg, stream=idx), threads)
        spec, bt, cl = res.plan.spec, res.typical, res.classes
        scale = n ** (delta - 1.0)
        reg = regime(B, C)
        rows.append(
            SweepRow(
                B=B,
                n=n,
                delta=delta,
                C=C,
                trials=trials,
                seed=cfg.seed,
                sampler=cfg.method,
                regime=reg,
                mean_X11=cl["TL"].mean,
                se_X11=cl["TL"].stderr,
                scaled_mean=scale * cl["TL"].mean,
                se_scaled=scale * cl["TL"].stderr,
                mean_X1n1=cl["TR"].mean,
                se_X1n1=cl["TR"].stderr,
                mean_Xnn=cl["BR"].mean,
                se_Xnn=cl["BR"].stderr,
                z11=bt.z11,
                z1n1=bt.z1n1,
                znn=bt.znn,
                scaled_z11=bt.scaled_z11,
                limit_z11=subcritical_limit_z11(B, C) if reg == "subcritical" else None,
                limit_scaled=supercritical_scaled_z11(B, C) if reg == "supercritical" else None,
                tv_TL=cl["TL"].tv_typical,
                tv_TR=cl["TR"].tv_typical,
                tv_BR=cl["BR"].tv_typical,
                mass_mean=res.mass.mean,
                mass_se=res.mass.stderr,
                mass_target=res.mass.target,
                margin_violations=res.margin_violations,
                lag1_X11=res.lag1["TL"],
            )
        )
    return SweepResult(rows)


# --- row sums ----------------------------------------------------------------


@dataclass
class SllnRow:
    spec: BlockSpec
    trials: int
    first_row_in_scope: bool  # the first-row limit needs 1/2 < delta < 1
    first_mean: float
    first_sd: float
    first_se: float
    first_ref: float | None
    first_typical: float  # finite-n typical-table value z_{1,n+1}
    br_mean: float
    br_sd: float
    br_se: float
    br_ref: float
    br_typical: float
    mass: MassBalance
    margin_violations: int

    @property
    def first_rel_err(self) -> float | None:
        return None if self.first_ref is None else abs(self.first_mean - self.first_ref) / self.first_ref

    @property
    def br_rel_err(self) -> float:
        return abs(self.br_mean - self.br_ref) / self.br_ref

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("spec", "mass")}
        d.update(
            spec=self.spec.to_dict(),
            mass_balance=self.mass.to_dict(),
            first_rel_err=self.first_rel_err,
            br_rel_err=self.br_rel_err,
        )
        return d


def _row_stat(spec: BlockSpec):
    """(first-row TR average, first light row BR average, random X_TL, random X_TR)."""
    k, n = spec.k, spec.n

    def stat(table, sel):
        i = sel.integers(0, k, size=2)
        j = k + sel.integers(0, n)
        return table[0, k:].mean(), table[k, k:].mean(), table[i[0], i[1]], table[i[0], j]

    return stat


def slln_experiment(
    spec_grid: Sequence[BlockSpec], trials: int, cfg: SamplerConfig, threads: int = 1
) -> list[SllnRow]:
    """Block averages of the first row and of the first light row against their limits."""
    out = []
    for idx, spec in enumerate(spec_grid):
        bt = solve_typical_block(spec)
        batch = collect(block_margins(spec), cfg, trials, _row_stat(spec), stream=idx, threads=threads)
        first, br, x_tl, x_tr = batch.values.T
        reg = regime(spec.B, spec.C)
        fm, fse = mean_stderr(first)
        bm, bse = mean_stderr(br)
        out.append(
            SllnRow(
                spec=spec,
                trials=trials,
                first_row_in_scope=0.5 < spec.delta < 1.0,
                first_mean=fm,
                first_sd=float(np.std(first, ddof=1)) if trials > 1 else math.nan,
                first_se=fse,
                first_ref=None if reg == "critical" else side_limit(spec.B, spec.C),
                first_typical=bt.z1n1,
                br_mean=bm,
                br_sd=float(np.std(br, ddof=1)) if trials > 1 else math.nan,
                br_se=bse,
                br_ref=spec.C,
                br_typical=bt.znn,
                mass=mass_balance(spec, x_tl, x_tr),
                margin_violations=batch.margin_violations,
            )
        )
    return out


# --- CLT diagnostic ----------------------------------------------------------


def _moments(x: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(x)),
        "var": float(np.var(x, ddof=1)) if x.size > 1 else math.nan,
        "skewness": float(stats.skew(x)) if x.size > 2 else math.nan,
        "kurtosis": float(stats.kurtosis(x, fisher=False)) if x.size > 3 else math.nan,
    }


def _histogram(x: np.ndarray, lo: float = -4.0, hi: float = 4.0, bins: int = 32) -> dict:
    counts, edges = np.histogram(np.clip(x, lo, hi), bins=bins, range=(lo, hi))
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def clt_diagnostic(spec: BlockSpec, trials: int, cfg: SamplerConfig, threads: int = 1) -> dict:
    """Standardized fluctuations of the first-row block sum S and of X11.

    DIAGNOSTIC: the Gaussian limits behind these statistics are conjectural;
    nothing here is pass/fail.  Supercritically S is centred at B_c C n and
    scaled by sqrt(n v) with v = B_c C + (B_c C)^2; subcritically the
    concentration (S - B C n)/sqrt(n) is reported.  For delta < 1/2 and
    B > B_c, X11 is centred at C (B - B_c) n^(1-delta) and scaled by
    n^((1-delta)/2) sqrt(v).
    """
    C, B, n, delta = spec.C, spec.B, spec.n, spec.delta
    Bc = critical_B(C)
    if B == Bc:
        raise ValueError("the fluctuation diagnostic needs B != B_c")
    k = spec.k

    def stat(table, sel):
        return table[0, k:].sum(), table[0, 0]

    batch = collect(block_margins(spec), cfg, trials, stat, threads=threads)
    S, x11 = batch.values.T
    v = Bc * C + (Bc * C) ** 2
    out = {
        "label": "DIAGNOSTIC",
        "spec": spec.to_dict(),
        "trials": trials,
        "regime": regime(B, C),
        "variance_plugin": v,
        "margin_violations": batch.margin_violations,
    }
    if B > Bc:
        std_S = (S - Bc * C * n) / math.sqrt(n * v)
        out["S_standardized"] = {**_moments(std_S), "hist": _histogram(std_S)}
        if delta < 0.5:
            std_x = (x11 - C * (B - Bc) * n ** (1 - delta)) / (n ** ((1 - delta) / 2) * math.sqrt(v))
            out["X11_standardized"] = {**_moments(std_x), "hist": _histogram(std_x)}
    else:
        conc = (S - B * C * n) / math.sqrt(n)
        out["S_concentration"] = {**_moments(conc), "hist": _histogram(conc)}
    return out


# --- asymptotic independence -------------------------------------------------


def sup_discrepancy(a, b) -> tuple[float, float]:
    """sup_{x,y} |P(a=x, b=y) - P(a=x) P(b=y)| and a standard error at the maximizing cell."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    T = a.size
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= T
    gap = np.abs(joint - np.outer(joint.sum(axis=1), joint.sum(axis=0)))
    x, y = np.unravel_index(np.argmax(gap), gap.shape)
    p = joint[x, y]
    return float(gap[x, y]), math.sqrt(max(p * (1 - p), 0.0) / T)


@dataclass
class IndependenceResult:
    spec: BlockSpec
    pair: tuple[int, int, int, int]
    trials: int
    statistic: float
    stderr: float
    null_mean: float
    null_sd: float
    null_reps: int
    eta: float
    margin_violations: int

    @property
    def null_ratio(self) -> float:
        return self.statistic / self.null_mean if self.null_mean > 0 else math.inf

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "spec"}
        d.update(spec=self.spec.to_dict(), pair=list(self.pair), null_ratio=self.null_ratio)
        return d


def _relabel(spec: BlockSpec, sel: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random row and column permutations that keep the heavy indices first."""
    k, n = spec.k, spec.n

    def perm():
        return np.concatenate([sel.permutation(k), k + sel.permutation(n)])

    return perm(), perm()


def independence_check(
    spec: BlockSpec,
    pair: tuple[int, int, int, int],
    trials: int,
    cfg: SamplerConfig,
    *,
    null_reps: int = 10,
    relabel: bool = True,
    threads: int = 1,
    stream: int = 0,
) -> IndependenceResult:
    """Dependence between entries ``(i1, j1)`` and ``(i2, j2)`` (0-based).

    With ``relabel`` the pair is moved by a fresh block-preserving
    permutation each trial, which leaves its joint law unchanged.  The null
    is the same statistic on ``trials`` independent geometric pairs with
    the typical-table means, averaged over ``null_reps`` replicates.
    """
    i1, j1, i2, j2 = pair
    labels = (block_of(spec, i1, j1), block_of(spec, i2, j2))

    def stat(table, sel):
        if not relabel:
            return table[i1, j1], table[i2, j2]
        pr, pc = _relabel(spec, sel)
        return table[pr[i1], pc[j1]], table[pr[i2], pc[j2]]

    batch = collect(block_margins(spec), cfg, trials, stat, stream=stream, threads=threads)
    a, b = batch.values.T
    value, se = sup_discrepancy(a, b)

    z = solve_typical_block(spec).matrix()
    zpair = np.array([z[i1, j1], z[i2, j2]])
    rng = make_rng(cfg.seed, stream, 1 << 20)
    nulls = []
    for _ in range(null_reps):
        y = sample_geom_matrix(zpair, rng, trials)
        nulls.append(sup_discrepancy(y[:, 0], y[:, 1])[0])
    if all(lab == BlockLabel.BottomRight for lab in labels):
        eta = 0.5
    elif BlockLabel.TopLeft in labels:
        eta = spec.delta - 0.5
    else:
        eta = spec.delta / 2.0
    return IndependenceResult(
        spec,
        (i1, j1, i2, j2),
        trials,
        value,
        se,
        float(np.mean(nulls)),
        float(np.std(nulls, ddof=1)) if null_reps > 1 else 0.0,
        null_reps,
        eta,
        batch.margin_violations,
    )


# --- truncated moments -------------------------------------------------------


def truncated_moment_experiment(
    spec: BlockSpec, alpha: float, trials: int, cfg: SamplerConfig, threads: int = 1
) -> dict:
    """E[X ^ n^alpha] and E[(X - n^alpha)^+] per class, against the typical table.

    Also reports E[X_TR^2 ^ n^alpha] next to (B_c C)^2 and the second
    moment of Geom(B_c C), without pass/fail.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    res = entry_law_experiment(TrialPlan(spec, trials, cfg), threads)
    M = spec.n**alpha
    classes = {}
    for c, r in res.classes.items():
        trunc = r.hist.truncated_mean(M)
        excess = sum(cnt * max(v - M, 0.0) for v, cnt in r.hist.counts.items()) / r.hist.total
        classes[c] = {
            "mean": r.mean,
            "stderr": r.stderr,
            "truncated_mean": trunc,
            "excess_mean": excess,
            "identity_residual": abs(r.mean - trunc - excess),
            "z_ref": r.z_ref,
            "limit_ref": r.limit_ref,
            "geom_truncated_mean": GeomDist(r.z_ref).truncated_mean(M),
        }
    tr = res.classes["TR"].hist
    sq_trunc = sum(cnt * min(v * v, M) for v, cnt in tr.counts.items()) / tr.total
    lam = critical_B(spec.C) * spec.C
    return {
        "spec": spec.to_dict(),
        "alpha": alpha,
        "threshold": M,
        "trials": trials,
        "regime": regime(spec.B, spec.C),
        "classes": classes,
        "square_TR": {
            "truncated_square_mean": sq_trunc,
            "ref_BcC_squared": lam * lam,
            "geom_second_moment": lam + 2 * lam * lam,
            "label": "DIAGNOSTIC",
        },
        "mass_balance": res.mass.to_dict(),
        "margin_violations": res.margin_violations,
    }
