import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margin_phase.core import BlockSpec, critical_B
from margin_phase.experiments import (
    CSV_FIELDS,
    TrialPlan,
    class_report,
    clt_diagnostic,
    entry_law_experiment,
    eta_exponents,
    independence_check,
    lag1_autocorr,
    limit_means,
    mean_stderr,
    phase_sweep,
    regime,
    sampler_agreement,
    slln_experiment,
    sup_discrepancy,
    truncated_moment_experiment,
)
from margin_phase.sampling import SamplerConfig, make_rng, sample_geom_matrix
from margin_phase.typical import side_limit, subcritical_limit_z11

SMALL = BlockSpec(10, 0.5, 3, 1)
MCMC = SamplerConfig(method="mcmc", seed=5, chains=2)


@pytest.fixture(scope="module")
def small_run():
    return entry_law_experiment(TrialPlan(SMALL, 4000, MCMC))


# --- references --------------------------------------------------------------


def test_eta_exponents():
    assert eta_exponents(0.75) == {"BR": 0.5, "TL": 0.25, "TR": 0.375}


@pytest.mark.parametrize(
    "B, C, expected",
    [(2.0, 1.0, "subcritical"), (3.0, 1.0, "supercritical"), (1 + math.sqrt(2), 1.0, "critical")],
)
def test_regime(B, C, expected):
    assert regime(B, C) == expected


def test_limit_means_by_regime():
    sub = limit_means(2, 1)
    assert sub["TL"] == pytest.approx(subcritical_limit_z11(2, 1))
    assert sub["TR"] == pytest.approx(side_limit(2, 1))
    assert sub["BR"] == 1
    assert limit_means(3, 1)["TL"] is None
    crit = limit_means(critical_B(1), 1)
    assert crit["TL"] is None and crit["TR"] is None


def test_trial_plan_validation():
    with pytest.raises(ValueError):
        TrialPlan(SMALL, 0)
    with pytest.raises(ValueError):
        TrialPlan(SMALL, 10, targets=("XX",))


# --- statistics helpers ------------------------------------------------------


def test_mean_stderr_known_values():
    m, se = mean_stderr([1, 2, 3, 4])
    assert m == 2.5
    assert se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


def test_lag1_autocorr():
    assert lag1_autocorr([1, 1, 1]) == 0.0
    assert lag1_autocorr(np.arange(1000.0)) > 0.99
    assert lag1_autocorr([1, -1] * 500) < -0.99


def test_sup_discrepancy_zero_for_product_table():
    a = np.repeat([0, 1], 2)
    b = np.tile([0, 1], 2)
    assert sup_discrepancy(a, b)[0] == 0.0


def test_sup_discrepancy_of_identical_pair():
    a = np.array([0, 1] * 50)
    assert sup_discrepancy(a, a)[0] == pytest.approx(0.25)


def test_null_shrinks_with_sample_size():
    rng = make_rng(3)
    stats = []
    for T in (1_000, 100_000):
        reps = [sup_discrepancy(*sample_geom_matrix(np.ones(2), rng, T).T)[0] for _ in range(5)]
        stats.append(np.mean(reps))
    assert stats[1] < stats[0] / 3


@given(
    st.lists(st.integers(0, 12), min_size=2, max_size=200),
    st.floats(0.05, 20),
    st.floats(0.05, 20),
)
def test_triangle_inequality_always_holds(values, z_ref, limit_ref):
    assert class_report("TR", values, z_ref, limit_ref, 0.5).triangle_ok


# --- entry laws --------------------------------------------------------------


def test_entry_law_margins_and_mass_balance(small_run):
    assert small_run.margin_violations == 0
    assert small_run.mass.target == SMALL.r_big / SMALL.n
    assert small_run.mass.ok(3)


def test_entry_law_means_near_typical(small_run):
    for cls, rep in small_run.classes.items():
        assert abs(rep.mean - rep.z_ref) < 5 * rep.stderr + 0.05 * rep.z_ref, cls


def test_random_cells_decorrelate(small_run):
    assert all(abs(v) < 0.1 for v in small_run.lag1.values())


def test_entry_law_reproducible_and_thread_independent(small_run):
    again = entry_law_experiment(TrialPlan(SMALL, 4000, MCMC), threads=2)
    assert again.to_dict() == small_run.to_dict()


def test_csv_rows_carry_the_declared_fields(small_run):
    rows = small_run.csv_rows()
    assert len(rows) == 3
    assert all(set(r) == set(CSV_FIELDS) for r in rows)


def test_b_equal_one_is_symmetric():
    spec = BlockSpec(6, 0.5, 1, 1)
    res = entry_law_experiment(TrialPlan(spec, 4000, MCMC))
    z = res.typical
    assert z.z11 == pytest.approx(z.z1n1) == pytest.approx(z.znn)
    means = [r.mean for r in res.classes.values()]
    ses = [r.stderr for r in res.classes.values()]
    assert max(means) - min(means) < 5 * max(ses)


def test_delta_zero_is_diagnostic():
    res = entry_law_experiment(TrialPlan(BlockSpec(6, 0.0, 2, 1), 200, MCMC))
    assert res.diagnostic and res.to_dict()["diagnostic"]


def test_exact_and_mcmc_agree():
    spec = BlockSpec(3, 0.5, 2, 1)
    runs = [
        entry_law_experiment(TrialPlan(spec, 5000, SamplerConfig(method=m, seed=2)))
        for m in ("exact", "mcmc")
    ]
    assert all(tv < 0.1 for tv in sampler_agreement(*runs).values())


# --- sweeps and row sums -----------------------------------------------------


def test_sweep_refuses_the_critical_window():
    Bc = critical_B(1)
    with pytest.raises(ValueError):
        phase_sweep(1, 0.75, 10, [2.0, Bc + 0.05], 10, MCMC)


def test_sweep_rows():
    res = phase_sweep(1, 0.75, 10, [2.0, 3.5], 300, MCMC)
    assert [r.regime for r in res.rows] == ["subcritical", "supercritical"]
    r0, r1 = res.rows
    assert r0.limit_z11 is not None and r0.limit_scaled is None
    assert r1.limit_z11 is None and r1.limit_scaled is not None
    assert r1.scaled_mean == pytest.approx(10 ** -0.25 * r1.mean_X11)
    assert all(r.margin_violations == 0 for r in res.rows)
    assert len(res.csv_rows()) == 6


def test_slln_rows():
    rows = slln_experiment([BlockSpec(10, 0.75, 2, 1), BlockSpec(10, 0.25, 2, 1)], 200, MCMC)
    assert [r.first_row_in_scope for r in rows] == [True, False]
    assert rows[0].br_ref == 1
    assert rows[0].first_ref == pytest.approx(side_limit(2, 1))
    assert all(r.mass.ok(4) for r in rows)


# --- diagnostics -------------------------------------------------------------


@pytest.mark.parametrize("B, key", [(3.0, "S_standardized"), (1.5, "S_concentration")])
def test_clt_is_labelled_diagnostic(B, key):
    out = clt_diagnostic(BlockSpec(10, 0.25, B, 1), 200, MCMC)
    assert out["label"] == "DIAGNOSTIC"
    assert key in out
    assert sum(out[key]["hist"]["counts"]) == 200


def test_self_pair_is_dependent():
    res = independence_check(SMALL, (3, 3, 3, 3), 2000, MCMC, null_reps=5)
    assert res.null_ratio > 5
    assert res.eta == 0.5


def test_truncated_moment_identity():
    out = truncated_moment_experiment(SMALL, 0.5, 1000, MCMC)
    for c in out["classes"].values():
        assert c["identity_residual"] < 1e-9
        assert c["truncated_mean"] <= c["mean"] + 1e-12
    assert out["square_TR"]["label"] == "DIAGNOSTIC"
    with pytest.raises(ValueError):
        truncated_moment_experiment(SMALL, 0, 10, MCMC)
