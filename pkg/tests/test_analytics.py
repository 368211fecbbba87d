"""Learning curves and the logistic regression engine."""
from __future__ import annotations

import math
import random

import numpy as np
import pytest

from simtutor.analytics import (
    DesignError,
    SeparationError,
    accuracy_by_condition,
    build_design,
    curve_rows,
    fit_logistic,
    fit_logit,
    hard_problem_effect,
    learning_curve,
    log_likelihood,
    posttest_effect,
    problem_outcomes,
    score,
)
from simtutor.experiment import TrialRecord
from simtutor.state import ConfigError


def record(agent, problem, correct, *, ptype="add_same", condition="blocked",
           phase="tutor", opportunity=0, outcome=None, rep=0):
    return TrialRecord(
        agent_id=agent, replication=rep, condition=condition, phase=phase,
        problem_id=problem, problem_type=ptype, opportunity=opportunity,
        step_id="answer_num",
        outcome=outcome or ("CORRECT" if correct else "ERROR"),
        problem_correct=correct)


# -- learning curves -----------------------------------------------------------

def test_all_correct_log_gives_zero_error_everywhere():
    rows = [record(f"a{i}", f"p{j}", True) for i in range(3) for j in range(4)]
    for point in learning_curve(rows):
        assert point.mean_error == 0.0
        assert point.n == 3


def test_hand_built_three_agent_curve():
    # Position 1: agents correct, correct, wrong -> error 1/3.
    # Position 2: correct, wrong, wrong -> error 2/3.
    rows = []
    outcomes = {("a0", "p0"): True, ("a1", "p0"): True, ("a2", "p0"): False,
                ("a0", "p1"): True, ("a1", "p1"): False, ("a2", "p1"): False}
    for (agent, problem), correct in outcomes.items():
        rows.append(record(agent, problem, correct))
    points = {p.position: p for p in learning_curve(rows)}
    assert points[1].mean_error == pytest.approx(1 / 3)
    assert points[2].mean_error == pytest.approx(2 / 3)
    # 95% normal interval computed by hand: p +- 1.96 * sqrt(p(1-p)/3)
    se = math.sqrt((1 / 3) * (2 / 3) / 3)
    assert points[1].ci_low == pytest.approx(max(0.0, 1 / 3 - 1.959963984540054 * se))
    assert points[1].ci_high == pytest.approx(1 / 3 + 1.959963984540054 * se)


def test_curve_is_invariant_to_agent_interleaving():
    # Positions come from each agent's own problem order; interleaving the
    # agents' streams (as parallel execution would) must not move any point.
    rng = random.Random(0)
    rows = [record(f"a{i}", f"p{j}", rng.random() < 0.5)
            for i in range(5) for j in range(6)]
    base = learning_curve(rows)
    for _ in range(5):
        streams = {}
        for r in rows:
            streams.setdefault(r.agent_id, []).append(r)
        interleaved = []
        pending = {a: list(rs) for a, rs in streams.items()}
        while pending:
            agent = rng.choice(sorted(pending))
            interleaved.append(pending[agent].pop(0))
            if not pending[agent]:
                del pending[agent]
        assert learning_curve(interleaved) == base


def test_curve_counts_every_agent_at_every_position():
    rows = [record(f"a{i}", f"p{j}", True, condition="interleaved")
            for i in range(7) for j in range(3)]
    assert all(p.n == 7 for p in learning_curve(rows))


def test_wilson_interval_option():
    rows = [record(f"a{i}", "p0", i < 9) for i in range(10)]
    point = learning_curve(rows, interval="wilson")[0]
    assert 0.0 < point.ci_low < point.mean_error < point.ci_high < 1.0


def test_curve_requires_rows_for_the_phase():
    with pytest.raises(ConfigError):
        learning_curve([record("a0", "p0", True)], phase="posttest")


def test_curve_csv_rows_have_the_documented_header():
    rows = [record("a0", "p0", True)]
    header = next(iter(curve_rows(learning_curve(rows))))
    assert header == ("condition", "position", "mean_error", "ci_low", "ci_high", "n")


# -- regression engine -----------------------------------------------------------

def _synthetic(n, beta, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    X = np.column_stack([np.ones(n), x])
    p = 1.0 / (1.0 + np.exp(-(X @ np.asarray(beta))))
    y = (rng.random(n) < p).astype(float)
    return X, y


def test_recovers_known_coefficients_on_synthetic_data():
    X, y = _synthetic(50_000, (-1.0, 0.5), seed=1)
    fit = fit_logit(X, y, ["Intercept", "x"])
    assert fit.terms["Intercept"].coef == pytest.approx(-1.0, abs=0.05)
    assert fit.terms["x"].coef == pytest.approx(0.5, abs=0.05)
    assert fit.converged


def test_mle_agrees_with_a_coarse_grid_search():
    X, y = _synthetic(4_000, (-1.0, 0.5), seed=2)
    fit = fit_logit(X, y, ["Intercept", "x"])
    grid = [(b0, b1)
            for b0 in np.arange(-2.0, 0.01, 0.05)
            for b1 in np.arange(-0.5, 1.51, 0.05)]
    best = max(grid, key=lambda b: log_likelihood(X, y, np.asarray(b)))
    assert fit.terms["Intercept"].coef == pytest.approx(best[0], abs=0.05)
    assert fit.terms["x"].coef == pytest.approx(best[1], abs=0.05)


def test_gradient_vanishes_at_the_solution():
    X, y = _synthetic(5_000, (0.3, -0.7), seed=3)
    fit = fit_logit(X, y, ["Intercept", "x"])
    beta = np.array([fit.terms["Intercept"].coef, fit.terms["x"].coef])
    assert np.max(np.abs(score(X, y, beta))) < 1e-6


def test_analytic_gradient_matches_central_differences():
    rng = np.random.default_rng(4)
    for _ in range(10):
        n, p = 40, 3
        X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
        y = (rng.random(n) < 0.5).astype(float)
        beta = rng.normal(scale=0.5, size=p)
        g = score(X, y, beta)
        h = 1e-6
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            fd = (log_likelihood(X, y, beta + e) - log_likelihood(X, y, beta - e)) / (2 * h)
            denom = max(1.0, abs(fd))
            assert abs(g[j] - fd) / denom < 1e-6


def test_log_likelihood_is_monotone_across_iterations():
    X, y = _synthetic(2_000, (0.2, 1.2), seed=5)
    fit = fit_logit(X, y, ["Intercept", "x"])
    diffs = np.diff(fit.ll_history)
    assert np.all(diffs >= -1e-9)


def test_identical_outcomes_raise_a_separation_error():
    X = np.column_stack([np.ones(200), np.linspace(-1, 1, 200)])
    y = np.ones(200)
    with pytest.raises(SeparationError) as err:
        fit_logit(X, y, ["Intercept", "x"])
    assert "Intercept" in str(err.value)


def test_perfectly_separated_covariate_names_the_term():
    x = np.linspace(-1, 1, 200)
    X = np.column_stack([np.ones(200), x])
    y = (x > 0).astype(float)
    with pytest.raises(SeparationError) as err:
        fit_logit(X, y, ["Intercept", "x"])
    assert "x" in str(err.value)


def test_duplicate_columns_raise_a_design_error():
    x = np.linspace(-1, 1, 100)
    X = np.column_stack([np.ones(100), x, x])
    y = (x > 0).astype(float)
    with pytest.raises(DesignError):
        fit_logit(X, y, ["Intercept", "x", "x2"])


def test_odds_ratio_is_exp_coef_with_wald_interval():
    X, y = _synthetic(3_000, (0.4, -0.6), seed=6)
    fit = fit_logit(X, y, ["Intercept", "x"])
    est = fit.terms["x"]
    assert est.odds_ratio == pytest.approx(math.exp(est.coef))
    assert est.ci_low == pytest.approx(math.exp(est.coef - 1.959963984540054 * est.se))
    assert est.ci_high == pytest.approx(math.exp(est.coef + 1.959963984540054 * est.se))


# -- log-level model builders ------------------------------------------------------

def _balanced_null_log(seed=0):
    rng = random.Random(seed)
    rows = []
    for i in range(300):
        condition = "blocked" if i % 2 == 0 else "interleaved"
        for j, ptype in enumerate(("add_same", "add_diff", "multiply")):
            rows.append(record(f"a{i}", f"p{j}", rng.random() < 0.5,
                               condition=condition, ptype=ptype,
                               phase="posttest", opportunity=j))
    return rows


def test_null_effect_interval_covers_one():
    fit = posttest_effect(_balanced_null_log())
    est = fit.terms["condition[interleaved]"]
    assert est.ci_low < 1.0 < est.ci_high


def test_design_reference_levels():
    rows = _balanced_null_log()
    problems = problem_outcomes(rows, "posttest")
    X, y, names = build_design(problems, ("condition", "type", "count", "type:count"))
    assert names == ["Intercept", "condition[interleaved]", "type[add_same]",
                     "type[multiply]", "count", "type[add_same]:count",
                     "type[multiply]:count"]
    assert X.shape == (900, 7)


def test_posttest_effect_excludes_count():
    fit = posttest_effect(_balanced_null_log())
    assert "count" not in fit.terms
    assert "type[add_same]" in fit.terms


def test_fit_logistic_counts_problems_not_steps():
    rows = []
    for i in range(40):
        correct = i % 2 == 0
        condition = "blocked" if i % 4 < 2 else "interleaved"
        for _step in range(3):  # three step rows for one problem
            rows.append(record(f"a{i}", "p0", correct, condition=condition))
    fit = fit_logistic(rows, terms=("condition",))
    assert fit.n_observations == 40


def test_hard_problem_effect_uses_condition_and_count():
    rng = random.Random(1)
    rows = []
    for i in range(120):
        condition = "constrained" if i % 2 == 0 else "unconstrained"
        rate = 0.35 if condition == "constrained" else 0.12
        for j in range(8):
            rows.append(record(f"a{i}", f"p{j}", rng.random() < rate,
                               condition=condition, ptype="box_hard",
                               opportunity=j))
            rows.append(record(f"a{i}", f"e{j}", True, condition=condition,
                               ptype="box_easy", opportunity=j))
    fit = hard_problem_effect(rows)
    assert set(fit.terms) == {"Intercept", "condition[unconstrained]", "count"}
    assert fit.n_observations == 120 * 8
    assert fit.terms["condition[unconstrained]"].odds_ratio < 1.0


def test_accuracy_by_condition_groups_problem_level():
    rows = [record("a0", "p0", True, condition="blocked"),
            record("a0", "p1", False, condition="blocked"),
            record("a1", "p0", True, condition="interleaved")]
    acc = accuracy_by_condition(rows)
    assert acc == {"blocked": 0.5, "interleaved": 1.0}
