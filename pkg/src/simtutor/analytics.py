"""Learning curves and fixed-effects logistic regression over transaction logs.

The regression engine is a from-scratch maximum-likelihood fit via
iteratively reweighted least squares with step halving, Wald standard errors
from the inverse observed information, and Wald z p-values.  Problem-level
correctness is the unit of analysis throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .state import ConfigError

TYPE_REFERENCE = "add_diff"
CONDITION_REFERENCES = ("blocked", "constrained")
SEPARATION_BOUND = 15.0


class SeparationError(RuntimeError):
    """A coefficient diverged, indicating (quasi-)complete separation."""


class DesignError(ValueError):
    """The design matrix is rank deficient."""


@dataclass(frozen=True)
class ProblemOutcome:
    replication: int
    agent_id: str
    condition: str
    problem_type: str
    opportunity: int
    position: int  # 1-based index within the agent's phase
    correct: bool


@dataclass(frozen=True)
class CurvePoint:
    condition: str
    position: int
    mean_error: float
    ci_low: float
    ci_high: float
    n: int


@dataclass(frozen=True)
class TermEstimate:
    coef: float
    se: float
    odds_ratio: float
    ci_low: float
    ci_high: float
    p_value: float


@dataclass
class RegressionSummary:
    terms: dict  # name -> TermEstimate, in design order
    log_likelihood: float
    n_observations: int
    tjur_r2: float
    converged: bool
    n_iterations: int
    ll_history: list = field(default_factory=list)

    def table(self) -> str:
        width = max(len(n) for n in self.terms)
        lines = [f"{'term'.ljust(width)}  OR [95% CI]            p"]
        for name, est in self.terms.items():
            ci = f"{est.odds_ratio:.2f} [{est.ci_low:.2f}, {est.ci_high:.2f}]"
            star = "*" if est.p_value < 0.05 else " "
            lines.append(f"{name.ljust(width)}  {ci.ljust(22)}{est.p_value:.4f}{star}")
        lines.append(f"n = {self.n_observations}, logLik = {self.log_likelihood:.2f}, "
                     f"Tjur R2 = {self.tjur_r2:.3f}")
        return "\n".join(lines)


def problem_outcomes(records, phase: str = "tutor"):
    """Collapse step rows to one outcome per problem, with phase positions."""
    seen = set()
    out = []
    positions: dict = {}
    for rec in records:
        if rec.phase != phase:
            continue
        key = (rec.replication, rec.agent_id, rec.problem_id)
        if key in seen:
            continue
        seen.add(key)
        agent_key = (rec.replication, rec.agent_id)
        positions[agent_key] = positions.get(agent_key, 0) + 1
        out.append(ProblemOutcome(
            replication=rec.replication, agent_id=rec.agent_id,
            condition=rec.condition, problem_type=rec.problem_type,
            opportunity=rec.opportunity, position=positions[agent_key],
            correct=rec.problem_correct))
    return out


def _interval(p_hat: float, n: int, kind: str):
    if kind == "wilson":
        z = 1.959963984540054
        denom = 1 + z * z / n
        center = (p_hat + z * z / (2 * n)) / denom
        half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
        return center - half, center + half
    se = math.sqrt(p_hat * (1 - p_hat) / n)
    return max(0.0, p_hat - 1.959963984540054 * se), \
        min(1.0, p_hat + 1.959963984540054 * se)


def learning_curve(records, phase: str = "tutor", interval: str = "normal"):
    """Mean problem-level error per (condition, position), with 95% CIs."""
    problems = problem_outcomes(records, phase)
    if not problems:
        raise ConfigError(f"no {phase!r} rows in the log")
    buckets: dict = {}
    for p in problems:
        buckets.setdefault((p.condition, p.position), []).append(0 if p.correct else 1)
    points = []
    for (condition, position) in sorted(buckets):
        errs = buckets[(condition, position)]
        mean = sum(errs) / len(errs)
        low, high = _interval(mean, len(errs), interval)
        points.append(CurvePoint(condition, position, mean, low, high, len(errs)))
    return points


def curve_rows(points):
    yield ("condition", "position", "mean_error", "ci_low", "ci_high", "n")
    for p in points:
        yield (p.condition, str(p.position), f"{p.mean_error:.6f}",
               f"{p.ci_low:.6f}", f"{p.ci_high:.6f}", str(p.n))


# --------------------------------------------------------------------------
# Logistic regression core
# --------------------------------------------------------------------------

def log_likelihood(X, y, beta):
    eta = X @ beta
    # log(sigma(eta)) and log(1 - sigma(eta)) without overflow
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(X, y, beta):
    mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
    return X.T @ (y - mu)


def fit_logit(X, y, names, max_iter: int = 100, tol: float = 1e-8):
    """IRLS maximum-likelihood fit; returns a RegressionSummary."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise DesignError("design matrix is rank deficient")
    beta = np.zeros(p)
    ll = log_likelihood(X, y, beta)
    history = [ll]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        H = (X * w[:, None]).T @ X
        g = X.T @ (y - mu)
        try:
            delta = np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise DesignError(f"singular information matrix: {exc}") from exc
        step = 1.0
        while True:
            candidate = beta + step * delta
            cand_ll = log_likelihood(X, y, candidate)
            if cand_ll >= ll - 1e-12 or step < 1e-8:
                break
            step *= 0.5
        applied = step * delta
        beta, ll = candidate, cand_ll
        history.append(ll)
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            worst = names[int(np.argmax(np.abs(beta)))]
            raise SeparationError(f"separation detected on term {worst!r}")
        if np.max(np.abs(applied)) < tol:
            converged = True
            break
    mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
    w = np.clip(mu * (1.0 - mu), 1e-12, None)
    H = (X * w[:, None]).T @ X
    cov = np.linalg.inv(H)
    se = np.sqrt(np.diag(cov))
    terms = {}
    for j, name in enumerate(names):
        z = beta[j] / se[j] if se[j] > 0 else math.inf
        p_value = math.erfc(abs(z) / math.sqrt(2.0))
        terms[name] = TermEstimate(
            coef=float(beta[j]), se=float(se[j]),
            odds_ratio=math.exp(beta[j]),
            ci_low=math.exp(beta[j] - 1.959963984540054 * se[j]),
            ci_high=math.exp(beta[j] + 1.959963984540054 * se[j]),
            p_value=p_value)
    y_bool = y > 0.5
    tjur = float(mu[y_bool].mean() - mu[~y_bool].mean()) \
        if y_bool.any() and (~y_bool).any() else float("nan")
    return RegressionSummary(terms=terms, log_likelihood=ll, n_observations=n,
                             tjur_r2=tjur, converged=converged,
                             n_iterations=iterations, ll_history=history)


def _condition_reference(levels):
    for ref in CONDITION_REFERENCES:
        if ref in levels:
            return ref
    return sorted(levels)[0]


def build_design(problems, terms):
    """Design matrix from problem outcomes. Reference levels: the blocked /
    constrained condition and the different-denominator addition type."""
    if not problems:
        raise ConfigError("no problem outcomes to fit")
    names = ["Intercept"]
    cols = [np.ones(len(problems))]
    conditions = sorted({p.condition for p in problems})
    types = sorted({p.problem_type for p in problems})
    if "condition" in terms and len(conditions) > 1:
        ref = _condition_reference(conditions)
        for level in conditions:
            if level == ref:
                continue
            names.append(f"condition[{level}]")
            cols.append(np.array([1.0 if p.condition == level else 0.0
                                  for p in problems]))
    type_dummies = []
    if "type" in terms and len(types) > 1:
        ref = TYPE_REFERENCE if TYPE_REFERENCE in types else types[0]
        for level in types:
            if level == ref:
                continue
            col = np.array([1.0 if p.problem_type == level else 0.0
                            for p in problems])
            names.append(f"type[{level}]")
            cols.append(col)
            type_dummies.append((level, col))
    if "count" in terms:
        names.append("count")
        cols.append(np.array([float(p.opportunity) for p in problems]))
    if "type:count" in terms:
        count = np.array([float(p.opportunity) for p in problems])
        for level, col in type_dummies:
            names.append(f"type[{level}]:count")
            cols.append(col * count)
    X = np.column_stack(cols)
    y = np.array([1.0 if p.correct else 0.0 for p in problems])
    return X, y, names


def fit_logistic(records, phase: str = "tutor",
                 terms=("condition", "type", "count", "type:count")):
    """Problem-level correctness on condition, type, count, and type x count."""
    problems = problem_outcomes(records, phase)
    X, y, names = build_design(problems, terms)
    return fit_logit(X, y, names)


def posttest_effect(records):
    """Posttest correctness on condition and type; count is excluded."""
    return fit_logistic(records, phase="posttest", terms=("condition", "type"))


def hard_problem_effect(records):
    """Box study scoring: hard-problem correctness on condition and count."""
    hard = [r for r in records if r.problem_type == "box_hard"]
    return fit_logistic(hard, phase="tutor", terms=("condition", "count"))


def accuracy_by_condition(records, phase: str = "tutor", problem_type=None):
    problems = problem_outcomes(records, phase)
    if problem_type is not None:
        problems = [p for p in problems if p.problem_type == problem_type]
    totals: dict = {}
    for p in problems:
        good, count = totals.get(p.condition, (0, 0))
        totals[p.condition] = (good + (1 if p.correct else 0), count + 1)
    return {cond: good / count for cond, (good, count) in sorted(totals.items())}
