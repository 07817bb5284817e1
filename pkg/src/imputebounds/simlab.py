"""Simulation laboratory: population construction, missingness mechanisms,
seeded sampling, and Monte Carlo experiments that check estimator
probability limits and bias gaps numerically.

Every random quantity is keyed off explicit seeds (see
:mod:`imputebounds._rng`); replications are independent and aggregate by
commutative reductions, so reports are reproducible regardless of
scheduling.
"""

import json
import math
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import _kernels, missing_covariate, missing_outcome
from ._rng import (
    STREAM_COMPLETION,
    STREAM_POPULATION,
    STREAM_SAMPLE,
    derive_seed,
    stream,
)
from .domain import (
    EQUALITY_TOL,
    OUTCOME_REGIME,
    CategoricalDomain,
    CellSelector,
    FinitePopulation,
    ObservationTable,
    OutcomeDomain,
    flat_value,
    load_population,
    population_from_json,
    validate_population,
)
from .errors import (
    DataError,
    EmptyCell,
    ModelUndefinedOnCell,
    ProbabilityOutOfRange,
    UnfittableStratum,
    ZeroCellMass,
    ZeroDenominator,
)
from .models import model_from_json
from .rmi import EstimatorSpec, fit_model, _complete


# ---------------------------------------------------------------------------
# missingness mechanisms


@dataclass(frozen=True)
class MissingnessMechanism:
    """Per-cell missingness probabilities P(z = 0 | y, x, w).

    ``kind`` selects how the payload is read: a constant rate, a rate per
    outcome value (selection on the outcome itself), a rate per x value, a
    full per-cell table, or an arbitrary vectorized callable
    ``f(y, x_flat, w_flat) -> probs``.
    """

    kind: str
    payload: object

    @classmethod
    def constant(cls, rate):
        return cls("constant", float(rate))

    @classmethod
    def by_outcome(cls, rates):
        """MNAR: rate chosen by the (possibly missing) outcome value."""
        return cls("by_outcome", {float(k): float(v) for k, v in rates.items()})

    @classmethod
    def by_x(cls, rates):
        """MAR given x: rate chosen by the always-observed covariates."""
        return cls("by_x", dict(rates))

    @classmethod
    def by_cell(cls, rates):
        """Explicit table ``{(y, x_value, w_value): rate}``."""
        return cls("by_cell", dict(rates))

    @classmethod
    def from_callable(cls, fn):
        return cls("callable", fn)

    def probabilities(self, pop):
        """P(z=0) per population cell, validated to lie in [0, 1]."""
        y_vals = pop.outcome_values[pop.y_i]
        if self.kind == "constant":
            probs = np.full(pop.n_cells, self.payload)
        elif self.kind == "by_outcome":
            try:
                probs = np.array([self.payload[float(v)] for v in y_vals])
            except KeyError as e:
                raise DataError(f"no missingness rate for outcome {e.args[0]}") from None
        elif self.kind == "by_x":
            table = {flat_value(pop.x_domains, k): float(v)
                     for k, v in self.payload.items()}
            try:
                probs = np.array([table[int(xf)] for xf in pop.x_i])
            except KeyError:
                raise DataError("no missingness rate for some x cell") from None
        elif self.kind == "by_cell":
            table = {}
            for (y_val, x_val, w_val), rate in self.payload.items():
                key = (float(y_val), flat_value(pop.x_domains, x_val),
                       flat_value(pop.w_domains, w_val))
                table[key] = float(rate)
            try:
                probs = np.array([
                    table[(float(y_vals[i]), int(pop.x_i[i]), int(pop.w_i[i]))]
                    for i in range(pop.n_cells)])
            except KeyError:
                raise DataError("no missingness rate for some cell") from None
        elif self.kind == "callable":
            probs = np.asarray(self.payload(y_vals, pop.x_i, pop.w_i),
                               dtype=np.float64)
        else:
            raise DataError(f"unknown mechanism kind {self.kind!r}")
        if np.any((probs < 0.0) | (probs > 1.0)):
            raise ProbabilityOutOfRange("mechanism probability outside [0, 1]")
        return probs


def joint_population(cells, *, outcome, x_domains, w_domains=(),
                     regime=OUTCOME_REGIME):
    """A fully observed population (all z = 1) from ``{(y, x, w): mass}``;
    the starting point for :func:`apply_mechanism`."""
    return FinitePopulation.from_cells(
        {(y, x, w, 1): m for (y, x, w), m in cells.items()},
        outcome=outcome, x_domains=x_domains, w_domains=w_domains,
        regime=regime)


def apply_mechanism(base, mech):
    """Split each cell of an all-observed population into z = 1 and z = 0
    parts according to the mechanism; the output stays normalized."""
    if np.any(base.z != 1):
        raise DataError("base population must be fully observed (all z = 1)")
    probs = mech.probabilities(base)
    keep = 1.0 - probs
    return FinitePopulation(
        outcome=base.outcome,
        outcome_values=base.outcome_values,
        x_domains=base.x_domains,
        w_domains=base.w_domains,
        y_i=np.concatenate([base.y_i, base.y_i]),
        x_i=np.concatenate([base.x_i, base.x_i]),
        w_i=np.concatenate([base.w_i, base.w_i]),
        z=np.concatenate([np.ones(base.n_cells, dtype=np.int8),
                          np.zeros(base.n_cells, dtype=np.int8)]),
        mass=np.concatenate([base.mass * keep, base.mass * probs]),
        regime=base.regime,
    )


# ---------------------------------------------------------------------------
# sampling and random populations


def sample_table(pop, n, seed):
    """Draw ``n`` i.i.d. records; the variable governed by z (per the
    population's regime) is blanked where z = 0. Deterministic in ``seed``."""
    validate_population(pop)
    cdf = np.cumsum(pop.mass)
    cdf /= cdf[-1]
    u = stream(seed, STREAM_SAMPLE).random(int(n))
    idx = _kernels.sample_cells(cdf, u)
    y = pop.outcome_values[pop.y_i[idx]]
    x = pop.x_i[idx]
    w = pop.w_i[idx]
    hidden = pop.z[idx] == 0
    if pop.regime == OUTCOME_REGIME:
        y = y.copy()
        y[hidden] = np.nan
    else:
        w = w.copy()
        w[hidden] = -1
    return ObservationTable(pop.outcome, pop.x_domains, pop.w_domains, y, x, w)


def _letters(n):
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    if n <= len(alphabet):
        return tuple(alphabet[:n])
    return tuple(f"v{i}" for i in range(n))


def default_domains(prefix, sizes):
    return tuple(CategoricalDomain(f"{prefix}{i + 1}", _letters(size))
                 for i, size in enumerate(sizes))


def random_population(seed, *, outcome_values=(0.0, 1.0), x_sizes=(2,),
                      w_sizes=(), regime=OUTCOME_REGIME, floor=1e-3,
                      outcome=None):
    """A seeded random population: Dirichlet(1, ..., 1) masses over all
    (y, x, w, z) cells, mixed with a per-cell floor so no stratum vanishes.
    """
    values = np.array(sorted(float(v) for v in set(outcome_values)))
    if outcome is None:
        if set(values) <= {0.0, 1.0}:
            outcome = OutcomeDomain.binary_01()
        else:
            outcome = OutcomeDomain(float(values.min()), float(values.max()))
    x_domains = default_domains("x", x_sizes)
    w_domains = default_domains("w", w_sizes)
    nx = max(int(np.prod(x_sizes)), 1)
    nw = max(int(np.prod(w_sizes)), 1) if w_sizes else 1
    n_cells = len(values) * nx * nw * 2
    if n_cells * floor >= 1.0:
        raise DataError(f"floor {floor} too large for {n_cells} cells")
    rng = stream(seed, STREAM_POPULATION)
    raw = rng.gamma(1.0, size=n_cells)
    masses = floor + (1.0 - n_cells * floor) * (raw / raw.sum())
    grid = list(product(range(len(values)), range(nx), range(nw), (1, 0)))
    return FinitePopulation(
        outcome=outcome,
        outcome_values=values,
        x_domains=x_domains,
        w_domains=w_domains,
        y_i=np.array([g[0] for g in grid], dtype=np.int64),
        x_i=np.array([g[1] for g in grid], dtype=np.int64),
        w_i=np.array([g[2] for g in grid], dtype=np.int64),
        z=np.array([g[3] for g in grid], dtype=np.int8),
        mass=masses,
        regime=regime,
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentSpec:
    """A convergence experiment: population, model, estimator, cell,
    sample-size grid, replication count, master seed, and tolerance."""

    population: FinitePopulation
    model: object
    estimator: str
    selector: CellSelector
    n_grid: tuple
    reps: int
    seed: int
    tolerance: float

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DataError("n_grid must be strictly increasing")
        if not grid:
            raise DataError("n_grid is empty")
        if int(self.reps) < 1:
            raise DataError("reps must be >= 1")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "reps", int(self.reps))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "tolerance", float(self.tolerance))


_MODEL_ALIASES = {"mar": "mar_outcome", "marcov": "mar_covariate",
                  "ecological": "ecological"}


def _model_from_ref(ref, base_dir):
    if isinstance(ref, str):
        if ref.startswith("q:"):
            with open(os.path.join(base_dir, ref[2:]), encoding="utf-8") as fh:
                return model_from_json(json.load(fh))
        alias = _MODEL_ALIASES.get(ref, ref)
        return model_from_json({"kind": alias})
    return model_from_json(ref)


def experiment_from_json(obj, base_dir="."):
    pop_ref = obj["population"]
    if isinstance(pop_ref, str):
        pop = load_population(os.path.join(base_dir, pop_ref))
    else:
        pop = population_from_json(pop_ref)
    omega = obj.get("omega")
    selector = CellSelector(obj["xi"], omega)
    return ExperimentSpec(
        population=pop,
        model=_model_from_ref(obj["model"], base_dir),
        estimator=obj["estimator"],
        selector=selector,
        n_grid=tuple(obj["n_grid"]),
        reps=obj["reps"],
        seed=obj["seed"],
        tolerance=obj["tolerance"],
    )


def load_experiment(path):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return experiment_from_json(obj, base_dir=os.path.dirname(os.path.abspath(path)))


def exact_plim(pop, model, estimator, selector):
    if estimator == "imputation_mean":
        return missing_outcome.plim_imputation_mean(pop, model, selector)
    if estimator == "long_mean":
        return missing_covariate.plim_imputed_long_mean(pop, model, selector)
    raise DataError(f"unknown estimator {estimator!r}")


_SKIPPABLE = (EmptyCell, UnfittableStratum, ModelUndefinedOnCell,
              ZeroCellMass, ZeroDenominator)

#: a grid entry fails outright when more than this share of reps skip
MAX_SKIP_FRACTION = 0.05


@dataclass(frozen=True)
class ConvergenceEntry:
    n: int
    reps: int
    skips: int
    mean_abs_dev: float
    max_abs_dev: float
    est_spread: float
    passed: bool


@dataclass(frozen=True)
class ConvergenceReport:
    plim: float
    tolerance: float
    entries: tuple
    passed: bool

    def to_json(self):
        return {
            "plim": self.plim,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "entries": [
                {"n": e.n, "reps": e.reps, "skips": e.skips,
                 "mean_abs_dev": e.mean_abs_dev, "max_abs_dev": e.max_abs_dev,
                 "est_spread": e.est_spread, "passed": e.passed}
                for e in self.entries
            ],
        }


def convergence_experiment(spec):
    """Run the experiment: per grid size, sample and singly impute ``reps``
    tables, compare the estimator to its exact probability limit.

    Replication ``r`` at grid position ``j`` derives its seed as
    ``derive_seed(master, j, r)``. Empty sample cells are recorded as skips;
    an entry fails when deviations exceed the tolerance or skips exceed
    ``MAX_SKIP_FRACTION``. The estimate spread across replications is
    reported as a diagnostic only.
    """
    pop = spec.population
    estimator = EstimatorSpec(spec.estimator, spec.selector)
    plim = exact_plim(pop, spec.model, spec.estimator, spec.selector)
    entries = []
    for j, n in enumerate(spec.n_grid):
        devs = []
        estimates = []
        skips = 0
        for r in range(spec.reps):
            rep_seed = derive_seed(spec.seed, j, r)
            table = sample_table(pop, n, rep_seed)
            try:
                fitted = fit_model(spec.model, table)
                completed = _complete(table, fitted,
                                      stream(rep_seed, STREAM_COMPLETION))
                est = estimator.apply(completed)
            except _SKIPPABLE:
                skips += 1
                continue
            estimates.append(est)
            devs.append(abs(est - plim))
        skip_ok = skips <= MAX_SKIP_FRACTION * spec.reps
        mean_dev = float(np.mean(devs)) if devs else math.nan
        max_dev = float(np.max(devs)) if devs else math.nan
        spread = float(np.std(estimates)) if len(estimates) > 1 else 0.0
        passed = skip_ok and bool(devs) and max_dev <= spec.tolerance
        entries.append(ConvergenceEntry(int(n), spec.reps, skips,
                                        mean_dev, max_dev, spread, passed))
    return ConvergenceReport(plim=plim, tolerance=spec.tolerance,
                             entries=tuple(entries),
                             passed=all(e.passed for e in entries))


# ---------------------------------------------------------------------------
# bias gaps


@dataclass(frozen=True)
class BiasGapReport:
    """Exact plim versus exact truth, with the assumption-free interval."""

    plim: float
    truth: float
    gap: float
    interval: object
    truth_covered: bool
    imputation_point_in_interval: bool


def bias_gap(pop, model, sel):
    """Exact bias diagnostics for (population, model, cell): the estimator's
    probability limit, the true cell mean, their gap, and whether each lies
    in the assumption-free identification interval."""
    if sel.omega is None:
        plim = missing_outcome.plim_imputation_mean(pop, model, sel)
        truth = missing_outcome.true_mean(pop, sel)
        interval = missing_outcome.identification_interval_pop(pop, sel)
    else:
        plim = missing_covariate.plim_imputed_long_mean(pop, model, sel)
        truth = missing_covariate.true_long_mean(pop, sel)
        interval = missing_covariate.binary_bounds_oracle(pop, sel)
    return BiasGapReport(
        plim=plim,
        truth=truth,
        gap=plim - truth,
        interval=interval,
        truth_covered=interval.contains(truth, tol=EQUALITY_TOL),
        imputation_point_in_interval=interval.contains(plim, tol=EQUALITY_TOL),
    )
