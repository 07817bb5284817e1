"""Random multiple imputation: model fitting, seeded completion draws, and
the large-m pooled runner.

A run is reproducible from ``(table, model, m, seed)`` alone: draw ``k``
consumes the Philox stream keyed ``(seed, k + 1)`` (see
:mod:`imputebounds._rng`), completions never mutate the input table, and the
pooled value is the plain mean of the per-draw estimates. Pooling does not
change what the estimator converges to; it only averages away the draw
noise of a single completion.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels, missing_covariate, missing_outcome, models
from ._rng import STREAM_COMPLETION, stream
from .domain import (
    COVARIATE_REGIME,
    OUTCOME_REGIME,
    CompletedTable,
    flat_value,
    value_labels,
)
from .errors import (
    DataError,
    ImputeBoundsError,
    ImputedValueOutOfDomain,
    RegimeMismatch,
    UnfittableStratum,
)
from .models import (
    ImputationModel,
    QCovariateModel,
    model_from_json,
    model_to_json,
    true_covariate_model,
    true_outcome_model,
)

__all__ = [
    "ImputationModel",
    "QCovariateModel",
    "FittedImputationModel",
    "EstimatorSpec",
    "MultipleImputationResult",
    "fit_model",
    "draw_completion",
    "run_multiple_imputation",
    "true_outcome_model",
    "true_covariate_model",
    "model_to_json",
    "model_from_json",
]


@dataclass(frozen=True)
class FittedImputationModel:
    """A model resolved against concrete domains: per stratum, the atoms
    and cumulative probabilities that completion draws invert."""

    kind: str
    target: str
    strata: dict

    def stratum(self, key):
        return self.strata.get(key)


def _empirical(values):
    atoms, counts = np.unique(values, return_counts=True)
    probs = counts / counts.sum()
    return atoms, np.cumsum(probs)


def _check_regime(model, table):
    if model.target == "outcome" and table.regime == COVARIATE_REGIME:
        raise RegimeMismatch("outcome model on a covariate-missing table")
    if model.target == "covariate" and table.regime == OUTCOME_REGIME:
        raise RegimeMismatch("covariate model on an outcome-missing table")


def _required_strata(table, target, kind):
    """Stratum keys of the records that need imputation."""
    if target == "outcome":
        rows = np.flatnonzero(~np.asarray(table.z_y))
        return {int(table.x[i]) for i in rows}
    rows = np.flatnonzero(~np.asarray(table.z_w))
    if kind == models.ECOLOGICAL:
        return {int(table.x[i]) for i in rows}
    return {(float(table.y[i]), int(table.x[i])) for i in rows}


def _stratum_name(table, key):
    if isinstance(key, tuple):
        y_val, xf = key
        return f"(y={y_val}, x={value_labels(table.x_domains, xf)!r})"
    return f"x={value_labels(table.x_domains, key)!r}"


def fit_model(model, table):
    """Resolve an imputation model against a table.

    Fitted variants take the empirical conditional distribution of their
    observed donors; explicit variants pass their assumed distribution
    through. Raises :class:`UnfittableStratum` when a stratum that needs
    imputation has no donors (or no assumed distribution).
    """
    _check_regime(model, table)
    strata = {}
    if model.kind == models.MAR_OUTCOME:
        observed = np.asarray(table.z_y)
        for xf in np.unique(table.x[observed]):
            atoms, cdf = _empirical(table.y[observed & (table.x == xf)])
            strata[int(xf)] = (atoms, cdf)
    elif model.kind == models.EXPLICIT_OUTCOME_Q:
        for x_key, dist in model.outcome_q.items():
            values = np.array([v for v, _ in dist])
            if not table.outcome.contains(values):
                raise ImputedValueOutOfDomain(
                    "model support exceeds the outcome domain")
            cdf = np.cumsum([p for _, p in dist])
            strata[flat_value(table.x_domains, x_key)] = (values, cdf)
    elif model.kind == models.MAR_COVARIATE:
        observed = np.asarray(table.z_w)
        pairs = {(float(table.y[i]), int(table.x[i]))
                 for i in np.flatnonzero(observed)}
        for y_val, xf in pairs:
            rows = observed & (table.x == xf) & (table.y == y_val)
            atoms, cdf = _empirical(table.w[rows])
            strata[(y_val, xf)] = (atoms.astype(np.int64), cdf)
    elif model.kind == models.EXPLICIT_COVARIATE_Q:
        for (y_val, x_key), dist in model.covariate_q.strata.items():
            codes = np.array([flat_value(table.w_domains, w) for w, _ in dist],
                             dtype=np.int64)
            cdf = np.cumsum([p for _, p in dist])
            strata[(y_val, flat_value(table.x_domains, x_key))] = (codes, cdf)
    elif model.kind == models.ECOLOGICAL:
        observed = np.asarray(table.z_w)
        for xf in np.unique(table.x[observed]):
            atoms, cdf = _empirical(table.w[observed & (table.x == xf)])
            strata[int(xf)] = (atoms.astype(np.int64), cdf)
    fitted = FittedImputationModel(model.kind, model.target, strata)
    _check_coverage(fitted, table)
    return fitted


def _check_coverage(fitted, table):
    for key in sorted(_required_strata(table, fitted.target, fitted.kind),
                      key=str):
        if key not in fitted.strata:
            raise UnfittableStratum(
                f"no distribution to impute from at {_stratum_name(table, key)}")


def _complete(table, fitted, rng):
    if fitted.target == "outcome":
        missing = np.flatnonzero(~np.asarray(table.z_y))
        keys = [int(table.x[i]) for i in missing]
    else:
        missing = np.flatnonzero(~np.asarray(table.z_w))
        if fitted.kind == models.ECOLOGICAL:
            keys = [int(table.x[i]) for i in missing]
        else:
            keys = [(float(table.y[i]), int(table.x[i])) for i in missing]

    y = np.array(table.y, copy=True)
    w = np.array(table.w, copy=True)
    y_imputed = np.zeros(table.n, dtype=bool)
    w_imputed = np.zeros(table.n, dtype=bool)

    if len(missing):
        unique_keys = sorted(set(keys), key=str)
        ordinal = {k: j for j, k in enumerate(unique_keys)}
        width = max(len(fitted.strata[k][1]) for k in unique_keys)
        cdf_mat = np.ones((len(unique_keys), width))
        if fitted.target == "outcome":
            val_mat = np.zeros((len(unique_keys), width))
        else:
            val_mat = np.zeros((len(unique_keys), width), dtype=np.int64)
        for k in unique_keys:
            atoms, cdf = fitted.strata[k]
            j = ordinal[k]
            cdf_mat[j, :len(cdf)] = cdf
            val_mat[j, :len(atoms)] = atoms
            val_mat[j, len(atoms):] = atoms[-1]
        row_of = np.array([ordinal[k] for k in keys], dtype=np.int64)
        u = rng.random(len(missing))
        pos = _kernels.draw_positions(cdf_mat, row_of, u)
        drawn = val_mat[row_of, pos]
        if fitted.target == "outcome":
            y[missing] = drawn
            y_imputed[missing] = True
        else:
            w[missing] = drawn
            w_imputed[missing] = True

    return CompletedTable(
        outcome=table.outcome, x_domains=table.x_domains,
        w_domains=table.w_domains, y=y, x=np.array(table.x, copy=True), w=w,
        y_imputed=y_imputed, w_imputed=w_imputed)


def draw_completion(table, fitted, seed):
    """One completed dataset: every missing value replaced by an
    independent draw from its stratum's distribution, deterministic in
    ``seed``. Observed values are untouched."""
    if isinstance(fitted, ImputationModel):
        fitted = fit_model(fitted, table)
    _check_coverage(fitted, table)
    return _complete(table, fitted, stream(seed, STREAM_COMPLETION))


@dataclass(frozen=True)
class EstimatorSpec:
    """A named cell estimator to apply to each completed dataset:
    ``imputation_mean`` (outcome regime) or ``long_mean`` (covariate)."""

    name: str
    selector: object

    def __post_init__(self):
        if self.name not in _ESTIMATORS:
            raise DataError(
                f"unknown estimator {self.name!r}; "
                f"expected one of {sorted(_ESTIMATORS)}")

    def apply(self, completed):
        return _ESTIMATORS[self.name](completed, self.selector)


_ESTIMATORS = {
    "imputation_mean": missing_outcome.imputation_mean,
    "long_mean": missing_covariate.imputed_long_mean,
}


@dataclass(frozen=True)
class MultipleImputationResult:
    """Per-draw estimates with their pooled mean and across-draw spread."""

    per_draw_estimates: tuple
    pooled_mean: float
    pooled_dispersion: float
    m: int
    seed: int


def run_multiple_imputation(table, model, m, estimator, seed):
    """Complete the table ``m`` times, estimate on each completion, pool.

    Draw ``k`` (0-based) uses the stream keyed ``(seed, k + 1)``, so results
    are reproducible and independent of scheduling; ``m = 1`` reproduces
    :func:`draw_completion` exactly. The pooled value is the arithmetic mean
    of the per-draw estimates; the dispersion is their sample standard
    deviation (0 when ``m = 1``) and is reported for diagnostics only.
    """
    m = int(m)
    if m < 1:
        raise DataError(f"m must be >= 1, got {m}")
    fitted = fit_model(model, table)
    estimates = []
    for k in range(m):
        try:
            completed = _complete(table, fitted, stream(seed, STREAM_COMPLETION + k))
            estimates.append(float(estimator.apply(completed)))
        except ImputeBoundsError as e:
            try:
                tagged = type(e)(f"draw {k}: {e}")
            except TypeError:
                tagged = ImputeBoundsError(f"draw {k}: {e}")
            raise tagged from e
    arr = np.array(estimates)
    dispersion = float(arr.std(ddof=1)) if m > 1 else 0.0
    return MultipleImputationResult(
        per_draw_estimates=tuple(estimates),
        pooled_mean=float(arr.mean()),
        pooled_dispersion=dispersion,
        m=m,
        seed=int(seed),
    )
