"""Identification intervals and estimators for E(y | x = xi) when some
outcomes are missing.

The observable data pin down E(y|xi, z=1) and P(z=1|xi) but say nothing
about the mean of the missing outcomes beyond the domain bounds [Y_L, Y_U].
Every estimator here is exact arithmetic on a table or population; nothing
is simulated (simulation lives in :mod:`imputebounds.simlab`).
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .domain import (
    EQUALITY_TOL,
    COVARIATE_REGIME,
    CompletedTable,
    Interval,
    cell_partition,
    flat_value,
)
from .errors import (
    DataError,
    EmptyCell,
    ImputedValueOutOfDomain,
    MeanOutOfDomain,
    ModelUndefinedOnCell,
    RegimeMismatch,
    ZeroCellMass,
)


@dataclass(frozen=True)
class RestrictionGamma:
    """An assumed interval restriction on the mean of the missing outcomes."""

    lo: float
    hi: float

    def __post_init__(self):
        if not float(self.lo) <= float(self.hi):
            raise DataError(f"restriction requires lo <= hi, got [{self.lo}, {self.hi}]")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))


def _xi_only(sel, domains_x, domains_w):
    xi_flat, omega_flat = sel.resolve(domains_x, domains_w)
    if omega_flat is not None:
        raise DataError("missing-outcome operations select on x only")
    return xi_flat


def _cell_stats(pop, sel):
    xi = _xi_only(sel, pop.x_domains, pop.w_domains)
    p_xi = pop.mass_where(xi=xi)
    if p_xi <= 0.0:
        raise ZeroCellMass(f"P(x = {sel.xi!r}) = 0")
    return xi, p_xi


def true_mean(pop, sel):
    """Exact E(y | x = xi) from the population mass table."""
    xi, p_xi = _cell_stats(pop, sel)
    return pop.ymass_where(xi=xi) / p_xi


def identification_interval_pop(pop, sel, dom=None):
    """Assumption-free identification interval for E(y | x = xi).

    The observed part contributes E(y|xi,z=1) P(z=1|xi); the missing mass
    P(z=0|xi) can sit anywhere in the outcome domain, so the interval is
    that observed part shifted by Y_L and Y_U times the missing share.
    """
    dom = dom or pop.outcome
    xi, p_xi = _cell_stats(pop, sel)
    obs = pop.ymass_where(xi=xi, z=1) / p_xi
    p0 = pop.mass_where(xi=xi, z=0) / p_xi
    return Interval(obs + dom.lo * p0, obs + dom.hi * p0)


def restricted_interval_pop(pop, sel, gamma):
    """Identification interval when the missing-outcome mean is assumed to
    lie in ``gamma`` (an interval inside the outcome domain)."""
    if not (pop.outcome.lo <= gamma.lo and gamma.hi <= pop.outcome.hi):
        raise DataError("restriction must lie inside the outcome domain")
    xi, p_xi = _cell_stats(pop, sel)
    obs = pop.ymass_where(xi=xi, z=1) / p_xi
    p0 = pop.mass_where(xi=xi, z=0) / p_xi
    return Interval(obs + gamma.lo * p0, obs + gamma.hi * p0)


def sample_interval(table, sel, dom=None):
    """Sample analog of the assumption-free interval.

    With observed fraction pi and observed-cell mean m, the interval is
    ``[pi*m + (1-pi)*Y_L, pi*m + (1-pi)*Y_U]``; an all-missing cell yields
    the full outcome domain.
    """
    if table.regime == COVARIATE_REGIME:
        raise RegimeMismatch("sample_interval needs an outcome-regime table")
    dom = dom or table.outcome
    obs_idx, _, pi = cell_partition(table, sel)
    m = float(table.y[obs_idx].mean()) if len(obs_idx) else 0.0
    return Interval(pi * m + (1.0 - pi) * dom.lo, pi * m + (1.0 - pi) * dom.hi)


def imputation_mean(completed, sel, dom=None):
    """Pooled average of observed and imputed outcomes in the xi cell."""
    if not isinstance(completed, CompletedTable):
        raise RegimeMismatch("imputation_mean expects a completed table")
    dom = dom or completed.outcome
    xi = _xi_only(sel, completed.x_domains, completed.w_domains)
    rows = completed.x == xi
    if not rows.any():
        raise EmptyCell(f"no records at x = {sel.xi!r}")
    imputed = completed.y[rows & completed.y_imputed]
    if not dom.contains(imputed):
        raise ImputedValueOutOfDomain(
            f"imputed outcome outside domain [{dom.lo}, {dom.hi}]")
    return float(completed.y[rows].mean())


def _explicit_outcome_dist(model, x_domains, xi_flat):
    for x_key, dist in model.outcome_q.items():
        if flat_value(x_domains, x_key) == xi_flat:
            return dist
    return None


def model_missing_outcome_mean(pop, model, sel):
    """Exact mean of the imputation distribution on the missing stratum,
    E(u | x = xi, z = 0), computed against the population."""
    xi, _ = _cell_stats(pop, sel)
    if model.target != "outcome":
        raise RegimeMismatch(f"model {model.kind!r} does not impute outcomes")
    if model.kind == models.MAR_OUTCOME:
        denom = pop.mass_where(xi=xi, z=1)
        if denom <= 0.0:
            raise ModelUndefinedOnCell(
                f"no observed outcomes at x = {sel.xi!r} to match")
        return pop.ymass_where(xi=xi, z=1) / denom
    dist = _explicit_outcome_dist(model, pop.x_domains, xi)
    if dist is None:
        raise ModelUndefinedOnCell(f"model has no distribution at x = {sel.xi!r}")
    values = np.array([v for v, _ in dist])
    if not pop.outcome.contains(values):
        raise ImputedValueOutOfDomain("model support exceeds the outcome domain")
    return float(sum(v * p for v, p in dist))


def plim_imputation_mean(pop, model, sel):
    """Population probability limit of the single-imputation estimate:
    the observed part plus the model's missing-stratum mean weighted by the
    missing share."""
    xi, p_xi = _cell_stats(pop, sel)
    obs = pop.ymass_where(xi=xi, z=1) / p_xi
    p0 = pop.mass_where(xi=xi, z=0) / p_xi
    if p0 == 0.0:
        return obs
    return obs + model_missing_outcome_mean(pop, model, sel) * p0


def consistency_condition(pop, model, sel):
    """True iff the model's missing-stratum mean matches the actual
    E(y | x = xi, z = 0); exactly then the imputation estimate is consistent."""
    xi, _ = _cell_stats(pop, sel)
    denom = pop.mass_where(xi=xi, z=0)
    if denom <= 0.0:
        return True
    actual = pop.ymass_where(xi=xi, z=0) / denom
    return abs(model_missing_outcome_mean(pop, model, sel) - actual) <= EQUALITY_TOL


def q_mean_estimate(table, sel, e_q):
    """Estimate that replaces every missing outcome by an assumed mean
    ``e_q`` instead of a random draw; same probability limit as random
    imputation from any distribution with that mean, smaller variance."""
    e_q = float(e_q)
    if not table.outcome.lo <= e_q <= table.outcome.hi:
        raise MeanOutOfDomain(
            f"assumed mean {e_q} outside [{table.outcome.lo}, {table.outcome.hi}]")
    if table.regime == COVARIATE_REGIME:
        raise RegimeMismatch("q_mean_estimate needs an outcome-regime table")
    obs_idx, _, pi = cell_partition(table, sel)
    m = float(table.y[obs_idx].mean()) if len(obs_idx) else 0.0
    return pi * m + (1.0 - pi) * e_q


def midpoint_estimate(table, sel, dom=None):
    """Midpoint of the sample interval; among constant-limit point
    estimates it minimizes the worst-case asymptotic squared bias."""
    return sample_interval(table, sel, dom).midpoint
