"""Identification bounds and estimators for E(y | x = xi, w = omega) when
the covariate w is missing for part of the sample.

Imputing w moves records into (or away from) the target cell, so both the
numerator and the denominator of the cell mean are contaminated; the
probability limit of the imputation estimate mixes the observed cell with
whatever the model routes into it. For binary outcomes the assumption-free
bounds have a closed ratio form, which is verified here against an
exhaustive allocation oracle.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import models
from .domain import (
    EQUALITY_TOL,
    NORMALIZATION_TOL,
    COVARIATE_REGIME,
    CompletedTable,
    FinitePopulation,
    Interval,
    ObservationTable,
    flat_value,
    value_labels,
)
from .errors import (
    DataError,
    EmptyCell,
    MassNotNormalized,
    ModelUndefinedOnCell,
    NegativeMass,
    NonBinaryOutcome,
    QUndefinedForStratum,
    RegimeMismatch,
    TooManyStrata,
    ZeroCellMass,
    ZeroDenominator,
)
from .models import QCovariateModel

#: vertex enumeration is capped at 2**12 corners
ORACLE_STRATA_CAP = 12

__all__ = [
    "QCovariateModel",
    "WeightedJointMeasure",
    "true_long_mean",
    "imputed_long_mean",
    "plim_imputed_long_mean",
    "imputed_cell_share",
    "matching_conditions",
    "binary_bounds_closed_form",
    "binary_bounds_oracle",
    "midpoint_long_estimate",
    "mixture_joint_estimate",
    "mixture_conditional_mean",
]


def _xi_omega(sel, x_domains, w_domains):
    xi_flat, omega_flat = sel.resolve(x_domains, w_domains)
    if omega_flat is None:
        raise DataError("this operation selects a (xi, omega) cell")
    return xi_flat, omega_flat


def true_long_mean(pop, sel):
    """Exact E(y | x = xi, w = omega) from the population mass table."""
    xi, om = _xi_omega(sel, pop.x_domains, pop.w_domains)
    denom = pop.mass_where(xi=xi, omega=om)
    if denom <= 0.0:
        raise ZeroCellMass(f"P(x = {sel.xi!r}, w = {sel.omega!r}) = 0")
    return pop.ymass_where(xi=xi, omega=om) / denom


def imputed_long_mean(completed, sel):
    """Average outcome over the pooled cell: records observed at
    (xi, omega) plus records imputed into it."""
    if not isinstance(completed, CompletedTable):
        raise RegimeMismatch("imputed_long_mean expects a completed table")
    xi, om = _xi_omega(sel, completed.x_domains, completed.w_domains)
    rows = (completed.x == xi) & (completed.w == om)
    if not rows.any():
        raise EmptyCell(f"no records pooled at (x={sel.xi!r}, w={sel.omega!r})")
    return float(completed.y[rows].mean())


def _omega_weights(pop, model, sel, xi, om):
    """Per outcome value, the model's chance of imputing w = omega for a
    missing record in stratum (y, xi): q_k = P(u = omega | y_k, xi, z=0).

    Only strata with positive missing mass are evaluated; others get 0.
    """
    if model.target != "covariate":
        raise RegimeMismatch(f"model {model.kind!r} does not impute covariates")
    n_y = len(pop.outcome_values)
    weights = np.zeros(n_y)
    if model.kind == models.ECOLOGICAL:
        p_xi = pop.mass_where(xi=xi)
        if p_xi <= 0.0:
            raise ModelUndefinedOnCell(f"P(x = {sel.xi!r}) = 0")
        weights[:] = pop.mass_where(xi=xi, omega=om) / p_xi
        return weights
    x_labels = value_labels(pop.x_domains, xi)
    for k, y_val in enumerate(pop.outcome_values):
        m0 = pop.mass_where(xi=xi, y_index=k, z=0)
        if m0 <= 0.0:
            continue
        if model.kind == models.MAR_COVARIATE:
            donor = pop.mass_where(xi=xi, y_index=k, z=1)
            if donor <= 0.0:
                raise ModelUndefinedOnCell(
                    f"no observed covariates at (y={y_val}, x={sel.xi!r}) to match")
            weights[k] = pop.mass_where(xi=xi, omega=om, y_index=k, z=1) / donor
        else:
            dist = model.covariate_q.distribution(y_val, x_labels)
            if dist is None:
                raise ModelUndefinedOnCell(
                    f"model has no stratum (y={y_val}, x={sel.xi!r})")
            weights[k] = sum(
                p for w_key, p in dist
                if flat_value(pop.w_domains, w_key) == om)
    return weights


def _mixture_parts(pop, model, sel):
    xi, om = _xi_omega(sel, pop.x_domains, pop.w_domains)
    q = _omega_weights(pop, model, sel, xi, om)
    obs_mass = pop.mass_where(xi=xi, omega=om, z=1)
    obs_ymass = pop.ymass_where(xi=xi, omega=om, z=1)
    u_mass = 0.0
    u_ymass = 0.0
    for k, y_val in enumerate(pop.outcome_values):
        m0 = pop.mass_where(xi=xi, y_index=k, z=0)
        u_mass += q[k] * m0
        u_ymass += float(y_val) * q[k] * m0
    return xi, om, obs_mass, obs_ymass, u_mass, u_ymass


def plim_imputed_long_mean(pop, model, sel):
    """Probability limit of the imputed long-cell mean: the observed
    (xi, omega, z=1) cell mixed with the mass the model routes into omega
    from the missing strata."""
    _, _, obs_mass, obs_ymass, u_mass, u_ymass = _mixture_parts(pop, model, sel)
    total = obs_mass + u_mass
    if total <= 0.0:
        raise ZeroCellMass("no mass reaches the pooled cell")
    return (obs_ymass + u_ymass) / total


def imputed_cell_share(pop, model, sel):
    """Limit fraction of the pooled cell that is genuinely observed."""
    _, _, obs_mass, _, u_mass, _ = _mixture_parts(pop, model, sel)
    total = obs_mass + u_mass
    if total <= 0.0:
        raise ZeroCellMass("no mass reaches the pooled cell")
    return obs_mass / total


def matching_conditions(pop, model, sel):
    """The two equalities under which the imputed long mean is consistent.

    Returns ``(mass_matches, mean_matches)``: the imputed-in mass equals the
    actual missing mass at omega, and the mean outcome routed in equals the
    actual missing-cell mean. Both compare exactly (tolerance 1e-9); a
    vacuous side (no mass on either route) counts as a match.
    """
    xi, om, _, _, u_mass, u_ymass = _mixture_parts(pop, model, sel)
    p_xi = pop.mass_where(xi=xi)
    if p_xi <= 0.0:
        raise ZeroCellMass(f"P(x = {sel.xi!r}) = 0")
    true_mass = pop.mass_where(xi=xi, omega=om, z=0)
    flag_mass = bool(abs(u_mass - true_mass) / p_xi <= EQUALITY_TOL)
    if u_mass <= 0.0 and true_mass <= 0.0:
        flag_mean = True
    elif u_mass <= 0.0 or true_mass <= 0.0:
        flag_mean = False
    else:
        true_mean_0 = pop.ymass_where(xi=xi, omega=om, z=0) / true_mass
        flag_mean = bool(abs(u_ymass / u_mass - true_mean_0) <= EQUALITY_TOL)
    return flag_mass, flag_mean


# ---------------------------------------------------------------------------
# binary-outcome bounds


def _binary_masses(source, sel, literal_unconditioned):
    """The four mass terms of the ratio bounds, from a population or from
    table counts: observed target-cell successes A1 and size A, and missing
    successes B1 / failures B0."""
    if isinstance(source, FinitePopulation):
        if not source.binary_support:
            raise NonBinaryOutcome("bounds require a binary {0,1} outcome")
        xi, om = _xi_omega(sel, source.x_domains, source.w_domains)
        if literal_unconditioned:
            a1 = source.mass_where(xi=xi, z=1, y_value=1.0)
            a = source.mass_where(xi=xi, z=1)
            b1 = source.mass_where(z=0, y_value=1.0)
            b0 = source.mass_where(z=0, y_value=0.0)
        else:
            a1 = source.mass_where(xi=xi, omega=om, z=1, y_value=1.0)
            a = source.mass_where(xi=xi, omega=om, z=1)
            b1 = source.mass_where(xi=xi, z=0, y_value=1.0)
            b0 = source.mass_where(xi=xi, z=0, y_value=0.0)
        return a1, a, b1, b0
    if not isinstance(source, ObservationTable):
        raise DataError("source must be a population or an observation table")
    if source.regime not in (COVARIATE_REGIME, "complete"):
        raise RegimeMismatch("bounds need a covariate-regime table")
    y, x, w = source.y, source.x, source.w
    if np.any((y != 0.0) & (y != 1.0)):
        raise NonBinaryOutcome("bounds require a binary {0,1} outcome")
    xi, om = _xi_omega(sel, source.x_domains, source.w_domains)
    at_xi = x == xi
    obs = np.asarray(source.z_w)
    if literal_unconditioned:
        a1 = float(((y == 1.0) & at_xi & obs).sum())
        a = float((at_xi & obs).sum())
        b1 = float(((y == 1.0) & ~obs).sum())
        b0 = float(((y == 0.0) & ~obs).sum())
    else:
        in_cell = at_xi & (w == om)
        a1 = float(((y == 1.0) & in_cell & obs).sum())
        a = float((in_cell & obs).sum())
        b1 = float(((y == 1.0) & at_xi & ~obs).sum())
        b0 = float(((y == 0.0) & at_xi & ~obs).sum())
    return a1, a, b1, b0


def binary_bounds_closed_form(source, sel, literal_unconditioned=False):
    """Assumption-free bounds on E(y | x = xi, w = omega) for binary y.

    Lower bound: every missing success lands outside the cell and every
    missing failure lands inside; upper bound: the reverse. ``source`` may
    be a population (exact masses) or a covariate-regime table (counts).

    ``literal_unconditioned=True`` evaluates a diagnostics-only variant that
    drops the omega restriction from the observed terms and the xi
    restriction from the missing terms; it does not agree with
    :func:`binary_bounds_oracle` in general and is kept for comparison.
    """
    a1, a, b1, b0 = _binary_masses(source, sel, literal_unconditioned)
    lo_den = a + b0
    hi_den = a + b1
    if lo_den <= 0.0 or hi_den <= 0.0:
        raise ZeroDenominator("bound denominator is zero")
    return Interval(a1 / lo_den, (a1 + b1) / hi_den).intersect(Interval(0.0, 1.0))


def binary_bounds_oracle(pop, sel):
    """Exhaustive-allocation bounds on E(y | x = xi, w = omega), binary y.

    Each (y, x) stratum with missing-covariate mass may place any share of
    that mass at omega. The pooled-cell mean is a ratio of two affine
    functions of those shares, hence monotone in each share, so its extrema
    over the allocation box sit at corners where every stratum allocates
    all-or-nothing; corners that empty the pooled cell are skipped (the
    values approached near them are attained at other corners). Enumerates
    all 2^S corners, S capped at ``ORACLE_STRATA_CAP``.
    """
    if not pop.binary_support:
        raise NonBinaryOutcome("oracle requires a binary {0,1} outcome")
    xi, om = _xi_omega(sel, pop.x_domains, pop.w_domains)
    a1 = pop.mass_where(xi=xi, omega=om, z=1, y_value=1.0)
    a = pop.mass_where(xi=xi, omega=om, z=1)

    strata = []
    n_x = max(int(pop.x_i.max()) + 1, 1) if pop.n_cells else 1
    for k, y_val in enumerate(pop.outcome_values):
        for xf in range(n_x):
            m0 = pop.mass_where(xi=xf, y_index=k, z=0)
            if m0 > 0.0:
                strata.append((float(y_val), xf, m0))
    if len(strata) > ORACLE_STRATA_CAP:
        raise TooManyStrata(
            f"{len(strata)} missing strata exceed the cap {ORACLE_STRATA_CAP}")

    lo = hi = None
    for corner in itertools.product((0, 1), repeat=len(strata)):
        extra1 = extra0 = 0.0
        for take, (y_val, xf, m0) in zip(corner, strata):
            if take and xf == xi:
                if y_val == 1.0:
                    extra1 += m0
                else:
                    extra0 += m0
        den = a + extra1 + extra0
        if den <= 1e-15:
            continue
        value = (a1 + extra1) / den
        lo = value if lo is None else min(lo, value)
        hi = value if hi is None else max(hi, value)
    if lo is None:
        raise ZeroDenominator("the pooled cell is empty under every allocation")
    return Interval(lo, hi)


def midpoint_long_estimate(table, sel):
    """Midpoint of the sample-analog binary bounds; the constant-limit
    point estimate with the smallest worst-case asymptotic squared bias."""
    return binary_bounds_closed_form(table, sel).midpoint


# ---------------------------------------------------------------------------
# assumption-based mixture estimator


@dataclass(frozen=True)
class WeightedJointMeasure:
    """Normalized weighted atoms over (y, x, w); the assumption-completed
    estimate of the full joint distribution."""

    x_domains: tuple
    w_domains: tuple
    y: np.ndarray
    x_i: np.ndarray
    w_i: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x_i = np.asarray(self.x_i, dtype=np.int64)
        w_i = np.asarray(self.w_i, dtype=np.int64)
        mass = np.asarray(self.mass, dtype=np.float64)
        if not (len(y) == len(x_i) == len(w_i) == len(mass)):
            raise DataError("atom arrays differ in length")
        if np.any(mass < 0):
            raise NegativeMass("atom mass is negative")
        total = float(mass.sum())
        if abs(total - 1.0) > max(NORMALIZATION_TOL, 1e-12 * len(mass)):
            raise MassNotNormalized(f"atom masses sum to {total!r}, not 1")
        for name, arr in (("y", y), ("x_i", x_i), ("w_i", w_i), ("mass", mass)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "x_domains", tuple(self.x_domains))
        object.__setattr__(self, "w_domains", tuple(self.w_domains))


def mixture_joint_estimate(table, q):
    """Consistent estimate of the joint (y, x, w) distribution under an
    assumed missing-covariate distribution ``q``.

    Observed records enter with weight 1/N at their own (y, x, w); each
    missing record spreads its 1/N across W according to its (y, x) stratum
    of ``q``.
    """
    if not isinstance(q, QCovariateModel):
        q = QCovariateModel(q)
    if table.regime not in (COVARIATE_REGIME, "complete"):
        raise RegimeMismatch("mixture estimate needs a covariate-regime table")
    n = table.n
    if n == 0:
        raise EmptyCell("empty table")
    share = 1.0 / n
    atoms = {}
    x_label_cache = {}
    dist_cache = {}
    z_w = np.asarray(table.z_w)
    for i in range(n):
        y_val = float(table.y[i])
        xf = int(table.x[i])
        if z_w[i]:
            key = (y_val, xf, int(table.w[i]))
            atoms[key] = atoms.get(key, 0.0) + share
            continue
        if xf not in x_label_cache:
            x_label_cache[xf] = value_labels(table.x_domains, xf)
        stratum = (y_val, xf)
        if stratum not in dist_cache:
            dist = q.distribution(y_val, x_label_cache[xf])
            if dist is None:
                raise QUndefinedForStratum(
                    f"q has no stratum (y={y_val}, x={x_label_cache[xf]!r})")
            dist_cache[stratum] = [
                (flat_value(table.w_domains, w_key), p) for w_key, p in dist]
        for wf, p in dist_cache[stratum]:
            key = (y_val, xf, wf)
            atoms[key] = atoms.get(key, 0.0) + p * share
    order = sorted(atoms)
    return WeightedJointMeasure(
        x_domains=table.x_domains,
        w_domains=table.w_domains,
        y=np.array([k[0] for k in order]),
        x_i=np.array([k[1] for k in order]),
        w_i=np.array([k[2] for k in order]),
        mass=np.array([atoms[k] for k in order]),
    )


def mixture_conditional_mean(measure, sel):
    """Mass-weighted mean outcome of the measure on the (xi, omega) slice."""
    xi, om = _xi_omega(sel, measure.x_domains, measure.w_domains)
    mask = (measure.x_i == xi) & (measure.w_i == om)
    denom = float(measure.mass[mask].sum())
    if denom <= 0.0:
        raise ZeroCellMass(f"no mass at (x={sel.xi!r}, w={sel.omega!r})")
    return float((measure.y[mask] * measure.mass[mask]).sum()) / denom
