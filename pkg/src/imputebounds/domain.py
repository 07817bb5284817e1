"""Core data types: outcome domains, categorical covariates, intervals,
observation tables, and exact finite populations.

Conventions used throughout the package:

* Covariate values are tuples of categorical codes (small ints interned
  against a name table per role); a tuple is flattened to a single
  mixed-radix integer for hot comparisons.
* An :class:`ObservationTable` stores sampled records. Missing outcomes are
  NaN, missing covariates are code -1; presence flags are derived.
* A :class:`FinitePopulation` is an exact probability table over
  ``(y, x, w, z)`` on finite supports. It is the ground truth that
  probability limits, oracles, and simulations are computed against.

All types are immutable after construction (arrays are marked read-only)
and safe to share across threads.
"""

from dataclasses import dataclass
from functools import cached_property
import json
import math

import numpy as np

from .errors import (
    DataError,
    EmptyCell,
    EmptyConditioningSet,
    MassNotNormalized,
    NegativeMass,
    OutcomeOutOfDomain,
    RegimeMismatch,
)

#: absolute tolerance for probability-mass normalization checks
NORMALIZATION_TOL = 1e-12
#: absolute tolerance for derived equalities between exact table quantities
EQUALITY_TOL = 1e-9
#: cap on the number of covariate cells |X|*|W|
MAX_CELLS = 10**6

OUTCOME_REGIME = "outcome"
COVARIATE_REGIME = "covariate"
COMPLETE_REGIME = "complete"


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class OutcomeDomain:
    """Closed outcome domain ``[lo, hi]``; optionally binary {0, 1}."""

    lo: float
    hi: float
    binary: bool = False

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DataError("outcome domain endpoints must be finite")
        if not lo < hi:
            raise DataError(f"outcome domain requires lo < hi, got [{lo}, {hi}]")
        if self.binary and (lo, hi) != (0.0, 1.0):
            raise DataError("binary outcome domain must be [0, 1]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def binary_01(cls):
        return cls(0.0, 1.0, binary=True)

    def contains(self, values):
        """True when every value is admissible for this domain."""
        v = np.asarray(values, dtype=np.float64)
        if self.binary:
            return bool(np.all((v == 0.0) | (v == 1.0)))
        return bool(np.all((v >= self.lo) & (v <= self.hi)))


@dataclass(frozen=True)
class CategoricalDomain:
    """One covariate role: a name and an ordered tuple of level labels."""

    name: str
    levels: tuple

    def __post_init__(self):
        levels = tuple(str(lv) for lv in self.levels)
        if not levels:
            raise DataError(f"domain {self.name!r} has no levels")
        if len(set(levels)) != len(levels):
            raise DataError(f"domain {self.name!r} has duplicate levels")
        object.__setattr__(self, "levels", levels)

    @cached_property
    def _codes(self):
        return {lv: i for i, lv in enumerate(self.levels)}

    @property
    def size(self):
        return len(self.levels)

    def code(self, level):
        try:
            return self._codes[str(level)]
        except KeyError:
            raise DataError(
                f"unknown level {level!r} for domain {self.name!r}"
            ) from None

    def level(self, code):
        return self.levels[code]


def domain_sizes(domains):
    return tuple(d.size for d in domains)


def total_size(domains):
    n = 1
    for d in domains:
        n *= d.size
    return n


def flatten_codes(domains, codes):
    """Mixed-radix flat index of a code tuple."""
    if len(codes) != len(domains):
        raise DataError(
            f"expected {len(domains)} covariate codes, got {len(codes)}"
        )
    idx = 0
    for d, c in zip(domains, codes):
        c = int(c)
        if not 0 <= c < d.size:
            raise DataError(f"code {c} out of range for domain {d.name!r}")
        idx = idx * d.size + c
    return idx


def unflatten_index(domains, idx):
    codes = [0] * len(domains)
    for pos in range(len(domains) - 1, -1, -1):
        size = domains[pos].size
        codes[pos] = idx % size
        idx //= size
    return tuple(codes)


def encode_value(domains, value):
    """Normalize a covariate value to a tuple of codes.

    Accepts a tuple/list of level labels or codes, a mapping
    ``{role name: level}``, a bare scalar for single-role domains, or
    ``None``/``()`` when there are no roles.
    """
    if not domains:
        if value in (None, (), []):
            return ()
        raise DataError("covariate value given but no domains are declared")
    if value is None:
        raise DataError("missing covariate value")
    if isinstance(value, dict):
        try:
            value = [value[d.name] for d in domains]
        except KeyError as e:
            raise DataError(f"missing covariate role {e.args[0]!r}") from None
    elif isinstance(value, (str, int)) and len(domains) == 1:
        value = [value]
    codes = []
    for d, item in zip(domains, value):
        if isinstance(item, (int, np.integer)) and not isinstance(item, bool):
            c = int(item)
            if not 0 <= c < d.size:
                raise DataError(f"code {c} out of range for domain {d.name!r}")
            codes.append(c)
        else:
            codes.append(d.code(item))
    if len(codes) != len(domains):
        raise DataError(f"expected {len(domains)} covariate roles, got {len(codes)}")
    return tuple(codes)


def flat_value(domains, value):
    return flatten_codes(domains, encode_value(domains, value))


def value_labels(domains, flat):
    return tuple(d.level(c) for d, c in zip(domains, unflatten_index(domains, flat)))


# ---------------------------------------------------------------------------
# intervals and selectors


@dataclass(frozen=True)
class Interval:
    """Closed real interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise DataError("interval endpoints must be finite")
        if lo > hi:
            raise DataError(f"interval requires lo <= hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, value, tol=0.0):
        return self.lo - tol <= value <= self.hi + tol

    def intersect(self, other):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise DataError(f"intervals [{self.lo},{self.hi}] and "
                            f"[{other.lo},{other.hi}] are disjoint")
        return Interval(lo, hi)


@dataclass(frozen=True)
class CellSelector:
    """Selects the cell ``x = xi`` (and optionally ``w = omega``)."""

    xi: object
    omega: object = None

    def __post_init__(self):
        xi = self.xi
        if isinstance(xi, list):
            object.__setattr__(self, "xi", tuple(xi))
        om = self.omega
        if isinstance(om, list):
            object.__setattr__(self, "omega", tuple(om))

    def resolve(self, x_domains, w_domains):
        """Flat indices ``(xi, omega)`` against the given domains."""
        xi_flat = flat_value(x_domains, self.xi)
        omega_flat = None
        if self.omega is not None:
            omega_flat = flat_value(w_domains, self.omega)
        return xi_flat, omega_flat


# ---------------------------------------------------------------------------
# observation tables


def _readonly(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ObservationTable:
    """Sampled records: y possibly missing, x always observed, w possibly
    missing. Exactly one missingness regime may be active."""

    outcome: OutcomeDomain
    x_domains: tuple
    w_domains: tuple
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "x_domains", tuple(self.x_domains))
        object.__setattr__(self, "w_domains", tuple(self.w_domains))
        if total_size(self.x_domains) * total_size(self.w_domains) > MAX_CELLS:
            raise DataError(f"covariate cell count exceeds cap {MAX_CELLS}")
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.int64)
        w = self.w
        if w is None:
            w = np.zeros(len(y), dtype=np.int64)
        w = np.asarray(w, dtype=np.int64)
        if not (len(y) == len(x) == len(w)):
            raise DataError("column lengths differ")
        if np.any((x < 0) | (x >= total_size(self.x_domains))):
            raise DataError("x code out of range")
        if np.any((w < -1) | (w >= total_size(self.w_domains))):
            raise DataError("w code out of range")
        present = ~np.isnan(y)
        vals = y[present]
        if np.any(np.isinf(vals)):
            raise OutcomeOutOfDomain("outcome values must be finite")
        if not self.outcome.contains(vals):
            raise OutcomeOutOfDomain(
                f"outcome values outside domain [{self.outcome.lo}, {self.outcome.hi}]"
            )
        if (~present).any() and (w < 0).any():
            raise RegimeMismatch(
                "table mixes missing outcomes and missing covariates; "
                "exactly one missingness regime may be active"
            )
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "w", _readonly(w))

    @classmethod
    def from_records(cls, records, outcome, x_domains, w_domains=()):
        """Build from an iterable of ``(y, x_value, w_value)`` tuples,
        with ``None`` marking a missing entry."""
        x_domains = tuple(x_domains)
        w_domains = tuple(w_domains)
        ys, xs, ws = [], [], []
        for rec in records:
            y_val, x_val, w_val = (tuple(rec) + (None,))[:3]
            ys.append(np.nan if y_val is None else float(y_val))
            xs.append(flat_value(x_domains, x_val))
            if w_val is None and w_domains:
                ws.append(-1)
            else:
                ws.append(flat_value(w_domains, w_val))
        return cls(outcome, x_domains, w_domains,
                   np.array(ys), np.array(xs), np.array(ws))

    @property
    def n(self):
        return len(self.y)

    @cached_property
    def z_y(self):
        return _readonly(~np.isnan(self.y))

    @cached_property
    def z_w(self):
        return _readonly(self.w >= 0)

    @property
    def regime(self):
        if not self.z_y.all():
            return OUTCOME_REGIME
        if not self.z_w.all():
            return COVARIATE_REGIME
        return COMPLETE_REGIME


@dataclass(frozen=True)
class CompletedTable:
    """An observation table whose missing entries were filled in; the
    imputed positions stay flagged so pooled cells can be decomposed."""

    outcome: OutcomeDomain
    x_domains: tuple
    w_domains: tuple
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    y_imputed: np.ndarray
    w_imputed: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.int64)
        w = np.asarray(self.w, dtype=np.int64)
        yi = np.asarray(self.y_imputed, dtype=bool)
        wi = np.asarray(self.w_imputed, dtype=bool)
        if not (len(y) == len(x) == len(w) == len(yi) == len(wi)):
            raise DataError("column lengths differ")
        if np.any(np.isnan(y)):
            raise DataError("completed table still has missing outcomes")
        if np.any(w < 0):
            raise DataError("completed table still has missing covariates")
        for name, arr in (("y", y), ("x", x), ("w", w),
                          ("y_imputed", yi), ("w_imputed", wi)):
            object.__setattr__(self, name, _readonly(arr))
        object.__setattr__(self, "x_domains", tuple(self.x_domains))
        object.__setattr__(self, "w_domains", tuple(self.w_domains))

    @property
    def n(self):
        return len(self.y)


# ---------------------------------------------------------------------------
# finite populations


@dataclass(frozen=True)
class FinitePopulation:
    """Exact joint probability table over ``(y, x, w, z)``.

    ``regime`` declares which variable the indicator z governs when the
    population is sampled: ``"outcome"`` blanks y where z=0, ``"covariate"``
    blanks w.
    """

    outcome: OutcomeDomain
    outcome_values: np.ndarray
    x_domains: tuple
    w_domains: tuple
    y_i: np.ndarray
    x_i: np.ndarray
    w_i: np.ndarray
    z: np.ndarray
    mass: np.ndarray
    regime: str = OUTCOME_REGIME

    def __post_init__(self):
        object.__setattr__(self, "x_domains", tuple(self.x_domains))
        object.__setattr__(self, "w_domains", tuple(self.w_domains))
        if self.regime not in (OUTCOME_REGIME, COVARIATE_REGIME):
            raise DataError(f"unknown regime {self.regime!r}")
        if self.regime == COVARIATE_REGIME and not self.w_domains:
            raise DataError("covariate regime requires w domains")
        if total_size(self.x_domains) * total_size(self.w_domains) > MAX_CELLS:
            raise DataError(f"covariate cell count exceeds cap {MAX_CELLS}")
        vals = np.asarray(self.outcome_values, dtype=np.float64)
        if len(vals) == 0 or np.any(~np.isfinite(vals)):
            raise DataError("outcome support must be non-empty and finite")
        if np.any(np.diff(vals) <= 0):
            raise DataError("outcome support must be sorted and unique")
        y_i = np.asarray(self.y_i, dtype=np.int64)
        x_i = np.asarray(self.x_i, dtype=np.int64)
        w_i = np.asarray(self.w_i, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.int8)
        mass = np.asarray(self.mass, dtype=np.float64)
        if not (len(y_i) == len(x_i) == len(w_i) == len(z) == len(mass)):
            raise DataError("cell arrays differ in length")
        if np.any((y_i < 0) | (y_i >= len(vals))):
            raise DataError("outcome index out of range")
        if np.any((x_i < 0) | (x_i >= total_size(self.x_domains))):
            raise DataError("x index out of range")
        if np.any((w_i < 0) | (w_i >= total_size(self.w_domains))):
            raise DataError("w index out of range")
        if np.any((z != 0) & (z != 1)):
            raise DataError("z must be 0 or 1")
        object.__setattr__(self, "outcome_values", _readonly(vals))
        object.__setattr__(self, "y_i", _readonly(y_i))
        object.__setattr__(self, "x_i", _readonly(x_i))
        object.__setattr__(self, "w_i", _readonly(w_i))
        object.__setattr__(self, "z", _readonly(z))
        object.__setattr__(self, "mass", _readonly(mass))

    @classmethod
    def from_cells(cls, cells, *, outcome, x_domains, w_domains=(),
                   regime=OUTCOME_REGIME, validate=True):
        """Build from a mapping ``(y, x_value, w_value, z) -> mass``.

        Duplicate keys are summed; cells are stored in canonical order so
        serialization is deterministic.
        """
        x_domains = tuple(x_domains)
        w_domains = tuple(w_domains)
        staged = {}
        support = set()
        for (y_val, x_val, w_val, z), m in cells.items():
            y_val = float(y_val)
            support.add(y_val)
            if w_domains and w_val is None:
                raise DataError("population cells must carry a w value")
            key = (y_val, flat_value(x_domains, x_val),
                   flat_value(w_domains, w_val), int(z))
            staged[key] = staged.get(key, 0.0) + float(m)
        values = np.array(sorted(support), dtype=np.float64)
        index = {v: i for i, v in enumerate(values)}
        order = sorted(staged)
        pop = cls(
            outcome=outcome,
            outcome_values=values,
            x_domains=x_domains,
            w_domains=w_domains,
            y_i=np.array([index[k[0]] for k in order], dtype=np.int64),
            x_i=np.array([k[1] for k in order], dtype=np.int64),
            w_i=np.array([k[2] for k in order], dtype=np.int64),
            z=np.array([k[3] for k in order], dtype=np.int8),
            mass=np.array([staged[k] for k in order], dtype=np.float64),
            regime=regime,
        )
        if validate:
            validate_population(pop)
        return pop

    @property
    def n_cells(self):
        return len(self.mass)

    @property
    def binary_support(self):
        return bool(np.all((self.outcome_values == 0.0) | (self.outcome_values == 1.0)))

    def _mask(self, xi=None, omega=None, z=None, y_index=None, y_value=None):
        mask = np.ones(self.n_cells, dtype=bool)
        if xi is not None:
            mask &= self.x_i == xi
        if omega is not None:
            mask &= self.w_i == omega
        if z is not None:
            mask &= self.z == z
        if y_index is not None:
            mask &= self.y_i == y_index
        if y_value is not None:
            mask &= self.outcome_values[self.y_i] == y_value
        return mask

    def mass_where(self, **kw):
        """Total mass over cells matching the given coordinates."""
        return float(self.mass[self._mask(**kw)].sum())

    def ymass_where(self, **kw):
        """Outcome-weighted mass over cells matching the given coordinates."""
        mask = self._mask(**kw)
        return float((self.outcome_values[self.y_i[mask]] * self.mass[mask]).sum())


def validate_population(pop):
    """Check :class:`FinitePopulation` invariants, raising on the first
    violation: negative mass, then normalization, then outcome domain."""
    if np.any(pop.mass < 0):
        bad = float(pop.mass[pop.mass < 0][0])
        raise NegativeMass(f"cell mass {bad} is negative")
    total = float(pop.mass.sum())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise MassNotNormalized(f"cell masses sum to {total!r}, not 1")
    if not pop.outcome.contains(pop.outcome_values):
        raise OutcomeOutOfDomain(
            f"outcome support exceeds domain [{pop.outcome.lo}, {pop.outcome.hi}]"
        )


# ---------------------------------------------------------------------------
# empirical frequencies and cell partitions


def _as_mask(table, pred, name):
    mask = pred(table) if callable(pred) else pred
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (table.n,):
        raise DataError(f"{name} predicate has shape {mask.shape}, "
                        f"expected ({table.n},)")
    return mask


def empirical_cond(table, event, conditioning=None):
    """Empirical conditional frequency ``#(event & cond) / #cond``.

    ``event`` and ``conditioning`` are boolean record masks or callables
    mapping a table to one; ``conditioning=None`` means all records.
    """
    ev = _as_mask(table, event, "event")
    if conditioning is None:
        cond = np.ones(table.n, dtype=bool)
    else:
        cond = _as_mask(table, conditioning, "conditioning")
    denom = int(cond.sum())
    if denom == 0:
        raise EmptyConditioningSet("no record satisfies the conditioning predicate")
    return float((ev & cond).sum()) / denom


def cell_partition(table, sel):
    """Split the selected cell into observed and missing/imputed records.

    Returns ``(observed_idx, missing_idx, pi)`` where ``pi`` is the observed
    fraction. On an :class:`ObservationTable`, records at ``x = xi`` are
    split by outcome presence (outcome or complete regime) or covariate
    presence (covariate regime); an ``omega`` part requires fully observed
    covariates. On a :class:`CompletedTable` with ``omega``, the pooled
    ``(xi, omega)`` cell is split into originally-observed versus
    imputed-in records.
    """
    xi_flat, omega_flat = sel.resolve(table.x_domains, table.w_domains)
    completed = isinstance(table, CompletedTable)
    if completed:
        rows = table.x == xi_flat
        if omega_flat is not None:
            rows &= table.w == omega_flat
            observed = ~table.w_imputed
        else:
            observed = ~table.y_imputed
    else:
        rows = table.x == xi_flat
        if omega_flat is not None:
            if not table.z_w.all():
                raise RegimeMismatch(
                    "an omega cell cannot be partitioned while covariates are "
                    "missing; complete the table first"
                )
            rows &= table.w == omega_flat
            observed = np.asarray(table.z_w)
        elif table.regime == COVARIATE_REGIME:
            observed = np.asarray(table.z_w)
        else:
            observed = np.asarray(table.z_y)
    total = int(rows.sum())
    if total == 0:
        raise EmptyCell(f"no records in the selected cell {sel}")
    obs_idx = np.flatnonzero(rows & observed)
    mis_idx = np.flatnonzero(rows & ~observed)
    return obs_idx, mis_idx, len(obs_idx) / total


# ---------------------------------------------------------------------------
# population (de)serialization


def population_to_json(pop):
    """JSON-ready dict with fields ``outcome_support``, ``x_domains``,
    ``w_domains``, ``cells``, plus the outcome domain and sampling regime."""
    cells = []
    for k in range(pop.n_cells):
        cells.append({
            "y": float(pop.outcome_values[pop.y_i[k]]),
            "x": list(value_labels(pop.x_domains, int(pop.x_i[k]))),
            "w": list(value_labels(pop.w_domains, int(pop.w_i[k]))) or None,
            "z": int(pop.z[k]),
            "mass": float(pop.mass[k]),
        })
    return {
        "outcome_domain": {"lo": pop.outcome.lo, "hi": pop.outcome.hi,
                           "binary": pop.outcome.binary},
        "outcome_support": [float(v) for v in pop.outcome_values],
        "x_domains": {d.name: list(d.levels) for d in pop.x_domains},
        "w_domains": {d.name: list(d.levels) for d in pop.w_domains},
        "regime": pop.regime,
        "cells": cells,
    }


def population_from_json(obj):
    dom = obj.get("outcome_domain", {})
    outcome = OutcomeDomain(dom.get("lo", 0.0), dom.get("hi", 1.0),
                            bool(dom.get("binary", False)))
    x_domains = tuple(CategoricalDomain(n, tuple(lv))
                      for n, lv in obj.get("x_domains", {}).items())
    w_domains = tuple(CategoricalDomain(n, tuple(lv))
                      for n, lv in obj.get("w_domains", {}).items())
    cells = {}
    for cell in obj["cells"]:
        w_val = cell.get("w")
        key = (float(cell["y"]), tuple(cell["x"]),
               tuple(w_val) if w_val is not None else None, int(cell["z"]))
        cells[key] = cells.get(key, 0.0) + float(cell["mass"])
    return FinitePopulation.from_cells(
        cells, outcome=outcome, x_domains=x_domains, w_domains=w_domains,
        regime=obj.get("regime", OUTCOME_REGIME))


def save_population(pop, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(population_to_json(pop), fh, indent=2)
        fh.write("\n")


def load_population(path):
    with open(path, encoding="utf-8") as fh:
        return population_from_json(json.load(fh))
