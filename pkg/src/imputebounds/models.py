"""Imputation-model specifications.

An :class:`ImputationModel` names the distribution that imputed values are
drawn from. Fitted variants (``mar_outcome``, ``mar_covariate``,
``ecological``) are estimated from observed data at fit time; explicit
variants carry an assumed conditional distribution. Stratum keys hold raw
level labels and are resolved against concrete domains at the point of use.
"""

from dataclasses import dataclass

from .domain import NORMALIZATION_TOL, value_labels
from .errors import DataError, ProbabilityOutOfRange

MAR_OUTCOME = "mar_outcome"
MAR_COVARIATE = "mar_covariate"
EXPLICIT_OUTCOME_Q = "explicit_outcome_q"
EXPLICIT_COVARIATE_Q = "explicit_covariate_q"
ECOLOGICAL = "ecological"

_OUTCOME_KINDS = (MAR_OUTCOME, EXPLICIT_OUTCOME_Q)
_COVARIATE_KINDS = (MAR_COVARIATE, EXPLICIT_COVARIATE_Q, ECOLOGICAL)


def _as_value_key(value):
    if isinstance(value, list):
        return tuple(value)
    if isinstance(value, (str, int)) and not isinstance(value, bool):
        return (value,)
    return tuple(value)


def _normalize_dist(pairs, what):
    """Canonicalize a finite distribution to a sorted tuple of (atom, p)."""
    if isinstance(pairs, dict):
        pairs = pairs.items()
    dist = []
    for atom, p in pairs:
        p = float(p)
        if p < 0:
            raise ProbabilityOutOfRange(f"{what}: negative probability {p}")
        dist.append((atom, p))
    total = sum(p for _, p in dist)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ProbabilityOutOfRange(f"{what}: probabilities sum to {total!r}, not 1")
    return tuple(sorted(dist, key=lambda item: item[0]))


@dataclass(frozen=True)
class QCovariateModel:
    """Assumed conditional distribution of a missing covariate given the
    outcome and the observed covariates: one distribution over W per
    ``(y, x)`` stratum."""

    strata: dict

    def __post_init__(self):
        canon = {}
        for (y_val, x_val), dist in self.strata.items():
            key = (float(y_val), _as_value_key(x_val))
            atoms = _normalize_dist(
                [(_as_value_key(w), p) for w, p in
                 (dist.items() if isinstance(dist, dict) else dist)],
                f"Q(w|y={key[0]}, x={key[1]})")
            canon[key] = atoms
        object.__setattr__(self, "strata", canon)

    def distribution(self, y_val, x_val):
        return self.strata.get((float(y_val), _as_value_key(x_val)))

    def to_json(self):
        return {
            "kind": "covariate_q",
            "strata": [
                {"y": y, "x": list(x),
                 "dist": [{"w": list(w), "p": p} for w, p in dist]}
                for (y, x), dist in sorted(self.strata.items())
            ],
        }

    @classmethod
    def from_json(cls, obj):
        strata = {}
        for stratum in obj["strata"]:
            key = (float(stratum["y"]), tuple(stratum["x"]))
            strata[key] = [(tuple(a["w"]), float(a["p"])) for a in stratum["dist"]]
        return cls(strata)


def _normalize_outcome_q(q):
    canon = {}
    for x_val, dist in q.items():
        key = _as_value_key(x_val)
        pairs = dist.items() if isinstance(dist, dict) else dist
        canon[key] = _normalize_dist(
            [(float(y), p) for y, p in pairs], f"Q(y|x={key})")
    return canon


@dataclass(frozen=True)
class ImputationModel:
    """Tagged imputation-distribution specification.

    ``kind`` is one of ``mar_outcome``, ``mar_covariate``,
    ``explicit_outcome_q``, ``explicit_covariate_q``, ``ecological``.
    Explicit kinds carry their assumed distribution; the others are fitted
    from data.
    """

    kind: str
    outcome_q: dict = None
    covariate_q: QCovariateModel = None

    def __post_init__(self):
        if self.kind not in _OUTCOME_KINDS + _COVARIATE_KINDS:
            raise DataError(f"unknown imputation model kind {self.kind!r}")
        if self.kind == EXPLICIT_OUTCOME_Q:
            if not self.outcome_q:
                raise DataError("explicit outcome model needs a distribution")
            object.__setattr__(self, "outcome_q",
                               _normalize_outcome_q(self.outcome_q))
        elif self.kind == EXPLICIT_COVARIATE_Q:
            if self.covariate_q is None:
                raise DataError("explicit covariate model needs a distribution")
            if not isinstance(self.covariate_q, QCovariateModel):
                object.__setattr__(self, "covariate_q",
                                   QCovariateModel(self.covariate_q))

    @classmethod
    def mar_outcome(cls):
        return cls(MAR_OUTCOME)

    @classmethod
    def mar_covariate(cls):
        return cls(MAR_COVARIATE)

    @classmethod
    def ecological(cls):
        return cls(ECOLOGICAL)

    @classmethod
    def explicit_outcome(cls, q):
        """``q`` maps each x value to a finite distribution ``{y: p}``."""
        return cls(EXPLICIT_OUTCOME_Q, outcome_q=q)

    @classmethod
    def explicit_covariate(cls, q):
        """``q`` is a :class:`QCovariateModel` or its strata mapping."""
        return cls(EXPLICIT_COVARIATE_Q, covariate_q=q)

    @property
    def target(self):
        """Which variable this model imputes: ``"outcome"`` or ``"covariate"``."""
        return "outcome" if self.kind in _OUTCOME_KINDS else "covariate"


def true_outcome_model(pop):
    """Explicit outcome model equal to the population's actual conditional
    distribution of missing outcomes, P(y | x, z=0)."""
    q = {}
    n_x = max(int(pop.x_i.max()) + 1, 1) if pop.n_cells else 1
    for xf in range(n_x):
        denom = pop.mass_where(xi=xf, z=0)
        if denom <= 0.0:
            continue
        dist = {}
        for k, y_val in enumerate(pop.outcome_values):
            m = pop.mass_where(xi=xf, z=0, y_index=k)
            if m > 0.0:
                dist[float(y_val)] = m / denom
        q[value_labels(pop.x_domains, xf)] = dist
    if not q:
        raise DataError("population has no missing-outcome mass to mirror")
    return ImputationModel.explicit_outcome(q)


def true_covariate_model(pop):
    """Explicit covariate model equal to the population's actual conditional
    distribution of missing covariates, P(w | y, x, z=0)."""
    strata = {}
    n_x = max(int(pop.x_i.max()) + 1, 1) if pop.n_cells else 1
    n_w = max(int(pop.w_i.max()) + 1, 1) if pop.n_cells else 1
    for k, y_val in enumerate(pop.outcome_values):
        for xf in range(n_x):
            denom = pop.mass_where(xi=xf, z=0, y_index=k)
            if denom <= 0.0:
                continue
            dist = {}
            for wf in range(n_w):
                m = pop.mass_where(xi=xf, omega=wf, z=0, y_index=k)
                if m > 0.0:
                    dist[value_labels(pop.w_domains, wf)] = m / denom
            strata[(float(y_val), value_labels(pop.x_domains, xf))] = dist
    if not strata:
        raise DataError("population has no missing-covariate mass to mirror")
    return ImputationModel.explicit_covariate(strata)


def model_to_json(model):
    if model.kind == EXPLICIT_OUTCOME_Q:
        return {
            "kind": "outcome_q",
            "strata": [
                {"x": list(x), "dist": [{"y": y, "p": p} for y, p in dist]}
                for x, dist in sorted(model.outcome_q.items())
            ],
        }
    if model.kind == EXPLICIT_COVARIATE_Q:
        return model.covariate_q.to_json()
    return {"kind": model.kind}


def model_from_json(obj):
    kind = obj["kind"]
    if kind == "outcome_q":
        q = {tuple(s["x"]): [(a["y"], a["p"]) for a in s["dist"]]
             for s in obj["strata"]}
        return ImputationModel.explicit_outcome(q)
    if kind == "covariate_q":
        return ImputationModel.explicit_covariate(QCovariateModel.from_json(obj))
    if kind in (MAR_OUTCOME, MAR_COVARIATE, ECOLOGICAL):
        return ImputationModel(kind)
    raise DataError(f"unknown model kind {kind!r}")
