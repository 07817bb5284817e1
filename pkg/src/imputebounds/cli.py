"""Command-line surface: CSV ingestion and batch subcommands.

Subcommands::

    bounds     --data F --config C --xi K=V[,K=V...] [--omega K=V...]
    estimate   --data F --config C --model mar|marcov|q:FILE|ecological
               --xi ... [--omega ...] [--m INT] [--seed INT]
    simulate   --spec SPECFILE [--out DIR]
    audit      --data F --config C --model ... --xi ... [--omega ...]
               --m INT --seed INT [--population POP]
    ecological --py FLOAT --pw FLOAT

Every report is JSON on stdout carrying the artifact version, the fully
resolved configuration, and the master seed, so a report can be reproduced
bit-for-bit from its own header. With ``--out DIR`` the report and
plot-ready CSV series are also written to the directory.

Exit codes: 2 usage, 3 data errors, 4 infeasible/guard errors.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, missing_covariate, missing_outcome, simlab
from .domain import (
    CategoricalDomain,
    CellSelector,
    ObservationTable,
    OutcomeDomain,
    flat_value,
    load_population,
)
from .ecological import ShortDistributions, duncan_davis_bounds
from .errors import (
    DataError,
    GuardError,
    ImputeBoundsError,
    MalformedRow,
    OutcomeOutOfDomain,
    UnknownColumn,
)
from .models import model_from_json
from .rmi import EstimatorSpec, run_multiple_imputation

#: CLI exit codes per error family
EXIT_USAGE, EXIT_DATA, EXIT_GUARD = 2, 3, 4


# ---------------------------------------------------------------------------
# configuration and ingestion


@dataclass(frozen=True)
class DataConfig:
    """How a CSV maps onto an observation table."""

    outcome_column: str
    outcome: OutcomeDomain
    x_columns: tuple
    w_columns: tuple = ()
    sentinel: str = ""
    declared_levels: dict = None

    def __post_init__(self):
        cols = (self.outcome_column,) + tuple(self.x_columns) + tuple(self.w_columns)
        if len(set(cols)) != len(cols):
            raise UnknownColumn("configured column names are not distinct")
        object.__setattr__(self, "x_columns", tuple(self.x_columns))
        object.__setattr__(self, "w_columns", tuple(self.w_columns))
        object.__setattr__(self, "declared_levels",
                           dict(self.declared_levels or {}))


def config_from_json(obj):
    out = obj["outcome"]
    if out.get("binary"):
        dom = OutcomeDomain.binary_01()
    else:
        dom = OutcomeDomain(float(out["lo"]), float(out["hi"]))
    return DataConfig(
        outcome_column=out["column"],
        outcome=dom,
        x_columns=tuple(obj.get("x", ())),
        w_columns=tuple(obj.get("w", ())),
        sentinel=obj.get("missing", ""),
        declared_levels=obj.get("levels", {}),
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return config_from_json(json.load(fh))


def _column_index(header, name):
    hits = [i for i, h in enumerate(header) if h == name]
    if not hits:
        raise UnknownColumn(f"column {name!r} not in CSV header")
    if len(hits) > 1:
        raise UnknownColumn(f"column {name!r} appears {len(hits)} times in header")
    return hits[0]


def ingest_csv(path, cfg):
    """Parse a CSV (UTF-8, header row, RFC 4180 quoting) into an
    observation table.

    Sentinel fields become missing values: a missing outcome blanks y, a
    sentinel in any w column blanks the whole w part, and a sentinel in an
    always-observed x column is an error. Covariate levels come from the
    config when declared, otherwise they are the sorted distinct values seen.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file; header row required") from None
        idx_y = _column_index(header, cfg.outcome_column)
        idx_x = [_column_index(header, c) for c in cfg.x_columns]
        idx_w = [_column_index(header, c) for c in cfg.w_columns]

        rows = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedRow(
                    line, f"expected {len(header)} fields, got {len(row)}")
            raw_y = row[idx_y]
            if raw_y == cfg.sentinel:
                y_val = None
            else:
                try:
                    y_val = float(raw_y)
                except ValueError:
                    raise MalformedRow(line, f"outcome {raw_y!r} is not a number") from None
                if not cfg.outcome.contains([y_val]):
                    raise OutcomeOutOfDomain(
                        f"outcome {y_val} outside declared domain", line=line)
            x_val = []
            for col, i in zip(cfg.x_columns, idx_x):
                if row[i] == cfg.sentinel:
                    raise MalformedRow(line, f"missing value in x column {col!r}")
                x_val.append(row[i])
            w_val = [row[i] for i in idx_w]
            w_missing = any(v == cfg.sentinel for v in w_val)
            rows.append((line, y_val, tuple(x_val),
                         None if w_missing else tuple(w_val)))

    def build_domain(col, observed):
        declared = cfg.declared_levels.get(col)
        levels = tuple(declared) if declared else tuple(sorted(observed))
        return CategoricalDomain(col, levels)

    x_domains = tuple(
        build_domain(col, {r[2][j] for r in rows})
        for j, col in enumerate(cfg.x_columns))
    w_observed = [r[3] for r in rows if r[3] is not None]
    w_domains = tuple(
        build_domain(col, {wv[j] for wv in w_observed})
        for j, col in enumerate(cfg.w_columns)) if cfg.w_columns else ()

    ys, xs, ws = [], [], []
    for line, y_val, x_val, w_val in rows:
        ys.append(np.nan if y_val is None else y_val)
        try:
            xs.append(flat_value(x_domains, x_val))
            if w_val is None and w_domains:
                ws.append(-1)
            else:
                ws.append(flat_value(w_domains, w_val))
        except DataError as e:
            raise MalformedRow(line, str(e)) from None
    return ObservationTable(cfg.outcome, x_domains, w_domains,
                            np.array(ys), np.array(xs), np.array(ws))


# ---------------------------------------------------------------------------
# report plumbing


def _parse_cell(text):
    pairs = {}
    for part in text.split(","):
        if "=" not in part:
            raise DataError(f"cell selector part {part!r} is not K=V")
        key, value = part.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def _interval_json(interval):
    return {"lo": interval.lo, "hi": interval.hi, "midpoint": interval.midpoint}


def _report(command, config, seed, results):
    return {
        "artifact": {"name": "imputebounds", "version": __version__},
        "command": command,
        "seed": seed,
        "config": config,
        "results": results,
    }


def _minimax_series(interval, points=101):
    """Worst-case squared asymptotic bias of each candidate point estimate
    against the interval endpoints; minimized at the midpoint."""
    rows = []
    for c in np.linspace(interval.lo, interval.hi, points):
        worst = max((c - interval.lo) ** 2, (c - interval.hi) ** 2)
        rows.append((float(c), float(worst)))
    return ("candidate", "max_squared_bias"), rows


def _write_series(out_dir, name, header, rows):
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _emit(report, out_dir, series):
    text = json.dumps(report, indent=2)
    print(text)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        for name, header, rows in series:
            _write_series(out_dir, name, header, rows)


def _model_from_flag(flag):
    if flag.startswith("q:"):
        with open(flag[2:], encoding="utf-8") as fh:
            return model_from_json(json.load(fh))
    alias = {"mar": "mar_outcome", "marcov": "mar_covariate",
             "ecological": "ecological"}.get(flag)
    if alias is None:
        raise DataError(f"unknown model {flag!r}; "
                        "expected mar|marcov|q:FILE|ecological")
    return model_from_json({"kind": alias})


def _data_interval(table, sel):
    if sel.omega is None:
        interval = missing_outcome.sample_interval(table, sel)
    else:
        interval = missing_covariate.binary_bounds_closed_form(table, sel)
    return interval


# ---------------------------------------------------------------------------
# subcommands


def _cmd_bounds(args):
    cfg = load_config(args.config)
    table = ingest_csv(args.data, cfg)
    sel = CellSelector(_parse_cell(args.xi),
                       _parse_cell(args.omega) if args.omega else None)
    interval = _data_interval(table, sel)
    results = {
        "n": table.n,
        "interval": _interval_json(interval),
        "midpoint": interval.midpoint,
    }
    config = {"data": args.data, "config": args.config,
              "xi": args.xi, "omega": args.omega}
    header, rows = _minimax_series(interval)
    _emit(_report("bounds", config, None, results), args.out,
          [("minimax_bias.csv", header, rows)])
    return 0


def _run_estimate(table, model, sel, m, seed):
    name = "imputation_mean" if sel.omega is None else "long_mean"
    return run_multiple_imputation(table, model, m, EstimatorSpec(name, sel), seed)


def _estimate_extras(table, model, sel):
    """q-mean and mixture estimates where the model supplies what they need."""
    q_mean = None
    mixture = None
    if model.kind == "explicit_outcome_q" and sel.omega is None:
        xi_flat, _ = sel.resolve(table.x_domains, table.w_domains)
        dist = missing_outcome._explicit_outcome_dist(model, table.x_domains, xi_flat)
        if dist is not None:
            e_q = float(sum(v * p for v, p in dist))
            q_mean = missing_outcome.q_mean_estimate(table, sel, e_q)
    if model.kind == "explicit_covariate_q" and sel.omega is not None:
        measure = missing_covariate.mixture_joint_estimate(table, model.covariate_q)
        mixture = missing_covariate.mixture_conditional_mean(measure, sel)
    return q_mean, mixture


def _cmd_estimate(args):
    cfg = load_config(args.config)
    table = ingest_csv(args.data, cfg)
    model = _model_from_flag(args.model)
    sel = CellSelector(_parse_cell(args.xi),
                       _parse_cell(args.omega) if args.omega else None)
    result = _run_estimate(table, model, sel, args.m, args.seed)
    q_mean, mixture = _estimate_extras(table, model, sel)
    results = {
        "model": model.kind,
        "m": result.m,
        "pooled_mean": result.pooled_mean,
        "pooled_dispersion": result.pooled_dispersion,
        "per_draw": list(result.per_draw_estimates),
        "q_mean": q_mean,
        "mixture_mean": mixture,
    }
    config = {"data": args.data, "config": args.config, "model": args.model,
              "xi": args.xi, "omega": args.omega, "m": args.m}
    rows = [(k, est) for k, est in enumerate(result.per_draw_estimates)]
    _emit(_report("estimate", config, args.seed, results), args.out,
          [("per_draw.csv", ("draw", "estimate"), rows)])
    return 0


def _cmd_simulate(args):
    spec = simlab.load_experiment(args.spec)
    report = simlab.convergence_experiment(spec)
    results = report.to_json()
    results["estimator"] = spec.estimator
    results["n_grid"] = list(spec.n_grid)
    results["reps"] = spec.reps
    config = {"spec": args.spec}
    rows = [(e.n, e.mean_abs_dev, e.max_abs_dev) for e in report.entries]
    _emit(_report("simulate", config, spec.seed, results), args.out,
          [("deviations.csv", ("n", "mean_abs_dev", "max_abs_dev"), rows)])
    return 0


def _cmd_audit(args):
    cfg = load_config(args.config)
    table = ingest_csv(args.data, cfg)
    model = _model_from_flag(args.model)
    sel = CellSelector(_parse_cell(args.xi),
                       _parse_cell(args.omega) if args.omega else None)
    result = _run_estimate(table, model, sel, args.m, args.seed)
    interval = _data_interval(table, sel)
    in_interval = interval.contains(result.pooled_mean)
    results = {
        "model": model.kind,
        "m": result.m,
        "pooled_mean": result.pooled_mean,
        "pooled_dispersion": result.pooled_dispersion,
        "per_draw": list(result.per_draw_estimates),
        "interval": _interval_json(interval),
        "point_in_interval": in_interval,
        "headline": (
            f"point estimate {result.pooled_mean:.6g} under model {args.model} "
            f"vs assumption-free interval [{interval.lo:.6g}, {interval.hi:.6g}]"
        ),
    }
    if args.population:
        pop = load_population(args.population)
        gap = simlab.bias_gap(pop, model, sel)
        results["bias_gap"] = {
            "plim": gap.plim,
            "truth": gap.truth,
            "gap": gap.gap,
            "interval": _interval_json(gap.interval),
            "truth_covered": gap.truth_covered,
            "imputation_point_in_interval": gap.imputation_point_in_interval,
        }
    config = {"data": args.data, "config": args.config, "model": args.model,
              "xi": args.xi, "omega": args.omega, "m": args.m,
              "population": args.population}
    header, rows = _minimax_series(interval)
    per_draw = [(k, est) for k, est in enumerate(result.per_draw_estimates)]
    _emit(_report("audit", config, args.seed, results), args.out,
          [("minimax_bias.csv", header, rows),
           ("per_draw.csv", ("draw", "estimate"), per_draw)])
    return 0


def _cmd_ecological(args):
    interval = duncan_davis_bounds(ShortDistributions(args.py, args.pw))
    results = {
        "p_y1_given_xi": args.py,
        "p_w_omega_given_xi": args.pw,
        "interval": _interval_json(interval),
        "midpoint": interval.midpoint,
    }
    config = {"py": args.py, "pw": args.pw}
    header, rows = _minimax_series(interval)
    _emit(_report("ecological", config, None, results), args.out,
          [("minimax_bias.csv", header, rows)])
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    parser = argparse.ArgumentParser(
        prog="imputebounds",
        description="Assumption-free bounds and imputation audits for "
                    "conditional means under missing data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=False, draws=False):
        p.add_argument("--data", required=True, help="input CSV")
        p.add_argument("--config", required=True, help="data config JSON")
        p.add_argument("--xi", required=True, help="x cell, K=V[,K=V...]")
        p.add_argument("--omega", default=None, help="w cell, K=V[,K=V...]")
        if model:
            p.add_argument("--model", required=True,
                           help="mar|marcov|q:FILE|ecological")
        if draws:
            p.add_argument("--m", type=int, default=1, help="imputation draws")
            p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", default=None, help="directory for report + series")

    p_bounds = sub.add_parser("bounds", help="assumption-free interval + midpoint")
    add_common(p_bounds)

    p_est = sub.add_parser("estimate", help="imputation / q-mean / mixture estimates")
    add_common(p_est, model=True, draws=True)

    p_sim = sub.add_parser("simulate", help="run a convergence experiment spec")
    p_sim.add_argument("--spec", required=True, help="experiment spec JSON")
    p_sim.add_argument("--out", default=None, help="directory for report + series")

    p_audit = sub.add_parser("audit", help="pooled estimate vs assumption-free interval")
    add_common(p_audit, model=True, draws=True)
    p_audit.add_argument("--population", default=None,
                         help="population JSON for exact plim/truth bias gap")

    p_eco = sub.add_parser("ecological", help="short-distribution bounds")
    p_eco.add_argument("--py", type=float, required=True, help="P(y=1|xi)")
    p_eco.add_argument("--pw", type=float, required=True, help="P(w=omega|xi)")
    p_eco.add_argument("--out", default=None, help="directory for report + series")
    return parser


_HANDLERS = {
    "bounds": _cmd_bounds,
    "estimate": _cmd_estimate,
    "simulate": _cmd_simulate,
    "audit": _cmd_audit,
    "ecological": _cmd_ecological,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except GuardError as e:
        print(f"error: {e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (DataError, OSError) as e:
        name = e.__class__.__name__ if isinstance(e, ImputeBoundsError) else "io"
        print(f"error: {name}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
