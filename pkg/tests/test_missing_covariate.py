import itertools

import numpy as np
import pytest

from imputebounds import (
    CellSelector,
    CompletedTable,
    ImputationModel,
    ObservationTable,
    OutcomeDomain,
    QCovariateModel,
    binary_bounds_closed_form,
    binary_bounds_oracle,
    imputed_cell_share,
    imputed_long_mean,
    matching_conditions,
    midpoint_long_estimate,
    mixture_conditional_mean,
    mixture_joint_estimate,
    plim_imputed_long_mean,
    true_covariate_model,
    true_long_mean,
)
from imputebounds.simlab import (
    MissingnessMechanism,
    apply_mechanism,
    joint_population,
    random_population,
    sample_table,
)
from imputebounds.rmi import draw_completion, fit_model
from imputebounds.errors import (
    NonBinaryOutcome,
    QUndefinedForStratum,
    TooManyStrata,
    ZeroCellMass,
)
from conftest import X1, W2, build_routing_pop_and_q


# --- independent allocation oracle ---------------------------------------------

def allocation_extremes(obs_success, obs_total, missing_by_y):
    """Extremes of (obs_success + s1) / (obs_total + s1 + s0) when each
    missing stratum's mass goes entirely into or out of the cell."""
    strata = list(missing_by_y.items())
    values = []
    for corner in itertools.product((0, 1), repeat=len(strata)):
        s1 = sum(m for take, (y, m) in zip(corner, strata) if take and y == 1.0)
        s0 = sum(m for take, (y, m) in zip(corner, strata) if take and y == 0.0)
        den = obs_total + s1 + s0
        if den > 1e-15:
            values.append((obs_success + s1) / den)
    return min(values), max(values)


def covariate_table(records):
    """records: (y, w or None) at the single x cell."""
    return ObservationTable.from_records(
        [(y, "a", w) for y, w in records], OutcomeDomain.binary_01(), X1, W2)


def completed_cell(observed_pairs, imputed_pairs):
    """CompletedTable at a single x; pairs are (y, w label index into W2)."""
    wd = W2[0]
    ys = [y for y, _ in observed_pairs] + [y for y, _ in imputed_pairs]
    ws = [wd.code(w) for _, w in observed_pairs] + [wd.code(w) for _, w in imputed_pairs]
    flags = [False] * len(observed_pairs) + [True] * len(imputed_pairs)
    n = len(ys)
    return CompletedTable(
        outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
        y=np.array(ys, dtype=float), x=np.zeros(n, dtype=np.int64),
        w=np.array(ws, dtype=np.int64),
        y_imputed=np.zeros(n, dtype=bool), w_imputed=np.array(flags))


def random_covariate_pop(seed, w_size=2):
    return random_population(seed, x_sizes=(1,), w_sizes=(w_size,),
                             regime="covariate")


class TestTrueLongMean:
    def test_two_cell_ratio(self):
        pop = joint_population(
            {(1.0, "a", "o"): 0.3, (0.0, "a", "o"): 0.1, (0.0, "a", "p"): 0.6},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        assert true_long_mean(pop, CellSelector("a", "o")) == pytest.approx(0.75)

    def test_constant_outcome(self):
        pop = joint_population(
            {(1.0, "a", "o"): 0.5, (0.0, "a", "p"): 0.5},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        assert true_long_mean(pop, CellSelector("a", "o")) == 1.0

    def test_zero_mass_guard(self, eco_pop):
        pop = joint_population(
            {(1.0, "a", "o"): 1.0},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        with pytest.raises(ZeroCellMass):
            true_long_mean(pop, CellSelector("a", "p"))


class TestImputedLongMean:
    def test_pooled_average(self, sel_ao):
        c = completed_cell([(1, "o"), (0, "o"), (1, "o")], [(0, "o")])
        assert imputed_long_mean(c, sel_ao) == pytest.approx(0.5)

    def test_nothing_imputed_in(self, sel_ao):
        c = completed_cell([(1, "o"), (0, "o"), (1, "o")], [(0, "p")])
        assert imputed_long_mean(c, sel_ao) == pytest.approx(2 / 3)

    def test_everything_imputed_in(self, sel_ao):
        c = completed_cell([(1, "p")], [(0, "o"), (0, "o")])
        assert imputed_long_mean(c, sel_ao) == 0.0


class TestPlimImputedLongMean:
    def test_worked_routing_example(self):
        pop, q = build_routing_pop_and_q()
        model = ImputationModel.explicit_covariate(q)
        sel = CellSelector("a", "o")
        assert imputed_cell_share(pop, model, sel) == pytest.approx(0.75, abs=1e-12)
        assert plim_imputed_long_mean(pop, model, sel) == pytest.approx(0.70, abs=1e-12)

    def test_true_distribution_recovers_long_mean(self):
        for seed, x_sizes in ((3, (1,)), (11, (2,))):
            pop = random_population(seed, x_sizes=x_sizes, w_sizes=(2,),
                                    regime="covariate")
            model = true_covariate_model(pop)
            for omega in ("a", "b"):
                sel = CellSelector({"x1": "a"}, {"w1": omega})
                assert plim_imputed_long_mean(pop, model, sel) == pytest.approx(
                    true_long_mean(pop, sel), abs=1e-12)

    def test_unreachable_cell_guard(self):
        pop = joint_population(
            {(1.0, "a", "p"): 0.5, (0.0, "a", "p"): 0.5},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        q = QCovariateModel({(0.0, ("a",)): {("p",): 1.0},
                             (1.0, ("a",)): {("p",): 1.0}})
        with pytest.raises(ZeroCellMass):
            plim_imputed_long_mean(
                pop, ImputationModel.explicit_covariate(q), CellSelector("a", "o"))

    def test_ecological_draws_recover_only_short_mean(self, eco_pop, sel_ao, sel_ap):
        model = ImputationModel.ecological()
        short = eco_pop.ymass_where(xi=0) / eco_pop.mass_where(xi=0)
        assert plim_imputed_long_mean(eco_pop, model, sel_ao) == pytest.approx(
            short, abs=1e-12)
        assert plim_imputed_long_mean(eco_pop, model, sel_ap) == pytest.approx(
            short, abs=1e-12)


class TestMatchingConditions:
    def test_true_distribution_matches_both(self, covariate_pop, sel_ao):
        model = true_covariate_model(covariate_pop)
        assert matching_conditions(covariate_pop, model, sel_ao) == (True, True)

    def test_ecological_fails_mean_condition(self, eco_pop, sel_ao):
        flag_mass, flag_mean = matching_conditions(
            eco_pop, ImputationModel.ecological(), sel_ao)
        assert flag_mass is True
        assert flag_mean is False

    def test_mar_covariate_matches_when_missingness_ignores_w(self):
        joint = joint_population({
            (1.0, "a", "o"): 0.30, (0.0, "a", "o"): 0.10,
            (1.0, "a", "p"): 0.15, (0.0, "a", "p"): 0.45,
        }, outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        pop = apply_mechanism(
            joint, MissingnessMechanism.by_outcome({1.0: 0.4, 0.0: 0.2}))
        model = ImputationModel.mar_covariate()
        sel = CellSelector("a", "o")
        assert matching_conditions(pop, model, sel) == (True, True)
        assert plim_imputed_long_mean(pop, model, sel) == pytest.approx(
            true_long_mean(pop, sel), abs=1e-12)

    def test_match_chain_from_exact_distribution(self):
        for seed in range(8):
            pop = random_covariate_pop(seed, w_size=3)
            model = true_covariate_model(pop)
            for omega in pop.w_domains[0].levels:
                sel = CellSelector({"x1": "a"}, {"w1": omega})
                assert matching_conditions(pop, model, sel) == (True, True)
                assert abs(plim_imputed_long_mean(pop, model, sel)
                           - true_long_mean(pop, sel)) <= 1e-9


class TestBinaryBoundsClosedForm:
    def test_worked_instance_matches_allocation_oracle(self, covariate_pop, sel_ao):
        lo, hi = allocation_extremes(0.3, 0.4, {1.0: 0.2, 0.0: 0.2})
        iv = binary_bounds_closed_form(covariate_pop, sel_ao)
        assert iv.lo == pytest.approx(lo, abs=1e-12)
        assert iv.hi == pytest.approx(hi, abs=1e-12)
        assert iv.lo == pytest.approx(0.5, abs=1e-9)
        assert iv.hi == pytest.approx(0.8333333333, abs=1e-9)

    def test_no_missing_data_degenerates(self, sel_ao):
        pop = joint_population(
            {(1.0, "a", "o"): 0.3, (0.0, "a", "o"): 0.3, (0.0, "a", "p"): 0.4},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        iv = binary_bounds_closed_form(pop, sel_ao)
        assert iv.lo == iv.hi == pytest.approx(0.5)

    def test_non_binary_rejected(self, sel_ao):
        pop = joint_population(
            {(0.5, "a", "o"): 1.0}, outcome=OutcomeDomain(0.0, 1.0),
            x_domains=X1, w_domains=W2, regime="covariate")
        with pytest.raises(NonBinaryOutcome):
            binary_bounds_closed_form(pop, sel_ao)

    def test_table_counts_version(self, sel_ao):
        t = covariate_table([(1, "o"), (1, "o"), (1, "o"), (0, "o"),
                             (1, None), (1, None), (0, None), (0, None)])
        lo, hi = allocation_extremes(3, 4, {1.0: 2, 0.0: 2})
        iv = binary_bounds_closed_form(t, sel_ao)
        assert iv.lo == pytest.approx(lo, abs=1e-12)
        assert iv.hi == pytest.approx(hi, abs=1e-12)

    def test_literal_variant_differs_and_is_not_sharp(self, covariate_pop, sel_ao):
        sharp = binary_bounds_closed_form(covariate_pop, sel_ao)
        literal = binary_bounds_closed_form(covariate_pop, sel_ao,
                                            literal_unconditioned=True)
        assert literal.hi == pytest.approx(0.75, abs=1e-9)
        assert literal.hi < sharp.hi


class TestBinaryBoundsOracle:
    def test_matches_closed_form_on_worked_instance(self, covariate_pop, sel_ao):
        iv = binary_bounds_oracle(covariate_pop, sel_ao)
        cf = binary_bounds_closed_form(covariate_pop, sel_ao)
        assert iv.lo == pytest.approx(cf.lo, abs=1e-12)
        assert iv.hi == pytest.approx(cf.hi, abs=1e-12)

    def test_matches_closed_form_on_random_populations(self):
        for seed in range(60):
            pop = random_covariate_pop(seed, w_size=2 + seed % 2)
            for omega in pop.w_domains[0].levels:
                sel = CellSelector({"x1": "a"}, {"w1": omega})
                cf = binary_bounds_closed_form(pop, sel)
                orc = binary_bounds_oracle(pop, sel)
                assert abs(cf.lo - orc.lo) <= 1e-9
                assert abs(cf.hi - orc.hi) <= 1e-9

    def test_truth_always_inside(self):
        for seed in range(40):
            pop = random_covariate_pop(seed, w_size=3)
            for omega in pop.w_domains[0].levels:
                sel = CellSelector({"x1": "a"}, {"w1": omega})
                assert binary_bounds_oracle(pop, sel).contains(
                    true_long_mean(pop, sel), tol=1e-9)

    def test_nothing_to_allocate(self, sel_ao):
        pop = joint_population(
            {(1.0, "a", "o"): 0.4, (0.0, "a", "o"): 0.4, (0.0, "a", "p"): 0.2},
            outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        iv = binary_bounds_oracle(pop, CellSelector("a", "o"))
        assert iv.lo == iv.hi == pytest.approx(0.5)

    def test_all_mass_missing_gives_unit_interval(self, eco_pop, sel_ao):
        iv = binary_bounds_oracle(eco_pop, sel_ao)
        assert (iv.lo, iv.hi) == (0.0, 1.0)

    def test_stratum_cap(self):
        pop = random_population(0, x_sizes=(7,), w_sizes=(2,), regime="covariate")
        with pytest.raises(TooManyStrata):
            binary_bounds_oracle(pop, CellSelector({"x1": "a"}, {"w1": "a"}))


class TestMidpointLongEstimate:
    def test_midpoint_of_worked_instance(self, sel_ao):
        t = covariate_table(
            [(1, "o")] * 3 + [(0, "o")] + [(1, "p")] + [(0, "p")]
            + [(1, None)] * 2 + [(0, None)] * 2)
        iv = binary_bounds_closed_form(t, sel_ao)
        assert midpoint_long_estimate(t, sel_ao) == pytest.approx(iv.midpoint)

    def test_degenerate_cell(self, sel_ao):
        t = covariate_table([(1, "o"), (0, "o"), (0, "p")])
        assert midpoint_long_estimate(t, sel_ao) == pytest.approx(0.5)

    def test_empty_observed_cell_widens_fully(self, sel_ao):
        t = covariate_table([(1, None), (1, None), (0, None)])
        assert midpoint_long_estimate(t, sel_ao) == pytest.approx(0.5)
        iv = binary_bounds_closed_form(t, sel_ao)
        assert (iv.lo, iv.hi) == (0.0, 1.0)


class TestMixtureEstimate:
    def test_two_record_example(self, sel_ao):
        t = covariate_table([(1, "o"), (0, None)])
        q = QCovariateModel({(0.0, ("a",)): {("o",): 1.0}})
        measure = mixture_joint_estimate(t, q)
        assert measure.mass.tolist() == [0.5, 0.5]
        assert mixture_conditional_mean(measure, sel_ao) == pytest.approx(0.5)

    def test_no_missing_reproduces_empirical_joint(self, sel_ao):
        t = covariate_table([(1, "o"), (1, "o"), (0, "p"), (1, "p")])
        q = QCovariateModel({(0.0, ("a",)): {("o",): 1.0}})
        measure = mixture_joint_estimate(t, q)
        assert mixture_conditional_mean(measure, sel_ao) == pytest.approx(1.0)
        assert float(measure.mass.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_undefined_stratum_guard(self):
        t = covariate_table([(1, "o"), (1, None)])
        q = QCovariateModel({(0.0, ("a",)): {("o",): 1.0}})
        with pytest.raises(QUndefinedForStratum):
            mixture_joint_estimate(t, q)

    def test_single_atom_slice(self, sel_ao, sel_ap):
        t = covariate_table([(1, "o"), (0, "p")])
        measure = mixture_joint_estimate(
            t, QCovariateModel({(0.0, ("a",)): {("o",): 1.0}}))
        assert mixture_conditional_mean(measure, sel_ao) == 1.0
        assert mixture_conditional_mean(measure, sel_ap) == 0.0

    def test_empty_slice_guard(self, sel_ap):
        t = covariate_table([(1, "o"), (0, "o")])
        measure = mixture_joint_estimate(
            t, QCovariateModel({(0.0, ("a",)): {("o",): 1.0}}))
        with pytest.raises(ZeroCellMass):
            mixture_conditional_mean(measure, sel_ap)

    def test_empirical_q_reproduces_plim_arithmetic(self, sel_ao):
        t = covariate_table(
            [(1, "o"), (1, "o"), (1, "p"), (0, "o"), (0, "p"), (0, "p"),
             (1, None), (1, None), (0, None)])
        obs = np.asarray(t.z_w)
        q_hat = {}
        for y_val in (0.0, 1.0):
            donors = obs & (t.y == y_val)
            p_o = float((t.w[donors] == 0).sum()) / donors.sum()
            q_hat[(y_val, ("a",))] = {("o",): p_o, ("p",): 1.0 - p_o}
        measure = mixture_joint_estimate(t, QCovariateModel(q_hat))

        def q_o(y_val):
            return q_hat[(y_val, ("a",))][("o",)]

        num = float((t.y[obs & (t.w == 0)]).sum())
        den = float((obs & (t.w == 0)).sum())
        for y_val in (0.0, 1.0):
            n_missing = int(((~obs) & (t.y == y_val)).sum())
            num += y_val * q_o(y_val) * n_missing
            den += q_o(y_val) * n_missing
        assert mixture_conditional_mean(measure, sel_ao) == pytest.approx(
            num / den, abs=1e-12)

    def test_mixture_consistent_under_true_q(self):
        pop = random_covariate_pop(17)
        q = true_covariate_model(pop).covariate_q
        sel = CellSelector({"x1": "a"}, {"w1": "a"})
        t = sample_table(pop, 200000, seed=5)
        measure = mixture_joint_estimate(t, q)
        assert mixture_conditional_mean(measure, sel) == pytest.approx(
            true_long_mean(pop, sel), abs=0.015)


class TestPlimConvergence:
    def test_imputed_long_mean_converges_to_plim(self):
        joint = joint_population({
            (1.0, "a", "o"): 0.25, (0.0, "a", "o"): 0.10,
            (1.0, "a", "p"): 0.15, (0.0, "a", "p"): 0.50,
        }, outcome=OutcomeDomain.binary_01(), x_domains=X1, w_domains=W2,
            regime="covariate")
        mech = MissingnessMechanism.by_cell({
            (1.0, "a", "o"): 0.6, (0.0, "a", "o"): 0.2,
            (1.0, "a", "p"): 0.3, (0.0, "a", "p"): 0.5,
        })
        pop = apply_mechanism(joint, mech)
        model = ImputationModel.mar_covariate()
        sel = CellSelector("a", "o")
        plim = plim_imputed_long_mean(pop, model, sel)
        truth = true_long_mean(pop, sel)
        assert abs(plim - truth) > 0.01
        for seed in range(20):
            t = sample_table(pop, 200000, seed=seed)
            completed = draw_completion(t, fit_model(model, t), seed=seed)
            assert abs(imputed_long_mean(completed, sel) - plim) <= 0.015
