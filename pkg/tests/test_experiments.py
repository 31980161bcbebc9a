import numpy as np
import pytest

from policyforest.dataset import (IG_NAMES, FeatureSetSpec, PolicyCase)
from policyforest.experiments import (ExperimentError, build_set_c,
                                      compare_selectors, gain_per_ig,
                                      ig_outcome_correlation,
                                      nonlinearity_case_study,
                                      rank_igs_by_domain,
                                      run_feature_set_eval)
from policyforest.forest import ForestConfig
from conftest import make_cases

FAST_FOREST = ForestConfig(n_trees=15, min_samples_leaf=2)

NRA = "National Rifle Association"
DEFENSE = "Defense Contractors"


def _case(i, outcome, p90, alignments, pa="Guns", year=1990):
    from policyforest.dataset import PA_TO_PD
    return PolicyCase(f"s{i}", year, outcome, tuple(alignments), pa,
                      PA_TO_PD[pa], p90=p90)


def three_region_cases(n=300, seed=0, upper_left=0.7, right=0.95,
                       lower_left=0.05):
    """Synthetic geometry: pivot in favor -> nearly always adopted;
    pivot opposed -> adopted mostly when p90 favors."""
    rng = np.random.default_rng(seed)
    piv_idx = IG_NAMES.index(DEFENSE)
    cases = []
    for i in range(n):
        align = np.zeros(len(IG_NAMES), dtype=int)
        piv = int(rng.choice([-2, 2]))
        align[piv_idx] = piv
        p90 = float(rng.uniform())
        if piv > 0:
            y = int(rng.uniform() < right)
        else:
            y = int(rng.uniform() < (upper_left if p90 > 0.5
                                     else lower_left))
        cases.append(_case(i, y, p90, align, pa="Foreign Policy"))
    return cases


class TestRunFeatureSetEval:
    def test_separable_is_perfect(self):
        # outcome equals sign of the driver IG: any IG-bearing spec nails it
        align_idx = 0
        cases = []
        rng = np.random.default_rng(1)
        for i in range(120):
            align = np.zeros(len(IG_NAMES), dtype=int)
            y = int(rng.integers(0, 2))
            align[align_idx] = 2 if y else -2
            cases.append(_case(i, y, float(rng.uniform()), align))
        rep = run_feature_set_eval(cases, FeatureSetSpec.set_b(),
                                   "random_draw", n_runs=3,
                                   forest_config=FAST_FOREST)
        assert rep.balanced_accuracy_mean > 0.97
        assert rep.auc_mean > 0.99

    def test_shuffled_labels_near_chance(self):
        cases = make_cases(300, seed=5, signal=False)
        rep = run_feature_set_eval(cases, FeatureSetSpec.set_a(),
                                   "random_draw", n_runs=5,
                                   forest_config=FAST_FOREST)
        assert abs(rep.balanced_accuracy_mean - 0.5) < 0.08

    def test_retrodiction_single_run(self, cases_200):
        rep = run_feature_set_eval(cases_200, FeatureSetSpec.set_a(),
                                   "retrodiction",
                                   forest_config=FAST_FOREST)
        assert len(rep.runs) == 1

    def test_random_draw_run_count_and_distinct_seeds(self, cases_200):
        rep = run_feature_set_eval(cases_200, FeatureSetSpec.set_a(),
                                   "random_draw", n_runs=4,
                                   forest_config=FAST_FOREST)
        assert len(rep.runs) == 4
        assert len({r.seed for r in rep.runs}) == 4

    def test_bit_reproducible(self, cases_200):
        kw = dict(regime="random_draw", n_runs=3, base_seed=9,
                  forest_config=FAST_FOREST)
        a = run_feature_set_eval(cases_200, FeatureSetSpec.set_b(), **kw)
        b = run_feature_set_eval(cases_200, FeatureSetSpec.set_b(), **kw)
        assert a.to_dict() == b.to_dict()

    def test_aggregate_recomputable_from_runs(self, cases_200):
        rep = run_feature_set_eval(cases_200, FeatureSetSpec.set_a(),
                                   "random_draw", n_runs=5,
                                   forest_config=FAST_FOREST)
        bas = [r.balanced_accuracy for r in rep.runs]
        assert rep.balanced_accuracy_mean == pytest.approx(np.mean(bas))
        assert rep.balanced_accuracy_std == pytest.approx(
            np.std(bas, ddof=1))

    def test_logistic_model_kind(self, cases_200):
        rep = run_feature_set_eval(cases_200, FeatureSetSpec.set_a(),
                                   "random_draw", model_kind="logistic",
                                   n_runs=3)
        assert rep.model_kind == "logistic"
        assert 0.0 <= rep.balanced_accuracy_mean <= 1.0

    def test_unknown_regime(self, cases_200):
        with pytest.raises(ExperimentError):
            run_feature_set_eval(cases_200, FeatureSetSpec.set_a(), "bogus")


class TestIgOutcomeCorrelation:
    def test_single_strong_favor_adopted(self):
        align = np.zeros(len(IG_NAMES), dtype=int)
        align[IG_NAMES.index(NRA)] = 2
        corr, at_bats = ig_outcome_correlation(
            [_case(0, 1, 0.5, align)], NRA)
        assert corr == 1.0
        assert at_bats == 1

    def test_cancellation(self):
        align = np.zeros(len(IG_NAMES), dtype=int)
        align[IG_NAMES.index(NRA)] = 2
        cases = [_case(0, 1, 0.5, align), _case(1, 0, 0.5, align)]
        corr, at_bats = ig_outcome_correlation(cases, NRA)
        assert corr == 0.0
        assert at_bats == 2

    def test_matches_loop_oracle(self):
        cases = make_cases(80, seed=3)
        for feature in [NRA, DEFENSE, "P90"]:
            corr, at_bats = ig_outcome_correlation(cases, feature)
            total, count = 0.0, 0
            for c in cases:
                if feature == "P90":
                    v = 4 * c.p90 - 2
                    if abs(v) <= 0.4:
                        v = 0.0
                else:
                    v = c.alignment(feature)
                if v != 0:
                    count += 1
                    total += v if c.outcome == 1 else -v
            if count == 0:
                assert corr is None
            else:
                assert at_bats == count
                assert corr == pytest.approx(0.5 * total / count, abs=1e-12)

    def test_never_at_bat(self):
        align = np.zeros(len(IG_NAMES), dtype=int)
        corr, at_bats = ig_outcome_correlation([_case(0, 1, 0.5, align)], NRA)
        assert corr is None
        assert at_bats == 0

    def test_unknown_feature(self):
        with pytest.raises(ExperimentError):
            ig_outcome_correlation([], "Not A Group")


class TestRankIgsByDomain:
    def _planted_domain_cases(self, n=160, seed=2):
        rng = np.random.default_rng(seed)
        nra = IG_NAMES.index(NRA)
        cases = []
        for i in range(n):
            align = rng.choice([-1, 0, 0, 0, 1], size=len(IG_NAMES))
            y = int(rng.integers(0, 2))
            align[nra] = 2 if y else -2
            cases.append(_case(i, y, float(rng.uniform()), align))
        return cases

    def test_planted_ig_outranks_noise(self):
        rows = rank_igs_by_domain(self._planted_domain_cases(), "Guns",
                                  n_splits=5, forest_config=FAST_FOREST)
        assert rows[0].feature == NRA
        assert rows[0].at_bats_mean > 0

    def test_rows_sorted_by_score(self):
        rows = rank_igs_by_domain(self._planted_domain_cases(), "Guns",
                                  n_splits=3, forest_config=FAST_FOREST)
        scores = [r.rf_score_mean for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_degenerate_domain_error(self):
        align = np.zeros(len(IG_NAMES), dtype=int)
        cases = [_case(i, 1, 0.5, align) for i in range(10)]
        with pytest.raises(ExperimentError, match="Guns"):
            rank_igs_by_domain(cases, "Guns", n_splits=2)

    def test_unknown_domain(self):
        with pytest.raises(ExperimentError):
            rank_igs_by_domain([], "Outer Space")


class TestBuildSetC:
    def test_full_subset_equals_set_b(self, cases_200):
        spec = build_set_c(cases_200, k=43, n_splits=2,
                           forest_config=FAST_FOREST)
        assert spec == FeatureSetSpec.set_b()
        kw = dict(regime="random_draw", n_runs=3, base_seed=4,
                  forest_config=FAST_FOREST)
        a = run_feature_set_eval(cases_200, spec, **kw)
        b = run_feature_set_eval(cases_200, FeatureSetSpec.set_b(), **kw)
        assert a.to_dict() == b.to_dict()

    def test_k_out_of_range(self, cases_200):
        with pytest.raises(ExperimentError):
            build_set_c(cases_200, k=44)

    def test_planted_recovery(self):
        rng = np.random.default_rng(6)
        plants = [0, 7, 20]
        cases = []
        for i in range(300):
            align = np.zeros(len(IG_NAMES), dtype=int)
            y = int(rng.integers(0, 2))
            for p in plants:
                align[p] = (2 if y else -2) if rng.uniform() < 0.9 \
                    else int(rng.choice([-1, 1]))
            noise = rng.choice(len(IG_NAMES), size=6, replace=False)
            for j in noise:
                if j not in plants:
                    align[j] = int(rng.choice([-2, -1, 1, 2]))
            cases.append(_case(i, y, float(rng.uniform()), align))
        spec = build_set_c(cases, k=3, n_splits=5,
                           forest_config=ForestConfig(n_trees=25))
        assert set(spec.ig_subset) == {IG_NAMES[p] for p in plants}
        assert spec.id == "custom"

    def test_k14_gets_c_id(self, cases_200):
        spec = build_set_c(cases_200, k=14, n_splits=2,
                           forest_config=FAST_FOREST)
        assert spec.id == "C"
        assert len(spec.ig_subset) == 14


class TestGainPerIg:
    def test_identical_specs_zero_gain(self, cases_200):
        spec = FeatureSetSpec.set_b()
        rep = gain_per_ig(cases_200, spec_b=spec, spec_a=spec, n_runs=2,
                          min_test_cases=1, forest_config=FAST_FOREST)
        assert rep.rows  # some IG qualifies
        assert all(r.gain_mean == 0.0 for r in rep.rows)

    def test_informative_spec_gains(self):
        # driver IG decides the outcome; spec_a sees only random p90
        rng = np.random.default_rng(9)
        driver = 3
        cases = []
        for i in range(240):
            align = np.zeros(len(IG_NAMES), dtype=int)
            y = int(rng.integers(0, 2))
            align[driver] = 2 if y else -2
            cases.append(_case(i, y, float(rng.uniform()), align))
        spec_a = FeatureSetSpec("custom", True, False, (), "none")
        spec_b = FeatureSetSpec("custom", True, False,
                                (IG_NAMES[driver],), "none")
        rep = gain_per_ig(cases, spec_b=spec_b, spec_a=spec_a, n_runs=3,
                          min_test_cases=10, forest_config=FAST_FOREST)
        by_name = {r.ig: r for r in rep.rows}
        assert by_name[IG_NAMES[driver]].gain_mean > 0.3

    def test_threshold_exclusion(self, cases_200):
        rep = gain_per_ig(cases_200, n_runs=2, min_test_cases=10 ** 6,
                          forest_config=FAST_FOREST)
        assert rep.rows == []
        assert set(rep.excluded) == set(IG_NAMES)


class TestCompareSelectors:
    def test_forced_tie_zero_gains(self):
        # only two IGs ever active: both selectors must choose them
        rng = np.random.default_rng(12)
        a_idx, b_idx = 5, 9
        cases = []
        for i in range(160):
            align = np.zeros(len(IG_NAMES), dtype=int)
            y = int(rng.integers(0, 2))
            align[a_idx] = 2 if y else -2
            align[b_idx] = int(rng.choice([-2, -1, 1, 2]))
            year = 1985 if i % 2 else 1999
            c = _case(i, y, float(rng.uniform()), align)
            cases.append(PolicyCase(c.case_id, year, c.outcome,
                                    c.ig_alignments, c.policy_area,
                                    c.policy_domain, p90=c.p90))
        comp = compare_selectors(cases, k=2, n_splits=3,
                                 forest_config=FAST_FOREST)
        assert set(comp.rf_chosen) == {IG_NAMES[a_idx], IG_NAMES[b_idx]}
        assert comp.rf_chosen == comp.logistic_chosen
        for g in comp.gains:
            assert g.balanced_accuracy_gain_mean == 0.0
            assert g.auc_gain_mean == 0.0

    def test_gain_is_mean_of_paired_differences(self, cases_200):
        comp = compare_selectors(cases_200, k=3, n_splits=3,
                                 regimes=("random_draw",),
                                 forest_config=FAST_FOREST)
        # with equal paired run counts, the gain mean equals the
        # difference of the cell means
        for g in comp.gains:
            cell = {(c.model_kind, c.selector): c for c in comp.cells
                    if c.regime == g.regime}
            diff = cell[(g.model_kind, "rf_gini")].balanced_accuracy_mean \
                - cell[(g.model_kind, "logistic_beta")].balanced_accuracy_mean
            assert g.balanced_accuracy_gain_mean == pytest.approx(diff,
                                                                  abs=1e-12)


class TestNonlinearityCaseStudy:
    def test_three_region_forest_advantage(self):
        cases = three_region_cases(seed=1)
        rep = nonlinearity_case_study(
            cases, forest_config=ForestConfig(n_trees=60), base_seed=1)
        gap = rep.forest_balanced_accuracy - rep.logistic_balanced_accuracy
        assert gap >= 0.10
        assert len(rep.points) == len(cases)
        assert rep.region_counts["pivot_favors"]["pos"] > \
            rep.region_counts["pivot_favors"]["neg"]

    def test_constant_pivot_error(self):
        align = np.zeros(len(IG_NAMES), dtype=int)
        cases = [_case(i, i % 2, 0.5, align, pa="Foreign Policy")
                 for i in range(10)]
        with pytest.raises(ExperimentError, match="non-neutral"):
            nonlinearity_case_study(cases)

    def test_unknown_pivot(self):
        with pytest.raises(ExperimentError):
            nonlinearity_case_study([], pivot_ig="Nobody")
