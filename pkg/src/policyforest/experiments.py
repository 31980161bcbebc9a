"""Experiment harness: feature-set evaluations, per-domain IG rankings,
preference-outcome correlations, per-IG accuracy gains, selector
comparisons, and the nonlinearity case study.

Every experiment is a pure function of (cases, parameters, base_seed);
run seeds derive from the base seed with the same mixing function the
forest uses, so reports are bit-reproducible and independent of
execution parallelism.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from . import forest as rf
from . import logistic as lr
from . import metrics as mx
from .dataset import (IG_NAMES, PD_LABELS, EncodedMatrix, FeatureSetSpec,
                      PolicyCase, DatasetError, encode, random_split,
                      rescale_p90, retrodiction_split, zero_noncommittal)
from .forest import ForestConfig, mix_seed
from .logistic import LogisticConfig

REGIMES = ("random_draw", "retrodiction")
MODEL_KINDS = ("forest", "logistic")


class ExperimentError(ValueError):
    """Raised for invalid experiment parameters or degenerate data."""


def _mean_std(values) -> tuple[float, float]:
    vals = list(values)
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return mean, std


def _usable_cases(cases: list[PolicyCase],
                  spec: FeatureSetSpec) -> tuple[list[PolicyCase], int]:
    """Drop cases missing p90 when the spec needs it; report the count."""
    if not spec.use_p90:
        return list(cases), 0
    kept = [c for c in cases if c.p90 is not None]
    return kept, len(cases) - len(kept)


# ---------------------------------------------------------------------------
# Feature-set evaluation (Table-4-style runs)


@dataclass(frozen=True)
class RunResult:
    run_index: int
    seed: int
    threshold: float
    train_balanced_accuracy: float
    balanced_accuracy: float
    auc: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class EvalReport:
    feature_set_id: str
    regime: str
    model_kind: str
    base_seed: int
    n_dropped_missing_p90: int
    runs: list[RunResult]
    balanced_accuracy_mean: float = 0.0
    balanced_accuracy_std: float = 0.0
    auc_mean: float = 0.0
    auc_std: float = 0.0

    def __post_init__(self):
        if self.runs:
            self.balanced_accuracy_mean, self.balanced_accuracy_std = \
                _mean_std(r.balanced_accuracy for r in self.runs)
            self.auc_mean, self.auc_std = _mean_std(r.auc for r in self.runs)

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_and_score(model_kind: str, train: EncodedMatrix, test: EncodedMatrix,
                   model_seed: int, forest_config: ForestConfig,
                   logistic_config: LogisticConfig,
                   n_jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Returns (train_scores, test_scores) for one fitted model."""
    if model_kind == "forest":
        cfg = replace(forest_config, seed=model_seed)
        model = rf.fit_forest(train, cfg, n_jobs=n_jobs)
        return (rf.predict_proba(model, train.X),
                rf.predict_proba(model, test.X))
    if model_kind == "logistic":
        model = lr.fit(train, logistic_config)
        return (lr.predict_proba(model, train.X, train.column_names),
                lr.predict_proba(model, test.X, test.column_names))
    raise ExperimentError(f"unknown model kind {model_kind!r}")


def run_feature_set_eval(cases: list[PolicyCase], spec: FeatureSetSpec,
                         regime: str, model_kind: str = "forest",
                         n_runs: int | None = None, base_seed: int = 0,
                         forest_config: ForestConfig = ForestConfig(),
                         logistic_config: LogisticConfig = LogisticConfig(),
                         train_fraction: float = 0.67,
                         cutoff_year: int = 1997,
                         n_jobs: int = 1) -> EvalReport:
    """Repeated split / fit / evaluate for one feature set.

    random_draw: n_runs (default 25) independent seeded splits.
    retrodiction: a single fixed year split; n_runs (default 1) refits
    with different model seeds quantify fit randomness only.
    """
    if regime not in REGIMES:
        raise ExperimentError(f"unknown regime {regime!r}")
    if n_runs is None:
        n_runs = 25 if regime == "random_draw" else 1
    usable, dropped = _usable_cases(cases, spec)
    matrix = encode(usable, spec)

    fixed_plan = None
    if regime == "retrodiction":
        fixed_plan = retrodiction_split(usable, cutoff_year)

    runs: list[RunResult] = []
    for j in range(n_runs):
        run_seed = mix_seed(base_seed, j)
        if regime == "random_draw":
            plan = random_split(matrix.n_samples, train_fraction, run_seed)
        else:
            plan = fixed_plan
        train = matrix.subset(plan.train_indices)
        test = matrix.subset(plan.test_indices)
        train_scores, test_scores = _fit_and_score(
            model_kind, train, test, mix_seed(run_seed, 1),
            forest_config, logistic_config, n_jobs=n_jobs)
        op = mx.select_operating_point(train_scores, train.y)
        conf = mx.confusion_at_threshold(test_scores, test.y, op.threshold)
        _, auc = mx.roc_and_auc(test_scores, test.y)
        runs.append(RunResult(
            run_index=j, seed=run_seed, threshold=op.threshold,
            train_balanced_accuracy=op.train_balanced_accuracy,
            balanced_accuracy=mx.balanced_accuracy(conf), auc=auc,
            tp=conf.tp, fp=conf.fp, tn=conf.tn, fn=conf.fn))
    return EvalReport(feature_set_id=spec.id, regime=regime,
                      model_kind=model_kind, base_seed=base_seed,
                      n_dropped_missing_p90=dropped, runs=runs)


# ---------------------------------------------------------------------------
# Preference-outcome correlation (at-bats weighted)


def ig_outcome_correlation(cases: list[PolicyCase],
                           feature: str) -> tuple[float | None, int]:
    """Correlation of a feature's non-neutral stances with outcomes.

    corr = (0.5/at_bats) * (sum of x over adopted - sum over rejected),
    over cases where the stance is non-zero. For "P90" the preference is
    first rescaled to [-2,2] and the noncommittal band zeroed. Returns
    (None, 0) when the feature was never at bat.
    """
    if feature != "P90" and feature not in IG_NAMES:
        raise ExperimentError(f"unknown feature {feature!r}")
    pairs: list[tuple[float, int]] = []
    for c in cases:
        if feature == "P90":
            if c.p90 is None:
                continue
            v = zero_noncommittal(rescale_p90(c.p90))
        else:
            v = float(c.alignment(feature))
        if v != 0.0:
            pairs.append((v, c.outcome))
    at_bats = len(pairs)
    if at_bats == 0:
        return None, 0
    pos_sum = sum(v for v, y in pairs if y == 1)
    neg_sum = sum(v for v, y in pairs if y == 0)
    return 0.5 / at_bats * (pos_sum - neg_sum), at_bats


# ---------------------------------------------------------------------------
# Per-domain IG ranking


@dataclass(frozen=True)
class DomainRankingRow:
    feature: str
    rf_score_mean: float
    rf_score_std: float
    correlation_mean: float | None
    correlation_std: float | None
    at_bats_mean: float
    at_bats_std: float


def _ranking_spec() -> FeatureSetSpec:
    return FeatureSetSpec("custom", use_p90=True, use_net_iga=False,
                          ig_subset=IG_NAMES, policy_encoding="none")


def _ranking_matrix(cases: list[PolicyCase]) -> EncodedMatrix:
    """P90 rescaled to [-2,2] plus the 43 IG columns, no policy labels."""
    matrix = encode(cases, _ranking_spec())
    matrix.X[:, 0] = 4.0 * matrix.X[:, 0] - 2.0
    return matrix


def rank_igs_by_domain(cases: list[PolicyCase], domain: str,
                       n_splits: int = 21, base_seed: int = 0,
                       forest_config: ForestConfig = ForestConfig(),
                       train_fraction: float = 0.67,
                       n_jobs: int = 1) -> list[DomainRankingRow]:
    """Rank P90 and the IGs by averaged Gini importance within one domain.

    Correlations and at-bats are computed on each split's test cases and
    reported as mean +/- std over splits.
    """
    if domain not in PD_LABELS:
        raise ExperimentError(f"unknown policy domain {domain!r}")
    sub = [c for c in cases if c.policy_domain == domain and c.p90 is not None]
    n_pos = sum(c.outcome for c in sub)
    if len(sub) < 2 or n_pos == 0 or n_pos == len(sub):
        raise ExperimentError(f"domain {domain!r} is degenerate: cannot rank "
                              f"({len(sub)} usable cases, {n_pos} positive)")
    matrix = _ranking_matrix(sub)
    names = matrix.column_names

    importances = np.zeros((n_splits, matrix.n_features))
    corrs: dict[str, list[float]] = {name: [] for name in names}
    at_bats: dict[str, list[int]] = {name: [] for name in names}
    for j in range(n_splits):
        run_seed = mix_seed(base_seed, j)
        plan = random_split(matrix.n_samples, train_fraction, run_seed)
        train = matrix.subset(plan.train_indices)
        cfg = replace(forest_config, seed=mix_seed(run_seed, 1))
        model = rf.fit_forest(train, cfg, n_jobs=n_jobs)
        importances[j] = model.gini_importance
        test_cases = [sub[i] for i in plan.test_indices]
        for name in names:
            corr, n_ab = ig_outcome_correlation(test_cases, name)
            at_bats[name].append(n_ab)
            if corr is not None:
                corrs[name].append(corr)

    rows = []
    for f, name in enumerate(names):
        score_mean, score_std = _mean_std(importances[:, f])
        if corrs[name]:
            corr_mean, corr_std = _mean_std(corrs[name])
        else:
            corr_mean = corr_std = None
        ab_mean, ab_std = _mean_std(at_bats[name])
        rows.append(DomainRankingRow(name, score_mean, score_std,
                                     corr_mean, corr_std, ab_mean, ab_std))
    rows.sort(key=lambda r: (-r.rf_score_mean, names.index(r.feature)))
    return rows


# ---------------------------------------------------------------------------
# Set C construction (top-k IGs by averaged Gini importance)


def build_set_c(cases: list[PolicyCase], k: int = 14, base_seed: int = 0,
                n_splits: int = 21,
                forest_config: ForestConfig = ForestConfig(),
                train_fraction: float = 0.67,
                n_jobs: int = 1) -> FeatureSetSpec:
    """Derive the reduced IG subset from Set-B forests over random draws."""
    if not (1 <= k <= len(IG_NAMES)):
        raise ExperimentError(f"k must be in [1, {len(IG_NAMES)}], got {k}")
    spec_b = FeatureSetSpec.set_b()
    usable, _ = _usable_cases(cases, spec_b)
    matrix = encode(usable, spec_b)
    ig_cols = [matrix.column_names.index(name) for name in IG_NAMES]

    acc = np.zeros(matrix.n_features)
    for j in range(n_splits):
        run_seed = mix_seed(base_seed, j)
        plan = random_split(matrix.n_samples, train_fraction, run_seed)
        train = matrix.subset(plan.train_indices)
        cfg = replace(forest_config, seed=mix_seed(run_seed, 1))
        acc += rf.fit_forest(train, cfg, n_jobs=n_jobs).gini_importance
    ig_scores = acc[ig_cols]
    order = sorted(range(len(IG_NAMES)), key=lambda i: (-ig_scores[i], i))
    chosen = tuple(IG_NAMES[i] for i in sorted(order[:k]))
    if k == len(IG_NAMES):
        return FeatureSetSpec.set_b()
    spec_id = "C" if k == 14 else "custom"
    return FeatureSetSpec(spec_id, use_p90=True, use_net_iga=False,
                          ig_subset=chosen, policy_encoding="pd")


# ---------------------------------------------------------------------------
# Per-IG accuracy gains (Set B vs Set A on strongly-engaged subgroups)


@dataclass(frozen=True)
class GainRow:
    ig: str
    gain_mean: float
    gain_std: float
    mean_test_cases: float


@dataclass
class GainReport:
    rows: list[GainRow]
    excluded: list[str]  # IGs below the test-case threshold in some run
    base_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def gain_per_ig(cases: list[PolicyCase],
                spec_b: FeatureSetSpec | None = None,
                spec_a: FeatureSetSpec | None = None,
                n_runs: int = 25, base_seed: int = 0,
                min_test_cases: int = 20,
                forest_config: ForestConfig = ForestConfig(),
                train_fraction: float = 0.67,
                n_jobs: int = 1) -> GainReport:
    """Per-IG mean accuracy gain of the spec_b model over the spec_a model.

    For each run, accuracy is measured on test cases where the IG was
    strongly in favor or strongly opposed; IGs with fewer than
    min_test_cases such cases in any run are reported separately.
    """
    spec_b = spec_b or FeatureSetSpec.set_b()
    spec_a = spec_a or FeatureSetSpec.set_a()
    usable = [c for c in cases
              if not (spec_b.use_p90 or spec_a.use_p90) or c.p90 is not None]
    mat_b = encode(usable, spec_b)
    mat_a = encode(usable, spec_a)
    align = np.array([c.ig_alignments for c in usable])  # (n, 43)

    gains: dict[str, list[float]] = {name: [] for name in IG_NAMES}
    counts: dict[str, list[int]] = {name: [] for name in IG_NAMES}
    for j in range(n_runs):
        run_seed = mix_seed(base_seed, j)
        plan = random_split(mat_b.n_samples, train_fraction, run_seed)
        test_idx = np.asarray(plan.test_indices, dtype=int)
        preds = {}
        # Same model seed for both fits: the comparison is paired, so the
        # models differ only by feature set (identical specs give gain 0).
        model_seed = mix_seed(run_seed, 1)
        for tag, mat in (("b", mat_b), ("a", mat_a)):
            train = mat.subset(plan.train_indices)
            test = mat.subset(plan.test_indices)
            train_scores, test_scores = _fit_and_score(
                "forest", train, test, model_seed,
                forest_config, LogisticConfig(), n_jobs=n_jobs)
            op = mx.select_operating_point(train_scores, train.y)
            preds[tag] = (test_scores >= op.threshold).astype(int)
        y_test = mat_b.y[test_idx]
        for g, name in enumerate(IG_NAMES):
            mask = np.abs(align[test_idx, g]) == 2
            counts[name].append(int(mask.sum()))
            if mask.any():
                acc_b = float(np.mean(preds["b"][mask] == y_test[mask]))
                acc_a = float(np.mean(preds["a"][mask] == y_test[mask]))
                gains[name].append(acc_b - acc_a)

    rows: list[GainRow] = []
    excluded: list[str] = []
    for name in IG_NAMES:
        if min(counts[name]) >= min_test_cases:
            mean, std = _mean_std(gains[name])
            rows.append(GainRow(name, mean, std,
                                float(np.mean(counts[name]))))
        else:
            excluded.append(name)
    rows.sort(key=lambda r: -r.gain_mean)
    return GainReport(rows=rows, excluded=excluded, base_seed=base_seed)


# ---------------------------------------------------------------------------
# Selector comparison (forest-Gini-chosen vs logistic-beta-chosen IGs)


@dataclass(frozen=True)
class SelectorCell:
    model_kind: str   # forest | logistic
    selector: str     # rf_gini | logistic_beta
    regime: str       # random_draw | retrodiction
    balanced_accuracy_mean: float
    balanced_accuracy_std: float
    auc_mean: float
    auc_std: float


@dataclass(frozen=True)
class SelectorGain:
    model_kind: str
    regime: str
    balanced_accuracy_gain_mean: float
    balanced_accuracy_gain_std: float
    auc_gain_mean: float
    auc_gain_std: float


@dataclass
class SelectorComparison:
    rf_chosen: tuple[str, ...]
    logistic_chosen: tuple[str, ...]
    cells: list[SelectorCell]
    gains: list[SelectorGain]  # mean of per-split differences
    base_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _select_subsets(matrix: EncodedMatrix, k: int, n_splits: int,
                    base_seed: int, forest_config: ForestConfig,
                    logistic_config: LogisticConfig, train_fraction: float,
                    n_jobs: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    ig_cols = {name: matrix.column_names.index(name) for name in IG_NAMES}
    gini_acc = np.zeros(len(IG_NAMES))
    beta_acc = np.zeros(len(IG_NAMES))
    for j in range(n_splits):
        run_seed = mix_seed(base_seed, 10_000 + j)
        plan = random_split(matrix.n_samples, train_fraction, run_seed)
        train = matrix.subset(plan.train_indices)
        cfg = replace(forest_config, seed=mix_seed(run_seed, 1))
        fmodel = rf.fit_forest(train, cfg, n_jobs=n_jobs)
        lmodel = lr.fit(train, logistic_config)
        mags = dict(lr.coefficient_ranking(lmodel))
        for i, name in enumerate(IG_NAMES):
            gini_acc[i] += fmodel.gini_importance[ig_cols[name]]
            beta_acc[i] += mags.get(name, 0.0)

    def top_k(scores: np.ndarray) -> tuple[str, ...]:
        order = sorted(range(len(IG_NAMES)), key=lambda i: (-scores[i], i))
        return tuple(IG_NAMES[i] for i in sorted(order[:k]))

    return top_k(gini_acc), top_k(beta_acc)


def compare_selectors(cases: list[PolicyCase], k: int = 14,
                      regimes: tuple[str, ...] = REGIMES,
                      n_splits: int = 21, base_seed: int = 0,
                      forest_config: ForestConfig = ForestConfig(),
                      logistic_config: LogisticConfig = LogisticConfig(),
                      train_fraction: float = 0.67, cutoff_year: int = 1997,
                      n_jobs: int = 1) -> SelectorComparison:
    """Evaluate forest-chosen vs logistic-chosen k-IG subsets.

    Both model kinds are evaluated on both subsets (features: P90 plus
    the chosen IGs) under paired split seeds; gain rows are the mean of
    per-split differences, not the difference of means.
    """
    spec_full = _ranking_spec()
    usable, _ = _usable_cases(cases, spec_full)
    sel_matrix = _ranking_matrix(usable)
    rf_chosen, lg_chosen = _select_subsets(
        sel_matrix, k, n_splits, base_seed, forest_config, logistic_config,
        train_fraction, n_jobs)

    specs = {
        "rf_gini": FeatureSetSpec("custom", True, False, rf_chosen, "none"),
        "logistic_beta": FeatureSetSpec("custom", True, False, lg_chosen,
                                        "none"),
    }
    cells: list[SelectorCell] = []
    gains: list[SelectorGain] = []
    for model_kind in MODEL_KINDS:
        for regime in regimes:
            per_sel: dict[str, EvalReport] = {}
            for sel, spec in specs.items():
                n_runs = n_splits
                if regime == "retrodiction" and model_kind == "logistic":
                    n_runs = 1  # deterministic on a fixed split
                per_sel[sel] = run_feature_set_eval(
                    usable, spec, regime, model_kind, n_runs=n_runs,
                    base_seed=base_seed, forest_config=forest_config,
                    logistic_config=logistic_config,
                    train_fraction=train_fraction, cutoff_year=cutoff_year,
                    n_jobs=n_jobs)
                rep = per_sel[sel]
                cells.append(SelectorCell(
                    model_kind, sel, regime,
                    rep.balanced_accuracy_mean, rep.balanced_accuracy_std,
                    rep.auc_mean, rep.auc_std))
            a, b = per_sel["rf_gini"].runs, per_sel["logistic_beta"].runs
            n_pairs = min(len(a), len(b))
            if len(a) != len(b):  # paired up to the shorter run list
                a, b = a[:n_pairs], b[:n_pairs]
            ba_diffs = [x.balanced_accuracy - y.balanced_accuracy
                        for x, y in zip(a, b)]
            auc_diffs = [x.auc - y.auc for x, y in zip(a, b)]
            ba_m, ba_s = _mean_std(ba_diffs)
            auc_m, auc_s = _mean_std(auc_diffs)
            gains.append(SelectorGain(model_kind, regime, ba_m, ba_s,
                                      auc_m, auc_s))
    return SelectorComparison(rf_chosen=rf_chosen, logistic_chosen=lg_chosen,
                              cells=cells, gains=gains, base_seed=base_seed)


# ---------------------------------------------------------------------------
# Nonlinearity case study (P90 x pivot-IG geometry)


@dataclass(frozen=True)
class CaseStudyPoint:
    case_id: str
    p90: float
    pivot_alignment: int
    outcome: int
    forest_proba: float
    forest_pred: int
    logistic_proba: float
    logistic_pred: int


@dataclass
class CaseStudyReport:
    domain: str
    pivot_ig: str
    points: list[CaseStudyPoint]
    forest_balanced_accuracy: float
    logistic_balanced_accuracy: float
    region_counts: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return asdict(self)


def nonlinearity_case_study(cases: list[PolicyCase],
                            pivot_ig: str = "Defense Contractors",
                            domain: str = "Foreign", base_seed: int = 0,
                            forest_config: ForestConfig = ForestConfig(),
                            logistic_config: LogisticConfig = LogisticConfig(),
                            n_jobs: int = 1) -> CaseStudyReport:
    """Fit forest and logistic on (P90, pivot alignment) over domain cases
    where the pivot took a stance; report both balanced accuracies and the
    per-case point data behind the three-region picture.

    Protocol: a single fit on all qualifying cases, evaluated in-sample
    at each model's own best operating point.
    """
    if pivot_ig not in IG_NAMES:
        raise ExperimentError(f"unknown IG {pivot_ig!r}")
    sub = [c for c in cases
           if c.policy_domain == domain and c.p90 is not None
           and c.alignment(pivot_ig) != 0]
    if not sub:
        raise ExperimentError(f"no {domain!r} cases with a non-neutral "
                              f"{pivot_ig!r} stance")
    n_pos = sum(c.outcome for c in sub)
    if n_pos == 0 or n_pos == len(sub):
        raise ExperimentError(f"case-study subset is single-class "
                              f"({n_pos}/{len(sub)} positive)")

    X = np.array([[c.p90, c.alignment(pivot_ig)] for c in sub], dtype=float)
    y = np.array([c.outcome for c in sub], dtype=int)
    matrix = EncodedMatrix(X, y, ["P90", pivot_ig],
                           np.arange(len(sub)))

    cfg = replace(forest_config, seed=mix_seed(base_seed, 1))
    fmodel = rf.fit_forest(matrix, cfg, n_jobs=n_jobs)
    lmodel = lr.fit(matrix, logistic_config)
    f_scores = rf.predict_proba(fmodel, X)
    l_scores = lr.predict_proba(lmodel, X, matrix.column_names)
    f_op = mx.select_operating_point(f_scores, y)
    l_op = mx.select_operating_point(l_scores, y)
    f_pred = (f_scores >= f_op.threshold).astype(int)
    l_pred = (l_scores >= l_op.threshold).astype(int)
    f_ba = mx.balanced_accuracy(mx.confusion_at_threshold(f_scores, y,
                                                          f_op.threshold))
    l_ba = mx.balanced_accuracy(mx.confusion_at_threshold(l_scores, y,
                                                          l_op.threshold))

    points = [CaseStudyPoint(c.case_id, c.p90, c.alignment(pivot_ig),
                             c.outcome, float(f_scores[i]), int(f_pred[i]),
                             float(l_scores[i]), int(l_pred[i]))
              for i, c in enumerate(sub)]

    regions = {"pivot_favors": [], "pivot_opposes_p90_high": [],
               "pivot_opposes_p90_low": []}
    for c in sub:
        if c.alignment(pivot_ig) > 0:
            key = "pivot_favors"
        elif c.p90 >= 0.5:
            key = "pivot_opposes_p90_high"
        else:
            key = "pivot_opposes_p90_low"
        regions[key].append(c.outcome)
    region_counts = {key: {"pos": sum(v), "neg": len(v) - sum(v)}
                     for key, v in regions.items()}

    return CaseStudyReport(domain=domain, pivot_ig=pivot_ig, points=points,
                           forest_balanced_accuracy=f_ba,
                           logistic_balanced_accuracy=l_ba,
                           region_counts=region_counts)
