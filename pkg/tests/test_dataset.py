import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from policyforest.dataset import (IG_NAMES, PA_LABELS, PA_TO_PD, PD_LABELS,
                                  AlignmentTally, DatasetError, FeatureSetSpec,
                                  PolicyCase, canonical_header, domain_counts,
                                  dump_cases, encode, load_cases, net_iga,
                                  parse_name_map, random_split, rescale_p90,
                                  retrodiction_split, tally_alignments,
                                  zero_noncommittal)
from conftest import make_cases


def _row(case_id="c1", year=1983, outcome=1, p90="0.6", p50="", p10="",
         alignments=None, pa="Guns", pd_label="Guns"):
    alignments = alignments or ["0"] * 43
    return ",".join([case_id, str(year), str(outcome), p90, p50, p10]
                    + alignments + [pa, pd_label])


def _csv(*rows):
    return ",".join(canonical_header()) + "\n" + "\n".join(rows) + "\n"


class TestLoadCases:
    def test_single_valid_row(self):
        cases = load_cases(_csv(_row()))
        assert len(cases) == 1
        assert cases[0].outcome == 1
        assert cases[0].year == 1983
        assert cases[0].p90 == 0.6
        assert cases[0].p50 is None

    def test_out_of_range_alignment_names_row_and_column(self):
        aligns = ["0"] * 43
        aligns[2] = "3"
        with pytest.raises(DatasetError, match="row 2.*Airlines"):
            load_cases(_csv(_row(alignments=aligns)))

    def test_unknown_policy_area(self):
        with pytest.raises(DatasetError, match="unknown policy area"):
            load_cases(_csv(_row(pa="Space", pd_label="Misc")))

    def test_mismatched_domain(self):
        with pytest.raises(DatasetError, match="belongs to domain"):
            load_cases(_csv(_row(pa="Guns", pd_label="Foreign")))

    def test_duplicate_case_id(self):
        with pytest.raises(DatasetError, match="duplicate case_id"):
            load_cases(_csv(_row(), _row()))

    def test_wrong_arity(self):
        bad = _row() + ",extra"
        with pytest.raises(DatasetError, match="row 2"):
            load_cases(_csv(bad))

    def test_non_numeric_cell(self):
        with pytest.raises(DatasetError, match="p90"):
            load_cases(_csv(_row(p90="high")))

    def test_unknown_column_rejected(self):
        text = _csv(_row()).replace("AARP", "AARPX")
        with pytest.raises(DatasetError, match="unknown columns"):
            load_cases(text)

    def test_round_trip(self):
        cases = make_cases(50, seed=3, missing_p90_every=7)
        assert load_cases(dump_cases(cases)) == cases

    def test_name_map_adapter(self):
        mapping = parse_name_map(io.StringIO(
            "# comment\nid = case_id\nretired_persons=AARP\n"))
        assert mapping == {"id": "case_id", "retired_persons": "AARP"}
        text = _csv(_row()).replace("case_id", "id").replace("AARP",
                                                             "retired_persons")
        cases = load_cases(text, name_map=mapping)
        assert cases[0].case_id == "c1"

    def test_name_map_bad_line(self):
        with pytest.raises(DatasetError, match="line 1"):
            parse_name_map(io.StringIO("no separator here\n"))


class TestNetIga:
    def test_empty_tally(self):
        assert net_iga(AlignmentTally(0, 0, 0, 0)) == 0.0

    def test_single_strong_favor(self):
        assert net_iga(AlignmentTally(1, 0, 0, 0)) == pytest.approx(
            math.log(2), abs=1e-12)

    def test_mixed_tally(self):
        # f2=2, f1=1, o2=1, o1=2 -> log(3.5) - log(3)
        expected = math.log(3.5) - math.log(3.0)
        assert net_iga(AlignmentTally(2, 1, 1, 2)) == pytest.approx(
            expected, abs=1e-12)
        assert expected == pytest.approx(0.1542, abs=1e-4)

    @given(st.tuples(*[st.integers(0, 10)] * 4))
    def test_antisymmetry(self, t):
        f2, f1, o2, o1 = t
        if f2 + f1 + o2 + o1 > 43:
            return
        a = net_iga(AlignmentTally(f2, f1, o2, o1))
        b = net_iga(AlignmentTally(o2, o1, f2, f1))
        assert a == pytest.approx(-b, abs=1e-12)

    @given(st.tuples(*[st.integers(0, 9)] * 4))
    def test_monotone(self, t):
        f2, f1, o2, o1 = t
        if f2 + f1 + o2 + o1 > 39:
            return
        base = net_iga(AlignmentTally(f2, f1, o2, o1))
        assert net_iga(AlignmentTally(f2 + 1, f1, o2, o1)) > base
        assert net_iga(AlignmentTally(f2, f1 + 1, o2, o1)) > base
        assert net_iga(AlignmentTally(f2, f1, o2 + 1, o1)) < base
        assert net_iga(AlignmentTally(f2, f1, o2, o1 + 1)) < base


class TestTally:
    def test_all_neutral(self):
        case = make_cases(1, seed=0)[0]
        case = PolicyCase(case.case_id, case.year, case.outcome,
                          (0,) * 43, case.policy_area, case.policy_domain)
        assert tally_alignments(case) == AlignmentTally(0, 0, 0, 0)

    def test_direct_count(self):
        aligns = [0] * 43
        aligns[0], aligns[1], aligns[2] = 2, 2, -1
        case = PolicyCase("x", 1990, 0, tuple(aligns), "Guns", "Guns")
        assert tally_alignments(case) == AlignmentTally(2, 0, 0, 1)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            aligns = tuple(int(v) for v in rng.integers(-2, 3, size=43))
            case = PolicyCase("x", 1990, 0, aligns, "Guns", "Guns")
            t = tally_alignments(case)
            counts = {v: 0 for v in (-2, -1, 1, 2)}
            for v in aligns:
                if v != 0:
                    counts[v] += 1
            assert (t.f2, t.f1, t.o2, t.o1) == (
                counts[2], counts[1], counts[-2], counts[-1])


class TestRescaleAndBand:
    @pytest.mark.parametrize("p,expected", [(0.5, 0.0), (1.0, 2.0),
                                            (0.25, -1.0), (0.0, -2.0)])
    def test_rescale(self, p, expected):
        assert rescale_p90(p) == expected

    def test_rescale_out_of_range(self):
        with pytest.raises(DatasetError):
            rescale_p90(1.5)

    @pytest.mark.parametrize("v,expected", [(0.3, 0.0), (-0.4, 0.0),
                                            (0.4, 0.0), (1.5, 1.5),
                                            (-0.41, -0.41)])
    def test_band(self, v, expected):
        assert zero_noncommittal(v) == expected

    @given(st.floats(-2, 2))
    def test_band_idempotent(self, v):
        assert zero_noncommittal(zero_noncommittal(v)) == zero_noncommittal(v)

    @given(st.floats(0, 1))
    def test_rescale_affine(self, p):
        assert rescale_p90(p) == 4.0 * p - 2.0


class TestEncode:
    def test_set_a_columns(self, cases_200):
        m = encode(cases_200[:3], FeatureSetSpec.set_a())
        assert m.column_names == ["P90", "netIGA"]
        assert m.X.shape == (3, 2)

    def test_set_d_column_count(self, cases_200):
        m = encode(cases_200, FeatureSetSpec.set_d())
        assert m.n_features == 1 + 43 + 19

    def test_set_c_column_count(self, cases_200):
        spec = FeatureSetSpec.set_c(IG_NAMES[:14])
        m = encode(cases_200, spec)
        assert m.n_features == 1 + 14 + 6

    def test_one_hot_rows_sum_to_one(self, cases_200):
        m = encode(cases_200, FeatureSetSpec.set_d())
        pa_cols = [i for i, c in enumerate(m.column_names)
                   if c.startswith("PA:")]
        assert np.all(m.X[:, pa_cols].sum(axis=1) == 1.0)
        assert set(np.unique(m.X[:, pa_cols])) <= {0.0, 1.0}

    def test_ig_columns_keep_ordinals(self, cases_200):
        m = encode(cases_200, FeatureSetSpec.set_b())
        ig_cols = [i for i, c in enumerate(m.column_names) if c in IG_NAMES]
        assert np.all(np.abs(m.X[:, ig_cols]) <= 2)

    def test_unknown_ig_rejected(self):
        with pytest.raises(DatasetError, match="unknown IG"):
            FeatureSetSpec("custom", True, False, ("Nonexistent Group",),
                           "none")

    def test_missing_p90_dropped_with_count(self):
        cases = make_cases(40, seed=1, missing_p90_every=4)
        m = encode(cases, FeatureSetSpec.set_a())
        assert m.n_dropped_missing_p90 == 10
        assert m.n_samples == 30

    def test_netiga_matches_formula(self, cases_200):
        m = encode(cases_200[:5], FeatureSetSpec.set_a())
        for r, i in enumerate(m.case_indices):
            expected = net_iga(tally_alignments(cases_200[i]))
            assert m.X[r, 1] == pytest.approx(expected, abs=1e-12)


class TestSplits:
    def test_small_split(self):
        plan = random_split(3, 0.67, seed=1)
        assert len(plan.train_indices) == 2
        assert len(plan.test_indices) == 1
        assert not set(plan.train_indices) & set(plan.test_indices)

    def test_determinism(self):
        assert random_split(100, 0.67, 9) == random_split(100, 0.67, 9)

    def test_floor_convention_full_size(self):
        plan = random_split(1836, 0.67, seed=0)
        assert len(plan.train_indices) == 1230
        assert len(plan.test_indices) == 606

    def test_too_few_cases(self):
        with pytest.raises(DatasetError):
            random_split(1, 0.67, 0)

    def test_bad_fraction(self):
        with pytest.raises(DatasetError):
            random_split(10, 1.0, 0)

    @pytest.mark.parametrize("n,f", [(10, 0.5), (17, 0.67), (101, 0.9)])
    def test_partition_property(self, n, f):
        plan = random_split(n, f, seed=3)
        combined = sorted(plan.train_indices + plan.test_indices)
        assert combined == list(range(n))

    def test_retrodiction_inclusive_cutoff(self):
        cases = make_cases(30, seed=2)
        cases = [c for c in cases]
        # force two known years
        a = cases[0]
        b = cases[1]
        a = PolicyCase(a.case_id, 1990, a.outcome, a.ig_alignments,
                       a.policy_area, a.policy_domain, p90=a.p90)
        b = PolicyCase(b.case_id, 1997, b.outcome, b.ig_alignments,
                       b.policy_area, b.policy_domain, p90=b.p90)
        plan = retrodiction_split([a, b])
        assert plan.train_indices == (0,)
        assert plan.test_indices == (1,)

    def test_retrodiction_empty_side(self):
        cases = [PolicyCase(f"c{i}", 1985, i % 2, (0,) * 43, "Guns", "Guns")
                 for i in range(4)]
        with pytest.raises(DatasetError, match="empty test"):
            retrodiction_split(cases)


class TestDomainCounts:
    def test_empty(self):
        rows = domain_counts([])
        assert all(r.pos == 0 and r.neg == 0 for r in rows)
        assert rows[-1].domain == "Total"

    def test_totals_add_up(self, cases_200):
        rows = domain_counts(cases_200)
        total = rows[-1]
        assert total.pos == sum(c.outcome for c in cases_200)
        assert total.pos + total.neg == len(cases_200)
        assert sum(r.pos for r in rows[:-1]) == total.pos
