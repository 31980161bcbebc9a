"""Policy-case table: loading, validation, feature encoding, and splits.

The canonical CSV schema is one row per policy case:

    case_id,year,outcome,p90,p50,p10,<43 IG columns>,policy_area,policy_domain

IG columns carry ordinal alignments in {-2,-1,0,1,2}; voter-preference
columns (p90/p50/p10) are fractions in [0,1] and may be empty (missing).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

import numpy as np

# Canonical interest-group names, kept alphabetical so column order is
# deterministic everywhere.
IG_NAMES: tuple[str, ...] = tuple(sorted([
    "AARP",
    "AFL-CIO",
    "Airlines",
    "American Bankers Association",
    "American Farm Bureau Federation",
    "American Federation of State County and Municipal Employees",
    "American Hospital Association",
    "American Israel Public Affairs Committee",
    "American Legion",
    "American Medical Association",
    "Association of Trial Lawyers",
    "Automobile Companies",
    "Beer Wine and Liquor Companies",
    "Chamber of Commerce",
    "Christian Coalition",
    "Computer Software and Hardware",
    "Credit Union National Association",
    "Defense Contractors",
    "Electric Companies",
    "Health Insurance Association",
    "Independent Insurance Agents of America",
    "International Brotherhood of Teamsters",
    "Motion Picture Association of America",
    "National Association of Broadcasters",
    "National Association of Home Builders",
    "National Association of Manufacturers",
    "National Association of Realtors",
    "National Beer Wholesalers Association",
    "National Education Association",
    "National Federation of Independent Business",
    "National Governors Association",
    "National Restaurant Association",
    "National Rifle Association",
    "National Right to Life Committee",
    "Oil Companies",
    "Pharmaceutical Companies",
    "Recording Industry Association of America",
    "Securities and Investment Companies",
    "Telephone Companies",
    "Tobacco Companies",
    "United Auto Workers Union",
    "Universities",
    "Veterans of Foreign Wars",
]))

assert len(IG_NAMES) == 43

# Policy-area labels and the fixed PA -> PD assignment (each case carries
# exactly one PA; its domain must agree with this table).
PA_TO_PD: dict[str, str] = {
    "Budget": "Economic",
    "Campaign Finance": "Misc",
    "Civil Rights": "Misc",
    "Defense": "Foreign",
    "Economics and Labor": "Economic",
    "Education": "Social Welfare",
    "Environment": "Economic",
    "Foreign Policy": "Foreign",
    "Government Reform": "Misc",
    "Guns": "Guns",
    "Health": "Social Welfare",
    "Immigration": "Foreign",
    "Miscellaneous": "Misc",
    "Race": "Misc",
    "Religion": "Religious",
    "Social Welfare": "Social Welfare",
    "Taxation": "Economic",
    "Terrorism": "Foreign",
    "Welfare Reform": "Social Welfare",
}

PA_LABELS: tuple[str, ...] = tuple(sorted(PA_TO_PD))
PD_LABELS: tuple[str, ...] = ("Economic", "Foreign", "Social Welfare",
                              "Religious", "Guns", "Misc")

assert len(PA_LABELS) == 19

VALID_ALIGNMENTS = (-2, -1, 0, 1, 2)


class DatasetError(ValueError):
    """Raised for malformed input files or invalid field values."""


@dataclass(frozen=True)
class PolicyCase:
    """One policy case: outcome, voter preferences, and IG alignments."""

    case_id: str
    year: int
    outcome: int
    ig_alignments: tuple[int, ...]  # length 43, canonical IG order
    policy_area: str
    policy_domain: str
    p90: float | None = None
    p50: float | None = None
    p10: float | None = None

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise DatasetError(f"case {self.case_id!r}: outcome must be 0 or 1, "
                               f"got {self.outcome!r}")
        if len(self.ig_alignments) != len(IG_NAMES):
            raise DatasetError(f"case {self.case_id!r}: expected "
                               f"{len(IG_NAMES)} IG alignments, got "
                               f"{len(self.ig_alignments)}")
        for name, v in zip(IG_NAMES, self.ig_alignments):
            if v not in VALID_ALIGNMENTS:
                raise DatasetError(f"case {self.case_id!r}: IG {name!r} "
                                   f"alignment {v!r} outside {{-2..2}}")
        if self.policy_area not in PA_TO_PD:
            raise DatasetError(f"case {self.case_id!r}: unknown policy area "
                               f"{self.policy_area!r}")
        expected_pd = PA_TO_PD[self.policy_area]
        if self.policy_domain != expected_pd:
            raise DatasetError(f"case {self.case_id!r}: policy area "
                               f"{self.policy_area!r} belongs to domain "
                               f"{expected_pd!r}, not {self.policy_domain!r}")
        for fname in ("p90", "p50", "p10"):
            v = getattr(self, fname)
            if v is not None and not (0.0 <= v <= 1.0):
                raise DatasetError(f"case {self.case_id!r}: {fname}={v!r} "
                                   f"outside [0,1]")

    def alignment(self, ig_name: str) -> int:
        return self.ig_alignments[IG_NAMES.index(ig_name)]


@dataclass(frozen=True)
class AlignmentTally:
    """Counts of IGs in each non-neutral stance on one case."""

    f2: int  # strongly in favor
    f1: int  # somewhat in favor
    o2: int  # strongly opposed
    o1: int  # somewhat opposed

    def __post_init__(self):
        if min(self.f2, self.f1, self.o2, self.o1) < 0:
            raise DatasetError("tally counts must be non-negative")
        if self.f2 + self.f1 + self.o2 + self.o1 > len(IG_NAMES):
            raise DatasetError("tally counts exceed number of IGs")


def tally_alignments(case: PolicyCase) -> AlignmentTally:
    """Count IGs by stance."""
    a = case.ig_alignments
    return AlignmentTally(
        f2=sum(1 for v in a if v == 2),
        f1=sum(1 for v in a if v == 1),
        o2=sum(1 for v in a if v == -2),
        o1=sum(1 for v in a if v == -1),
    )


def net_iga(tally: AlignmentTally) -> float:
    """Net interest-group alignment: log-difference of weighted stance counts.

    Strong stances count fully and weak stances count half on each side;
    the log damps the marginal effect of many IGs piling onto one side.
    """
    return (math.log(tally.f2 + 0.5 * tally.f1 + 1.0)
            - math.log(tally.o2 + 0.5 * tally.o1 + 1.0))


def rescale_p90(p: float) -> float:
    """Affine map of a [0,1] preference fraction onto the IG scale [-2,2]."""
    if not (0.0 <= p <= 1.0):
        raise DatasetError(f"p90 value {p!r} outside [0,1]")
    return 4.0 * p - 2.0


def zero_noncommittal(v: float) -> float:
    """Zero out values in the noncommittal band [-0.4, 0.4] (inclusive).

    Applied only when computing preference-outcome correlations, never to
    model features.
    """
    return 0.0 if abs(v) <= 0.4 else v


# ---------------------------------------------------------------------------
# Feature-set specifications and encoding


@dataclass(frozen=True)
class FeatureSetSpec:
    """Declarative description of the model input columns.

    policy_encoding: "none", "pd" (6 one-hot columns), or "pa" (19 columns).
    """

    id: str
    use_p90: bool
    use_net_iga: bool
    ig_subset: tuple[str, ...]
    policy_encoding: str

    def __post_init__(self):
        if self.policy_encoding not in ("none", "pd", "pa"):
            raise DatasetError(f"unknown policy encoding "
                               f"{self.policy_encoding!r}")
        for name in self.ig_subset:
            if name not in IG_NAMES:
                raise DatasetError(f"unknown IG column {name!r}")

    @classmethod
    def set_a(cls) -> "FeatureSetSpec":
        return cls("A", use_p90=True, use_net_iga=True, ig_subset=(),
                   policy_encoding="none")

    @classmethod
    def set_b(cls) -> "FeatureSetSpec":
        return cls("B", use_p90=True, use_net_iga=False, ig_subset=IG_NAMES,
                   policy_encoding="pd")

    @classmethod
    def set_c(cls, igs: Iterable[str]) -> "FeatureSetSpec":
        igs = tuple(igs)
        if len(igs) != 14:
            raise DatasetError(f"Set C requires exactly 14 IGs, got {len(igs)}")
        return cls("C", use_p90=True, use_net_iga=False, ig_subset=igs,
                   policy_encoding="pd")

    @classmethod
    def set_d(cls) -> "FeatureSetSpec":
        return cls("D", use_p90=True, use_net_iga=False, ig_subset=IG_NAMES,
                   policy_encoding="pa")

    def column_names(self) -> list[str]:
        cols: list[str] = []
        if self.use_p90:
            cols.append("P90")
        if self.use_net_iga:
            cols.append("netIGA")
        cols.extend(name for name in IG_NAMES if name in set(self.ig_subset))
        if self.policy_encoding == "pd":
            cols.extend(f"PD:{d}" for d in sorted(PD_LABELS))
        elif self.policy_encoding == "pa":
            cols.extend(f"PA:{a}" for a in PA_LABELS)
        return cols


@dataclass
class EncodedMatrix:
    """Feature matrix plus labels for a list of cases.

    case_indices maps each row back to its index in the input case list
    (cases missing p90 are dropped when the spec uses p90).
    """

    X: np.ndarray          # shape (n, F), float64
    y: np.ndarray          # shape (n,), int
    column_names: list[str]
    case_indices: np.ndarray  # shape (n,), int
    n_dropped_missing_p90: int = 0

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "EncodedMatrix":
        idx = np.asarray(indices, dtype=int)
        return EncodedMatrix(self.X[idx], self.y[idx], self.column_names,
                             self.case_indices[idx],
                             self.n_dropped_missing_p90)


def encode(cases: list[PolicyCase], spec: FeatureSetSpec) -> EncodedMatrix:
    """Build the feature matrix for a spec.

    Column order: P90 (raw [0,1]), netIGA if requested, IG columns in
    canonical order, then one-hot policy columns in sorted label order.
    """
    cols = spec.column_names()
    ig_selected = [name for name in IG_NAMES if name in set(spec.ig_subset)]
    kept: list[int] = []
    dropped = 0
    for i, c in enumerate(cases):
        if spec.use_p90 and c.p90 is None:
            dropped += 1
        else:
            kept.append(i)

    X = np.zeros((len(kept), len(cols)))
    y = np.zeros(len(kept), dtype=int)
    for r, i in enumerate(kept):
        c = cases[i]
        j = 0
        if spec.use_p90:
            X[r, j] = c.p90
            j += 1
        if spec.use_net_iga:
            X[r, j] = net_iga(tally_alignments(c))
            j += 1
        for name in ig_selected:
            X[r, j] = c.ig_alignments[IG_NAMES.index(name)]
            j += 1
        if spec.policy_encoding == "pd":
            X[r, j + sorted(PD_LABELS).index(c.policy_domain)] = 1.0
        elif spec.policy_encoding == "pa":
            X[r, j + PA_LABELS.index(c.policy_area)] = 1.0
        y[r] = c.outcome
    return EncodedMatrix(X, y, cols, np.asarray(kept, dtype=int), dropped)


# ---------------------------------------------------------------------------
# Train/test splits


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/test index sets covering all cases."""

    kind: str  # "random_draw" or "retrodiction"
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    seed: int | None = None
    cutoff_year: int | None = None

    def __post_init__(self):
        if set(self.train_indices) & set(self.test_indices):
            raise DatasetError("train and test indices overlap")


def random_split(n_cases: int, train_fraction: float, seed: int) -> SplitPlan:
    """Seeded uniform split; train size is floor(train_fraction * n)."""
    if n_cases < 2:
        raise DatasetError(f"need at least 2 cases to split, got {n_cases}")
    if not (0.0 < train_fraction < 1.0):
        raise DatasetError(f"train_fraction must be in (0,1), got "
                           f"{train_fraction}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_cases)
    n_train = int(math.floor(train_fraction * n_cases))
    return SplitPlan("random_draw",
                     tuple(int(i) for i in perm[:n_train]),
                     tuple(int(i) for i in perm[n_train:]),
                     seed=seed)


def retrodiction_split(cases: list[PolicyCase],
                       cutoff_year: int = 1997) -> SplitPlan:
    """Train on cases before the cutoff year, test on the rest (inclusive)."""
    train = tuple(i for i, c in enumerate(cases) if c.year < cutoff_year)
    test = tuple(i for i, c in enumerate(cases) if c.year >= cutoff_year)
    if not train:
        raise DatasetError(f"no cases before {cutoff_year}: empty training set")
    if not test:
        raise DatasetError(f"no cases in or after {cutoff_year}: empty test set")
    return SplitPlan("retrodiction", train, test, cutoff_year=cutoff_year)


# ---------------------------------------------------------------------------
# Summaries


@dataclass(frozen=True)
class DomainCountRow:
    domain: str
    pos: int
    neg: int
    pos_post_cutoff: int
    neg_post_cutoff: int

    @property
    def pos_fraction(self) -> float:
        total = self.pos + self.neg
        return self.pos / total if total else 0.0

    @property
    def pos_fraction_post_cutoff(self) -> float:
        total = self.pos_post_cutoff + self.neg_post_cutoff
        return self.pos_post_cutoff / total if total else 0.0


def domain_counts(cases: list[PolicyCase],
                  cutoff_year: int = 1997) -> list[DomainCountRow]:
    """Positive/negative counts per policy domain, plus a Total row.

    Post-cutoff columns cover cases with year >= cutoff_year.
    """
    rows = []
    for d in list(PD_LABELS) + ["Total"]:
        sub = cases if d == "Total" else [c for c in cases
                                          if c.policy_domain == d]
        post = [c for c in sub if c.year >= cutoff_year]
        rows.append(DomainCountRow(
            domain=d,
            pos=sum(c.outcome for c in sub),
            neg=sum(1 - c.outcome for c in sub),
            pos_post_cutoff=sum(c.outcome for c in post),
            neg_post_cutoff=sum(1 - c.outcome for c in post),
        ))
    return rows


# ---------------------------------------------------------------------------
# CSV I/O


def canonical_header() -> list[str]:
    return (["case_id", "year", "outcome", "p90", "p50", "p10"]
            + list(IG_NAMES) + ["policy_area", "policy_domain"])


def parse_name_map(stream: TextIO) -> dict[str, str]:
    """Parse `source_name=canonical_name` lines for the adapter mode."""
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetError(f"name map line {lineno}: expected "
                               f"source=canonical, got {line!r}")
        src, dst = (part.strip() for part in line.split("=", 1))
        mapping[src] = dst
    return mapping


def _parse_optional_fraction(cell: str, row: int, col: str) -> float | None:
    if cell.strip() == "":
        return None
    try:
        v = float(cell)
    except ValueError:
        raise DatasetError(f"row {row}, column {col!r}: non-numeric value "
                           f"{cell!r}") from None
    if not (0.0 <= v <= 1.0):
        raise DatasetError(f"row {row}, column {col!r}: value {v} outside "
                           f"[0,1]")
    return v


def load_cases(source: TextIO | str,
               name_map: dict[str, str] | None = None) -> list[PolicyCase]:
    """Load and validate the canonical CSV; returns one PolicyCase per row.

    name_map optionally renames source columns to canonical names before
    validation (adapter mode for files with foreign headers).
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty input: no header row") from None
    if name_map:
        header = [name_map.get(h, h) for h in header]

    expected = canonical_header()
    if sorted(header) != sorted(expected):
        unknown = sorted(set(header) - set(expected))
        missing = sorted(set(expected) - set(header))
        parts = []
        if unknown:
            parts.append(f"unknown columns {unknown}")
        if missing:
            parts.append(f"missing columns {missing}")
        raise DatasetError("header mismatch: " + "; ".join(parts))
    pos = {name: header.index(name) for name in expected}

    cases: list[PolicyCase] = []
    seen_ids: set[str] = set()
    for rowno, row in enumerate(reader, start=2):
        if len(row) != len(expected):
            raise DatasetError(f"row {rowno}: expected {len(expected)} cells, "
                               f"got {len(row)}")
        case_id = row[pos["case_id"]]
        if case_id in seen_ids:
            raise DatasetError(f"row {rowno}: duplicate case_id {case_id!r}")
        seen_ids.add(case_id)
        try:
            year = int(row[pos["year"]])
        except ValueError:
            raise DatasetError(f"row {rowno}, column 'year': non-integer "
                               f"{row[pos['year']]!r}") from None
        try:
            outcome = int(row[pos["outcome"]])
        except ValueError:
            raise DatasetError(f"row {rowno}, column 'outcome': non-integer "
                               f"{row[pos['outcome']]!r}") from None

        alignments = []
        for name in IG_NAMES:
            cell = row[pos[name]]
            try:
                v = int(cell)
            except ValueError:
                raise DatasetError(f"row {rowno}, column {name!r}: "
                                   f"non-integer alignment {cell!r}") from None
            if v not in VALID_ALIGNMENTS:
                raise DatasetError(f"row {rowno}, column {name!r}: alignment "
                                   f"{v} outside {{-2..2}}")
            alignments.append(v)

        try:
            cases.append(PolicyCase(
                case_id=case_id,
                year=year,
                outcome=outcome,
                p90=_parse_optional_fraction(row[pos["p90"]], rowno, "p90"),
                p50=_parse_optional_fraction(row[pos["p50"]], rowno, "p50"),
                p10=_parse_optional_fraction(row[pos["p10"]], rowno, "p10"),
                ig_alignments=tuple(alignments),
                policy_area=row[pos["policy_area"]],
                policy_domain=row[pos["policy_domain"]],
            ))
        except DatasetError as e:
            raise DatasetError(f"row {rowno}: {e}") from None
    return cases


def dump_cases(cases: list[PolicyCase]) -> str:
    """Serialize cases back to canonical CSV (round-trips load_cases)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(canonical_header())
    for c in cases:
        def fmt(v):
            return "" if v is None else repr(v)
        writer.writerow([c.case_id, c.year, c.outcome,
                         fmt(c.p90), fmt(c.p50), fmt(c.p10)]
                        + list(c.ig_alignments)
                        + [c.policy_area, c.policy_domain])
    return out.getvalue()
