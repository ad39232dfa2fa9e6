import math

import pytest

from cxreval.erroranalysis import stratify_errors
from cxreval.fixtures import (
    AGREEMENT_ERROR_CELLS,
    ANNOTATOR_DISAGREEMENT_CELLS,
    ANNOTATORS,
    agreement_error_cohort,
    annotator_disagreement_cohort,
    labelling_time_annotations,
)
from cxreval.hierarchy import Branch, ClassLabel, ClassProbabilities, MULTICLASS
from cxreval.iov import (
    AgreementPattern,
    agreement_pattern,
    annotator_error_records,
    annotator_report,
    error_by_agreement,
    rating_table,
    time_by_agreement,
)
from cxreval.metrics import fleiss_kappa
from cxreval.records import AnnotationRecord, PredictionRecord

N = ClassLabel.NORMAL
C = ClassLabel.CLASSIC
I = ClassLabel.INDETERMINATE
O = ClassLabel.OTHER


def make_record(image, label, correct=True):
    # dominant mass on the true class, or on the opposite super-class when wrong
    if correct:
        dominant = label
    else:
        dominant = N if label in (C, I) else C
    p = [0.1, 0.1, 0.1, 0.1]
    p[dominant] = 0.7
    return PredictionRecord(
        image_id=image,
        patient_id=f"pat-{image}",
        probs=ClassProbabilities(tuple(p)),
        label=label,
        view="PA",
        pcr="UNK",
    )


def annotate(image, labels, durations=(None, None, None)):
    return [
        AnnotationRecord(image, annotator, label, duration)
        for annotator, label, duration in zip(ANNOTATORS, labels, durations)
    ]


class TestAgreementPattern:
    def test_full(self):
        assert agreement_pattern([C, C, C]) is AgreementPattern.FULL

    def test_partial(self):
        assert agreement_pattern([C, C, I]) is AgreementPattern.PARTIAL

    def test_none(self):
        assert agreement_pattern([N, C, O]) is AgreementPattern.NONE

    def test_wrong_arity(self):
        with pytest.raises(ValueError):
            agreement_pattern([C, C])

    def test_permutation_invariant(self):
        labels = [C, I, C]
        rotations = [[labels[i % 3] for i in range(start, start + 3)] for start in range(3)]
        assert len({agreement_pattern(r) for r in rotations}) == 1

    def test_tokens(self):
        assert AgreementPattern.FULL.token == "3"
        assert AgreementPattern.PARTIAL.token == "2:1"
        assert AgreementPattern.NONE.token == "1:1:1"


class TestErrorByAgreement:
    def test_errors_only_on_partial_items(self):
        records = [
            make_record("a", C, correct=True),
            make_record("b", C, correct=False),
            make_record("c", N, correct=True),
        ]
        annotations = (
            annotate("a", [C, C, C]) + annotate("b", [C, C, N]) + annotate("c", [N, N, N])
        )
        stats = error_by_agreement(records, annotations, Branch.SUGG)
        assert stats[AgreementPattern.FULL] == (0, 2, 0.0)
        assert stats[AgreementPattern.PARTIAL] == (1, 1, 1.0)

    def test_binary_task_has_no_none_bucket(self):
        records = [make_record("a", C), make_record("b", N)]
        annotations = annotate("a", [N, C, O]) + annotate("b", [N, C, O])
        stats = error_by_agreement(records, annotations, Branch.SUGG)
        assert AgreementPattern.NONE not in stats
        # (N, C, O) maps to suggestive answers (False, True, False): partial
        assert stats[AgreementPattern.PARTIAL].instances == 2

    def test_multiclass_buckets_match_published_rates(self):
        records, annotations = agreement_error_cohort()
        stats = error_by_agreement(records, annotations, MULTICLASS)
        by_bucket = {
            "full": AgreementPattern.FULL,
            "partial": AgreementPattern.PARTIAL,
            "none": AgreementPattern.NONE,
        }
        for bucket, errors, instances in AGREEMENT_ERROR_CELLS:
            stat = stats[by_bucket[bucket]]
            assert (stat.errors, stat.instances) == (errors, instances)
            assert stat.rate == errors / instances
        assert stats[AgreementPattern.FULL].rate == 0.303
        assert stats[AgreementPattern.PARTIAL].rate == 0.479
        assert stats[AgreementPattern.NONE].rate == 0.561

    def test_pattern_totals_cover_the_task(self):
        records, annotations = agreement_error_cohort()
        stats = error_by_agreement(records, annotations, MULTICLASS)
        assert sum(s.instances for s in stats.values()) == len(records)
        assert sum(s.errors for s in stats.values()) == 303 + 479 + 561

    def test_missing_annotations_excluded(self, caplog):
        records = [make_record("a", C), make_record("b", C)]
        annotations = annotate("a", [C, C, C]) + annotate("b", [C, C, C])[:2]
        with caplog.at_level("WARNING"):
            stats = error_by_agreement(records, annotations, Branch.SUGG)
        assert stats[AgreementPattern.FULL].instances == 1
        assert "excluded 1" in caplog.text


class TestAnnotatorReport:
    def test_perfect_annotator(self):
        records = [make_record(f"i{k}", label) for k, label in enumerate([N, C, I, O])]
        annotations = []
        for record in records:
            annotations.append(AnnotationRecord(record.image_id, "ann1", record.label))
        report = annotator_report(annotations, records, "ann1")
        assert report.multiclass_accuracy == 1.0
        for branch in Branch:
            assert report.branches[branch].accuracy == 1.0
        assert report.branches[Branch.SUGG].point == (0.0, 1.0, 4)

    def test_constant_annotator_accuracy_is_prevalence(self):
        labels = [N, N, N, C, I, O, O, O]
        records = [make_record(f"i{k}", label) for k, label in enumerate(labels)]
        annotations = [AnnotationRecord(r.image_id, "ann1", N) for r in records]
        report = annotator_report(annotations, records, "ann1")
        assert report.multiclass_accuracy == labels.count(N) / len(labels)

    def test_no_overlap_rejected(self):
        records = [make_record("a", C)]
        annotations = [AnnotationRecord("zz", "ann1", C)]
        with pytest.raises(ValueError):
            annotator_report(annotations, records, "ann1")

    def test_disagreement_cohort_totals(self):
        records, annotations = annotator_disagreement_cohort()
        report = annotator_report(annotations, records, ANNOTATORS[0])
        assert report.multiclass_n == 400
        assert report.multiclass_accuracy == 1.0 - 90 / 400


class TestAnnotatorErrorRecords:
    def test_stratified_disagreement_table(self):
        records, annotations = annotator_disagreement_cohort()
        error_records = annotator_error_records(records, annotations, ANNOTATORS[0], MULTICLASS)
        table = stratify_errors(error_records, "class", "view")
        for label, view, errors, instances in ANNOTATOR_DISAGREEMENT_CELLS:
            r = table.row_values.index(label.token)
            c = table.col_values.index(view)
            assert table.cell(r, c) == (errors, instances)
        assert table.col_total(table.col_values.index("PA")) == (16, 122)
        assert table.col_total(table.col_values.index("AP")) == (74, 278)
        assert table.grand_total() == (90, 400)


class TestRatingTable:
    def test_multiclass_perfect_agreement_kappa(self):
        records = [make_record(f"i{k}", label) for k, label in enumerate([N, C, I, O])]
        annotations = []
        for record in records:
            annotations.extend(annotate(record.image_id, [record.label] * 3))
        table = rating_table(records, annotations, MULTICLASS)
        assert table.shape == (4, 4)
        assert fleiss_kappa(table) == 1.0

    def test_incomplete_items_dropped(self):
        records = [make_record("a", C), make_record("b", C)]
        annotations = annotate("a", [C, C, C]) + annotate("b", [C, C, C])[:2]
        assert rating_table(records, annotations, MULTICLASS).shape == (1, 4)

    def test_branch_table_restricted_and_binary(self):
        records = [make_record("a", C), make_record("b", I), make_record("c", N)]
        annotations = (
            annotate("a", [C, I, C]) + annotate("b", [I, I, N]) + annotate("c", [N, N, N])
        )
        table = rating_table(records, annotations, Branch.CLASSIC_VS_INDET)
        assert table.shape == (2, 2)  # image c is outside the branch
        assert table.sum() == 6


class TestTimeByAgreement:
    def test_equal_durations_everywhere(self):
        records_labels = [[C, C, C], [C, C, N], [N, C, O]]
        annotations = []
        for k, labels in enumerate(records_labels):
            annotations.extend(annotate(f"i{k}", labels, durations=(12.0, 12.0, 12.0)))
        analysis = time_by_agreement(annotations)
        for pattern in AgreementPattern:
            summary = analysis.buckets[pattern]
            assert summary.n == 1
            assert summary.median == summary.mean == 12.0

    def test_threshold_boundary_is_strict(self):
        annotations = annotate("a", [C, C, C], durations=(49.9, 49.9, 49.9))
        annotations += annotate("b", [C, C, C], durations=(50.1, 50.1, 50.1))
        annotations += annotate("c", [N, N, N], durations=(50.0, 50.0, 50.0))
        analysis = time_by_agreement(annotations, exclusion_threshold=50.0)
        assert analysis.excluded_over_threshold == 1
        assert analysis.buckets[AgreementPattern.FULL].n == 2

    def test_partial_durations_averaged_over_recorded(self):
        annotations = annotate("a", [C, C, C], durations=(10.0, 20.0, None))
        annotations += annotate("b", [C, C, C], durations=(1.0, 1.0, 1.0))
        analysis = time_by_agreement(annotations)
        assert analysis.buckets[AgreementPattern.FULL].maximum == 15.0

    def test_fixture_exclusion_counts(self):
        annotations = labelling_time_annotations()
        analysis = time_by_agreement(annotations, exclusion_threshold=50.0)
        assert analysis.excluded_over_threshold == 11
        assert analysis.excluded_missing == 9
        retained = sum(analysis.buckets[p].n for p in AgreementPattern)
        assert retained == 380

    def test_quartiles_linear_interpolation(self):
        annotations = []
        for k, duration in enumerate([1.0, 2.0, 3.0, 4.0]):
            annotations.extend(annotate(f"i{k}", [C, C, C], durations=(duration,) * 3))
        summary = time_by_agreement(annotations).buckets[AgreementPattern.FULL]
        assert summary.q1 == 1.75
        assert summary.median == 2.5
        assert summary.q3 == 3.25
        assert math.isclose(summary.mean, 2.5)
