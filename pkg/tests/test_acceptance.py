"""Acceptance suite: one test per release criterion.

Each test prints a [PASS] line (visible with pytest -s or -rA) and enforces
its stated tolerance and runtime budget.
"""

import json
import random
import time

from cxreval.cli import main
from cxreval.erroranalysis import (
    AttributeSchema,
    build_error_tree,
    error_records_from_predictions,
    stratify_errors,
)
from cxreval.fixtures import (
    ANNOTATOR_DISAGREEMENT_CELLS,
    ANNOTATORS,
    CLASS_VIEW_ERROR_CELLS,
    agreement_error_cohort,
    annotator_disagreement_cohort,
    class_view_error_cohort,
    view_pcr_error_cohort,
)
from cxreval.folds import stratified_group_kfold
from cxreval.hierarchy import (
    Branch,
    ClassLabel,
    ClassProbabilities,
    aggregate,
    reconstruct,
)
from cxreval.io import (
    annotations_csv,
    atomic_write,
    fold_assignment_csv,
    predictions_csv,
)
from cxreval.iov import annotator_error_records
from cxreval.metrics import ScoredSample, branch_report, fleiss_kappa, roc_curve
from cxreval.synth import generate, generate_planted

from oracles import fleiss_kappa_bruteforce, roc_auc_bruteforce
from test_metrics import random_table


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def report(criterion, detail):
    print(f"[PASS] {criterion}: {detail}")


def test_criterion_1_error_tree_reconstruction():
    """Synthetic cohort + depth-2 tree reproduce every published node and
    the exact hot set, in under a second."""
    with Stopwatch() as watch:
        records = generate(view_pcr_error_cohort())
        tree = build_error_tree(
            error_records_from_predictions(records, Branch.SUGG, threshold=0.5),
            max_depth=2,
            min_leaf=20,
        )
    assert (tree.errors, tree.instances) == (80, 400)
    assert tree.error_rate == 0.2
    assert tree.split_attribute == "view"
    assert not tree.hot
    expected = {
        ("PA",): (18, 122, False),
        ("AP",): (62, 278, True),
        ("AP", "NEG"): (19, 75, True),
        ("AP", "UNK"): (14, 48, True),
        ("AP", "POS"): (29, 155, False),
        ("PA", "NEG"): (4, 22, False),
        ("PA", "UNK"): (8, 70, False),
        ("PA", "POS"): (6, 30, False),
    }
    seen = {}

    def walk(node, path):
        for value, child in node.children.items():
            seen[path + (value,)] = (child.errors, child.instances, child.hot)
            walk(child, path + (value,))

    walk(tree, ())
    assert seen == expected
    hot = {path for path, (_, _, flag) in seen.items() if flag}
    assert hot == {("AP",), ("AP", "NEG"), ("AP", "UNK")}
    assert watch.elapsed < 1.0
    report("criterion 1", f"error tree integer-exact, hot set {sorted(hot)}, {watch.elapsed:.3f}s")


def test_criterion_2_stratified_table_reconstruction():
    """Class-by-view tables (model errors and annotator disagreements)
    reproduce every cell and marginal integer-exactly, in under a second."""
    with Stopwatch() as watch:
        model_records = error_records_from_predictions(
            generate(class_view_error_cohort()), Branch.SUGG, threshold=0.5
        )
        model_table = stratify_errors(model_records, "class", "view")
        references, annotations = annotator_disagreement_cohort()
        annotator_table = stratify_errors(
            annotator_error_records(references, annotations, ANNOTATORS[0]), "class", "view"
        )
    for table, cells, totals in (
        (model_table, CLASS_VIEW_ERROR_CELLS, ((18, 122), (62, 278), (80, 400))),
        (annotator_table, ANNOTATOR_DISAGREEMENT_CELLS, ((16, 122), (74, 278), (90, 400))),
    ):
        for label, view, errors, instances in cells:
            r = table.row_values.index(label.token)
            c = table.col_values.index(view)
            assert table.cell(r, c) == (errors, instances)
        row_index = {label.token: i for i, label in enumerate(ClassLabel)}
        for label in ClassLabel:
            expected_row = tuple(
                map(sum, zip(*[(e, n) for lab, _, e, n in cells if lab is label]))
            )
            assert table.row_total(row_index[label.token]) == expected_row
        assert table.col_total(table.col_values.index("PA")) == totals[0]
        assert table.col_total(table.col_values.index("AP")) == totals[1]
        assert table.grand_total() == totals[2]
    assert watch.elapsed < 1.0
    report("criterion 2", f"both stratified tables integer-exact, {watch.elapsed:.3f}s")


def test_criterion_3_branch_probability_round_trip():
    """10,000 random probability vectors survive aggregate/reconstruct
    within 1e-12; one-hot degenerate conditionals are exact; under a
    second."""
    epsilon = 1e-12
    rng = random.Random(123)
    with Stopwatch() as watch:
        checked = 0
        for _ in range(10000):
            raw = [rng.random() + 1e-9 for _ in range(4)]
            total = sum(raw)
            probs = ClassProbabilities(tuple(x / total for x in raw))
            bp = aggregate(probs, epsilon)
            if bp.p_sugg < epsilon or 1.0 - bp.p_sugg < epsilon:
                continue
            rebuilt = reconstruct(bp)
            for got, want in zip(rebuilt.p, probs.p):
                assert abs(got - want) <= 1e-12
            checked += 1
        assert checked > 9900
        one_hot_cases = [
            ((0.0, 1.0, 0.0, 0.0), 1.0, 1.0, None),
            ((0.0, 0.0, 1.0, 0.0), 1.0, 0.0, None),
            ((1.0, 0.0, 0.0, 0.0), 0.0, None, 0.0),
            ((0.0, 0.0, 0.0, 1.0), 0.0, None, 1.0),
        ]
        for vector, p_sugg, p_classic, p_other in one_hot_cases:
            bp = aggregate(ClassProbabilities(vector), epsilon)
            assert bp.p_sugg == p_sugg
            assert bp.p_classic_given_sugg == p_classic
            assert bp.p_other_given_not_sugg == p_other
    assert watch.elapsed < 1.0
    report("criterion 3", f"{checked} round trips within 1e-12, one-hot exact, {watch.elapsed:.3f}s")


def test_criterion_4_roc_auc_equals_pair_counting():
    """1,000 random small instances: sweep AUC equals brute-force pair
    counting with 0.5 tie credit, exactly; under five seconds."""
    rng = random.Random(456)
    grid = [round(0.1 * i, 1) for i in range(11)]
    with Stopwatch() as watch:
        for _ in range(1000):
            while True:
                n = rng.randint(2, 12)
                truths = [rng.random() < 0.5 for _ in range(n)]
                if any(truths) and not all(truths):
                    break
            scores = [rng.choice(grid) for _ in range(n)]
            samples = [ScoredSample(s, t) for s, t in zip(scores, truths)]
            assert roc_curve(samples).auc == roc_auc_bruteforce(samples)
    assert watch.elapsed < 5.0
    report("criterion 4", f"1000 instances exactly equal to pair counting, {watch.elapsed:.3f}s")


def test_criterion_5_fleiss_kappa_oracle():
    """Perfect tables give 1; the worked 3x3 gives 0 within 1e-12; 1,000
    random tables match an independent brute force within 1e-12; huge
    uniform tables sit within 0.05 of zero."""
    assert fleiss_kappa([[3, 0], [0, 3], [3, 0], [0, 3]]) == 1.0
    assert fleiss_kappa([[2, 0], [0, 2]]) == 1.0
    assert abs(fleiss_kappa([[3, 0], [2, 1], [1, 2]])) <= 1e-12

    rng = random.Random(789)
    checked = 0
    while checked < 1000:
        table = random_table(rng)
        totals = [sum(row[j] for row in table) for j in range(len(table[0]))]
        if max(totals) == sum(totals):
            continue
        assert abs(fleiss_kappa(table) - fleiss_kappa_bruteforce(table)) <= 1e-12
        checked += 1

    for seed, raters, cats in ((1, 3, 4), (2, 4, 2), (3, 5, 3)):
        table = random_table(random.Random(seed), n_items=10000, n_raters=raters, n_cats=cats)
        assert abs(fleiss_kappa(table)) <= 0.05
    report("criterion 5", "perfect/worked/1000-random/uniform kappa checks all within bounds")


def test_criterion_6_planted_split_recovery():
    """With error rates 0.4/0.1 planted on one attribute and two noise
    attributes, the root split finds the planted attribute in >= 95 of 100
    seeds at N=2000, within 30 seconds."""
    schema = AttributeSchema(
        (
            ("noise1", ("a", "b")),
            ("planted", ("hi", "lo")),
            ("noise2", ("p", "q", "r")),
        )
    )
    with Stopwatch() as watch:
        hits = 0
        for seed in range(100):
            records = generate_planted(schema, 2000, "planted", {"hi": 0.4, "lo": 0.1}, seed)
            tree = build_error_tree(records, schema, max_depth=2, min_leaf=20)
            hits += tree.split_attribute == "planted"
    assert hits >= 95
    assert watch.elapsed < 30.0
    report("criterion 6", f"planted attribute recovered in {hits}/100 seeds, {watch.elapsed:.3f}s")


def test_criterion_7_grouped_split_suite():
    """1,000 randomized cohorts: patients never straddle folds, per-fold
    class deviation stays within one patient group, and assignments
    serialize byte-identically under a fixed seed."""
    from test_folds import class_deviation_bound_holds, check_partition, random_cohort

    rng = random.Random(1010)
    for trial in range(1000):
        records = random_cohort(rng, rng.randint(6, 30), max_images=5)
        patients = {r.patient_id for r in records}
        k = rng.randint(2, min(5, len(patients)))
        seed = rng.randint(0, 10**6)
        assignment = stratified_group_kfold(records, k, seed)
        check_partition(records, assignment, k)
        assert class_deviation_bound_holds(records, assignment, k)
        if trial % 50 == 0:
            again = stratified_group_kfold(list(reversed(records)), k, seed)
            assert fold_assignment_csv(again) == fold_assignment_csv(assignment)
    report("criterion 7", "1000 grouped splits: integrity, deviation bound, byte-stable")


def test_criterion_8_suggestive_accuracy_cross_check():
    """The metric pipeline reports the published suggestive-task accuracy
    0.800 on the reference cohort, exactly."""
    records = generate(view_pcr_error_cohort())
    summary = branch_report(records, Branch.SUGG, threshold=0.5)
    assert summary.n == 400
    assert summary.accuracy == 0.800
    report("criterion 8", "suggestive accuracy 0.800 exact on 400 records")


def test_criterion_9_cli_determinism(tmp_path):
    """Every subcommand, run twice on identical inputs, emits byte-identical
    output files (the pipeline is single-threaded by construction)."""
    predictions = tmp_path / "predictions.csv"
    atomic_write(predictions, predictions_csv(generate(view_pcr_error_cohort())))
    iov_records, iov_annotations = agreement_error_cohort()
    iov_predictions = tmp_path / "iov_predictions.csv"
    annotations = tmp_path / "annotations.csv"
    atomic_write(iov_predictions, predictions_csv(iov_records))
    atomic_write(annotations, annotations_csv(iov_annotations))
    multifold = tmp_path / "multifold.csv"
    fold_rows = ["image_id,patient_id,fold,p_normal,p_classic,p_indet,p_other,label,view,pcr"]
    for fold in range(3):
        fold_rows.append(f"a,p1,{fold},0.6,0.2,0.1,0.1,NORMAL,PA,POS")
        fold_rows.append(f"b,p2,{fold},0.1,0.6,0.2,0.1,CLASSIC,AP,NEG")
    atomic_write(multifold, "\n".join(fold_rows) + "\n")
    spec = tmp_path / "spec.json"
    atomic_write(
        spec,
        json.dumps(
            {
                "seed": 9,
                "task": "sugg",
                "strata": [
                    {
                        "attributes": {"view": "PA", "pcr": "POS"},
                        "label": "CLASSIC",
                        "instances": 10,
                        "errors": 2,
                    }
                ],
            }
        ),
    )

    invocations = [
        ("aggregate", "--predictions", str(predictions)),
        ("metrics", "--predictions", str(predictions), "--format", "json"),
        (
            "metrics",
            "--predictions",
            str(iov_predictions),
            "--annotations",
            str(annotations),
            "--format",
            "md",
        ),
        ("error-tree", "--predictions", str(predictions), "--format", "dot"),
        ("error-tree", "--predictions", str(predictions), "--format", "json"),
        ("stratify", "--predictions", str(predictions), "--rows", "class", "--cols", "view", "--format", "csv"),
        ("iov", "--predictions", str(iov_predictions), "--annotations", str(annotations)),
        ("split", "--predictions", str(predictions), "--k", "5", "--seed", "11"),
        ("ensemble", "--predictions", str(multifold)),
        ("synth", "--spec", str(spec)),
        ("synth", "--fixture", "view-pcr"),
    ]
    for index, argv in enumerate(invocations):
        first = tmp_path / f"out-{index}-a"
        second = tmp_path / f"out-{index}-b"
        assert main(list(argv) + ["-o", str(first)]) == 0
        assert main(list(argv) + ["-o", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes(), argv[0]
    report("criterion 9", f"{len(invocations)} CLI invocations byte-identical across reruns")
