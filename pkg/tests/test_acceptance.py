"""Acceptance suite: one test per release criterion, each printing a PASS/FAIL
line. Tolerances are pinned here and nowhere else. Run with -s to see lines."""

import ast
import csv
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from playground import sheets
from playground.clustering import Linkage, _kmeanspp_init, _lloyd, agglomerative, kmeans, tfidf
from playground.codegen import (
    PlaceholderSpec,
    ScriptTemplate,
    ValueKind,
    extract_string_literals,
    get_template,
    render,
    statement_count,
)
from playground.domain import (
    ActionEvent,
    ActionStatus,
    AdapterSource,
    IllegalTransition,
    SheetRef,
    transition,
)
from playground.fewshot import FewShotDataSpec, FewShotRequest
from playground.metrics import accuracy, macro_f1, paired_bootstrap
from playground.service import PlaygroundService, ServiceConfig
from playground.sheets import MismatchError

from .conftest import write_rows
from .oracles import (
    as_partition,
    circle_points,
    confusion_macro_f1,
    optimal_kmeans_inertia,
)
from .test_fewshot import synthetic_rows


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL — {name}")
        raise
    print(f"ACCEPTANCE PASS — {name}")


@pytest.fixture
def fresh_service(tmp_path):
    svc = PlaygroundService(ServiceConfig(data_dir=tmp_path / "acc"))
    yield svc
    svc.storage.close()


def test_metrics_oracle_equivalence():
    with criterion("metrics oracle equivalence (1e-12, 100 instances, <1s)"):
        start = time.perf_counter()
        value = macro_f1(["A", "B", "B", "B"], ["A", "A", "B", "B"], ["A", "B"])
        assert abs(value - (2 / 3 + 4 / 5) / 2) < 1e-12

        rng = random.Random(424242)
        for _ in range(100):
            k = rng.randint(2, 4)
            n = rng.randint(1, 12)
            labels = [f"L{i}" for i in range(k)]
            gold = [rng.choice(labels) for _ in range(n)]
            preds = [rng.choice(labels) for _ in range(n)]
            assert abs(macro_f1(preds, gold, labels) - confusion_macro_f1(preds, gold, labels)) < 1e-12
            brute_acc = sum(1 for p, g in zip(preds, gold) if p == g) / n
            assert abs(accuracy(preds, gold) - brute_acc) < 1e-12
        assert time.perf_counter() - start < 1.0


def test_bootstrap_sanity():
    with criterion("bootstrap sanity (p=1 identical, p=1/(B+1) dominance, half/half, <2s)"):
        B = 10_000
        preds = ["A", "B"] * 30
        gold = ["A", "A"] * 30
        assert paired_bootstrap(preds, preds, gold, B=B, seed=1).p_value == 1.0

        dom = paired_bootstrap(["A"] * 100, ["B"] * 100, ["A"] * 100, B=B, seed=2)
        assert dom.p_value == pytest.approx(1 / (B + 1))
        assert dom.significant

        half_gold = ["x"] * 100
        half_a = ["x"] * 50 + ["y"] * 50
        half_b = ["y"] * 50 + ["x"] * 50
        result = paired_bootstrap(half_a, half_b, half_gold, B=B, seed=3)
        assert 0.45 <= result.p_value <= 0.55

        rng = random.Random(7)
        big_gold = [rng.choice("AB") for _ in range(1000)]
        big_a = [rng.choice("AB") for _ in range(1000)]
        big_b = [rng.choice("AB") for _ in range(1000)]
        start = time.perf_counter()
        paired_bootstrap(big_a, big_b, big_gold, B=B, seed=4)
        assert time.perf_counter() - start < 2.0


def test_tfidf_hand_oracle():
    with criterion("tf-idf two-document hand oracle (1e-9)"):
        import math

        matrix = tfidf(["cat sat", "cat ran"])
        idf_rare = math.log(3 / 2) + 1
        norm = math.sqrt(1 + idf_rare**2)
        cat_i = matrix.vocab.index("cat")
        sat_i = matrix.vocab.index("sat")
        assert abs(matrix.rows[0, cat_i] - 1 / norm) < 1e-9
        assert abs(matrix.rows[0, sat_i] - idf_rare / norm) < 1e-9


def test_kmeans_optimality_and_lloyd_monotonicity():
    with criterion("k-means: >=95% exhaustive-optimal over 50 trials, Lloyd monotone"):
        rng = np.random.default_rng(20240607)
        hits = 0
        trials = 50
        for _ in range(trials):
            n = int(rng.integers(4, 9))
            k = int(rng.integers(2, 4))
            points = rng.normal(size=(n, 2))
            seed = int(rng.integers(0, 2**31))

            # mirror the restart loop to audit every Lloyd history
            init_rng = np.random.default_rng(seed)
            best = None
            for _ in range(10):
                centers = _kmeanspp_init(points, k, init_rng)
                _, inertia, history = _lloyd(points, centers, max_iter=300, tol=1e-6)
                assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))
                if best is None or inertia < best - 1e-12:
                    best = inertia
            result = kmeans(points, k=k, seed=seed, restarts=10)
            assert result.inertia == pytest.approx(best, abs=1e-9)
            if result.inertia <= optimal_kmeans_inertia(points, k) + 1e-9:
                hits += 1
        assert hits / trials >= 0.95


def test_hierarchical_monotonicity_and_hand_case():
    with criterion("hierarchical: monotone merge heights x100 instances, 3-point hand case"):
        rng = np.random.default_rng(77)
        for linkage in (Linkage.SINGLE, Linkage.COMPLETE, Linkage.AVERAGE):
            for _ in range(100):
                n = int(rng.integers(3, 10))
                points = rng.normal(size=(n, 3))
                heights = agglomerative(points, k=1, linkage=linkage).merge_heights
                assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))

        result = agglomerative(circle_points([0.0, 1.0, 10.0]), k=2, linkage=Linkage.AVERAGE)
        assert as_partition(result.assignments) == {frozenset({0, 1}), frozenset({2})}


def test_codegen_injection_property():
    with criterion("codegen: 1000 fuzzed strings round-trip, statement count fixed"):
        simple = ScriptTemplate(
            template_id="probe",
            body="VALUE = {{value}}\nprint(VALUE)\n",
            schema=(PlaceholderSpec("value", ValueKind.STRING),),
        )
        predict = get_template("predict")
        base_simple = statement_count(render(simple, {"value": "x"}).source)
        benign = {
            "task_id": "sentiment",
            "dataset_id": "sst-2",
            "architecture": "houlsby",
            "base_model_id": "bert-base-uncased",
            "labels": ["positive", "negative"],
            "pair_task": False,
            "mock": True,
        }
        base_predict = statement_count(render(predict, benign).source)

        rng = random.Random(987654)
        pieces = ['"', "'", "\\", "\n", "\r", "\t", "{{", "}}", "{", "}", "a", "Z", "π", "0",
                  " ", "#", ";", "import os", "\\n", '\\"']
        for _ in range(1000):
            value = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 30)))
            rendered = render(simple, {"value": value})
            assert extract_string_literals(rendered.source) == [value]
            assert statement_count(rendered.source) == base_simple
            assert "{{" not in rendered.source

            fuzzed = dict(benign, task_id=value)
            rendered2 = render(predict, fuzzed)
            assert value in extract_string_literals(rendered2.source)
            assert statement_count(rendered2.source) == base_predict


def test_state_machine_property():
    with criterion("state machine: 10000 random sequences, one terminal, no illegal edge"):
        rng = random.Random(31337)
        events = [
            ActionEvent.submit(),
            ActionEvent.start(),
            ActionEvent.succeed("result"),
            ActionEvent.fail("error"),
        ]
        legal = {ActionStatus.QUEUED, ActionStatus.RUNNING, ActionStatus.COMPLETED, ActionStatus.FAILED}
        terminal = {ActionStatus.COMPLETED, ActionStatus.FAILED}
        for _ in range(10_000):
            status = ActionStatus.QUEUED
            arrivals = 0
            for _ in range(rng.randint(0, 8)):
                event = rng.choice(events)
                try:
                    status = transition(status, event)
                except IllegalTransition:
                    continue
                assert status in legal
                if status in terminal:
                    arrivals += 1
            assert arrivals <= 1
            if status in terminal:
                for event in events:
                    with pytest.raises(IllegalTransition):
                        transition(status, event)


def test_end_to_end_mock_pipeline(fresh_service, tmp_path):
    with criterion("end-to-end mock pipeline: 50 rows -> predictions + full report, <5s"):
        start = time.perf_counter()
        rows = [["text", "label"]]
        rng = random.Random(5)
        positive_texts = ["I love this great movie", "wonderful happy excellent day"]
        negative_texts = ["terrible awful film", "horrible boring mess"]
        for i in range(50):
            positive = i < 26
            text = rng.choice(positive_texts if positive else negative_texts)
            rows.append([f"{text} #{i}", "positive" if positive else "negative"])
        path = tmp_path / "e2e.csv"
        write_rows(path, rows)

        user = fresh_service.authenticate("acceptance")
        project = fresh_service.create_project(
            user.id, "e2e", SheetRef(backend="csv_file", locator=str(path))
        )
        action = fresh_service.create_action(
            user.id,
            project.id,
            {
                "name": "predict",
                "kind": "Prediction",
                "target_column": "pred",
                "params": {"task_id": "sentiment", "text_column": "text", "gold_column": "label"},
            },
        )
        fresh_service.execute_action(user.id, action.id)
        final = fresh_service.wait_for_action(user.id, action.id, timeout=5)
        assert final.status is ActionStatus.COMPLETED

        table = sheets.load_table(project.sheet_ref)
        assert "pred" in table.columns
        assert all(v in ("positive", "negative") for v in table.column_values("pred"))

        report = final.result
        assert report.n == 50
        assert 0.0 <= report.accuracy <= 1.0
        assert 0.0 <= report.macro_f1 <= 1.0
        assert report.majority_baseline.accuracy == pytest.approx(26 / 50)
        k, n, draws = 2, 50, 1000
        sigma = (0.25 / (n * draws)) ** 0.5
        assert abs(report.random_baseline.accuracy - 1 / k) <= 3 * sigma
        assert time.perf_counter() - start < 5.0


def test_fewshot_monotonicity_and_zero_shot_identity(fresh_service, tmp_path):
    with criterion("few-shot: mean acc(100) >= mean acc(5), zero-shot row == standalone report"):
        train_path = tmp_path / "fs_train.csv"
        test_path = tmp_path / "fs_test.csv"
        write_rows(train_path, synthetic_rows(150, seed=11))
        write_rows(test_path, synthetic_rows(40, seed=21))

        user = fresh_service.authenticate("acceptance")
        project = fresh_service.create_project(
            user.id, "fewshot", SheetRef(backend="csv_file", locator=str(test_path))
        )
        request = FewShotRequest(
            task_id="sentiment",
            train=FewShotDataSpec(
                text_column="text",
                gold_column="label",
                sheet_ref=SheetRef(backend="csv_file", locator=str(train_path)),
            ),
            test=FewShotDataSpec(text_column="text", gold_column="label"),
            sizes=(5, 100),
            repeats=3,
            seed=0,
        )
        run = fresh_service.run_fewshot(user.id, project.id, request)
        by_size = {s.size: s for s in run.summary}
        assert by_size[100].mean_accuracy >= by_size[5].mean_accuracy
        assert by_size[5].std_accuracy >= 0.0

        standalone = fresh_service.create_action(
            user.id,
            project.id,
            {
                "name": "zero-shot standalone",
                "kind": "Prediction",
                "target_column": "zs_pred",
                "params": {"task_id": "sentiment", "text_column": "text", "gold_column": "label"},
            },
        )
        fresh_service.execute_action(user.id, standalone.id)
        final = fresh_service.wait_for_action(user.id, standalone.id, timeout=10)
        assert final.result.to_dict() == run.zero_shot.to_dict()


def test_label_mismatch_exact_indices(fresh_service, tmp_path):
    with criterion("label mismatch: exact 1-based row indices reported"):
        path = tmp_path / "mismatch.csv"
        write_rows(
            path,
            [
                ["text", "label"],
                ["row one", "positive"],
                ["row two", "neutral"],
                ["row three", "negative"],
                ["row four", "NOPE"],
                ["row five", "positive"],
            ],
        )
        user = fresh_service.authenticate("acceptance")
        project = fresh_service.create_project(
            user.id, "mismatch", SheetRef(backend="csv_file", locator=str(path))
        )
        with pytest.raises(MismatchError) as err:
            fresh_service.create_action(
                user.id,
                project.id,
                {
                    "name": "train",
                    "kind": "Training",
                    "params": {
                        "task_id": "sentiment",
                        "text_column": "text",
                        "gold_column": "label",
                    },
                },
            )
        assert err.value.indices == [2, 4]


def test_artifact_round_trip(fresh_service, tmp_path):
    with criterion("artifact round-trip: train -> zip -> register -> predict with upload"):
        from .conftest import make_sentiment_csv

        ref = make_sentiment_csv(tmp_path / "art.csv", n=16)
        user = fresh_service.authenticate("acceptance")
        project = fresh_service.create_project(user.id, "artifacts", ref)
        train = fresh_service.create_action(
            user.id,
            project.id,
            {
                "name": "train",
                "kind": "Training",
                "params": {"task_id": "sentiment", "text_column": "text", "gold_column": "label"},
            },
        )
        fresh_service.execute_action(user.id, train.id)
        done = fresh_service.wait_for_action(user.id, train.id, timeout=10)
        assert done.status is ActionStatus.COMPLETED

        artifact = fresh_service.collect_artifact(user.id, train.id)
        with open(artifact.path, "rb") as fh:
            archive = fh.read()
        descriptor = fresh_service.upload_adapter(
            user.id, project.id, archive, {"task_id": "sentiment", "dataset_id": "round-trip"}
        )
        assert descriptor.source is AdapterSource.USER_UPLOAD

        predict = fresh_service.create_action(
            user.id,
            project.id,
            {
                "name": "predict via upload",
                "kind": "Prediction",
                "target_column": "up_pred",
                "params": {
                    "task_id": "sentiment",
                    "dataset_id": "round-trip",
                    "text_column": "text",
                    "gold_column": "label",
                },
            },
        )
        fresh_service.execute_action(user.id, predict.id)
        final = fresh_service.wait_for_action(user.id, predict.id, timeout=10)
        assert final.status is ActionStatus.COMPLETED
        assert final.result.accuracy is not None
