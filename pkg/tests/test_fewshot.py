import random

import pytest

from playground.domain import ActionStatus, InvalidValue, SheetRef
from playground.fewshot import FewShotDataSpec, FewShotRequest, derive_seed
from playground.metrics import MetricName
from playground.service import InsufficientTrainingData

from .conftest import write_rows

# Wide disjoint vocabularies: separable by construction, but 5 samples miss
# most of the vocabulary while 100 nearly cover it.
POS_POOL = [f"brightword{i}" for i in range(30)]
NEG_POOL = [f"darkword{i}" for i in range(30)]


def synthetic_rows(n, seed):
    rng = random.Random(seed)
    rows = [["text", "label"]]
    for i in range(n):
        positive = i % 2 == 0
        pool = POS_POOL if positive else NEG_POOL
        text = " ".join(rng.choice(pool) for _ in range(3))
        rows.append([text, "positive" if positive else "negative"])
    return rows


@pytest.fixture
def fewshot_env(service, tmp_path):
    train_path = tmp_path / "train.csv"
    test_path = tmp_path / "test.csv"
    write_rows(train_path, synthetic_rows(150, seed=10))
    write_rows(test_path, synthetic_rows(40, seed=20))
    user = service.authenticate("researcher")
    project = service.create_project(
        user.id, "fewshot", SheetRef(backend="csv_file", locator=str(test_path))
    )
    train_ref = SheetRef(backend="csv_file", locator=str(train_path))
    return user, project, train_ref


def make_request(train_ref, sizes=(0, 5, 20), repeats=2, seed=0, prefix="fs"):
    return FewShotRequest(
        task_id="sentiment",
        train=FewShotDataSpec(text_column="text", gold_column="label", sheet_ref=train_ref),
        test=FewShotDataSpec(text_column="text", gold_column="label"),
        sizes=tuple(sizes),
        repeats=repeats,
        seed=seed,
        target_prefix=prefix,
        bootstrap_resamples=500,
    )


class TestFewShotProtocol:
    def test_protocol_shape(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run = service.run_fewshot(user.id, project.id, make_request(train_ref))
        assert run.sizes == (0, 5, 20)
        assert run.repeats == 2
        # one zero-shot cell plus repeats per positive size
        assert len(run.cells) == 1 + 2 * 2
        assert [s.size for s in run.summary] == [0, 5, 20]
        zero_cells = [c for c in run.cells if c.size == 0]
        assert len(zero_cells) == 1
        assert zero_cells[0].training_action_id is None
        for cell in run.cells:
            if cell.size > 0:
                assert cell.training_action_id is not None

    def test_size_zero_runs_once_even_when_absent(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run = service.run_fewshot(
            user.id, project.id, make_request(train_ref, sizes=(5,), repeats=1, prefix="nz")
        )
        assert all(c.size > 0 for c in run.cells)
        assert run.zero_shot is not None
        assert [s.size for s in run.summary] == [5]
        assert run.summary[0].p_value is not None

    def test_more_data_does_not_hurt(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run = service.run_fewshot(
            user.id, project.id, make_request(train_ref, sizes=(5, 100), repeats=3, prefix="mono")
        )
        by_size = {s.size: s for s in run.summary}
        assert by_size[100].mean_accuracy >= by_size[5].mean_accuracy
        assert by_size[100].mean_accuracy >= 0.95

    def test_zero_shot_equals_standalone_prediction(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run = service.run_fewshot(user.id, project.id, make_request(train_ref, prefix="eq"))
        standalone = service.create_action(
            user.id,
            project.id,
            {
                "name": "plain prediction",
                "kind": "Prediction",
                "target_column": "plain_pred",
                "params": {
                    "task_id": "sentiment",
                    "text_column": "text",
                    "gold_column": "label",
                },
            },
        )
        service.execute_action(user.id, standalone.id)
        final = service.wait_for_action(user.id, standalone.id, timeout=10)
        assert final.status is ActionStatus.COMPLETED
        assert final.result.to_dict() == run.zero_shot.to_dict()

    def test_deterministic_under_seed(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run1 = service.run_fewshot(user.id, project.id, make_request(train_ref, prefix="d1"))
        run2 = service.run_fewshot(user.id, project.id, make_request(train_ref, prefix="d1"))

        def comparable(run):
            d = run.to_dict()
            for cell in d["cells"]:
                cell.pop("training_action_id")
                cell.pop("prediction_action_id")
            return d

        assert comparable(run1) == comparable(run2)

    def test_insufficient_training_data(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        with pytest.raises(InsufficientTrainingData):
            service.run_fewshot(
                user.id, project.id, make_request(train_ref, sizes=(0, 10_000))
            )

    def test_sizes_must_increase(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        with pytest.raises(InvalidValue):
            service.run_fewshot(
                user.id, project.id, make_request(train_ref, sizes=(5, 5))
            )

    def test_actions_persisted(self, service, fewshot_env):
        user, project, train_ref = fewshot_env
        run = service.run_fewshot(
            user.id, project.id, make_request(train_ref, sizes=(5,), repeats=1, prefix="persist")
        )
        cell = run.cells[0]
        train_action = service.get_action(user.id, cell.training_action_id)
        predict_action = service.get_action(user.id, cell.prediction_action_id)
        assert train_action.status is ActionStatus.COMPLETED
        assert predict_action.status is ActionStatus.COMPLETED
        assert predict_action.result.to_dict() == cell.report.to_dict()


class TestSeedDerivation:
    def test_distinct_per_cell(self):
        seeds = {derive_seed(0, s, r) for s in (5, 10, 100) for r in (1, 2, 3)}
        assert len(seeds) == 9

    def test_stable(self):
        assert derive_seed(7, 50, 2) == derive_seed(7, 50, 2)
