import pytest

from playground.clustering import ClusterResult
from playground.domain import (
    Action,
    ActionKind,
    ActionStatus,
    AdapterDescriptor,
    Architecture,
    ClusterAlgorithm,
    ClusteringParams,
    HyperParams,
    PredictionParams,
    Project,
    Representation,
    SheetRef,
    TrainingParams,
    new_id,
    utcnow,
)
from playground.executor import ArtifactKind, ArtifactRef, JobRecord
from playground.metrics import build_report
from playground.storage import Storage, result_from_json, result_to_json

ADAPTER = AdapterDescriptor(
    task_id="sentiment",
    dataset_id="imdb",
    architecture=Architecture.PFEIFFER,
    base_model_id="distilbert-base-uncased",
)


def make_project(owner="u1", name="demo"):
    return Project(
        id=new_id(),
        name=name,
        sheet_ref=SheetRef(backend="csv_file", locator="/tmp/x.csv", worksheet=None),
        owner_id=owner,
        created_at=utcnow(),
    )


def make_action(project_id, status=ActionStatus.QUEUED, result=None, kind=ActionKind.PREDICTION):
    if kind is ActionKind.PREDICTION:
        params = PredictionParams(
            task_id="sentiment", adapter=ADAPTER, text_column="text", gold_column="label"
        )
    elif kind is ActionKind.TRAINING:
        params = TrainingParams(
            task_id="sentiment",
            adapter=ADAPTER,
            text_column="text",
            gold_column="label",
            hyperparams=HyperParams(epochs=5, seed=2),
        )
    else:
        params = ClusteringParams(
            algorithm=ClusterAlgorithm.KMEANS,
            representation=Representation.TFIDF,
            k=3,
            text_column="text",
        )
    action = Action(
        id=new_id(),
        project_id=project_id,
        name="a",
        kind=kind,
        params=params,
        target_column="pred",
        status=status,
        result=result,
    )
    if status is ActionStatus.FAILED:
        action.error = "boom"
    return action


class TestUsersAndProjects:
    def test_user_round_trip(self, tmp_path):
        store = Storage(tmp_path / "db.sqlite")
        store.create_user("u1", "hash1", utcnow())
        assert store.user_by_token_hash("hash1") == "u1"
        assert store.user_by_token_hash("other") is None

    def test_duplicate_token_hash_rejected(self, tmp_path):
        store = Storage(tmp_path / "db.sqlite")
        store.create_user("u1", "hash1", utcnow())
        with pytest.raises(Exception):
            store.create_user("u2", "hash1", utcnow())

    def test_project_round_trip(self, tmp_path):
        store = Storage(tmp_path / "db.sqlite")
        store.create_user("u1", "h", utcnow())
        project = make_project()
        store.save_project(project)
        assert store.project(project.id) == project
        assert store.projects_for("u1") == [project]
        assert store.project_name_taken("u1", "demo")
        assert not store.project_name_taken("u1", "other")


class TestActionPersistence:
    @pytest.mark.parametrize("kind", list(ActionKind))
    def test_action_round_trip(self, tmp_path, kind):
        store = Storage(tmp_path / "db.sqlite")
        project = make_project()
        store.save_project(project)
        action = make_action(project.id, kind=kind)
        store.save_action(action)
        loaded = store.action(action.id)
        assert loaded == action

    def test_results_round_trip(self, tmp_path):
        store = Storage(tmp_path / "db.sqlite")
        project = make_project()
        store.save_project(project)

        report = build_report(["positive", "negative"], ["positive", "positive"],
                              ["positive", "negative"], seed=0)
        cluster = ClusterResult(
            algorithm=ClusterAlgorithm.KMEANS, k=2, assignments=[0, 1], inertia=0.5,
            params={"seed": 1},
        )
        artifact = ArtifactRef(kind=ArtifactKind.TRAINED_ADAPTER_ZIP, path="/tmp/a.zip", size_bytes=10)
        for result, kind in [
            (report, ActionKind.PREDICTION),
            (cluster, ActionKind.CLUSTERING),
            (artifact, ActionKind.TRAINING),
        ]:
            action = make_action(project.id, status=ActionStatus.QUEUED, kind=kind)
            action.status = ActionStatus.COMPLETED
            action.result = result
            store.save_action(action)
            loaded = store.action(action.id)
            assert result_to_json(loaded.result) == result_to_json(result)

    def test_restart_reload_identical_and_orphans_failed(self, tmp_path):
        db = tmp_path / "db.sqlite"
        store = Storage(db)
        project = make_project()
        store.save_project(project)
        queued = make_action(project.id, status=ActionStatus.QUEUED)
        failed = make_action(project.id, status=ActionStatus.FAILED)
        running = make_action(project.id, status=ActionStatus.QUEUED)
        running.status = ActionStatus.RUNNING
        for a in (queued, failed, running):
            store.save_action(a)
        store.close()

        reopened = Storage(db)
        assert reopened.action(queued.id) == queued
        assert reopened.action(failed.id) == failed
        orphan = reopened.action(running.id)
        assert orphan.status is ActionStatus.FAILED
        assert orphan.error == "orphaned"

    def test_job_and_artifact_rows(self, tmp_path):
        store = Storage(tmp_path / "db.sqlite")
        project = make_project()
        store.save_project(project)
        action = make_action(project.id, kind=ActionKind.TRAINING)
        store.save_action(action)
        job = JobRecord(job_id="j1", action_id=action.id, backend="mock", submitted_at=utcnow())
        store.save_job(job)
        ref = ArtifactRef(kind=ArtifactKind.TRAINED_ADAPTER_ZIP, path="/tmp/z.zip", size_bytes=3)
        store.save_artifact("art1", action.id, ref)
        assert store.artifact_for_action(action.id) == ref


class TestResultJson:
    def test_none_round_trip(self):
        assert result_to_json(None) is None
        assert result_from_json(None) is None

    def test_unknown_type_rejected(self):
        with pytest.raises(Exception):
            result_to_json(object())
