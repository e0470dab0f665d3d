import io
import json
import random
import zipfile

import pytest

from playground.domain import Architecture, UnknownTask
from playground.hub import (
    BadArchive,
    DanglingTaskReference,
    HubRegistry,
    ManifestMissing,
    SchemaError,
    TaskMismatch,
    Unreachable,
    default_index,
    list_adapters,
    list_tasks,
    load_index,
    parse_index,
    serialize_index,
    sync_index,
)

SENTIMENT_LABELS = [
    {"name": "positive", "value": "positive"},
    {"name": "negative", "value": "negative"},
]


def make_zip(manifest=None, extra=None):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        if manifest is not None:
            zf.writestr("adapter_manifest.json", json.dumps(manifest))
        if extra:
            for name, data in extra.items():
                zf.writestr(name, data)
    return buf.getvalue()


def sentiment_manifest(task_id="sentiment"):
    return {
        "task_id": task_id,
        "label_schema": SENTIMENT_LABELS,
        "base_model_id": "bert-base-uncased",
        "architecture": "houlsby",
    }


class TestDefaultIndex:
    def test_counts(self):
        index = default_index()
        assert len(index.tasks) == 2
        assert len(index.adapters) == 5

    def test_list_tasks_sorted_and_filtered(self):
        index = default_index()
        tasks = list_tasks(index)
        assert [t.task_id for t in tasks] == ["sentiment", "sts"]

    def test_sentiment_adapters_include_sst2_houlsby(self):
        entries = {(a.dataset_id, a.architecture.value, a.base_model_id)
                   for a in list_adapters(default_index(), "sentiment")}
        assert ("sst-2", "houlsby", "bert-base-uncased") in entries
        assert ("imdb", "pfeiffer", "distilbert-base-uncased") in entries
        assert ("rt", "pfeiffer", "distilbert-base-uncased") in entries

    def test_sts_adapters(self):
        entries = {(a.dataset_id, a.architecture.value, a.base_model_id)
                   for a in list_adapters(default_index(), "sts")}
        assert ("mrpc", "houlsby", "bert-base-uncased") in entries
        assert ("qqp", "houlsby", "bert-base-uncased") in entries


class TestLoadIndex:
    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_index(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(Unreachable):
            load_index(tmp_path / "absent.json")

    def test_dangling_adapter_task(self):
        data = serialize_index(default_index())
        data["adapters"].append(
            {
                "task_id": "ghost",
                "dataset_id": "x",
                "architecture": "pfeiffer",
                "base_model_id": "m",
            }
        )
        with pytest.raises(DanglingTaskReference):
            parse_index(data)

    def test_duplicate_adapter_tuple(self):
        data = serialize_index(default_index())
        data["adapters"].append(dict(data["adapters"][0]))
        with pytest.raises(SchemaError):
            parse_index(data)

    def test_dangling_filter_entry(self):
        data = serialize_index(default_index())
        data["supported_task_filter"].append("ghost")
        with pytest.raises(DanglingTaskReference):
            parse_index(data)

    def test_bad_architecture(self):
        data = serialize_index(default_index())
        data["adapters"][0]["architecture"] = "bottleneck"
        with pytest.raises(SchemaError) as err:
            parse_index(data)
        assert "architecture" in err.value.path

    def test_serialize_parse_identity(self):
        index = default_index()
        assert parse_index(serialize_index(index)) == index

    def test_listing_is_insertion_order_independent(self):
        data = serialize_index(default_index())
        rng = random.Random(4)
        baseline_tasks = [t.task_id for t in list_tasks(parse_index(data))]
        baseline_adapters = [a.sort_key for a in list_adapters(parse_index(data), "sentiment")]
        for _ in range(5):
            rng.shuffle(data["tasks"])
            rng.shuffle(data["adapters"])
            index = parse_index(data)
            assert [t.task_id for t in list_tasks(index)] == baseline_tasks
            assert [a.sort_key for a in list_adapters(index, "sentiment")] == baseline_adapters

    def test_filter_semantics(self):
        data = serialize_index(default_index())
        data["supported_task_filter"] = ["sentiment"]
        index = parse_index(data)
        assert [t.task_id for t in list_tasks(index)] == ["sentiment"]
        with pytest.raises(UnknownTask):
            list_adapters(index, "sts")

    def test_task_without_adapters(self):
        data = serialize_index(default_index())
        data["adapters"] = [a for a in data["adapters"] if a["task_id"] != "sts"]
        assert list_adapters(parse_index(data), "sts") == []

    def test_sync_writes_loadable_file(self, tmp_path):
        source = tmp_path / "src.json"
        source.write_text(json.dumps(serialize_index(default_index())), encoding="utf-8")
        dest = tmp_path / "local" / "index.json"
        synced = sync_index(str(source), dest)
        assert load_index(dest) == synced


class TestUploads:
    @pytest.fixture
    def registry(self, tmp_path):
        return HubRegistry(default_index(), upload_dir=tmp_path / "uploads")

    def test_register_valid_archive(self, registry):
        archive = make_zip(sentiment_manifest(), extra={"weights.bin": b"\x00"})
        descriptor = registry.register_uploaded_adapter(
            "proj-1", archive, {"task_id": "sentiment", "dataset_id": "my-upload"}
        )
        assert descriptor.source.value == "user_upload"
        assert descriptor.architecture is Architecture.HOULSBY
        adapters = registry.adapters_for_project("proj-1", "sentiment")
        assert any(a.dataset_id == "my-upload" for a in adapters)

    def test_not_a_zip(self, registry):
        with pytest.raises(BadArchive):
            registry.register_uploaded_adapter("p", b"not a zip", {"task_id": "sentiment"})

    def test_manifest_missing(self, registry):
        with pytest.raises(ManifestMissing):
            registry.register_uploaded_adapter(
                "p", make_zip(extra={"weights.bin": b"w"}), {"task_id": "sentiment"}
            )

    def test_task_mismatch(self, registry):
        archive = make_zip(sentiment_manifest(task_id="sts"))
        with pytest.raises(TaskMismatch):
            registry.register_uploaded_adapter("p", archive, {"task_id": "sentiment"})

    def test_label_schema_mismatch(self, registry):
        manifest = sentiment_manifest()
        manifest["label_schema"] = [
            {"name": "pos", "value": "pos"},
            {"name": "neg", "value": "neg"},
        ]
        with pytest.raises(TaskMismatch):
            registry.register_uploaded_adapter("p", make_zip(manifest), {"task_id": "sentiment"})

    def test_uploads_scoped_to_project(self, registry):
        archive = make_zip(sentiment_manifest())
        registry.register_uploaded_adapter(
            "proj-a", archive, {"task_id": "sentiment", "dataset_id": "mine"}
        )
        a_sets = {a.dataset_id for a in registry.adapters_for_project("proj-a", "sentiment")}
        b_sets = {a.dataset_id for a in registry.adapters_for_project("proj-b", "sentiment")}
        assert "mine" in a_sets
        assert "mine" not in b_sets
        assert "mine" not in {a.dataset_id for a in list_adapters(registry.index, "sentiment")}
