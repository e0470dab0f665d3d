import csv
import random

import pytest

from playground.domain import SheetRef
from playground.service import PlaygroundService, ServiceConfig

POSITIVE_TEXTS = [
    "I love this great movie",
    "what a wonderful happy day",
    "excellent and amazing work",
    "the best fantastic show",
    "loved it, brilliant and perfect",
]
NEGATIVE_TEXTS = [
    "terrible awful film",
    "what a horrible boring mess",
    "the worst poor effort",
    "bad and disappointing result",
    "dreadful sad waste of time",
]


def write_rows(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


def make_sentiment_csv(path, n=20, labeled=True, seed=0):
    """Lexicon-friendly sentiment rows: the mock classifier gets them right."""
    rng = random.Random(seed)
    rows = [["text", "label", "when"]]
    for i in range(n):
        positive = i % 2 == 0
        text = rng.choice(POSITIVE_TEXTS if positive else NEGATIVE_TEXTS)
        label = ("positive" if positive else "negative") if labeled else ""
        rows.append([f"{text} #{i}", label, f"2024-{(i % 12) + 1:02d}-01"])
    write_rows(path, rows)
    return SheetRef(backend="csv_file", locator=str(path))


@pytest.fixture
def sentiment_sheet(tmp_path):
    return make_sentiment_csv(tmp_path / "sentiment.csv", n=20)


@pytest.fixture
def service(tmp_path):
    svc = PlaygroundService(ServiceConfig(data_dir=tmp_path / "svc"))
    yield svc
    svc.storage.close()
