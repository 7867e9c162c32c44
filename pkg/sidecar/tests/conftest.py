from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from cook_sidecar import SidecarConfig, create_app

CORPUS_ROWS = [
    {"text": "Katie Britt won the senate race in Alabama in 2022", "source_id": "news-01"},
    {"text": "John Fetterman won the senate race in Pennsylvania", "source_id": "news-02"},
    {"text": "Kevin Kiley won the 3rd congressional district of California", "source_id": "news-03"},
    {"text": "Ron Wyden won the senate race of Oregon", "source_id": "news-04"},
    {"text": "Joe Lombardo won the Nevada governor race", "source_id": "news-05"},
    {"text": "The quarterly earnings call was unremarkable", "source_id": "biz-01"},
]


@pytest.fixture(scope="session")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(row) for row in CORPUS_ROWS) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def client(corpus_path) -> TestClient:
    app = create_app(SidecarConfig(corpus_path=str(corpus_path)))
    return TestClient(app, raise_server_exceptions=False)
