import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.main import API_PREFIX, create_app
from app.module.moe_model.diagnostics import toy_model


@pytest.fixture
def model():
    return toy_model(seed=0, n_experts=2)


@pytest.fixture
def client(model):
    with TestClient(create_app(model)) as test_client:
        yield test_client


def test_health_reports_model(client):
    response = client.get(f"{API_PREFIX}/health")
    assert response.status_code == 200
    body = response.json()
    assert body["model_loaded"] is True
    assert (body["experts"], body["classes"]) == (2, 5)


def test_localize_matches_model(client, model):
    rss = [-40.0, -55.5, -100.0, -70.0, -62.0, -100.0]
    response = client.post(f"{API_PREFIX}/localize", json={"rss": rss})
    assert response.status_code == 200
    expected = model.predict_location((np.asarray(rss) + 100.0) / 100.0)
    body = response.json()
    assert body["rp_id"] == expected.rp_id
    assert body["region_id"] == expected.region_id
    assert tuple(body["coords"]) == expected.coords
    assert response.headers["X-Request-ID"]


def test_wrong_length_is_rejected(client):
    response = client.post(f"{API_PREFIX}/localize", json={"rss": [-50.0, -60.0]}, headers={"X-Request-ID": "abc"})
    assert response.status_code == 400
    body = response.json()
    assert body["path"] == f"{API_PREFIX}/localize"
    assert body["request_id"] == "abc"


def test_out_of_range_rss(client):
    response = client.post(f"{API_PREFIX}/localize", json={"rss": [5.0, -60.0, -60.0, -60.0, -60.0, -60.0]})
    assert response.status_code == 400


def test_no_model_loaded(monkeypatch):
    from app.config.settings import Config

    monkeypatch.setattr(Config, "CHECKPOINT_PATH", None)
    with TestClient(create_app()) as test_client:
        assert test_client.get(f"{API_PREFIX}/health").json()["model_loaded"] is False
        assert test_client.post(f"{API_PREFIX}/localize", json={"rss": [-50.0] * 6}).status_code == 409
