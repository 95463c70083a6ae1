import pytest
from fastapi.testclient import TestClient

from flexarea.service import create_app


@pytest.fixture
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


def test_health_and_algorithms(client):
    assert client.get("/health").json()["status"] == "ok"
    algos = client.get("/algorithms").json()["algorithms"]
    assert "tcp" in algos and "monte-carlo" in algos and len(algos) == 7


def test_run_endpoint_success(client, tmp_path):
    resp = client.post("/runs/tcp", json={
        "net_name": "feeder4",
        "fsp_dg_indices": [0],
        "dp": 0.05, "dq": 0.1,
        "out_dir": str(tmp_path),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["algorithm"] == "tcp"
    assert body["report"]["power_flows"] > 0
    for key in ("figure_path", "csv_path", "report_path"):
        assert body[key].startswith(str(tmp_path))


def test_validation_errors_are_422(client, tmp_path):
    resp = client.post("/runs/monte-carlo", json={
        "net_name": "feeder4",
        "fsp_dg_indices": [0],
        "distribution": "Gaussian",
        "out_dir": str(tmp_path),
    })
    assert resp.status_code == 422
    body = resp.json()
    assert body["kind"] == "validation"
    assert "Uniform" in body["error"]


def test_no_fsp_is_422(client, tmp_path):
    resp = client.post("/runs/tcp", json={"net_name": "feeder4",
                                          "out_dir": str(tmp_path)})
    assert resp.status_code == 422
    assert "at least one" in resp.json()["error"]


def test_runtime_errors_are_500(client, tmp_path):
    resp = client.post("/runs/tcp-adapt", json={
        "net_name": "feeder4",
        "fsp_dg_indices": [0],
        "store_path": str(tmp_path / "missing"),
        "out_dir": str(tmp_path),
    })
    assert resp.status_code == 500
    body = resp.json()
    assert body["kind"] == "runtime"
    assert "tcp-save" in body["error"]


def test_unknown_algorithm_is_422(client, tmp_path):
    resp = client.post("/runs/genetic", json={"net_name": "feeder4",
                                              "fsp_dg_indices": [0],
                                              "out_dir": str(tmp_path)})
    assert resp.status_code == 422
    assert resp.json()["kind"] == "validation"
