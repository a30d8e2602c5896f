import json

import pytest
from starlette.testclient import TestClient

from hdc.harness import dataset_to_doc, make_synthetic_dataset
from hdc.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app(), raise_server_exceptions=False) as c:
        yield c


@pytest.fixture
def mini_doc(mini_tree):
    return mini_tree.to_adjacency()


def synthetic_scorer_body(noise_sigma=0.0):
    return {"kind": "synthetic", "noise_sigma": noise_sigma, "distance_gain": 0.05,
            "base_error": 0.1, "seed": 0}


def test_health(client):
    doc = client.get("/health").json()
    assert doc["status"] == "ok"
    assert doc["protocol"] == "hdc-scorer/1"


def test_validate_good_tree(client, mini_doc):
    r = client.post("/tree/validate", json={"tree": mini_doc})
    assert r.status_code == 200
    body = r.json()
    assert body["valid"] and body["stats"]["leaf_count"] == 4


def test_validate_bad_tree_reports_diagnostic(client):
    cyclic = [
        {"id": 0, "label": "r", "children": [1]},
        {"id": 1, "label": "a", "children": [2]},
        {"id": 2, "label": "b", "children": [1]},
    ]
    body = client.post("/tree/validate", json={"tree": cyclic}).json()
    assert not body["valid"]
    assert "parent" in body["error"] or "cycle" in body["error"]


def test_stats_from_indented_text(client):
    r = client.post(
        "/tree/stats",
        json={"tree_text": "r\n\ta\n\tb\n", "format": "indented-text"},
    )
    assert r.json()["leaf_count"] == 2


def test_structure_error_maps_to_422(client):
    r = client.post("/tree/stats", json={"tree_text": "[]"})
    assert r.status_code == 422


def test_missing_tree_maps_to_400(client):
    r = client.post("/tree/stats", json={})
    assert r.status_code == 400


def test_limit_depth_endpoint(client, mini_doc):
    r = client.post("/tree/limit-depth", json={"tree": mini_doc, "max_depth": 1})
    assert r.status_code == 200
    assert r.json()["stats"]["depth"] == 1
    assert r.json()["stats"]["leaf_count"] == 4


def test_insert_and_remove_endpoints(client, mini_doc):
    r = client.post("/tree/insert", json={"tree": mini_doc, "label": "zebra"})
    assert r.json()["stats"]["leaf_count"] == 5
    r2 = client.post("/tree/remove", json={"tree": r.json()["tree"], "label": "zebra"})
    assert r2.json()["stats"]["leaf_count"] == 4


def test_insert_greedy_via_probe(client, mini_doc):
    probe = {
        "scorer": synthetic_scorer_body(),
        "images": [{"image_id": "probe0", "true_class": "dog"}],
        "samples_per_node": 2,
    }
    r = client.post(
        "/tree/insert",
        json={"tree": mini_doc, "label": "zebra", "mode": "greedy", "probe": probe},
    )
    assert r.status_code == 200
    doc = {e["label"]: e for e in r.json()["tree"]}
    animal = doc["animal"]
    zebra = doc["zebra"]
    assert zebra["id"] in animal["children"]


def test_remove_internal_label_is_422(client, mini_doc):
    r = client.post("/tree/remove", json={"tree": mini_doc, "label": "animal"})
    assert r.status_code == 422


def test_gen_dataset_endpoint(client, mini_doc):
    r = client.post("/datasets/synthetic", json={"tree": mini_doc, "per_class": 3, "seed": 5})
    body = r.json()
    assert body["n_images"] == 12
    assert len(body["dataset"]["images"]) == 12


def test_run_flat_and_compare(client, mini_tree, mini_doc):
    dataset = dataset_to_doc(make_synthetic_dataset(mini_tree, 2, seed=1))
    run_body = {
        "tree": mini_doc,
        "method": "flat",
        "scorer": synthetic_scorer_body(noise_sigma=0.2),
        "dataset": dataset,
        "flat": {"m_final": 2, "sample_seed": 3},
    }
    flat = client.post("/runs", json=run_body).json()
    assert flat["report"]["mean_calls_per_image"] == 8.0

    run_body_hdc = dict(run_body)
    run_body_hdc["method"] = "hdc"
    run_body_hdc["flat"] = None
    run_body_hdc["hdc"] = {
        "m_final": 2, "m_prune": 1, "sample_seed": 3,
        "strategy": {"kind": "fixed-topk", "default_ratio": 0.5},
    }
    hdc_run = client.post("/runs", json=run_body_hdc).json()
    assert hdc_run["traces"]
    assert hdc_run["report"]["mean_calls_per_image"] < 8.0

    cmp = client.post(
        "/compare", json={"baseline": flat["report"], "method": hdc_run["report"]}
    )
    assert cmp.status_code == 200
    assert cmp.json()["comparison"]["speedup_pct"] > 0


def test_run_determinism_over_http(client, mini_tree, mini_doc):
    dataset = dataset_to_doc(make_synthetic_dataset(mini_tree, 1, seed=2))
    body = {
        "tree": mini_doc,
        "method": "hdc",
        "scorer": synthetic_scorer_body(noise_sigma=0.5),
        "dataset": dataset,
        "hdc": {"m_final": 4, "m_prune": 2, "sample_seed": 1,
                "strategy": {"kind": "dynamic-sigma", "sigma_multiplier": 2.0}},
    }
    a = client.post("/runs", json=body).json()
    b = client.post("/runs", json=body).json()
    assert a["report"] == b["report"]
    assert a["traces"] == b["traces"]


def test_compare_mismatched_datasets_is_409(client, mini_tree, mini_doc):
    def report_for(seed):
        dataset = dataset_to_doc(make_synthetic_dataset(mini_tree, 1, seed=seed))
        body = {
            "tree": mini_doc, "method": "flat",
            "scorer": synthetic_scorer_body(), "dataset": dataset,
            "flat": {"m_final": 1},
        }
        return client.post("/runs", json=body).json()["report"]

    r = client.post(
        "/compare", json={"baseline": report_for(1), "method": report_for(2)}
    )
    assert r.status_code == 409


def test_run_bad_method_is_422_from_pydantic(client, mini_doc):
    r = client.post(
        "/runs",
        json={"tree": mini_doc, "method": "psychic", "scorer": synthetic_scorer_body(),
              "dataset": {"images": []}},
    )
    assert r.status_code == 422


def test_run_rejects_empty_dataset(client, mini_doc):
    r = client.post(
        "/runs",
        json={"tree": mini_doc, "method": "flat", "scorer": synthetic_scorer_body(),
              "dataset": {"images": []}, "flat": {"m_final": 1}},
    )
    assert r.status_code == 400
