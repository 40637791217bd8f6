"""HTTP service contract via the ASGI test client."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from meaformer.data import generate_phantom, save_dataset
from meaformer.model import checkpoint_digest, save_checkpoint
from meaformer.service.app import create_app, encode_plane


@pytest.fixture(scope="module")
def service(tmp_path_factory, trained_step1, trained_step2):
    root = tmp_path_factory.mktemp("svc")
    s1, s2 = root / "s1.meaf", root / "s2.meaf"
    save_checkpoint(trained_step1, s1)
    save_checkpoint(trained_step2, s2)
    demo = root / "demo.mead"
    save_dataset([generate_phantom(9000 + i) for i in range(3)], demo)
    app = create_app(str(s1), str(s2), demo_data_path=str(demo))
    with TestClient(app) as client:
        yield client, {"step1": str(s1), "step2": str(s2)}


def _request_for(phantom, click=None):
    return {
        "image": encode_plane(phantom.image),
        "click": list(click or phantom.box.center),
        "spacing_mm_per_px": phantom.spacing_mm_per_px,
    }


class TestHealth:
    def test_ok_with_digests(self, service):
        client, paths = service
        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["checkpoints"]["step1"] == checkpoint_digest(paths["step1"])
        assert body["checkpoints"]["step2"] == checkpoint_digest(paths["step2"])
        assert body["demo_count"] == 3

    def test_missing_checkpoint_fails_boot(self, tmp_path):
        with pytest.raises(Exception):
            create_app(str(tmp_path / "missing.meaf"), str(tmp_path / "missing2.meaf"))


class TestMeasureEndpoint:
    def test_happy_path_has_all_sources(self, service):
        client, _ = service
        p = generate_phantom(31)
        r = client.post("/measure", json=_request_for(p))
        assert r.status_code == 200, r.text
        body = r.json()
        assert set(body["sources"]) == {"segmentation", "heatmap", "regression"}
        assert body["fused"]["long"]["mm"] > 0
        assert body["latency_ms"] > 0
        assert len(body["contour"]) > 4
        # lengths consistent with endpoints
        for src in list(body["sources"].values()) + [body["fused"]]:
            for axis in ("long", "short"):
                a, b = src[axis]["a"], src[axis]["b"]
                d = float(np.hypot(a[0] - b[0], a[1] - b[1]))
                assert abs(d - src[axis]["px"]) < 1e-6
                assert abs(src[axis]["mm"] - src[axis]["px"] * p.spacing_mm_per_px) < 1e-6

    def test_click_out_of_bounds_400(self, service):
        client, _ = service
        p = generate_phantom(32)
        r = client.post("/measure", json=_request_for(p, click=(-1.0, 5.0)))
        assert r.status_code == 400

    def test_malformed_payload_400(self, service):
        client, _ = service
        p = generate_phantom(33)
        req = _request_for(p)
        req["image"]["b64"] = "!!!not-base64!!!"
        assert client.post("/measure", json=req).status_code == 400
        req2 = _request_for(p)
        req2["image"]["b64"] = base64.b64encode(b"\x00" * 16).decode()
        assert client.post("/measure", json=req2).status_code == 400

    def test_dataset_reference(self, service):
        client, _ = service
        r0 = client.get("/demo/0")
        assert r0.status_code == 200
        click = r0.json()["suggested_click"]
        r = client.post("/measure", json={
            "image": {"dataset_index": 0},
            "click": click,
            "spacing_mm_per_px": r0.json()["spacing_mm_per_px"],
        })
        assert r.status_code == 200

    def test_deterministic_payloads(self, service):
        client, _ = service
        p = generate_phantom(34)
        a = client.post("/measure", json=_request_for(p)).json()
        b = client.post("/measure", json=_request_for(p)).json()
        a.pop("latency_ms")
        b.pop("latency_ms")
        assert a == b

    def test_degenerate_box_422(self, service, tmp_path, trained_step2):
        # an untrained step-1 model puts both corners at (0.5, 0.5)
        from meaformer.model import MeasurementNet, ModelConfig
        s1 = tmp_path / "raw1.meaf"
        s2 = tmp_path / "raw2.meaf"
        save_checkpoint(MeasurementNet(ModelConfig.desk(
            n_queries=2, channels=16, n_encoder_layers=1, n_decoder_layers=1)), s1)
        save_checkpoint(trained_step2, s2)
        app = create_app(str(s1), str(s2))
        with TestClient(app) as client:
            p = generate_phantom(35)
            r = client.post("/measure", json=_request_for(p))
            assert r.status_code == 422


class TestAssessEndpoint:
    @pytest.mark.parametrize("base,post,expect", [
        (20.0, 13.0, "PR"),
        (20.0, 25.0, "PD"),
        (20.0, 20.0, "SD"),
        (20.0, 0.0, "CR"),
    ])
    def test_classes(self, service, base, post, expect):
        client, _ = service
        r = client.post("/assess", json={"baseline_long_mm": base,
                                         "followup_long_mm": post})
        assert r.status_code == 200
        assert r.json()["response_class"] == expect

    def test_percent_change_reported(self, service):
        client, _ = service
        r = client.post("/assess", json={"baseline_long_mm": 20.0,
                                         "followup_long_mm": 13.0})
        assert abs(r.json()["percent_change"] + 35.0) < 1e-9

    def test_zero_baseline_400(self, service):
        client, _ = service
        r = client.post("/assess", json={"baseline_long_mm": 0.0,
                                         "followup_long_mm": 5.0})
        assert r.status_code == 400


class TestDemoEndpoints:
    def test_listing_and_round_trip(self, service):
        client, _ = service
        listing = client.get("/demo").json()
        assert listing["count"] == 3
        item = client.get("/demo/0").json()
        plane = item["image"]
        raw = base64.b64decode(plane["b64"])
        img = np.frombuffer(raw, dtype="<f4").reshape(plane["height"], plane["width"])
        assert np.array_equal(img, generate_phantom(9000).image)

    def test_out_of_range_404(self, service):
        client, _ = service
        assert client.get("/demo/99").status_code == 404


class TestConcurrency:
    def test_concurrent_identical_requests_identical_bodies(self, service):
        from concurrent.futures import ThreadPoolExecutor
        client, _ = service
        p = generate_phantom(36)
        req = _request_for(p)

        def hit(_):
            body = client.post("/measure", json=req).json()
            body.pop("latency_ms")
            return body

        with ThreadPoolExecutor(max_workers=4) as pool:
            bodies = list(pool.map(hit, range(4)))
        assert all(b == bodies[0] for b in bodies)
