import random
import threading
import time

import pytest

from spacecheck.checker import sat
from spacecheck.formula import parse, render
from spacecheck.service import CheckerService, CheckRequest, ServiceError, load_model, make_checker_server
from spacecheck.space import ModelFormatError
from spacecheck.store import EntityLocation, LocationStore, Snapshot, make_cache_server, to_valuation
from spacecheck.workload import PROPERTIES

from conftest import http, random_formula, serving

F2 = PROPERTIES["F2"]


@pytest.fixture
def service(mini_city):
    svc = CheckerService(mini_city, workers=2)
    yield svc
    svc.close()


def inline(positions):
    return Snapshot.from_positions(positions).to_json()


class TestHandleCheck:
    def test_formula_two_examples(self, service):
        bad = service.handle_check({"formula": F2, "presence_prop": "bike", "snapshot": inline({"b": "museum"})})
        good = service.handle_check({"formula": F2, "presence_prop": "bike", "snapshot": inline({"b": "bridge2"})})
        assert (bad.satisfied, good.satisfied) == (False, True)
        assert good.model_version == service.model_version
        assert good.compute_ms >= 0 and good.wait_ms >= 0

    def test_points_mode(self, service):
        res = service.handle_check(CheckRequest("C park", Snapshot({}), mode="points"))
        assert sorted(res.points) == ["museum", "park"]
        assert "points" not in service.handle_check(CheckRequest("park", Snapshot({}))).to_json()

    def test_syntax_error_is_400_with_position(self, service):
        with pytest.raises(ServiceError) as info:
            service.handle_check({"formula": "park &", "snapshot": inline({})})
        assert info.value.status == 400
        assert info.value.extra["position"] == 6

    @pytest.mark.parametrize("doc", [
        [], {}, {"formula": 3}, {"formula": "p", "mode": "fuzzy"},
        {"formula": "p", "snapshot": {"entities": {"e": {"ts": 0}}}}, {"formula": "p", "presence_prop": ""},
    ])
    def test_bad_requests(self, service, doc):
        with pytest.raises(ServiceError) as info:
            service.handle_check(doc)
        assert info.value.status == 400

    def test_no_snapshot_and_no_cache(self, service):
        with pytest.raises(ServiceError) as info:
            service.handle_check({"formula": "park"})
        assert info.value.status == 400

    def test_unreachable_cache_is_502(self, mini_city):
        svc = CheckerService(mini_city, cache_url="http://127.0.0.1:9", workers=1, fetch_timeout=1)
        with pytest.raises(ServiceError) as info:
            svc.handle_check({"formula": "park"})
        assert info.value.status == 502
        svc.close()

    def test_full_queue_is_503(self, mini_city, monkeypatch):
        svc = CheckerService(mini_city, workers=1, queue_size=1)
        gate, entered = threading.Event(), threading.Event()
        original = svc._evaluate

        def slow(*args):
            entered.set()
            gate.wait(5)
            return original(*args)

        monkeypatch.setattr(svc, "_evaluate", slow)
        req = CheckRequest("park", Snapshot({}))
        first = threading.Thread(target=svc.handle_check, args=(req,))
        first.start()
        assert entered.wait(5)  # the only worker is now busy
        second = threading.Thread(target=svc.handle_check, args=(req,))
        second.start()
        while not svc._queue.qsize():
            time.sleep(0.01)
        with pytest.raises(ServiceError) as info:
            svc.handle_check(req)
        assert info.value.status == 503
        gate.set()
        first.join()
        second.join()
        svc.close()

    def test_waiting_time_is_reported(self, mini_city, monkeypatch):
        svc = CheckerService(mini_city, workers=1)
        original = svc._evaluate

        def slow(*args):
            time.sleep(0.05)
            return original(*args)

        monkeypatch.setattr(svc, "_evaluate", slow)
        req = CheckRequest("park", Snapshot({}))
        results = []
        threads = [threading.Thread(target=lambda: results.append(svc.handle_check(req))) for _ in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert max(r.wait_ms for r in results) >= 40
        assert min(r.compute_ms for r in results) >= 40
        svc.close()

    def test_metrics(self, service):
        for _ in range(3):
            service.handle_check(CheckRequest("park", Snapshot({})))
        with pytest.raises(ServiceError):
            service.handle_check({"formula": "("})
        m = service.metrics()
        assert (m["requests"], m["errors"]) == (4, 1)
        assert m["p50_compute_ms"] <= m["p95_compute_ms"]


class TestSnapshotSource:
    def test_reads_cache_and_freezes_at_arrival(self, mini_city):
        store = LocationStore()
        store.update(EntityLocation("b", "bridge2", 1))
        with serving(make_cache_server(store)) as cache:
            svc = CheckerService(mini_city, cache_url=cache, workers=1)
            res = svc.handle_check({"formula": F2, "presence_prop": "bike"})
            assert res.satisfied
            store.update(EntityLocation("b", "museum", 2))
            assert not svc.handle_check({"formula": F2, "presence_prop": "bike"}).satisfied
            # an inline snapshot wins over the cache
            assert svc.handle_check({"formula": F2, "presence_prop": "bike",
                                     "snapshot": inline({"b": "bridge2"})}).satisfied
            svc.close()


class TestModels:
    def test_bundled_hash_stable(self):
        assert load_model("mini-city").version == load_model("mini-city").version == "61b2995342ae2b65"

    def test_dangling_edge_rejected(self, tmp_path):
        (tmp_path / "bad.space").write_text("point a\nedge a ghost\n")
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / "bad.space")


class TestHttp:
    def test_endpoints(self, service):
        with serving(make_checker_server(service)) as url:
            code, doc = http("GET", url + "/healthz")
            assert code == 200 and doc["model_version"] == service.model_version
            code, doc = http("POST", url + "/check", {"formula": F2, "presence_prop": "bike",
                                                       "snapshot": inline({"b": "bus_stop1"})})
            assert code == 200 and doc["satisfied"] is True
            code, doc = http("POST", url + "/check", {"formula": "a &&", "snapshot": inline({})})
            assert code == 400 and "position" in doc
            assert http("GET", url + "/metrics")[1]["requests"] == 2
            assert http("GET", url + "/nope")[0] == 404

    def test_invalid_json(self, service):
        import urllib.request
        import urllib.error
        with serving(make_checker_server(service)) as url:
            req = urllib.request.Request(url + "/check", data=b"{nope", method="POST")
            with pytest.raises(urllib.error.HTTPError) as info:
                urllib.request.urlopen(req, timeout=5)
            assert info.value.code == 400

    def test_service_matches_library(self, service, mini_city):
        rng = random.Random(11)
        names = list(mini_city.space.ids)
        props = ["bike", "bridge", "bus_stop", "museum", "main_square"]
        with serving(make_checker_server(service)) as url:
            for _ in range(25):
                positions = {f"b{k}": rng.choice(names) for k in range(rng.randint(0, 3))}
                f = random_formula(rng, 3, props)
                code, doc = http("POST", url + "/check", {"formula": render(f), "presence_prop": "bike",
                                                           "snapshot": inline(positions)})
                expected = bool(sat(to_valuation(Snapshot.from_positions(positions), mini_city, "bike"), parse(render(f))))
                assert code == 200 and doc["satisfied"] == expected
