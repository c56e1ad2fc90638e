import pytest
from fastapi.testclient import TestClient

from pcmi.experiments import ComparisonPair, aggregate
from pcmi.service import AnnotationStore, PairDisplay, create_app


def make_display(pair_id, experiment="EXP1", hypothesis_side="A"):
    pair = ComparisonPair(
        pair_id=pair_id,
        instance_id=pair_id.split(":", 1)[1],
        experiment=experiment,
        side_a=0,
        side_b=1,
        hypothesis_side=hypothesis_side,
        metadata={},
    )
    return PairDisplay(
        pair=pair,
        history=["hello there", "hi friend"],
        response_a="the first response text",
        response_b="a different second response",
    )


@pytest.fixture
def client(tmp_path):
    displays = {f"exp1:i{j}": make_display(f"exp1:i{j}") for j in range(3)}
    displays["exp2:s0"] = make_display("exp2:s0", experiment="EXP2")
    store = AnnotationStore(displays, tmp_path / "log.jsonl", seed=5)
    return TestClient(create_app(store)), store, tmp_path / "log.jsonl", displays


def annotate_everything(client, displays, annotators=("a1", "a2", "a3"), choice="A"):
    submitted = []
    for annotator in annotators:
        while True:
            r = client.get("/api/tasks/next", params={"annotator": annotator})
            if r.status_code == 204:
                break
            task = r.json()
            body = {"pair_id": task["pair_id"], "annotator_id": annotator, "choice": choice}
            if task["mode"] == "choice+span":
                body["spans"] = {"A": [[0, 2]]}
            assert client.post("/api/annotations", json=body).status_code == 201
            submitted.append((annotator, task["pair_id"]))
    return submitted


class TestProtocol:
    def test_three_annotators_complete_every_pair(self, client):
        http, store, _, displays = client
        submitted = annotate_everything(http, displays)
        assert len(submitted) == 3 * len(displays)
        assert set(store.complete_pairs()) == set(displays)
        # each annotator saw each pair exactly once
        assert len(set(submitted)) == len(submitted)

    def test_fourth_annotator_gets_no_content(self, client):
        http, _, _, displays = client
        annotate_everything(http, displays)
        assert http.get("/api/tasks/next", params={"annotator": "a4"}).status_code == 204

    def test_missing_annotator_id_rejected(self, client):
        http, _, _, _ = client
        assert http.get("/api/tasks/next").status_code == 400

    def test_duplicate_submission_conflict(self, client):
        http, _, _, _ = client
        task = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
        body = {"pair_id": task["pair_id"], "annotator_id": "a1", "choice": "A"}
        assert http.post("/api/annotations", json=body).status_code == 201
        assert http.post("/api/annotations", json=body).status_code == 409

    def test_unknown_pair_not_found(self, client):
        http, _, _, _ = client
        body = {"pair_id": "nope", "annotator_id": "a1", "choice": "A"}
        assert http.post("/api/annotations", json=body).status_code == 404

    def test_invalid_choice_unprocessable(self, client):
        http, _, _, _ = client
        body = {"pair_id": "exp1:i0", "annotator_id": "a1", "choice": "C"}
        assert http.post("/api/annotations", json=body).status_code == 422

    def test_missing_fields_unprocessable(self, client):
        http, _, _, _ = client
        assert http.post("/api/annotations", json={"pair_id": "exp1:i0"}).status_code == 422

    def test_annotator_never_reassigned_same_pair(self, client):
        http, _, _, displays = client
        seen = []
        for _ in range(len(displays)):
            task = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
            seen.append(task["pair_id"])
            body = {"pair_id": task["pair_id"], "annotator_id": "a1", "choice": "B"}
            assert http.post("/api/annotations", json=body).status_code == 201
        assert sorted(seen) == sorted(displays)
        assert http.get("/api/tasks/next", params={"annotator": "a1"}).status_code == 204

    def test_least_annotated_pairs_served_first(self, client):
        http, _, _, _ = client
        first = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
        body = {"pair_id": first["pair_id"], "annotator_id": "a1", "choice": "A"}
        http.post("/api/annotations", json=body)
        # a fresh annotator must be steered away from the already-annotated pair
        second = http.get("/api/tasks/next", params={"annotator": "a2"}).json()
        assert second["pair_id"] != first["pair_id"]


class TestSpanMode:
    def test_exp2_task_is_choice_plus_span_with_offsets(self, client):
        http, _, _, _ = client
        store_client, store = http, None
        while True:
            r = store_client.get("/api/tasks/next", params={"annotator": "scout"})
            task = r.json()
            if task["pair_id"] == "exp2:s0":
                break
            store_client.post("/api/annotations", json={
                "pair_id": task["pair_id"], "annotator_id": "scout", "choice": "A"})
        assert task["mode"] == "choice+span"
        # offsets index back into the displayed response string
        text = task["response_a"]
        for tok in task["tokens_a"]:
            assert text[tok["start"]:tok["end"]].lower() == tok["text"]

    def test_exp1_task_is_plain_choice(self, client):
        http, _, _, _ = client
        task = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
        if task["pair_id"].startswith("exp1"):
            assert task["mode"] == "choice"
            assert "tokens_a" not in task

    def test_out_of_range_span_rejected(self, client):
        http, _, _, _ = client
        body = {"pair_id": "exp2:s0", "annotator_id": "a1", "choice": "A",
                "spans": {"A": [[0, 99]]}}
        assert http.post("/api/annotations", json=body).status_code == 422

    def test_bad_span_side_rejected(self, client):
        http, _, _, _ = client
        body = {"pair_id": "exp2:s0", "annotator_id": "a1", "choice": "A",
                "spans": {"C": [[0, 1]]}}
        assert http.post("/api/annotations", json=body).status_code == 422


class TestPersistence:
    def test_state_recovered_by_log_replay(self, client):
        http, store, log_path, displays = client
        task = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
        http.post("/api/annotations", json={
            "pair_id": task["pair_id"], "annotator_id": "a1", "choice": "A"})
        # simulate a crash: rebuild the store from the log alone
        recovered = AnnotationStore(displays, log_path, seed=5)
        assert recovered.assignments == store.assignments
        assert recovered.annotations == store.annotations
        # the recovered service still refuses a duplicate
        http2 = TestClient(create_app(recovered))
        r = http2.post("/api/annotations", json={
            "pair_id": task["pair_id"], "annotator_id": "a1", "choice": "A"})
        assert r.status_code == 409

    def test_assignment_survives_restart(self, client):
        http, _, log_path, displays = client
        task = http.get("/api/tasks/next", params={"annotator": "a1"}).json()
        recovered = AnnotationStore(displays, log_path, seed=5)
        http2 = TestClient(create_app(recovered))
        # the open assignment means a1 is never re-offered the same pair
        offered = http2.get("/api/tasks/next", params={"annotator": "a1"}).json()
        assert offered["pair_id"] != task["pair_id"]


class TestResults:
    def test_results_conflict_before_any_complete_pair(self, client):
        http, _, _, _ = client
        assert http.get("/api/results").status_code == 409

    def test_results_match_offline_aggregate(self, client):
        http, store, _, displays = client
        annotate_everything(http, displays)
        online = http.get("/api/results").json()["results"]
        pairs = [d.pair for d in displays.values()]
        offline = [r.to_dict() for r in aggregate(pairs, store.annotations)]
        assert online == offline
        exp1 = next(r for r in online if r["exp"] == "EXP1")
        assert (exp1["n"], exp1["K"]) == (3, 3)  # every vote was for side A

    def test_progress_endpoint(self, client):
        http, _, _, displays = client
        annotate_everything(http, displays, annotators=("a1",))
        progress = http.get("/api/progress").json()
        assert progress == {
            "total_pairs": len(displays),
            "complete_pairs": 0,
            "submitted_annotations": len(displays),
        }
