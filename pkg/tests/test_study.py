"""Study lifecycle: blinding, durability, replay determinism, reporting."""
import json

import numpy as np
import pytest

from ecgstudy.densenet import ModelConfig, init_params
from ecgstudy.preprocess import Segment
from ecgstudy.study import (
    AuthError, ConflictError, EventLog, NotFoundError, RATER_CHOICES,
    StudyError, StudyStore, report_json, report_markdown,
)

from oracles import confusion_by_hand, kappa_by_hand

SMALL = ModelConfig(height=8, width=16, n_blocks=1, layers_per_block=2,
                    growth_rate=4, initial_channels=6)


def make_segments(n, fs=25.0, seed=0):
    rng = np.random.default_rng(seed)
    return [
        Segment(parent_id=f"rec{i}", segment_index=0, lead_name="I",
                samples=rng.normal(0, 200, size=int(10 * fs)),
                sampling_rate_hz=fs, start_s=0.0)
        for i in range(n)
    ]


def make_study(store, n=4, raters=("r1", "r2"), labels=None, study_id="s1", seed=0):
    segments = make_segments(n)
    labels = labels or (["AFIB", "NSR", "OTHER", "AFIB"] * n)[:n]
    return store.create_study(segments, labels, list(raters), seed=seed, study_id=study_id)


def answer_all(store, study_id, token, label_by_item):
    while True:
        item = store.next_item(study_id, token)
        if item.get("done"):
            return
        store.submit_annotation(study_id, token, item["item_id"], label_by_item[item["item_id"]])


class TestEventLog:
    def test_append_replay(self, tmp_path):
        log = EventLog(tmp_path / "x.jsonl")
        log.append("a", {"v": 1})
        log.append("b", {"v": 2})
        fresh = EventLog(tmp_path / "x.jsonl")
        assert fresh.replay() == [("a", {"v": 1}), ("b", {"v": 2})]

    def test_corrupt_tail_truncated(self, tmp_path, caplog):
        log = EventLog(tmp_path / "x.jsonl")
        log.append("a", {"v": 1})
        with open(log.path, "a") as fh:
            fh.write('{"seq": 2, "kind": "b", "payload": {}, "checksum": "bogus"}\n')
        fresh = EventLog(tmp_path / "x.jsonl")
        with caplog.at_level("WARNING"):
            events = fresh.replay()
        assert events == [("a", {"v": 1})]
        assert "truncating" in caplog.text
        # The corrupt line is physically gone afterwards.
        assert EventLog(tmp_path / "x.jsonl").replay() == events

    def test_unterminated_tail(self, tmp_path):
        log = EventLog(tmp_path / "x.jsonl")
        log.append("a", {"v": 1})
        with open(log.path, "a") as fh:
            fh.write('{"seq": 2, "kind"')
        assert EventLog(tmp_path / "x.jsonl").replay() == [("a", {"v": 1})]

    def test_seq_gap_rejected(self, tmp_path):
        log = EventLog(tmp_path / "x.jsonl")
        log.append("a", {})
        log.append("b", {})
        lines = log.path.read_text().splitlines()
        log.path.write_text(lines[0] + "\n" + lines[1].replace('"seq":2', '"seq":3') + "\n")
        assert len(EventLog(tmp_path / "x.jsonl").replay()) == 1


class TestCreateStudy:
    def test_distinct_rater_orders(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=20, raters=("r1", "r2", "r3"))
        orders = [tuple(r.order) for r in state.raters]
        assert len(set(orders)) == 3
        assert all(sorted(o) == sorted(orders[0]) for o in orders)

    def test_single_item_single_rater(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=1, raters=("solo",), labels=["NSR"])
        assert len(state.raters[0].order) == 1

    def test_zero_items(self, tmp_path):
        store = StudyStore(tmp_path)
        with pytest.raises(StudyError):
            store.create_study([], [], ["r1"])

    def test_noise_reference_rejected(self, tmp_path):
        store = StudyStore(tmp_path)
        with pytest.raises(StudyError):
            store.create_study(make_segments(1), ["NOISE"], ["r1"])

    def test_duplicate_raters(self, tmp_path):
        store = StudyStore(tmp_path)
        with pytest.raises(StudyError):
            make_study(store, raters=("r1", "r1"))

    def test_orders_reproducible_from_seed(self, tmp_path):
        s1 = make_study(StudyStore(tmp_path / "a"), n=10, seed=5)
        s2 = make_study(StudyStore(tmp_path / "b"), n=10, seed=5)
        assert [r.order for r in s1.raters] == [r.order for r in s2.raters]


class TestBlinding:
    ALLOWED_FIELDS = {"item_id", "sampling_rate_hz", "samples_uv", "position", "total"}

    def test_payload_schema_never_leaks(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=4)
        token = state.raters[0].token
        labels = {it.item_id: "AFIB" for it in state.items}
        for _ in range(4):
            payload = store.next_item("s1", token)
            assert set(payload) <= self.ALLOWED_FIELDS
            blob = json.dumps(payload)
            assert "reference" not in blob and "label" not in blob
            store.submit_annotation("s1", token, payload["item_id"], labels[payload["item_id"]])
        assert store.next_item("s1", token)["done"] is True

    def test_unknown_token(self, tmp_path):
        store = StudyStore(tmp_path)
        make_study(store)
        with pytest.raises(AuthError):
            store.next_item("s1", "nope")


class TestAnnotationFlow:
    def test_progress_and_conflict(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        token = state.raters[0].token
        first = store.next_item("s1", token)
        assert first["position"] == 0 and first["total"] == 4
        store.submit_annotation("s1", token, first["item_id"], "NSR")
        second = store.next_item("s1", token)
        assert second["item_id"] != first["item_id"]
        assert second["position"] == 1
        with pytest.raises(ConflictError):
            store.submit_annotation("s1", token, first["item_id"], "AFIB")

    def test_bad_label(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        token = state.raters[0].token
        item = store.next_item("s1", token)
        with pytest.raises(StudyError):
            store.submit_annotation("s1", token, item["item_id"], "MAYBE")

    def test_unknown_item(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        with pytest.raises(NotFoundError):
            store.submit_annotation("s1", state.raters[0].token, "ghost", "NSR")

    def test_unlock_allows_resubmission(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        token = state.raters[0].token
        item = store.next_item("s1", token)
        store.submit_annotation("s1", token, item["item_id"], "NSR")
        store.unlock_annotation("s1", "r1", item["item_id"])
        store.submit_annotation("s1", token, item["item_id"], "AFIB")
        assert store._state("s1").annotations[("r1", item["item_id"])] == "AFIB"

    def test_monotone_progress_never_repeats(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=6)
        token = state.raters[0].token
        seen = []
        while True:
            payload = store.next_item("s1", token)
            if payload.get("done"):
                break
            assert payload["item_id"] not in seen
            seen.append(payload["item_id"])
            store.submit_annotation("s1", token, payload["item_id"], "OTHER")
        assert len(seen) == 6


class TestDurability:
    def test_kill_restart_preserves_annotations(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        token = state.raters[0].token
        item = store.next_item("s1", token)
        store.submit_annotation("s1", token, item["item_id"], "AFIB")
        del store  # simulated crash: no explicit shutdown path exists

        revived = StudyStore(tmp_path)
        assert revived._state("s1").annotations[("r1", item["item_id"])] == "AFIB"
        # The revived store continues from the same position.
        assert revived.next_item("s1", token)["position"] == 1

    def test_replay_equals_in_memory_after_any_prefix(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store)
        token = state.raters[0].token
        for _ in range(3):
            item = store.next_item("s1", token)
            store.submit_annotation("s1", token, item["item_id"], "NSR")
            fresh = StudyStore(tmp_path)
            assert fresh._state("s1").annotations == store._state("s1").annotations


class TestModelRun:
    def test_deterministic_and_probabilities_stored(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=3, labels=["AFIB", "NSR", "OTHER"])
        params = init_params(SMALL, seed=0)
        r1 = store.run_model("s1", params)
        assert r1["n_annotated"] == 3
        ann1 = dict(store._state("s1").model_annotations)
        r2 = store.run_model("s1", params)
        ann2 = store._state("s1").model_annotations
        assert ann1 == ann2
        for a in ann1.values():
            assert set(a["probabilities"]) == {"NSR", "AFIB", "OTHER", "NOISE"}


class TestReport:
    def scripted_study(self, tmp_path):
        """4 items, 2 raters with hand-chosen labels, model run."""
        store = StudyStore(tmp_path)
        state = make_study(store, n=4, labels=["AFIB", "AFIB", "NSR", "OTHER"])
        ref = {it.item_id: lbl for it, lbl in
               zip(state.items, ["AFIB", "AFIB", "NSR", "OTHER"])}
        # r1 gets item 2 wrong; r2 answers NOT-SURE on item 4.
        ids = [it.item_id for it in state.items]
        r1_labels = {ids[0]: "AFIB", ids[1]: "NSR", ids[2]: "NSR", ids[3]: "OTHER"}
        r2_labels = {ids[0]: "AFIB", ids[1]: "AFIB", ids[2]: "NSR", ids[3]: "NOT-SURE"}
        answer_all(store, "s1", state.raters[0].token, r1_labels)
        answer_all(store, "s1", state.raters[1].token, r2_labels)
        store.run_model("s1", init_params(SMALL, seed=0))
        return store, ids, r1_labels, r2_labels

    def test_hand_computed_cells(self, tmp_path):
        store, ids, r1_labels, r2_labels = self.scripted_study(tmp_path)
        report = store.build_report("s1")

        ref = ["AFIB", "AFIB", "NSR", "OTHER"]
        r1 = [r1_labels[i] for i in ids]
        sec = report["raters"]["r1"]
        assert sec["accuracy"] == pytest.approx(3 / 4)
        # AFIB: tp=1, fp=0, fn=1 -> precision 1, recall 0.5, f1 2/3
        assert sec["per_class"]["AFIB"]["precision"] == pytest.approx(1.0)
        assert sec["per_class"]["AFIB"]["recall"] == pytest.approx(0.5)
        assert sec["per_class"]["AFIB"]["f1"] == pytest.approx(2 / 3)
        # NSR: tp=1, fp=1, fn=0
        assert sec["per_class"]["NSR"]["precision"] == pytest.approx(0.5)
        assert sec["per_class"]["NSR"]["recall"] == pytest.approx(1.0)
        assert sec["weighted"]["recall"] == pytest.approx(sec["accuracy"])
        assert sec["kappa"]["kappa"] == pytest.approx(kappa_by_hand(ref, r1), abs=1e-9)

        r2 = [r2_labels[i] for i in ids]
        sec2 = report["raters"]["r2"]
        assert sec2["accuracy"] == pytest.approx(3 / 4)
        assert sec2["confusion"]["predicted_classes"] == ["AFIB", "NSR", "OTHER", "NOT-SURE"]
        assert sec2["confusion"]["counts"] == confusion_by_hand(
            ref, r2, ("AFIB", "NSR", "OTHER"), ("AFIB", "NSR", "OTHER", "NOT-SURE"))

        avg = report["rater_average"]
        assert avg["accuracy"] == pytest.approx(3 / 4)
        assert avg["kappa"] == pytest.approx(
            (sec["kappa"]["kappa"] + sec2["kappa"]["kappa"]) / 2)

        [pair] = report["pairwise"]
        assert pair["raters"] == ["r1", "r2"]
        assert pair["kappa"]["kappa"] == pytest.approx(kappa_by_hand(r1, r2), abs=1e-9)

    def test_single_perfect_rater(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=3, raters=("solo",), labels=["AFIB", "NSR", "OTHER"])
        ref = {it.item_id: it.reference_label for it in state.items}
        answer_all(store, "s1", state.raters[0].token, ref)
        report = store.build_report("s1")
        k = report["raters"]["solo"]["kappa"]
        assert k["kappa"] == pytest.approx(1.0)
        assert k["band"] == "almost-perfect"

    def test_report_byte_identical_after_restart(self, tmp_path):
        store, *_ = self.scripted_study(tmp_path)
        text1 = report_json(store.build_report("s1"))
        revived = StudyStore(tmp_path)
        text2 = report_json(revived.build_report("s1"))
        assert text1.encode() == text2.encode()
        md1 = report_markdown(store.build_report("s1"))
        md2 = report_markdown(revived.build_report("s1"))
        assert md1 == md2

    def test_partial_rater_excluded(self, tmp_path):
        store = StudyStore(tmp_path)
        state = make_study(store, n=4)
        token1 = state.raters[0].token
        labels = {it.item_id: "AFIB" for it in state.items}
        answer_all(store, "s1", token1, labels)
        item = store.next_item("s1", state.raters[1].token)
        store.submit_annotation("s1", state.raters[1].token, item["item_id"], "NSR")
        report = store.build_report("s1")
        assert "r2" not in report["raters"]
        assert report["partial_raters_excluded"] == ["r2"]

    def test_empty_report_error(self, tmp_path):
        store = StudyStore(tmp_path)
        make_study(store)
        with pytest.raises(StudyError):
            store.build_report("s1")

    def test_markdown_tables_present(self, tmp_path):
        store, *_ = self.scripted_study(tmp_path)
        md = report_markdown(store.build_report("s1"))
        assert "Weighted Avg. Precision" in md
        assert "F1 (AFIB)" in md
        assert "95% CI" in md
        assert "Model ROC / AUC" in md
        assert "Pairwise rater agreement" in md

    def test_rater_choices_constant(self):
        assert RATER_CHOICES == ("AFIB", "NSR", "OTHER", "NOT-SURE")
