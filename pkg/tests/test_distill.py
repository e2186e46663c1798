"""Distillation pipeline tests: harvesting, assembly, iteration bookkeeping."""

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from fixtures import make_decomposition
from fsukit import FunctionType, reward_caption_fsu_format, reward_fsu_parsable
from fsukit.distill import (
    Annotation,
    ClientError,
    DistillationState,
    HttpModelClient,
    IterationExhausted,
    MockModelClient,
    ModelClient,
    PROMPTS,
    TranscriptClient,
    assemble_sft,
    extract_caption_text,
    harvest_captions,
    read_sft_jsonl,
    run_distillation,
    run_iteration,
    write_sft_jsonl,
)


def _annotations(n: int, seed: int = 0) -> list[Annotation]:
    rng = random.Random(seed)
    functions = list(FunctionType)
    return [
        Annotation(
            image_ref=f"img_{i:04d}.jpg",
            gt=make_decomposition(rng, functions[i % len(functions)]),
        )
        for i in range(n)
    ]


class FlakyClient(ModelClient):
    """Fails for one specific image."""

    def __init__(self, bad_image: str) -> None:
        self.bad_image = bad_image

    def generate(self, image_ref: str, prompt_text: str) -> str:
        if image_ref == self.bad_image:
            raise ClientError("timeout")
        return f"<caption>sign at {image_ref}</caption>"

    def describe(self) -> str:
        return "flaky"


class TestHarvest:
    def test_mock_client_answers_everything(self):
        annotations = _annotations(10)
        results = harvest_captions(annotations, MockModelClient())
        assert len(results) == 10
        assert all(r.ok for r in results)
        assert [r.image_ref for r in results] == [a.image_ref for a in annotations]

    def test_one_failure_does_not_abort_the_batch(self):
        annotations = _annotations(10)
        results = harvest_captions(annotations, FlakyClient(annotations[3].image_ref))
        ok = [r for r in results if r.ok]
        bad = [r for r in results if not r.ok]
        assert len(ok) == 9
        assert len(bad) == 1
        assert "timeout" in bad[0].reason

    def test_caption_block_is_unwrapped(self):
        assert extract_caption_text("<caption>inner text</caption>") == "inner text"

    def test_bare_reply_is_kept_verbatim(self):
        assert extract_caption_text("no tags at all") == "no tags at all"

    def test_in_flight_requests_respect_the_bound(self):
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        class SlowClient(ModelClient):
            def generate(self, image_ref, prompt_text):
                with lock:
                    state["active"] += 1
                    state["peak"] = max(state["peak"], state["active"])
                try:
                    threading.Event().wait(0.01)
                    return "<caption>x</caption>"
                finally:
                    with lock:
                        state["active"] -= 1

            def describe(self):
                return "slow"

        harvest_captions(_annotations(24), SlowClient(), max_in_flight=3)
        assert 1 <= state["peak"] <= 3

    def test_transcript_replay_is_byte_exact(self):
        annotations = _annotations(4)
        transcript = {
            a.image_ref: f"<caption>recorded caption #{i}é</caption>"
            for i, a in enumerate(annotations)
        }
        results = harvest_captions(annotations, TranscriptClient(transcript))
        for result in results:
            expected = extract_caption_text(transcript[result.image_ref])
            assert result.caption == expected


class TestHttpClient:
    def _serve(self, handler_cls):
        server = HTTPServer(("127.0.0.1", 0), handler_cls)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        return server

    def test_chat_completion_roundtrip(self):
        seen = {}

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                seen["payload"] = body
                reply = {"choices": [{"message": {"content": "<caption>hi</caption>"}}]}
                data = json.dumps(reply).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        server = self._serve(Handler)
        try:
            client = HttpModelClient(
                url=f"http://127.0.0.1:{server.server_port}/v1/chat/completions",
                model="toy",
                timeout=5,
            )
            reply = client.generate("img.jpg", PROMPTS["caption"].text)
        finally:
            server.shutdown()
        assert reply == "<caption>hi</caption>"
        assert seen["payload"]["model"] == "toy"
        content = seen["payload"]["messages"][0]["content"]
        assert any(part.get("type") == "image_url" for part in content)

    def test_retries_then_fails(self):
        calls = {"n": 0}

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                calls["n"] += 1
                self.send_response(500)
                self.end_headers()

            def log_message(self, *args):
                pass

        server = self._serve(Handler)
        try:
            client = HttpModelClient(
                url=f"http://127.0.0.1:{server.server_port}/x",
                model="toy",
                timeout=5,
                retries=2,
                backoff=0.0,
            )
            with pytest.raises(ClientError):
                client.generate("img.jpg", "prompt")
        finally:
            server.shutdown()
        assert calls["n"] == 3


class TestAssemble:
    def test_both_formats_double_the_records(self):
        annotations = _annotations(10)
        captions = harvest_captions(annotations, MockModelClient())
        records, failures = assemble_sft(captions, annotations)
        assert failures == []
        assert len(records) == 20
        kinds = {r.prompt_kind for r in records}
        assert kinds == {"cap_fsu", "reason"}

    def test_records_are_sorted_by_image(self):
        annotations = list(reversed(_annotations(5)))
        captions = harvest_captions(annotations, MockModelClient())
        records, _ = assemble_sft(captions, annotations)
        images = [r.image_ref for r in records]
        assert images == sorted(images)

    def test_targets_self_check_against_the_parser(self):
        annotations = _annotations(8)
        captions = harvest_captions(annotations, MockModelClient())
        records, _ = assemble_sft(captions, annotations)
        for record in records:
            assert reward_fsu_parsable(record.target) == 1
            if record.prompt_kind == "cap_fsu":
                assert reward_caption_fsu_format(record.target) == 1

    def test_missing_caption_is_recorded_and_skipped(self):
        annotations = _annotations(3)
        captions = harvest_captions(annotations[:2], MockModelClient())
        records, failures = assemble_sft(captions, annotations, formats=("cap_fsu",))
        assert len(records) == 2
        assert len(failures) == 1
        assert failures[0].reason == "MissingCaption"

    def test_tag_collision_rejects_the_caption_record(self):
        annotations = _annotations(1)

        class EvilClient(MockModelClient):
            def generate(self, image_ref, prompt_text):
                # No caption block, so the raw reply (with a stray closing
                # tag) becomes the caption and must be rejected.
                return "a sign, and also a stray </caption> literal"

        captions = harvest_captions(annotations, EvilClient())
        records, failures = assemble_sft(captions, annotations)
        assert [r.prompt_kind for r in records] == ["reason"]
        assert failures[0].reason == "TagCollision"

    def test_empty_caption_is_legal(self):
        annotations = _annotations(1)

        class SilentClient(MockModelClient):
            def generate(self, image_ref, prompt_text):
                return ""

        captions = harvest_captions(annotations, SilentClient())
        records, failures = assemble_sft(captions, annotations, formats=("cap_fsu",))
        assert failures == []
        assert records[0].target.startswith("<caption></caption><FSU>")

    def test_unknown_format_is_rejected(self):
        with pytest.raises(ValueError):
            assemble_sft([], [], formats=("caption_only",))


class TestDatasets:
    def test_round_trip(self, tmp_path):
        annotations = _annotations(6)
        captions = harvest_captions(annotations, MockModelClient())
        records, _ = assemble_sft(captions, annotations)
        path = tmp_path / "sft.jsonl"
        write_sft_jsonl(records, path)
        assert read_sft_jsonl(path) == records

    def test_run_iteration_walks_the_rounds(self, tmp_path):
        annotations = _annotations(4)
        state = DistillationState(iteration=0, max_iterations=2)
        client = MockModelClient()
        for expected_round in range(3):
            state = run_iteration(state, annotations, client, tmp_path)
            assert state.dataset_paths[-1].endswith(f"sft_iter{expected_round}.jsonl")
        assert state.iteration == 3
        assert len(state.dataset_paths) == 3
        with pytest.raises(IterationExhausted):
            run_iteration(state, annotations, client, tmp_path)

    def test_two_runs_are_byte_identical(self, tmp_path):
        annotations = _annotations(12)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            run_distillation(annotations, lambda t: MockModelClient(), 2, out)
        for round_index in range(3):
            name = f"sft_iter{round_index}.jsonl"
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_state_records_endpoints_and_failures(self, tmp_path):
        annotations = _annotations(5)
        bad = annotations[2].image_ref
        state = run_distillation(annotations, lambda t: FlakyClient(bad), 0, tmp_path)
        assert state.endpoints == ("flaky",)
        reasons = {f.reason for f in state.failures}
        assert "timeout" in reasons or "MissingCaption" in reasons
        assert any(f.image_ref == bad for f in state.failures)
