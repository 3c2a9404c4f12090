"""Remote env client and chat-completion backends against mock servers."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from sensi.env import ActionCommand, ActionId, KeyQuest
from sensi.frames import FrameDiff, GameStatus
from sensi.remote_env import EnvProtocolError, RetryableEnvError, remote_connect
from sensi.remote_llm import ChatClient, RemoteDiffer, RemoteJudge, RemoteObserver
from sensi.stages import StageError


class _MockHandler(BaseHTTPRequestHandler):
    def log_message(self, *a):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        body = json.loads(self.rfile.read(length)) if length else {}
        self.server.requests.append((self.path, body, dict(self.headers)))
        script = self.server.script
        status, payload = script[min(len(self.server.requests) - 1, len(script) - 1)]
        raw = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)


@pytest.fixture()
def mock_server():
    servers = []

    def make(script):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _MockHandler)
        server.script = script
        server.requests = []
        threading.Thread(target=server.serve_forever, daemon=True).start()
        servers.append(server)
        return server, f"http://127.0.0.1:{server.server_address[1]}"

    yield make
    for s in servers:
        s.shutdown()


def obs_payload(score=0, status="NOT_FINISHED", turn=0):
    return {"frame": [[[0, 1], [2, 3]]], "score": score, "status": status,
            "turn": turn}


class TestRemoteEnv:
    def test_loopback_reset_and_step(self, mock_server):
        server, url = mock_server([(200, obs_payload()),
                                   (200, obs_payload(score=1, turn=1))])
        env = remote_connect(url, "tok-123", "ls20")
        obs = env.reset()
        assert obs.status == GameStatus.NOT_FINISHED
        obs2 = env.step(ActionCommand(ActionId.ACTION1))
        assert obs2.score == 1
        paths = [p for p, _, _ in server.requests]
        assert paths == ["/games/ls20/reset", "/games/ls20/action"]
        assert server.requests[1][1] == {"action_id": "ACTION1"}
        assert server.requests[0][2]["Authorization"] == "Bearer tok-123"
        env.close()

    def test_action6_sends_coords(self, mock_server):
        server, url = mock_server([(200, obs_payload())])
        env = remote_connect(url, "t", "g")
        env.step(ActionCommand(ActionId.ACTION6, coords=(3, 4)))
        assert server.requests[0][1]["coords"] == {"x": 3, "y": 4}
        env.close()

    def test_score_over_bound_is_fatal(self, mock_server):
        _, url = mock_server([(200, obs_payload(score=300))])
        env = remote_connect(url, "t", "g")
        with pytest.raises(EnvProtocolError, match="invariant"):
            env.reset()
        env.close()

    def test_cell_over_15_is_fatal(self, mock_server):
        bad = obs_payload()
        bad["frame"] = [[[16, 0], [0, 0]]]
        _, url = mock_server([(200, bad)])
        env = remote_connect(url, "t", "g")
        with pytest.raises(EnvProtocolError):
            env.reset()
        env.close()

    def test_server_errors_retried_then_succeed(self, mock_server):
        server, url = mock_server([(500, {}), (500, {}), (200, obs_payload())])
        env = remote_connect(url, "t", "g")
        env.backoff = 0.01
        obs = env.reset()
        assert obs.score == 0
        assert len(server.requests) == 3
        env.close()

    def test_unreachable_raises_retryable_after_attempts(self):
        env = remote_connect("http://127.0.0.1:9", "t", "g", backoff=0.01)
        with pytest.raises(RetryableEnvError, match="3 attempts"):
            env.reset()
        env.close()

    def test_ground_truth_unavailable(self, mock_server):
        _, url = mock_server([(200, obs_payload())])
        env = remote_connect(url, "t", "g")
        assert env.ground_truth_diff() is None
        env.close()


def chat_reply(text):
    return {"choices": [{"message": {"content": text}}]}


class TestChatBackends:
    def test_differ_parses_fixture_echo(self, mock_server):
        env = KeyQuest()
        prev = env.reset()
        curr = env.step(ActionCommand(ActionId.ACTION4))
        from sensi.backends import ProgrammaticDiffer

        expected = ProgrammaticDiffer(env.hud_regions()).diff(prev, curr)
        server, url = mock_server([(200, chat_reply(expected.to_json()))])
        differ = RemoteDiffer(ChatClient(url, "test-model"))
        out = differ.diff(prev, curr)
        assert out == expected
        # images attached as data URIs
        content = server.requests[0][1]["messages"][1]["content"]
        assert sum(1 for part in content if part["type"] == "image_url") == 2

    def test_differ_repairs_then_fails_loud(self, mock_server):
        env = KeyQuest()
        prev = env.reset()
        server, url = mock_server([(200, chat_reply("not json")),
                                   (200, chat_reply("{}")),
                                   (200, chat_reply("still bad"))])
        differ = RemoteDiffer(ChatClient(url, "m"))
        with pytest.raises(StageError, match="repair") as err:
            differ.diff(prev, prev)
        assert err.value.raw == "still bad"
        assert len(server.requests) == 3  # initial + 2 repairs

    def test_judge_out_of_range_retried_not_clamped(self, mock_server):
        server, url = mock_server([
            (200, chat_reply('{"sense_score": 11, "reasoning": "too sure"}')),
            (200, chat_reply('{"sense_score": 9, "reasoning": "ok"}')),
        ])
        judge = RemoteJudge(ChatClient(url, "m"))
        ev = judge.score("item", "metric", [], [])
        assert ev.sense_score == 9
        assert len(server.requests) == 2

    def test_judge_gives_up_after_retries(self, mock_server):
        _, url = mock_server([(200, chat_reply('{"sense_score": 11, "reasoning": "x"}'))])
        judge = RemoteJudge(ChatClient(url, "m"))
        with pytest.raises(StageError, match="no valid score"):
            judge.score("item", "metric", [], [])

    def test_observer_schema_repair(self, mock_server):
        server, url = mock_server([
            (200, chat_reply("free prose, no json")),
            (200, chat_reply('{"guesses": ["g"], "figured_out": []}')),
        ])
        from sensi.prompts import Stage, assemble_prompt
        from sensi.store import EpistemicState

        snap = EpistemicState(turn_index=1, facts=(), guesses=(), figured_out=(),
                              active_item=None, sense_score=None,
                              sense_reasoning=None)
        prompt = assemble_prompt(Stage.OBSERVER, snap, obs=KeyQuest().reset(),
                                 diff=FrameDiff())
        out = RemoteObserver(ChatClient(url, "m")).observe(prompt)
        assert out.guesses == ("g",)

    def test_env_var_configuration(self, monkeypatch, mock_server):
        _, url = mock_server([(200, chat_reply("ok"))])
        monkeypatch.setenv("SENSI_LLM_ENDPOINT", url)
        monkeypatch.setenv("SENSI_LLM_MODEL", "model-x")
        monkeypatch.setenv("SENSI_LLM_KEY", "secret")
        client = ChatClient.from_env()
        assert client.complete("sys", "hi") == "ok"

    def test_missing_env_vars_raise(self, monkeypatch):
        from sensi.remote_llm import RemoteLLMError

        monkeypatch.delenv("SENSI_LLM_ENDPOINT", raising=False)
        monkeypatch.delenv("SENSI_LLM_MODEL", raising=False)
        with pytest.raises(RemoteLLMError, match="SENSI_LLM_ENDPOINT"):
            ChatClient.from_env()
