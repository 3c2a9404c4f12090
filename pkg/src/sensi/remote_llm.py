"""Provider-agnostic chat-completion adapter and the remote stage backends.

Speaks the common chat contract: POST {endpoint}/chat/completions with
system/user messages (images as data-URI content parts), temperature and
max_tokens; reads choices[0].message.content. Structured replies that
fail to parse get bounded repair retries with the parse error appended;
silent clamping is never applied to judge scores.
"""

from __future__ import annotations

import base64
import json
import os
import time
from typing import Sequence

import httpx

from .frames import (
    DiffParseError,
    DiffValidationError,
    FrameDiff,
    Observation,
    parse_diff,
    render,
)
from .prompts import DIFF_SCHEMA_INSTRUCTIONS, PromptBundle, Stage
from .stages import ActorOutput, ObserverOutput, SenseEvaluation, StageError
from .env import ActionCommand, ActionId

ENDPOINT_VAR = "SENSI_LLM_ENDPOINT"
MODEL_VAR = "SENSI_LLM_MODEL"
KEY_VAR = "SENSI_LLM_KEY"

REPAIR_RETRIES = 2


class RemoteLLMError(Exception):
    pass


class ChatClient:
    def __init__(self, endpoint: str, model: str, api_key: str = "",
                 temperature: float = 0.0, max_tokens: int = 1024,
                 timeout: float = 60.0, retries: int = 3, backoff: float = 0.5):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.retries = retries
        self.backoff = backoff
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers)

    @classmethod
    def from_env(cls, **kw) -> "ChatClient":
        endpoint = os.environ.get(ENDPOINT_VAR)
        model = os.environ.get(MODEL_VAR)
        if not endpoint or not model:
            raise RemoteLLMError(
                f"remote backends need {ENDPOINT_VAR} and {MODEL_VAR} set")
        return cls(endpoint=endpoint, model=model,
                   api_key=os.environ.get(KEY_VAR, ""), **kw)

    def complete(self, system: str, user: str,
                 images: Sequence[bytes] = ()) -> str:
        content: object
        if images:
            content = [{"type": "text", "text": user}]
            for png in images:
                uri = "data:image/png;base64," + base64.b64encode(png).decode()
                content.append({"type": "image_url", "image_url": {"url": uri}})
        else:
            content = user
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": system},
                         {"role": "user", "content": content}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        last_err: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(self.endpoint + "/chat/completions",
                                         json=payload)
                if resp.status_code >= 500:
                    raise RemoteLLMError(f"server error {resp.status_code}")
                if resp.status_code >= 400:
                    raise RemoteLLMError(
                        f"request rejected {resp.status_code}: {resp.text[:200]}")
                data = resp.json()
                return data["choices"][0]["message"]["content"] or ""
            except (httpx.HTTPError, RemoteLLMError, KeyError, IndexError) as e:
                if isinstance(e, RemoteLLMError) and "rejected" in str(e):
                    raise
                last_err = e
                time.sleep(self.backoff * (2 ** attempt))
        raise RemoteLLMError(f"chat completion failed after {self.retries} tries: {last_err}")


def _extract_json(text: str) -> dict:
    text = text.strip()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict):
            return obj
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        obj = json.loads(text[start:end + 1])
        if isinstance(obj, dict):
            return obj
    raise ValueError("reply is not a JSON object")


class RemoteDiffer:
    """Renders both frames to PNG and asks a multimodal model for the diff."""

    def __init__(self, client: ChatClient, scale: int = 10,
                 repair_retries: int = REPAIR_RETRIES):
        self.client = client
        self.scale = scale
        self.repair_retries = repair_retries

    def diff(self, prev: Observation, curr: Observation) -> FrameDiff:
        images = (render(prev, scale=self.scale).to_png_bytes(),
                  render(curr, scale=self.scale).to_png_bytes())
        user = ("The first image is the previous frame, the second the current "
                "frame. Reply with the JSON diff only.")
        raw = self.client.complete(DIFF_SCHEMA_INSTRUCTIONS, user, images=images)
        for attempt in range(self.repair_retries + 1):
            try:
                return parse_diff(raw)
            except (DiffParseError, DiffValidationError) as e:
                if attempt == self.repair_retries:
                    raise StageError(
                        Stage.FRAME_DIFF,
                        "unparseable diff reply after repair retries",
                        raw=raw) from e
                repair = (f"Your previous reply could not be used: {e}. "
                          "Reply again with only the corrected JSON object.")
                raw = self.client.complete(DIFF_SCHEMA_INSTRUCTIONS,
                                           user + "\n\n" + repair, images=images)


class RemoteMetricGen:
    def __init__(self, client: ChatClient):
        self.client = client

    def generate_metric(self, item_name: str) -> str:
        system = ("Given an item the agent needs to learn about a game, write the "
                  "rubric a judge will use to score the learner's grasp from 1 to 10.")
        return self.client.complete(system, item_name).strip()


class RemoteJudge:
    def __init__(self, client: ChatClient, repair_retries: int = REPAIR_RETRIES):
        self.client = client
        self.repair_retries = repair_retries

    def score(self, item_name: str, metric: str, facts: Sequence[str],
              figured_out: Sequence[str]) -> SenseEvaluation:
        system = ("Score the learner's understanding of the learning target "
                  "against the rubric. Reply with JSON: "
                  '{"sense_score": <integer 1-10>, "reasoning": "<short text>"}')
        user = json.dumps({"learning_target": item_name, "metric": metric,
                           "facts": list(facts), "figured_out": list(figured_out)},
                          ensure_ascii=False)
        raw = self.client.complete(system, user)
        for attempt in range(self.repair_retries + 1):
            try:
                obj = _extract_json(raw)
                score = int(obj["sense_score"])
                reasoning = str(obj.get("reasoning", "")).strip()
                if not 1 <= score <= 10:
                    raise ValueError(f"sense_score {score} outside 1..10")
                if not reasoning:
                    raise ValueError("missing reasoning")
                return SenseEvaluation(sense_score=score, reasoning=reasoning)
            except (ValueError, KeyError, TypeError) as e:
                if attempt == self.repair_retries:
                    raise StageError(Stage.SENSE_SCORE,
                                     f"no valid score after retries ({e})",
                                     raw=raw) from e
                raw = self.client.complete(
                    system, user + f"\n\nYour previous reply was invalid ({e}). "
                                   "Reply again with only the JSON object.")


class RemoteObserver:
    def __init__(self, client: ChatClient, repair_retries: int = REPAIR_RETRIES):
        self.client = client
        self.repair_retries = repair_retries

    def observe(self, prompt: PromptBundle) -> ObserverOutput:
        system = ('Update the hypothesis lists. Reply with JSON: '
                  '{"guesses": [..], "figured_out": [..]}')
        raw = self.client.complete(system, prompt.text)
        for attempt in range(self.repair_retries + 1):
            try:
                obj = _extract_json(raw)
                return ObserverOutput(
                    guesses=tuple(str(g) for g in obj["guesses"]),
                    figured_out=tuple(str(k) for k in obj["figured_out"]))
            except (ValueError, KeyError, TypeError) as e:
                if attempt == self.repair_retries:
                    raise StageError(Stage.OBSERVER,
                                     "no valid observer reply after retries",
                                     raw=raw) from e
                raw = self.client.complete(
                    system, prompt.text + f"\n\nYour previous reply was invalid "
                                          f"({e}). Reply again with only the JSON object.")


class RemoteActor:
    def __init__(self, client: ChatClient, repair_retries: int = REPAIR_RETRIES):
        self.client = client
        self.repair_retries = repair_retries

    def act(self, prompt: PromptBundle) -> ActorOutput:
        system = ('Choose one action. Reply with JSON: {"decision_type": '
                  '"GUESS"|"INFORMED", "action_id": "ACTION1".."ACTION7"|"RESET", '
                  '"coords": {"x": <int>, "y": <int>} only for ACTION6}')
        raw = self.client.complete(system, prompt.text)
        for attempt in range(self.repair_retries + 1):
            try:
                obj = _extract_json(raw)
                coords = obj.get("coords")
                action = ActionCommand(
                    action_id=ActionId(obj["action_id"]),
                    coords=(coords["x"], coords["y"]) if coords else None)
                decision = str(obj["decision_type"])
                if decision not in ("GUESS", "INFORMED"):
                    raise ValueError(f"bad decision_type {decision!r}")
                return ActorOutput(decision_type=decision, action=action)
            except (ValueError, KeyError, TypeError) as e:
                if attempt == self.repair_retries:
                    raise StageError(Stage.ACTOR,
                                     "no valid action reply after retries",
                                     raw=raw) from e
                raw = self.client.complete(
                    system, prompt.text + f"\n\nYour previous reply was invalid "
                                          f"({e}). Reply again with only the JSON object.")
