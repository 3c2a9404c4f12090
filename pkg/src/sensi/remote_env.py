"""HTTP client for remote game servers speaking the reset/action protocol.

POST {endpoint}/games/{id}/reset and POST {endpoint}/games/{id}/action
with bearer-token auth; responses carry {frame, score, status, turn}.
Transport failures are retried with exponential backoff; payloads that
violate the observation invariants are fatal (the server is lying, not
flaky).
"""

from __future__ import annotations

import time

import httpx

from .env import ActionCommand, EnvError
from .frames import FrameDiff, GameStatus, Observation, Region


class RetryableEnvError(EnvError):
    """Transient transport failure; the call may be retried."""


class EnvProtocolError(EnvError):
    """The server broke the wire contract; carries a payload excerpt."""

    def __init__(self, message: str, payload: object = None):
        excerpt = repr(payload)[:200] if payload is not None else ""
        super().__init__(f"{message}" + (f"; payload: {excerpt}" if excerpt else ""))


class RemoteEnvironment:
    """Environment handle for one remote game session."""

    def __init__(self, endpoint: str, token: str, game_id: str,
                 retries: int = 3, backoff: float = 0.5, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.game_id = game_id
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {token}"},
        )

    def close(self) -> None:
        self._client.close()

    def hud_regions(self) -> list[Region]:
        return []  # unknown for remote games

    def ground_truth_diff(self) -> FrameDiff | None:
        return None  # remote servers expose no internals

    def reset(self) -> Observation:
        return self._post(f"/games/{self.game_id}/reset", {})

    def step(self, cmd: ActionCommand) -> Observation:
        return self._post(f"/games/{self.game_id}/action", cmd.to_dict())

    def _post(self, path: str, body: dict) -> Observation:
        url = self.endpoint + path
        last_err: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(url, json=body)
            except httpx.HTTPError as e:
                last_err = e
                time.sleep(self.backoff * (2 ** attempt))
                continue
            if resp.status_code >= 500:
                last_err = RetryableEnvError(f"server error {resp.status_code}")
                time.sleep(self.backoff * (2 ** attempt))
                continue
            if resp.status_code >= 400:
                raise EnvProtocolError(f"request rejected ({resp.status_code})",
                                       resp.text)
            return self._validate(resp.json())
        raise RetryableEnvError(
            f"{url} unreachable after {self.retries} attempts: {last_err}")

    def _validate(self, payload: dict) -> Observation:
        try:
            frame = payload["frame"]
            if frame and isinstance(frame[0][0], int):
                frame = [frame]  # single-layer servers may send HxW
            return Observation(
                frame=frame,
                score=payload["score"],
                status=GameStatus(payload["status"]),
                turn_index=payload.get("turn", 0),
            )
        except (KeyError, TypeError, IndexError) as e:
            raise EnvProtocolError(f"malformed observation ({e})", payload) from e
        except ValueError as e:
            raise EnvProtocolError(f"observation violates invariants ({e})",
                                   {k: payload.get(k) for k in ("score", "status", "turn")}) from e


def remote_connect(endpoint: str, credentials: str, game_id: str,
                   retries: int = 3, backoff: float = 0.5) -> RemoteEnvironment:
    return RemoteEnvironment(endpoint, credentials, game_id,
                             retries=retries, backoff=backoff)
