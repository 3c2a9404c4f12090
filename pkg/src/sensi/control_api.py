"""Local read/steer HTTP API over a store and (optionally) a live run.

GET endpoints read committed store state; the only write path is the
edit queue, applied by the run's single writer at turn boundaries.
/events is a server-sent-event stream emitting one event per committed
turn. Binds loopback by default; set SENSI_CONTROL_TOKEN to require a
bearer token.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .audit import audit_run
from .curriculum import curriculum_timeline
from .orchestrator import RunController
from .store import ExternalEdit, Store, StoreError

TOKEN_VAR = "SENSI_CONTROL_TOKEN"

CONTENT_TYPES = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".svg": "image/svg+xml",
                 ".json": "application/json", ".map": "application/json"}


class ControlServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, bind, db_path: str, controller: RunController | None,
                 ui_dir: str | None, token: str | None):
        super().__init__(bind, ControlHandler)
        self.db_path = db_path
        self.controller = controller
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.token = token


class ControlHandler(BaseHTTPRequestHandler):
    server: ControlServer

    def log_message(self, *args):  # quiet by default
        pass

    # -- helpers ---------------------------------------------------------------

    def _authorized(self) -> bool:
        token = self.server.token
        if not token:
            return True
        return self.headers.get("Authorization") == f"Bearer {token}"

    def _json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _store(self) -> Store:
        return Store(self.server.db_path, read_only=True)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValueError("empty body")
        payload = json.loads(raw)
        if not isinstance(payload, dict):
            raise ValueError("body must be a JSON object")
        return payload

    # -- GET ---------------------------------------------------------------------

    def do_GET(self):
        if not self._authorized():
            return self._json(401, {"error": "missing or bad bearer token"})
        url = urlparse(self.path)
        route = url.path.rstrip("/") or "/"
        try:
            if route == "/state":
                store = self._store()
                try:
                    return self._json(200, store.snapshot_epistemic_state().to_dict())
                finally:
                    store.close()
            if route == "/timeline":
                store = self._store()
                try:
                    points = curriculum_timeline(store)
                    items = {i.item_id: i.item_name for i in store.items()}
                    threshold = 8
                    for i in store.items():
                        threshold = i.threshold
                        break
                    return self._json(200, {
                        "threshold": threshold,
                        "items": {str(k): v for k, v in items.items()},
                        "points": [{"turn_index": p.turn_index, "item_id": p.item_id,
                                    "phi": p.sense_score, "state": p.state}
                                   for p in points]})
                finally:
                    store.close()
            if route == "/turns":
                since = int(parse_qs(url.query).get("since", ["0"])[0])
                store = self._store()
                try:
                    records = store.turn_records(since=since)
                    return self._json(200, [{
                        "turn_index": r.turn_index,
                        "action_id": r.action.action_id.value,
                        "decision_type": r.decision_type,
                        "diff_summary": _diff_summary(r.diff_text),
                        "sense_score": r.sense_score,
                        "sense_reasoning": r.sense_reasoning,
                        "score": r.score, "status": r.status.value,
                        "active_item_id": r.active_item_id,
                        "prompt_hash": r.prompt_hash,
                    } for r in records])
                finally:
                    store.close()
            if route == "/audit":
                store = self._store()
                try:
                    report = audit_run(None, store)
                    payload = report.to_dict()
                    payload["provenance_graph"] = report.provenance_graph()
                    return self._json(200, payload)
                finally:
                    store.close()
            if route == "/events":
                return self._stream_events()
            return self._serve_static(route)
        except BrokenPipeError:
            pass
        except Exception as e:  # surface, don't kill the handler thread
            try:
                self._json(500, {"error": str(e)})
            except Exception:
                pass

    def _serve_static(self, route: str):
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            return self._json(404, {"error": f"no route {route}"})
        rel = "index.html" if route == "/" else route.lstrip("/")
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            return self._json(404, {"error": f"no route {route}"})
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _stream_events(self):
        controller = self.server.controller
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        if controller is None:
            self.wfile.write(b": no live run\n\n")
            self.wfile.flush()
            return
        sub = controller.subscribe()
        try:
            while True:
                try:
                    event = sub.get(timeout=1.0)
                except queue.Empty:
                    self.wfile.write(b": ping\n\n")
                    self.wfile.flush()
                    continue
                data = json.dumps(event)
                self.wfile.write(
                    f"id: {event.get('turn_index', 0)}\nevent: turn\n"
                    f"data: {data}\n\n".encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            controller.unsubscribe(sub)

    # -- POST ----------------------------------------------------------------------

    def do_POST(self):
        if not self._authorized():
            return self._json(401, {"error": "missing or bad bearer token"})
        route = urlparse(self.path).path.rstrip("/")
        controller = self.server.controller
        try:
            if route == "/edit":
                try:
                    body = self._read_body()
                    edit = ExternalEdit(kind=body.get("kind", ""),
                                        payload=body.get("payload", {}))
                except (ValueError, StoreError) as e:
                    return self._json(400, {"error": str(e)})
                try:
                    _validate_edit_refs(self.server.db_path, edit)
                except StoreError as e:
                    return self._json(404, {"error": str(e)})
                writer = Store(self.server.db_path)
                try:
                    if controller is not None and controller.run_active:
                        edit_id = writer.enqueue_edit(edit)
                        apply_at = controller.current_turn + 1
                        return self._json(200, {"edit_id": edit_id,
                                                "apply_at_turn": apply_at,
                                                "status": "pending"})
                    receipt = writer.apply_external_edit(edit)
                    return self._json(200, {"edit_id": receipt["audit_id"],
                                            "apply_at_turn": None,
                                            "status": "applied"})
                finally:
                    writer.close()
            if route in ("/run/pause", "/run/resume", "/run/stop"):
                if controller is None:
                    return self._json(404, {"error": "no live run attached"})
                action = route.rsplit("/", 1)[1]
                getattr(controller, action)()
                return self._json(200, {"status": action,
                                        "paused": controller.paused,
                                        "stopped": controller.stopped})
            return self._json(404, {"error": f"no route {route}"})
        except BrokenPipeError:
            pass
        except Exception as e:
            try:
                self._json(500, {"error": str(e)})
            except Exception:
                pass


def _diff_summary(diff_text: str | None) -> str:
    if not diff_text:
        return ""
    try:
        return json.loads(diff_text).get("summary", "")
    except json.JSONDecodeError:
        return ""


def _validate_edit_refs(db_path: str, edit: ExternalEdit) -> None:
    """Reject edits naming rows that do not exist, before queueing them."""
    referenced: list[int] = []
    if edit.kind in ("delete_item", "set_threshold"):
        referenced = [edit.payload.get("item_id")]
    elif edit.kind == "reorder_items":
        referenced = list(edit.payload.get("item_ids", []))
    if not referenced:
        return
    store = Store(db_path, read_only=True)
    try:
        known = {i.item_id for i in store.items()}
    finally:
        store.close()
    for item_id in referenced:
        if item_id not in known:
            raise StoreError(f"no learning item with id {item_id}")


def serve_control_api(db_path: str, controller: RunController | None = None,
                      bind: tuple[str, int] = ("127.0.0.1", 0),
                      ui_dir: str | None = None) -> ControlServer:
    """Start the API server on a background thread; returns the server handle."""
    token = os.environ.get(TOKEN_VAR) or None
    server = ControlServer(bind, db_path=str(db_path), controller=controller,
                           ui_dir=ui_dir, token=token)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server
