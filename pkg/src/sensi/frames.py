"""Game frames, palette rendering, and deterministic frame differencing.

Frames are small integer grids (layers x height x width, values 0-15).
The differ decomposes each frame into 4-connected same-color components,
matches them across a pair of frames, and emits a structured diff of
added / removed / moved objects plus per-region UI changes. The diff has
a canonical JSON form with fixed key order so it can be hashed, replayed
and compared bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

MAX_COLOR = 15
MAX_SCORE = 254
MAX_DIM = 64

# Fixed 16-entry color table (indices 0-15).
PALETTE: tuple[tuple[int, int, int], ...] = (
    (0, 0, 0),        # 0 black (background)
    (0, 116, 217),    # 1 blue
    (255, 65, 54),    # 2 red
    (46, 204, 64),    # 3 green
    (255, 220, 0),    # 4 yellow
    (170, 170, 170),  # 5 grey
    (240, 18, 190),   # 6 fuchsia
    (255, 133, 27),   # 7 orange
    (127, 219, 255),  # 8 azure
    (135, 12, 37),    # 9 maroon
    (255, 255, 255),  # 10 white
    (57, 204, 204),   # 11 teal
    (1, 255, 112),    # 12 lime
    (177, 13, 201),   # 13 purple
    (255, 153, 153),  # 14 pink
    (102, 51, 0),     # 15 brown
)


class GameStatus(str, Enum):
    NOT_PLAYED = "NOT_PLAYED"
    NOT_FINISHED = "NOT_FINISHED"
    GAME_OVER = "GAME_OVER"
    WIN = "WIN"


class FrameShapeError(ValueError):
    """Raised when two frames that must share dimensions do not."""


class DiffParseError(ValueError):
    """Malformed diff text; carries the character position when known."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class DiffValidationError(ValueError):
    """Diff text parsed but violates the schema's semantic constraints."""


Frame = tuple[tuple[tuple[int, ...], ...], ...]


def _freeze_frame(frame: Sequence[Sequence[Sequence[int]]]) -> Frame:
    return tuple(tuple(tuple(int(c) for c in row) for row in layer) for layer in frame)


@dataclass(frozen=True)
class Observation:
    """One rendered game state: frame tensor, scalar score, status code."""

    frame: Frame
    score: int
    status: GameStatus
    turn_index: int

    def __post_init__(self):
        object.__setattr__(self, "frame", _freeze_frame(self.frame))
        if not self.frame or not self.frame[0] or not self.frame[0][0]:
            raise ValueError("frame must have at least one layer, row and column")
        h, w = len(self.frame[0]), len(self.frame[0][0])
        if h > MAX_DIM or w > MAX_DIM:
            raise ValueError(f"frame dims {h}x{w} exceed {MAX_DIM}x{MAX_DIM}")
        for layer in self.frame:
            if len(layer) != h or any(len(row) != w for row in layer):
                raise ValueError("ragged frame: all layers must be HxW")
            for row in layer:
                for c in row:
                    if not 0 <= c <= MAX_COLOR:
                        raise ValueError(f"cell value {c} outside [0,{MAX_COLOR}]")
        if not 0 <= self.score <= MAX_SCORE:
            raise ValueError(f"score {self.score} outside [0,{MAX_SCORE}]")
        if self.turn_index < 0:
            raise ValueError("turn_index must be non-negative")
        if not isinstance(self.status, GameStatus):
            object.__setattr__(self, "status", GameStatus(self.status))

    @property
    def layers(self) -> int:
        return len(self.frame)

    @property
    def height(self) -> int:
        return len(self.frame[0])

    @property
    def width(self) -> int:
        return len(self.frame[0][0])

    def to_dict(self) -> dict:
        return {
            "frame": [[list(row) for row in layer] for layer in self.frame],
            "score": self.score,
            "status": self.status.value,
            "turn_index": self.turn_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        return cls(
            frame=d["frame"],
            score=d["score"],
            status=GameStatus(d["status"]),
            turn_index=d["turn_index"],
        )

    def frame_text(self) -> str:
        """Hex-digit text rendering of the frame, one line per row per layer."""
        chunks = []
        for i, layer in enumerate(self.frame):
            if self.layers > 1:
                chunks.append(f"layer {i}:")
            chunks.extend("".join(f"{c:x}" for c in row) for row in layer)
        return "\n".join(chunks)


@dataclass(frozen=True)
class Region:
    """Named inclusive rectangle, used to mask HUD areas out of object detection."""

    name: str
    top: int
    left: int
    bottom: int
    right: int

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right


@dataclass(frozen=True)
class RenderedImage:
    width_px: int
    height_px: int
    pixels: tuple[tuple[int, int, int], ...]  # row-major RGB
    scale: int

    def to_png_bytes(self) -> bytes:
        from PIL import Image

        img = Image.new("RGB", (self.width_px, self.height_px))
        img.putdata(list(self.pixels))
        import io

        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()


def render(obs: Observation, palette: Sequence[tuple[int, int, int]] = PALETTE,
           scale: int = 10) -> RenderedImage:
    """Expand each grid cell into a scale x scale block of its palette color.

    Layers above layer 0 overdraw lower layers wherever their cell value is
    nonzero.
    """
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if len(palette) != 16:
        raise ValueError("palette must have exactly 16 entries")
    h, w = obs.height, obs.width
    flat = [list(obs.frame[0][r]) for r in range(h)]
    for layer in obs.frame[1:]:
        for r in range(h):
            for c in range(w):
                if layer[r][c] != 0:
                    flat[r][c] = layer[r][c]
    pixels: list[tuple[int, int, int]] = []
    for r in range(h):
        row_px = [palette[flat[r][c]] for c in range(w) for _ in range(scale)]
        for _ in range(scale):
            pixels.extend(row_px)
    return RenderedImage(width_px=w * scale, height_px=h * scale,
                         pixels=tuple(pixels), scale=scale)


# ---------------------------------------------------------------------------
# Diff data model


def _bbox_of(cells: Iterable[tuple[int, int, int]]) -> tuple[int, int, int, int]:
    rows = [r for _, r, _ in cells]
    cols = [c for _, _, c in cells]
    return (min(rows), min(cols), max(rows), max(cols))


@dataclass(frozen=True)
class DiffObject:
    """A 4-connected same-color component, as seen in one frame."""

    color: int
    cells: frozenset[tuple[int, int, int]]  # (layer, row, col)
    bbox: tuple[int, int, int, int]  # (top, left, bottom, right)
    cell_count: int

    @classmethod
    def from_cells(cls, color: int, cells: Iterable[tuple[int, int, int]]) -> "DiffObject":
        cs = frozenset(tuple(c) for c in cells)
        return cls(color=color, cells=cs, bbox=_bbox_of(cs), cell_count=len(cs))

    def validate(self) -> None:
        if not 0 <= self.color <= MAX_COLOR:
            raise DiffValidationError(f"object color {self.color} outside [0,{MAX_COLOR}]")
        if self.cell_count < 1:
            raise DiffValidationError("object cell_count must be >= 1")
        if self.cell_count != len(self.cells):
            raise DiffValidationError("cell_count does not match cells")
        if self.bbox != _bbox_of(self.cells):
            raise DiffValidationError("bbox does not tightly bound cells")

    def shape_key(self) -> tuple:
        """Translation-invariant normal form: layer, color, offsets from bbox top-left."""
        layer = next(iter(self.cells))[0]
        top, left, _, _ = self.bbox
        offsets = tuple(sorted((r - top, c - left) for _, r, c in self.cells))
        return (layer, self.color, self.cell_count, offsets)

    def to_dict(self) -> dict:
        return {
            "color": self.color,
            "cells": [list(c) for c in sorted(self.cells)],
            "bbox": list(self.bbox),
            "cell_count": self.cell_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiffObject":
        cells = frozenset((int(l), int(r), int(c)) for l, r, c in d["cells"])
        obj = cls(color=d["color"], cells=cells, bbox=tuple(d["bbox"]),
                  cell_count=d["cell_count"])
        obj.validate()
        return obj


@dataclass(frozen=True)
class MovedObject:
    """A component present in both frames at a nonzero translation."""

    prev_bbox: tuple[int, int, int, int]
    new_bbox: tuple[int, int, int, int]
    color: int
    cell_count: int

    @property
    def displacement(self) -> tuple[int, int]:
        return (self.new_bbox[0] - self.prev_bbox[0],
                self.new_bbox[1] - self.prev_bbox[1])

    def validate(self) -> None:
        if not 0 <= self.color <= MAX_COLOR:
            raise DiffValidationError(f"moved color {self.color} outside [0,{MAX_COLOR}]")
        if self.cell_count < 1:
            raise DiffValidationError("moved cell_count must be >= 1")
        for box in (self.prev_bbox, self.new_bbox):
            if len(box) != 4 or box[0] > box[2] or box[1] > box[3]:
                raise DiffValidationError(f"malformed bbox {box}")
        if self.displacement == (0, 0):
            raise DiffValidationError("moved object with zero displacement")

    def to_dict(self) -> dict:
        return {
            "prev_bbox": list(self.prev_bbox),
            "new_bbox": list(self.new_bbox),
            "color": self.color,
            "cell_count": self.cell_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MovedObject":
        obj = cls(prev_bbox=tuple(d["prev_bbox"]), new_bbox=tuple(d["new_bbox"]),
                  color=d["color"], cell_count=d["cell_count"])
        obj.validate()
        return obj


@dataclass(frozen=True)
class RegionChange:
    region_name: str
    description: str

    def to_dict(self) -> dict:
        return {"region_name": self.region_name, "description": self.description}

    @classmethod
    def from_dict(cls, d: dict) -> "RegionChange":
        if not isinstance(d.get("region_name"), str) or not isinstance(d.get("description"), str):
            raise DiffValidationError("region change needs string region_name and description")
        return cls(region_name=d["region_name"], description=d["description"])


@dataclass(frozen=True)
class FrameDiff:
    """Structured change record between two consecutive frames."""

    added: tuple[DiffObject, ...] = ()
    removed: tuple[DiffObject, ...] = ()
    moved: tuple[MovedObject, ...] = ()
    ui_changes: tuple[RegionChange, ...] = ()
    summary: str = "no change"

    @property
    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.moved or self.ui_changes)

    def to_dict(self) -> dict:
        # Fixed key order: added, removed, moved, ui_changes, summary.
        return {
            "added": [o.to_dict() for o in self.added],
            "removed": [o.to_dict() for o in self.removed],
            "moved": [m.to_dict() for m in self.moved],
            "ui_changes": [u.to_dict() for u in self.ui_changes],
            "summary": self.summary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), ensure_ascii=False)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


REQUIRED_DIFF_FIELDS = ("added", "removed", "moved", "ui_changes", "summary")


def parse_diff(text: str) -> FrameDiff:
    """Parse canonical diff JSON; round-trips with FrameDiff.to_json."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise DiffParseError(f"malformed diff text: {e.msg} at position {e.pos}", e.pos) from e
    if not isinstance(raw, dict):
        raise DiffValidationError("diff must be a JSON object")
    for key in REQUIRED_DIFF_FIELDS:
        if key not in raw:
            raise DiffValidationError(f"required {key} field missing")
    if not isinstance(raw["summary"], str):
        raise DiffValidationError("summary must be a string")
    for key in ("added", "removed", "moved", "ui_changes"):
        if not isinstance(raw[key], list):
            raise DiffValidationError(f"{key} must be a list")
    try:
        diff = FrameDiff(
            added=tuple(DiffObject.from_dict(d) for d in raw["added"]),
            removed=tuple(DiffObject.from_dict(d) for d in raw["removed"]),
            moved=tuple(MovedObject.from_dict(d) for d in raw["moved"]),
            ui_changes=tuple(RegionChange.from_dict(d) for d in raw["ui_changes"]),
            summary=raw["summary"],
        )
    except DiffValidationError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise DiffValidationError(f"diff entry malformed: {e}") from e
    return diff


def compose_summary(n_added: int, n_removed: int, n_moved: int, n_ui: int,
                    score_change: tuple[int, int] | None = None,
                    status_change: tuple[str, str] | None = None) -> str:
    """Deterministic summary template over the diff counts."""
    if n_added or n_removed or n_moved or n_ui:
        base = (f"{n_added} added, {n_removed} removed, {n_moved} moved, "
                f"{n_ui} ui change(s)")
    else:
        base = "no change"
    parts = [base]
    if score_change and score_change[0] != score_change[1]:
        prev, curr = score_change
        suffix = " (level transition)" if curr > prev else ""
        parts.append(f"score {prev}->{curr}{suffix}")
    if status_change and status_change[0] != status_change[1]:
        parts.append(f"status {status_change[0]}->{status_change[1]}")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Programmatic differ


def _components(frame: Frame, hud_regions: Sequence[Region],
                background: int) -> list[DiffObject]:
    """4-connected same-color components per layer, outside HUD regions."""
    comps: list[DiffObject] = []
    h, w = len(frame[0]), len(frame[0][0])
    for li, layer in enumerate(frame):
        seen = [[False] * w for _ in range(h)]
        for r in range(h):
            for c in range(w):
                color = layer[r][c]
                if seen[r][c] or color == background:
                    continue
                if any(reg.contains(r, c) for reg in hud_regions):
                    seen[r][c] = True
                    continue
                stack = [(r, c)]
                seen[r][c] = True
                cells = []
                while stack:
                    cr, cc = stack.pop()
                    cells.append((li, cr, cc))
                    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                        nr, nc = cr + dr, cc + dc
                        if (0 <= nr < h and 0 <= nc < w and not seen[nr][nc]
                                and layer[nr][nc] == color
                                and not any(reg.contains(nr, nc) for reg in hud_regions)):
                            seen[nr][nc] = True
                            stack.append((nr, nc))
                comps.append(DiffObject.from_cells(color, cells))
    return comps


def _match_components(prev_comps: list[DiffObject], curr_comps: list[DiffObject]
                      ) -> tuple[list[MovedObject], list[DiffObject], list[DiffObject]]:
    """Pair same-shape components across frames; returns (moved, removed, added).

    Pairing is greedy within each (layer, color, count, shape) group, smallest
    Manhattan displacement first, ties broken by row-major bbox top-left of the
    previous then current component. Zero-displacement pairs are unchanged and
    dropped from the diff.
    """
    groups: dict[tuple, tuple[list[DiffObject], list[DiffObject]]] = {}
    for comp in prev_comps:
        groups.setdefault(comp.shape_key(), ([], []))[0].append(comp)
    for comp in curr_comps:
        groups.setdefault(comp.shape_key(), ([], []))[1].append(comp)

    moved: list[MovedObject] = []
    removed: list[DiffObject] = []
    added: list[DiffObject] = []
    for _, (ps, cs) in sorted(groups.items()):
        candidates = []
        for i, p in enumerate(ps):
            for j, c in enumerate(cs):
                dr = c.bbox[0] - p.bbox[0]
                dc = c.bbox[1] - p.bbox[1]
                candidates.append((abs(dr) + abs(dc), (p.bbox[0], p.bbox[1]),
                                   (c.bbox[0], c.bbox[1]), i, j))
        used_p: set[int] = set()
        used_c: set[int] = set()
        for _, _, _, i, j in sorted(candidates):
            if i in used_p or j in used_c:
                continue
            used_p.add(i)
            used_c.add(j)
            p, c = ps[i], cs[j]
            if c.bbox[:2] != p.bbox[:2]:
                moved.append(MovedObject(prev_bbox=p.bbox, new_bbox=c.bbox,
                                         color=p.color, cell_count=p.cell_count))
        removed.extend(p for i, p in enumerate(ps) if i not in used_p)
        added.extend(c for j, c in enumerate(cs) if j not in used_c)

    sort_obj = lambda o: (o.bbox, o.color)
    moved.sort(key=lambda m: (m.prev_bbox, m.new_bbox, m.color))
    removed.sort(key=sort_obj)
    added.sort(key=sort_obj)
    return moved, removed, added


def _region_changes(prev: Frame, curr: Frame,
                    hud_regions: Sequence[Region]) -> list[RegionChange]:
    changes: list[RegionChange] = []
    h, w = len(prev[0]), len(prev[0][0])
    for reg in hud_regions:
        diffs = []
        for li in range(len(prev)):
            for r in range(max(0, reg.top), min(h, reg.bottom + 1)):
                for c in range(max(0, reg.left), min(w, reg.right + 1)):
                    if prev[li][r][c] != curr[li][r][c]:
                        diffs.append(f"({li},{r},{c}) {prev[li][r][c]}->{curr[li][r][c]}")
        if diffs:
            changes.append(RegionChange(region_name=reg.name,
                                        description="; ".join(diffs)))
    return changes


def programmatic_diff(prev: Observation, curr: Observation,
                      hud_regions: Sequence[Region] = (),
                      background: int = 0) -> FrameDiff:
    """Deterministic structured diff between two same-shaped observations."""
    if (prev.layers, prev.height, prev.width) != (curr.layers, curr.height, curr.width):
        raise FrameShapeError(
            f"frame shape mismatch: {prev.layers}x{prev.height}x{prev.width} "
            f"vs {curr.layers}x{curr.height}x{curr.width}")
    prev_comps = _components(prev.frame, hud_regions, background)
    curr_comps = _components(curr.frame, hud_regions, background)
    # Exact-equal components are unchanged; skip the matcher for them.
    prev_keyed = {(c.color, c.cells): c for c in prev_comps}
    curr_keyed = {(c.color, c.cells): c for c in curr_comps}
    shared = prev_keyed.keys() & curr_keyed.keys()
    moved, removed, added = _match_components(
        [c for k, c in prev_keyed.items() if k not in shared],
        [c for k, c in curr_keyed.items() if k not in shared])
    ui = _region_changes(prev.frame, curr.frame, hud_regions)
    summary = compose_summary(len(added), len(removed), len(moved), len(ui),
                              score_change=(prev.score, curr.score),
                              status_change=(prev.status.value, curr.status.value))
    return FrameDiff(added=tuple(added), removed=tuple(removed), moved=tuple(moved),
                     ui_changes=tuple(ui), summary=summary)
