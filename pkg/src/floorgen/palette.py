"""Class palette: id/name/color table with background and structure roles."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, UnknownClassId


@dataclass(frozen=True)
class PaletteEntry:
    class_id: int
    name: str
    rgb: tuple[int, int, int]


@dataclass(frozen=True)
class ClassPalette:
    """Immutable class table.

    Entries carry contiguous ids 0..C-1. Exactly one id is the background
    (outside the building) and one the structure (walls); everything else
    is a room class.
    """

    entries: tuple[PaletteEntry, ...]
    background_id: int
    structure_id: int

    def __post_init__(self):
        ids = [e.class_id for e in self.entries]
        if sorted(ids) != list(range(len(self.entries))):
            raise ConfigError(f"palette ids must be contiguous 0..C-1, got {sorted(ids)}")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError("palette names must be unique")
        if self.background_id == self.structure_id:
            raise ConfigError("background_id and structure_id must differ")
        for role, cid in (("background_id", self.background_id), ("structure_id", self.structure_id)):
            if cid not in ids:
                raise ConfigError(f"{role} {cid} is not a palette class id")
        for e in self.entries:
            if len(e.rgb) != 3 or any(not (0 <= v <= 255) for v in e.rgb):
                raise ConfigError(f"bad rgb for class {e.name!r}: {e.rgb}")

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    @property
    def room_ids(self) -> tuple[int, ...]:
        """Room class ids in ascending order (everything but background/structure)."""
        return tuple(
            e.class_id
            for e in sorted(self.entries, key=lambda e: e.class_id)
            if e.class_id not in (self.background_id, self.structure_id)
        )

    def entry(self, class_id: int) -> PaletteEntry:
        for e in self.entries:
            if e.class_id == class_id:
                return e
        raise UnknownClassId(f"class id {class_id} not in palette")

    def id_for_name(self, name: str) -> int:
        for e in self.entries:
            if e.name == name:
                return e.class_id
        raise UnknownClassId(f"class name {name!r} not in palette")

    def resolve(self, category) -> int:
        """Resolve a category given as id (int) or name (str) to a class id."""
        if isinstance(category, bool):
            raise UnknownClassId(f"bad category {category!r}")
        if isinstance(category, int):
            self.entry(category)
            return category
        if isinstance(category, str):
            return self.id_for_name(category)
        raise UnknownClassId(f"bad category {category!r}")

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"id": e.class_id, "name": e.name, "rgb": list(e.rgb)}
                for e in sorted(self.entries, key=lambda e: e.class_id)
            ],
            "background": self.background_id,
            "structure": self.structure_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassPalette":
        try:
            entries = tuple(
                PaletteEntry(int(e["id"]), str(e["name"]), tuple(int(v) for v in e["rgb"]))
                for e in d["entries"]
            )
            return cls(entries, int(d["background"]), int(d["structure"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad palette config: {exc}") from exc

    def version(self) -> str:
        """Stable short digest of the palette contents."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


def default_palette() -> ClassPalette:
    """Built-in 8-class palette: background, structure, and six room types."""
    spec: Sequence[tuple[int, str, tuple[int, int, int]]] = (
        (0, "background", (240, 240, 240)),
        (1, "structure", (40, 40, 40)),
        (2, "living", (228, 26, 28)),
        (3, "bedroom", (55, 126, 184)),
        (4, "kitchen", (77, 175, 74)),
        (5, "bathroom", (152, 78, 163)),
        (6, "corridor", (255, 127, 0)),
        (7, "storage", (222, 203, 96)),
    )
    return ClassPalette(
        entries=tuple(PaletteEntry(i, n, rgb) for i, n, rgb in spec),
        background_id=0,
        structure_id=1,
    )
