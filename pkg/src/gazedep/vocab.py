from __future__ import annotations

from typing import Hashable, Iterable

UNK = "<unk>"
PAD = "<pad>"


class Vocab:
    """Insertion-ordered string index with optional PAD (id 0) and UNK entries."""

    def __init__(self, items: Iterable[str] = (), unk: bool = True, pad: bool = False):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        self.has_pad = pad
        self.has_unk = unk
        if pad:
            self._add(PAD)
        if unk:
            self._add(UNK)
        for item in items:
            self._add(item)

    def _add(self, item: str) -> int:
        idx = self.stoi.get(item)
        if idx is None:
            idx = self.stoi[item] = len(self.itos)
            self.itos.append(item)
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, item: Hashable) -> bool:
        return item in self.stoi

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.to_dict() == other.to_dict()

    @property
    def unk_id(self) -> int:
        if not self.has_unk:
            raise KeyError("vocabulary has no UNK entry")
        return self.stoi[UNK]

    @property
    def special_ids(self) -> list[int]:
        return [self.stoi[s] for s in (PAD, UNK) if s in self.stoi and self._is_special(s)]

    def _is_special(self, s: str) -> bool:
        return (s == PAD and self.has_pad) or (s == UNK and self.has_unk)

    def index(self, item: str) -> int:
        idx = self.stoi.get(item)
        if idx is None:
            if not self.has_unk:
                raise KeyError(item)
            return self.stoi[UNK]
        return idx

    def encode(self, items: Iterable[str]) -> list[int]:
        return [self.index(i) for i in items]

    def to_dict(self) -> dict:
        return {"itos": list(self.itos), "unk": self.has_unk, "pad": self.has_pad}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        v = cls(unk=False, pad=False)
        v.has_unk, v.has_pad = d["unk"], d["pad"]
        for item in d["itos"]:
            v._add(item)
        return v

    def __repr__(self) -> str:
        return f"Vocab(size={len(self)})"
