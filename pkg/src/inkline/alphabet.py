"""Character inventory shared by training, decoding, and checkpoints.

The blank symbol used by the sequence loss is always the last logit
index and is not part of the character list.
"""

from __future__ import annotations

from typing import Iterable


class Alphabet:
    def __init__(self, chars: Iterable[str]):
        self.chars: tuple[str, ...] = tuple(chars)
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("duplicate characters in alphabet")
        self._index = {c: i for i, c in enumerate(self.chars)}

    @staticmethod
    def from_texts(texts: Iterable[str]) -> "Alphabet":
        seen = set()
        for t in texts:
            seen.update(t)
        return Alphabet(sorted(seen))

    @property
    def blank(self) -> int:
        return len(self.chars)

    @property
    def size(self) -> int:
        """Logit count: characters plus the blank."""
        return len(self.chars) + 1

    def encode(self, text: str) -> list[int]:
        unknown = sorted({c for c in text if c not in self._index})
        if unknown:
            raise KeyError(f"characters not in alphabet: {''.join(unknown)!r}")
        return [self._index[c] for c in text]

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(self.chars[i] for i in ids)

    def __len__(self) -> int:
        return len(self.chars)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.chars == other.chars
