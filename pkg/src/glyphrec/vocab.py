"""Symbol vocabulary shared by the batch loader and the decoder.

Classifier classes: PAD, EOS, UNK plus the 62-character charset (65 total).
The start-of-sequence symbol is an extra embedding-only index fed to the
decoder at step one; it is never a classification target.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import DEFAULT_CHARSET

PAD, EOS, UNK = 0, 1, 2
_SPECIALS = ["<pad>", "<eos>", "<unk>"]


@dataclass(frozen=True)
class Vocab:
    charset: str = DEFAULT_CHARSET

    def __len__(self) -> int:
        return len(_SPECIALS) + len(self.charset)

    @property
    def go(self) -> int:
        """Embedding-only start index (== len(self))."""
        return len(self)

    @property
    def num_embeddings(self) -> int:
        return len(self) + 1  # classes + the start symbol

    def char_to_id(self, char: str) -> int:
        idx = self.charset.find(char)
        return UNK if idx < 0 else len(_SPECIALS) + idx

    def id_to_char(self, idx: int) -> str:
        if idx < len(_SPECIALS):
            return ""
        return self.charset[idx - len(_SPECIALS)]

    def encode(self, text: str) -> list[int]:
        return [self.char_to_id(c) for c in text]

    def decode(self, ids) -> str:
        """Ids up to (excluding) the first EOS, specials dropped."""
        chars = []
        for idx in ids:
            idx = int(idx)
            if idx == EOS:
                break
            chars.append(self.id_to_char(idx))
        return "".join(chars)

    def pad_target(self, text: str, t_max: int) -> list[int]:
        """Label ids padded with EOS then PAD to length t_max + 1."""
        if len(text) > t_max:
            raise ValueError(f"label longer than t_max={t_max}: {text!r}")
        ids = self.encode(text) + [EOS]
        return ids + [PAD] * (t_max + 1 - len(ids))
