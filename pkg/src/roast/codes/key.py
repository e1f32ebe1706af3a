"""The shared secret: everything the receiver needs besides the stego image."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .rs import RSCode
from .stc import StcKey


@dataclass(frozen=True)
class StegoKey:
    seed: int
    scheme: str
    cover_qf: int | None = 65
    h: int = 10
    rs_n: int = 31
    rs_k: int = 15
    params: dict = field(default_factory=dict)
    n_codewords: int = 0
    cover_table: list | None = None  # only when the cover table is not QF-derived

    @property
    def stc(self):
        return StcKey(self.h, self.seed)

    @property
    def rs(self):
        return RSCode(self.rs_n, self.rs_k)

    def with_codewords(self, n):
        return replace(self, n_codewords=int(n))

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown key fields: {sorted(unknown)}")
        return cls(**data)

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())
