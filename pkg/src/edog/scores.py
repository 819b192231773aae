"""The per-pair score map every detector returns, and its CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, MalformedInputError, SchemaError
from .graph import Pair, canonical


@dataclass(frozen=True, eq=False)
class EdgeScores:
    """Maliciousness score per canonical node pair; higher means more suspicious."""

    pairs: tuple[Pair, ...]
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        pairs = tuple(canonical(*p) for p in self.pairs)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != len(pairs):
            raise DomainError("one score per pair is required")
        if len(set(pairs)) != len(pairs):
            raise DomainError("duplicate pairs in score map")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"non-finite scores from {self.source or 'detector'}")
        values.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, mapping: Mapping[Pair, float], source: str = "") -> "EdgeScores":
        keys = sorted(canonical(*k) for k in mapping)
        lookup = {canonical(*k): v for k, v in mapping.items()}
        return cls(tuple(keys), np.array([lookup[k] for k in keys]), source)

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict[Pair, float]:
        return dict(zip(self.pairs, self.values.tolist()))

    def __getitem__(self, pair) -> float:
        return self.as_dict()[canonical(*pair)]

    def sorted(self) -> "EdgeScores":
        order = sorted(range(len(self.pairs)), key=lambda i: self.pairs[i])
        return EdgeScores(tuple(self.pairs[i] for i in order), self.values[order], self.source)

    def subset(self, pairs: Iterable[Pair]) -> "EdgeScores":
        lookup = self.as_dict()
        keys = [canonical(*p) for p in pairs]
        return EdgeScores(tuple(keys), np.array([lookup[k] for k in keys]), self.source)

    def with_values(self, values, source: str | None = None) -> "EdgeScores":
        return EdgeScores(self.pairs, values, self.source if source is None else source)


def scores_to_csv(scores: EdgeScores) -> str:
    buf = io.StringIO()
    buf.write("u,v,score\n")
    s = scores.sorted()
    for (u, v), value in zip(s.pairs, s.values):
        buf.write(f"{u},{v},{value:.17g}\n")
    return buf.getvalue()


def write_scores(scores: EdgeScores, path) -> None:
    Path(path).write_text(scores_to_csv(scores), encoding="utf-8")


def read_scores(path, source: str = "") -> EdgeScores:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration as exc:
        raise MalformedInputError(f"{path}: empty scores file") from exc
    if [h.strip() for h in header] != ["u", "v", "score"]:
        raise SchemaError(f"{path}: expected header u,v,score")
    mapping = {}
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise SchemaError(f"{path}: bad row {row!r}")
        try:
            mapping[(int(row[0]), int(row[1]))] = float(row[2])
        except ValueError as exc:
            raise MalformedInputError(f"{path}: bad row {row!r}") from exc
    return EdgeScores.from_mapping(mapping, source)
