"""Tensor-factor layout of a setup: labels, dimensions, roles, temperatures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .errors import InvariantError

Kind = Literal["system", "microbath"]


@dataclass(frozen=True)
class Factor:
    label: str
    dim: int
    kind: Kind = "microbath"
    beta: float | None = None

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InvariantError(f"factor {self.label!r}: dim must be a positive integer")
        if self.kind not in ("system", "microbath"):
            raise InvariantError(f"factor {self.label!r}: unknown kind {self.kind!r}")
        if self.kind == "microbath":
            if self.beta is None or not math.isfinite(self.beta) or self.beta <= 0:
                raise InvariantError(f"microbath {self.label!r} needs a positive finite beta")


@dataclass(frozen=True)
class SetupLayout:
    """Ordered list of factors; the global Kronecker product follows this order."""

    factors: tuple[Factor, ...]

    def __init__(self, factors: Iterable[Factor]):
        object.__setattr__(self, "factors", tuple(factors))
        labels = [f.label for f in self.factors]
        if not labels:
            raise InvariantError("layout needs at least one factor")
        if len(set(labels)) != len(labels):
            raise InvariantError(f"duplicate factor labels in {labels}")
        if sum(f.kind == "system" for f in self.factors) > 1:
            raise InvariantError("at most one factor may be the system")

    @classmethod
    def build(cls, *specs: tuple) -> "SetupLayout":
        """``SetupLayout.build(("s", 2, "system"), ("b", 2, "microbath", 1.0))``."""
        return cls(Factor(*s) for s in specs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, key: int | str) -> Factor:
        return self.factors[self.index(key)]

    def index(self, key: int | str) -> int:
        if isinstance(key, str):
            try:
                return self.labels.index(key)
            except ValueError:
                raise KeyError(f"no factor labelled {key!r}") from None
        if not 0 <= key < len(self.factors):
            raise IndexError(f"factor index {key} out of range")
        return int(key)

    def indices(self, keys: Iterable[int | str]) -> list[int]:
        return [self.index(k) for k in keys]

    @property
    def system_index(self) -> int | None:
        for i, f in enumerate(self.factors):
            if f.kind == "system":
                return i
        return None

    @property
    def microbath_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.factors) if f.kind == "microbath"]

    @property
    def environment_indices(self) -> list[int]:
        s = self.system_index
        return [i for i in range(len(self.factors)) if i != s]


def as_dims(layout: SetupLayout | Sequence[int]) -> tuple[int, ...]:
    if isinstance(layout, SetupLayout):
        return layout.dims
    return tuple(int(d) for d in layout)


def resolve(layout: SetupLayout | Sequence[int], keys: Iterable[int | str]) -> list[int]:
    if isinstance(layout, SetupLayout):
        return layout.indices(keys)
    n = len(layout)
    out = []
    for k in keys:
        if isinstance(k, str) or not 0 <= k < n:
            raise KeyError(f"invalid factor index {k!r} for {n} factors")
        out.append(int(k))
    return out
