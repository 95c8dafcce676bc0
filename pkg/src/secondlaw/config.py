"""Numerical tolerances shared by every module.

Tolerances live in a context variable so that overrides are scoped and
thread-safe::

    with tolerances(tol_slack=1e-6):
        report = clausius(setup, final)
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True)
class Tolerances:
    tol_herm: float = 1e-9
    tol_trace: float = 1e-9
    tol_psd: float = 1e-10
    tol_uni: float = 1e-9
    tol_recon: float = 1e-9
    eps_support: float = 1e-12
    tol_slack: float = 1e-8
    tol_energy: float = 1e-8
    tol_fp: float = 1e-9
    tol_root: float = 1e-10
    tol_prob: float = 1e-12
    max_dim: int = 4096

    def replace(self, **overrides: float) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)


_CURRENT: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "secondlaw_tolerances", default=Tolerances()
)


def get_tolerances() -> Tolerances:
    return _CURRENT.get()


def set_tolerances(**overrides: float) -> Tolerances:
    """Replace tolerances for the current context (not scoped)."""
    tol = _CURRENT.get().replace(**overrides)
    _CURRENT.set(tol)
    return tol


@contextlib.contextmanager
def tolerances(**overrides: float) -> Iterator[Tolerances]:
    token = _CURRENT.set(_CURRENT.get().replace(**overrides))
    try:
        yield _CURRENT.get()
    finally:
        _CURRENT.reset(token)


def parse_overrides(text: str) -> dict[str, float]:
    """Parse ``"tol_slack=1e-7,tol_herm=1e-8"`` into a dict."""
    out: dict[str, float] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"malformed tolerance override {item!r}")
        key = key.strip()
        out[key] = int(value) if key == "max_dim" else float(value)
    return out
