"""Run configuration: a flat ``key = value`` file overridden by command-line flags."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

THREADS_ENV = "NODALBIF_THREADS"


@dataclass(frozen=True)
class RunConfig:
    n: int = 2000
    k_min: int = 1
    k_max: int = 4
    branch_k_max: int = 3
    i_extra: int = 2
    m: int | None = None
    tol: float = 1e-8
    out_dir: str = "."
    seed: int = 0
    probe_attempts: int = 50
    oracle_n: int = 400
    width: float = 1.0

    def __post_init__(self):
        if self.n < 3 or self.oracle_n < 3:
            raise ValueError("grid sizes must be >= 3")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError("need 1 <= k_min <= k_max")
        if self.branch_k_max < 1 or self.i_extra < 1:
            raise ValueError("branch_k_max and i_extra must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        for name in ("tol", "width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.probe_attempts < 0:
            raise ValueError("probe_attempts must be >= 0")

    @property
    def ks(self) -> list[int]:
        return list(range(self.k_min, self.k_max + 1))

    @property
    def branch_ks(self) -> list[int]:
        return [k for k in self.ks if k <= self.branch_k_max]

    def to_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    if raw.lower() in ("none", "") and "None" in str(kind):
        return None
    if "int" in str(kind):
        return int(raw)
    if "float" in str(kind):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> RunConfig:
    """File values first, then non-None overrides (flags win)."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(RunConfig(), **values)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
