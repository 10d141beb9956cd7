"""Run configuration (flat ``key = value`` files) and convergence-history CSV output."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping

from .problem import ProblemSpec, example_target, zero_target

MODES = ("solve", "continuation", "diagnostics")
TARGETS = ("example", "zero")
# Levels beyond these need allow_large = true (runs of hours, not seconds).
DESK_LEVEL_LIMIT = {2: 6, 3: 4}
OUTPUT_DIR_ENV = "ROBIN_SQP_OUTPUT_DIR"
HISTORY_HEADER = ("n", "objective", "delta_u", "delta_y", "delta_phi")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    level_min: int = 2
    level_max: int = 4
    T: float = 4.0
    kappa: float = 0.3
    alpha: float = 0.1
    beta: float = 100.0
    nonlinearity: tuple = (0.0, -1.0, 0.0, 1.0)
    target: str = "example"
    rho: float = 5e-13
    max_iters: int = 30
    seed: int = 20240611
    output: str = "history.csv"
    mode: str = "continuation"
    robin: str = "lumped"
    target_rule: str = "right"
    pg_tol: float = 1e-6
    allow_large: bool = False

    def validate(self) -> "RunConfig":
        if self.dim not in (2, 3):
            raise ValidationError(f"dim in {{2, 3}} required, got {self.dim}")
        if self.level_min < 2:
            raise ValidationError("level_min >= 2 required")
        if self.level_min > self.level_max:
            raise ValidationError("level_min <= level_max required")
        if not self.allow_large and self.level_max > DESK_LEVEL_LIMIT[self.dim]:
            raise ValidationError(
                f"level_max <= {DESK_LEVEL_LIMIT[self.dim]} required for dim {self.dim} "
                "unless allow_large = true"
            )
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValidationError("T > 0 required")
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise ValidationError("kappa > 0 required")
        if not self.alpha >= 0:
            raise ValidationError("alpha >= 0 required")
        if not self.alpha < self.beta:
            raise ValidationError("alpha < beta required")
        if not math.isfinite(self.beta):
            raise ValidationError("beta < inf required")
        if not self.nonlinearity:
            raise ValidationError("nonlinearity needs at least one coefficient")
        if self.target not in TARGETS:
            raise ValidationError(f"target in {TARGETS} required")
        if not self.rho > 0:
            raise ValidationError("rho > 0 required")
        if self.max_iters < 1:
            raise ValidationError("max_iters >= 1 required")
        if self.mode not in MODES:
            raise ValidationError(f"mode in {MODES} required")
        if self.robin not in ("lumped", "exact"):
            raise ValidationError("robin in ('lumped', 'exact') required")
        if self.target_rule not in ("right", "gauss"):
            raise ValidationError("target_rule in ('right', 'gauss') required")
        if not self.pg_tol > 0:
            raise ValidationError("pg_tol > 0 required")
        return self

    def problem(self) -> ProblemSpec:
        return ProblemSpec(
            dim=self.dim,
            T=self.T,
            kappa=self.kappa,
            alpha=self.alpha,
            beta=self.beta,
            nonlinearity=tuple(self.nonlinearity),
            target=example_target if self.target == "example" else zero_target,
            robin=self.robin,
            target_rule=self.target_rule,
        )

    def output_path(self) -> Path:
        base = os.environ.get(OUTPUT_DIR_ENV)
        path = Path(self.output)
        return Path(base) / path if base else path


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key: str, raw: str, line: int | None):
    kind = _FIELDS[key].type
    raw = raw.strip()
    try:
        if key == "nonlinearity":
            return tuple(float(c) for c in raw.split(","))
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ParseError(f"cannot read {raw!r} as {kind}", line, key) from None


def parse_config_text(text: str, overrides: Mapping[str, str] | Iterable[str] | None = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) plus overrides.

    Unspecified keys keep the defaults of the numerical example.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ParseError("unknown key", lineno, key)
        values[key] = _convert(key, raw, lineno)
    if overrides:
        items = overrides.items() if isinstance(overrides, Mapping) else (_split_override(o) for o in overrides)
        for key, raw in items:
            if key not in _FIELDS:
                raise ParseError("unknown key", None, key)
            values[key] = _convert(key, str(raw), None)
    return RunConfig(**values).validate()


def _split_override(item: str):
    if "=" not in item:
        raise ParseError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    return key.strip().lstrip("-").replace("-", "_"), raw


def parse_config(path: str | os.PathLike | None = None, overrides=None) -> RunConfig:
    text = Path(path).read_text() if path is not None else ""
    return parse_config_text(text, overrides)


def emit_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in dataclasses.asdict(cfg).items():
        if key == "nonlinearity":
            value = ",".join(repr(float(c)) for c in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def format_history_row(rec) -> list[str]:
    row = [str(rec.n), f"{rec.objective:.16e}"]
    for d in (rec.delta_u, rec.delta_y, rec.delta_phi):
        row.append("" if d is None else f"{d:.1e}")
    return row


def emit_history(records, path) -> None:
    """Write a convergence history as CSV: 17 significant digits for J, 2 for increments."""
    records = list(records)
    if not records:
        raise ValueError("empty history, nothing written")
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_HEADER)
        for rec in records:
            writer.writerow(format_history_row(rec))
