"""Flat result rows shared by the scenario runners and the CLI writers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Iterator

QUANTITIES = ("probability", "weakValueRe", "weakValueIm", "meterStat")
SOURCES = ("closedForm", "circuit", "sampled")
COLUMNS = ("theta", "phi", "scheme", "label", "quantity", "value", "source")


def canonical_angle(x: float) -> float:
    """Map an angle into [0, pi) for reporting."""
    y = math.fmod(float(x), math.pi)
    if y < 0:
        y += math.pi
    # fmod can land on pi itself after the shift for tiny negative inputs
    return 0.0 if y >= math.pi else y


@dataclass(frozen=True)
class Row:
    theta: float
    phi: float
    scheme: str
    label: str
    quantity: str
    value: float
    source: str

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.quantity == "probability" and not -1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"probability {self.value!r} outside [0, 1]")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScenarioTable:
    rows: list[Row] = field(default_factory=list)

    def add(self, theta, phi, scheme, label, quantity, value, source="closedForm") -> None:
        self.rows.append(
            Row(canonical_angle(theta), canonical_angle(phi), scheme, label, quantity, float(value), source)
        )

    def extend(self, other: "ScenarioTable | Iterable[Row]") -> None:
        self.rows.extend(other.rows if isinstance(other, ScenarioTable) else other)

    def sorted(self) -> "ScenarioTable":
        """Canonical order: stable sort on (theta, phi, label)."""
        return ScenarioTable(sorted(self.rows, key=lambda r: (r.theta, r.phi, r.label)))

    def select(self, **match) -> list[Row]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def value(self, **match) -> float:
        hits = self.select(**match)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {match}")
        return hits[0].value

    def __iter__(self) -> Iterator[Row]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)
