"""City planning standards derived from Voronoi catchments, plus fixed standards."""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import ParameterError, ValidationError, WrongKindError
from .voronoi import CatchmentCell


class ServiceCode(str, Enum):
    KG = "KG"
    PRI = "PRI"
    PRE = "PRE"
    SEC = "SEC"
    AMB = "AMB"
    HU = "HU"
    HOSP = "HOSP"
    MOSQ = "MOSQ"
    CHUR = "CHUR"
    CULT = "CULT"
    PARK = "PARK"
    POST = "POST"
    FIRE = "FIRE"

    @classmethod
    def parse(cls, code: "str | ServiceCode") -> "ServiceCode":
        if isinstance(code, cls):
            return code
        try:
            return cls(str(code).strip().upper())
        except ValueError:
            allowed = ", ".join(c.value for c in cls)
            raise ValidationError(f"unknown service code {code!r}; expected one of {allowed}") from None

    @property
    def label(self) -> str:
        return _LABELS[self][1]

    @property
    def group(self) -> str:
        return _LABELS[self][0]

    @property
    def is_derived(self) -> bool:
        return self not in (ServiceCode.HOSP, ServiceCode.CULT, ServiceCode.PARK)


_EDU, _HEALTH, _REL, _CULT, _OTHER = (
    "Educational services",
    "Health services",
    "Religious services",
    "Cultural and recreational services",
    "Other services",
)
_LABELS = {
    ServiceCode.KG: (_EDU, "Kindergarten"),
    ServiceCode.PRI: (_EDU, "Primary schools"),
    ServiceCode.PRE: (_EDU, "Preparatory schools"),
    ServiceCode.SEC: (_EDU, "Secondary schools"),
    ServiceCode.AMB: (_HEALTH, "Ambulance"),
    ServiceCode.HU: (_HEALTH, "Health units"),
    ServiceCode.HOSP: (_HEALTH, "Hospitals"),
    ServiceCode.MOSQ: (_REL, "Mosques"),
    ServiceCode.CHUR: (_REL, "Churches"),
    ServiceCode.CULT: (_CULT, "Libraries and cultural centres"),
    ServiceCode.PARK: (_CULT, "Parks and open areas"),
    ServiceCode.POST: (_OTHER, "Postal services"),
    ServiceCode.FIRE: (_OTHER, "Fire extinguishing points"),
}


class StandardKind(str, Enum):
    DERIVED = "distance-derived"
    FIXED = "distance-fixed"
    PER_CAPITA = "per-capita"


@dataclass(frozen=True)
class PlanningStandard:
    service: ServiceCode
    kind: StandardKind
    min_km: float | None = None
    max_km: float | None = None
    per_capita_m2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "service", ServiceCode.parse(self.service))
        object.__setattr__(self, "kind", StandardKind(self.kind))
        if self.kind is StandardKind.PER_CAPITA:
            if self.per_capita_m2 is None or not self.per_capita_m2 > 0:
                raise ValidationError(f"{self.service.value}: per-capita standard needs per_capita_m2 > 0")
            if self.min_km is not None or self.max_km is not None:
                raise ValidationError(f"{self.service.value}: per-capita standard carries no distances")
            return
        if self.min_km is None or self.max_km is None or not 0 < self.min_km < self.max_km:
            raise ValidationError(f"{self.service.value}: need 0 < min_km < max_km, got {self.min_km}, {self.max_km}")
        if self.kind is StandardKind.DERIVED and self.min_km != self.max_km / 2:
            raise ValidationError(f"{self.service.value}: derived standard must have min_km = max_km / 2")

    @property
    def is_distance(self) -> bool:
        return self.kind is not StandardKind.PER_CAPITA

    def to_dict(self) -> dict:
        return {
            "service": self.service.value,
            "kind": self.kind.value,
            "min_km": self.min_km,
            "max_km": self.max_km,
            "per_capita_m2": self.per_capita_m2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlanningStandard":
        return cls(d["service"], d["kind"], d.get("min_km"), d.get("max_km"), d.get("per_capita_m2"))


def derive_standard(cells: Sequence[CatchmentCell], service: ServiceCode | str, *, use_median: bool = False) -> PlanningStandard:
    """Maximum service limit = mean coverage distance of the catchments; minimum is half of it.

    ``use_median`` swaps the mean for the median (robustness experiments only).
    """
    service = ServiceCode.parse(service)
    if not service.is_derived:
        raise WrongKindError(f"{service.value} has a fixed standard; it is not derived from catchments")
    if not cells:
        raise ParameterError(f"{service.value}: no catchment cells to derive a standard from")
    distances = [c.coverage_distance for c in cells]
    if any(d is None for d in distances):
        raise ParameterError("cells lack coverage distances; run catchment_metrics first")
    reach = statistics.median(distances) if use_median else statistics.fmean(distances)
    if not reach > 0:
        raise ParameterError(f"{service.value}: mean coverage distance is zero")
    return PlanningStandard(service, StandardKind.DERIVED, reach / 2, reach)


@dataclass
class StandardsTable:
    entries: dict[ServiceCode, PlanningStandard] = field(default_factory=dict)
    provenance: dict[ServiceCode, str] = field(default_factory=dict)

    def add(self, standard: PlanningStandard, note: str) -> None:
        if standard.service in self.entries:
            raise ValidationError(f"duplicate standard for {standard.service.value}")
        self.entries[standard.service] = standard
        self.provenance[standard.service] = note

    def merge(self, other: "StandardsTable") -> None:
        for code in other.ordered_codes():
            self.add(other.entries[code], other.provenance.get(code, ""))

    def get(self, code: ServiceCode | str) -> PlanningStandard | None:
        return self.entries.get(ServiceCode.parse(code))

    def __contains__(self, code) -> bool:
        return ServiceCode.parse(code) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def ordered_codes(self) -> list[ServiceCode]:
        order = list(ServiceCode)
        return sorted(self.entries, key=order.index)

    def to_json(self) -> str:
        doc = {
            "standards": [
                dict(self.entries[c].to_dict(), group=c.group, label=c.label, provenance=self.provenance.get(c, ""))
                for c in self.ordered_codes()
            ]
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "StandardsTable":
        try:
            doc = json.loads(text)
            rows = doc["standards"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"not a standards table: {exc}") from None
        table = cls()
        for row in rows:
            table.add(PlanningStandard.from_dict(row), row.get("provenance", ""))
        return table

    @classmethod
    def read(cls, path: str | Path) -> "StandardsTable":
        from .errors import LayerIOError

        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise LayerIOError(f"cannot read standards table {path}: {exc}") from exc
        return cls.from_json(text)

    def to_csv(self) -> str:
        """Grouped service rows; distances rounded to 3 decimals."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "service", "min_km", "max_km", "code", "kind", "per_capita_m2", "provenance"])
        for c in self.ordered_codes():
            s = self.entries[c]
            w.writerow([
                c.group,
                c.label,
                _fmt(s.min_km),
                _fmt(s.max_km),
                c.value,
                s.kind.value,
                "" if s.per_capita_m2 is None else f"{s.per_capita_m2:g}",
                self.provenance.get(c, ""),
            ])
        return buf.getvalue()


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.3f}"


def fixed_standards() -> StandardsTable:
    """Standards adopted from regional/international norms rather than derived."""
    table = StandardsTable()
    table.add(PlanningStandard(ServiceCode.HOSP, StandardKind.FIXED, 40.0, 50.0), "fixed: regional hospital standard")
    table.add(PlanningStandard(ServiceCode.CULT, StandardKind.FIXED, 3.0, 5.0), "fixed: regional cultural-centre standard")
    table.add(
        PlanningStandard(ServiceCode.PARK, StandardKind.PER_CAPITA, per_capita_m2=11.0),
        "fixed: mean of international 10-12 m2/person",
    )
    return table
