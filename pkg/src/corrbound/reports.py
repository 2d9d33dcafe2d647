"""Machine-readable bound reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

REL_SLACK = 1e-12


class PremiseError(ValueError):
    """A hypothesis of a bound is violated by the supplied data."""


@dataclass
class BoundReport:
    theorem_id: str
    lhs: float
    rhs: float
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs <= self.rhs * (1 + REL_SLACK))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["satisfied"] = self.satisfied
        return out

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True)


def _clean(obj):
    """Make floats JSON-safe (inf/nan become strings) and tuples lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True)
