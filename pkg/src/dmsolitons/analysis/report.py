"""Verification report records and their JSON form."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any


def _clean(x):
    """Make ``x`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def digest(obj: Any) -> str:
    """Short sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dumps(obj: Any) -> str:
    """Deterministic JSON (sorted keys, shortest round-trip floats)."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class VerificationReport:
    """Per-case record of an inequality check.

    Hard cases enter the verdict; soft cases only carry measured constants.
    """

    suite: str
    cases: list[dict] = field(default_factory=list)
    constants: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def add(self, label: str, inputs: Any, measured: float, bound: float,
            hard: bool = True, ok: bool | None = None, **extra) -> dict:
        """Record ``measured <= bound``; ``ok`` overrides the comparison (e.g. for exact checks)."""
        measured, bound = float(measured), float(bound)
        if ok is None:
            ok = measured <= bound
        if bound == 0:
            ratio = 0.0 if measured == 0 else math.inf
        else:
            ratio = measured / bound
        case = {"index": len(self.cases), "label": label, "inputs": digest(inputs),
                "measured": measured, "bound": bound, "ratio": ratio,
                "hard": bool(hard), "pass": bool(ok)}
        case.update(extra)
        self.cases.append(case)
        return case

    @property
    def violations(self) -> list[dict]:
        return [c for c in self.cases if c["hard"] and not c["pass"]]

    @property
    def verdict(self) -> bool:
        return not self.violations

    def worst_case(self) -> dict | None:
        hard = [c for c in self.cases if c["hard"]]
        if not hard:
            return None
        return max(hard, key=lambda c: (not c["pass"], c["ratio"] if math.isfinite(c["ratio"]) else math.inf))

    def merge(self, other: VerificationReport, prefix: str | None = None) -> None:
        prefix = prefix or other.suite
        for c in other.cases:
            c = dict(c, index=len(self.cases), label=f"{prefix}:{c['label']}")
            self.cases.append(c)
        for k, v in other.constants.items():
            self.constants[f"{prefix}.{k}"] = v
        self.notes.extend(f"{prefix}: {n}" for n in other.notes)

    def to_dict(self) -> dict:
        worst = self.worst_case()
        return {
            "suite": self.suite,
            "verdict": "pass" if self.verdict else "fail",
            "n_cases": len(self.cases),
            "n_violations": len(self.violations),
            "worst_case": None if worst is None else worst["index"],
            "constants": self.constants,
            "notes": self.notes,
            "cases": self.cases,
        }

    def to_json(self, extra: dict | None = None) -> str:
        d = self.to_dict()
        if extra:
            d.update(extra)
        return dumps(d)

    def summary(self) -> str:
        v = "PASS" if self.verdict else "FAIL"
        return f"{self.suite}: {v} ({len(self.cases)} cases, {len(self.violations)} violations)"
