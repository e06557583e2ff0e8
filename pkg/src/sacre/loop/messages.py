"""Messages passed along the adaptation loop.

Symptom -> RequestForChange -> ChangePlan. Each later message keeps a
reference to the messages it was derived from, so an enacted plan can be
traced back to the ticks that triggered it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..mining import EvalMeasures
from ..reqmodel import CaseKind, Operationalization, UncertaintyCase


class AlreadyEnacted(RuntimeError):
    pass


@dataclass(frozen=True)
class Symptom:
    case: UncertaintyCase
    tick: int
    emitted_at: float
    context_value: Optional[bool] = None
    behavior_active: Optional[bool] = None

    @property
    def requirement_id(self) -> Optional[str]:
        return None if self.case.kind.sensor_level else self.case.subject

    @property
    def variable(self) -> Optional[str]:
        return self.case.subject if self.case.kind.sensor_level else None


@dataclass(frozen=True)
class RequestForChange:
    requirement_id: Optional[str]
    candidate: Optional[Operationalization]
    case: UncertaintyCase
    measures: Optional[EvalMeasures] = None
    symptoms: tuple[Symptom, ...] = ()
    dataset_size: int = 0

    def __post_init__(self):
        if self.case.kind.needs_mining != (self.measures is not None):
            raise ValueError("measures must be present exactly for mined cases")
        if not self.symptoms:
            raise ValueError("a request for change needs at least one symptom")

    @property
    def origin_time(self) -> float:
        """Emission time of the Symptom whose analysis produced this request.

        Earlier symptoms in ``symptoms`` are evidence that did not yet lead
        to a significant result; they stay for provenance.
        """
        return self.symptoms[-1].emitted_at

    @property
    def first_detected(self) -> float:
        return min(s.emitted_at for s in self.symptoms)


@dataclass
class ChangePlan:
    requirement_id: str
    new_operationalization: Operationalization
    target_managed_element: str
    rfc: RequestForChange
    enacted_at: Optional[float] = field(default=None)

    def mark_enacted(self, when: float) -> None:
        if self.enacted_at is not None:
            raise AlreadyEnacted(f"plan for {self.requirement_id} already enacted")
        self.enacted_at = when

    @property
    def response_time(self) -> Optional[float]:
        """Seconds from the originating Symptom to enactment."""
        if self.enacted_at is None:
            return None
        return self.enacted_at - self.rfc.origin_time


@dataclass(frozen=True)
class ActiveSetChange:
    """Analyze re-added or removed a variable without producing a plan."""

    variable: str
    added: bool
    symptoms: tuple[Symptom, ...]
    changed_at: float

    @property
    def response_time(self) -> float:
        return self.changed_at - self.symptoms[-1].emitted_at


MINED_CASES = (CaseKind.NO_OPERATIONALIZATION, CaseKind.VIOLATION, CaseKind.WRONG_CONTEXT)
