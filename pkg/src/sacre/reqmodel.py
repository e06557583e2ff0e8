"""Contextual requirements, sensor variables and uncertainty detection.

Operationalizations are disjunctions of conjunctions of threshold conditions
over normalized sensor variables.  Their textual form is::

    perclos>=0.15 AND hbpm<=0.6 AND hbpm>=0.56 OR facePosition=0

Evaluation is three-valued: ``True``, ``False`` or ``None`` (unknown).
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

EQ_TOLERANCE = 1e-9
PERCLOS_CLOSED_BELOW = 0.20


class ModelError(ValueError):
    """Raised for invalid requirement-model values."""


# --------------------------------------------------------------------------
# Variables and snapshots


@dataclass(frozen=True)
class VariableSpec:
    """Sensor variable with min-max normalization bounds and validity range.

    ``levels`` marks a discrete variable whose normalized values live on a
    fixed grid (facePosition: 0/1, hosw: 0/0.5/1).  ``perclos_window`` set
    means raw input is an eyes-state stream reduced to a PERCLOS value.
    """

    name: str
    raw_min: float
    raw_max: float
    valid_min: float = 0.0
    valid_max: float = 1.0
    perclos_window: Optional[int] = None
    levels: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.raw_min < self.raw_max:
            raise ModelError(f"{self.name}: raw_min must be < raw_max")
        if not 0.0 <= self.valid_min <= self.valid_max <= 1.0:
            raise ModelError(f"{self.name}: need 0 <= valid_min <= valid_max <= 1")
        if self.perclos_window is not None and self.perclos_window < 1:
            raise ModelError(f"{self.name}: perclos window must be positive")

    @property
    def discrete(self) -> bool:
        return self.levels is not None

    def scale(self, raw: float) -> float:
        """Normalized value before clamping."""
        return (raw - self.raw_min) / (self.raw_max - self.raw_min)


def normalize(raw: float, spec: VariableSpec) -> float:
    """Min-max normalize ``raw`` and clamp into [0, 1]."""
    return min(1.0, max(0.0, spec.scale(raw)))


def preprocess_perclos(eyes_window: Sequence[float], window_ticks: int) -> float:
    """Fraction of the last ``window_ticks`` eye samples below 20 % visibility."""
    if window_ticks < 1:
        raise ModelError("window_ticks must be positive")
    samples = list(eyes_window)[-window_ticks:]
    if not samples:
        return 0.0
    closed = sum(1 for s in samples if s < PERCLOS_CLOSED_BELOW)
    return closed / len(samples)


@dataclass(frozen=True)
class EnvironmentSnapshot:
    """Normalized sensor values at one tick.

    ``values`` holds clamped values; a variable missing from it was lost.
    ``unclamped`` keeps the pre-clamp normalized values used for anomaly
    detection and defaults to ``values``.
    """

    tick: int
    values: Mapping[str, float]
    unclamped: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        if self.tick < 0:
            raise ModelError("tick must be non-negative")
        for name, v in self.values.items():
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"snapshot value {name}={v} outside [0, 1]")
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))
        raw = self.values if self.unclamped is None else dict(self.unclamped)
        object.__setattr__(self, "unclamped", MappingProxyType(dict(raw)))

    @classmethod
    def from_raw(cls, tick: int, raw: Mapping[str, Optional[float]],
                 specs: Iterable[VariableSpec]) -> "EnvironmentSnapshot":
        values, unclamped = {}, {}
        for spec in specs:
            r = raw.get(spec.name)
            if r is None:
                continue
            unclamped[spec.name] = spec.scale(r)
            values[spec.name] = normalize(r, spec)
        return cls(tick, values, unclamped)


# --------------------------------------------------------------------------
# Operationalizations

OPERATORS = (">=", "<=", ">", "<", "=")
_IDENT = re.compile(r"[a-zA-Z][a-zA-Z0-9]*\Z")
_COND = re.compile(r"([a-zA-Z][a-zA-Z0-9]*)(>=|<=|>|<|=)(-?[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?)\Z")


def format_number(x: float) -> str:
    """Shortest round-tripping decimal text, without a trailing ``.0``."""
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class AtomicCondition:
    variable: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ModelError(f"unknown operator {self.op!r}")
        if not _IDENT.match(self.variable):
            raise ModelError(f"bad variable name {self.variable!r}")
        object.__setattr__(self, "threshold", float(self.threshold))

    def holds(self, value: float) -> bool:
        t = self.threshold
        if self.op == ">=":
            return value >= t
        if self.op == "<=":
            return value <= t
        if self.op == ">":
            return value > t
        if self.op == "<":
            return value < t
        return abs(value - t) <= EQ_TOLERANCE

    def mask(self, column: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`holds` over an array of values."""
        t = self.threshold
        if self.op == ">=":
            return column >= t
        if self.op == "<=":
            return column <= t
        if self.op == ">":
            return column > t
        if self.op == "<":
            return column < t
        return np.abs(column - t) <= EQ_TOLERANCE

    def __str__(self):
        return f"{self.variable}{self.op}{format_number(self.threshold)}"


def _check_clause(conds: Sequence[AtomicCondition]) -> None:
    lower, upper, equal = {}, {}, {}
    for c in conds:
        if c.op in (">=", ">"):
            if c.variable in lower:
                raise ModelError(f"two lower bounds on {c.variable} in one clause")
            lower[c.variable] = c
        elif c.op in ("<=", "<"):
            if c.variable in upper:
                raise ModelError(f"two upper bounds on {c.variable} in one clause")
            upper[c.variable] = c
        else:
            prev = equal.get(c.variable)
            if prev is not None and abs(prev.threshold - c.threshold) > EQ_TOLERANCE:
                raise ModelError(f"conflicting equalities on {c.variable}")
            equal[c.variable] = c


@dataclass(frozen=True)
class Operationalization:
    """DNF over atomic conditions. No clauses means "not operationalized"."""

    clauses: tuple[tuple[AtomicCondition, ...], ...] = ()

    def __post_init__(self):
        clauses = tuple(tuple(c) for c in self.clauses)
        for clause in clauses:
            if not clause:
                raise ModelError("empty conjunction")
            _check_clause(clause)
        object.__setattr__(self, "clauses", clauses)

    @property
    def empty(self) -> bool:
        return not self.clauses

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(c.variable for clause in self.clauses for c in clause)

    def references(self, variable: str) -> bool:
        return variable in self.variables

    def __str__(self):
        return " OR ".join(" AND ".join(str(c) for c in clause) for clause in self.clauses)

    @classmethod
    def parse(cls, text: str) -> "Operationalization":
        """Parse the textual form; an empty or blank string is the empty DNF."""
        if not text.strip():
            return cls()
        clauses = []
        for clause_text in text.split(" OR "):
            conds = []
            for cond_text in clause_text.split(" AND "):
                m = _COND.match(cond_text.strip())
                if m is None:
                    raise ModelError(f"cannot parse condition {cond_text!r}")
                conds.append(AtomicCondition(m.group(1), m.group(2), float(m.group(3))))
            clauses.append(tuple(conds))
        return cls(tuple(clauses))

    def mask(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        """Vectorized evaluation over complete columns (no unknowns)."""
        out = np.zeros(n, dtype=bool)
        for clause in self.clauses:
            m = np.ones(n, dtype=bool)
            for c in clause:
                m &= c.mask(columns[c.variable])
            out |= m
        return out


def eval_operationalization(op: Operationalization, snapshot: EnvironmentSnapshot,
                            active_vars: Optional[Iterable[str]] = None) -> Optional[bool]:
    """Evaluate ``op`` on ``snapshot``; ``None`` means unknown.

    ``active_vars=None`` treats every variable as active.
    """
    if op.empty:
        return None
    values = snapshot.values
    active = None if active_vars is None else set(active_vars)
    for var in op.variables:
        if var not in values or (active is not None and var not in active):
            return None
    return any(all(c.holds(values[c.variable]) for c in clause) for clause in op.clauses)


def strip_variable(op: Operationalization, variable: str) -> Operationalization:
    """Remove every condition on ``variable``; emptied clauses disappear."""
    clauses = []
    for clause in op.clauses:
        kept = tuple(c for c in clause if c.variable != variable)
        if kept:
            clauses.append(kept)
    return Operationalization(tuple(clauses))


# --------------------------------------------------------------------------
# Requirements, behaviors and uncertainty


@dataclass(frozen=True)
class ContextualRequirement:
    id: str
    context_label: str
    operationalization: Operationalization
    behavior_id: str

    def with_operationalization(self, op: Operationalization) -> "ContextualRequirement":
        return ContextualRequirement(self.id, self.context_label, op, self.behavior_id)


def check_unique_ids(requirements: Iterable[ContextualRequirement]) -> None:
    seen = set()
    for r in requirements:
        if r.id in seen:
            raise ModelError(f"duplicate requirement id {r.id}")
        seen.add(r.id)


@dataclass(frozen=True)
class BehaviorState:
    behavior_id: str
    active: bool
    driver_disabled: bool = False

    def __post_init__(self):
        if self.driver_disabled and self.active:
            raise ModelError("a driver-disabled behavior cannot be active")


class CaseKind(enum.Enum):
    NO_OPERATIONALIZATION = "case1"
    SENSOR_LOST = "case2a"
    SENSOR_DECALIBRATED = "case2b"
    SENSOR_UP = "case2c"
    VIOLATION = "case3"
    WRONG_CONTEXT = "case4"

    @property
    def sensor_level(self) -> bool:
        return self in (CaseKind.SENSOR_LOST, CaseKind.SENSOR_DECALIBRATED, CaseKind.SENSOR_UP)

    @property
    def needs_mining(self) -> bool:
        return not self.sensor_level


@dataclass(frozen=True)
class UncertaintyCase:
    """One of the six uncertainty cases, tagged with its subject.

    ``subject`` is a variable name for sensor-level cases and a requirement
    id for the others.
    """

    kind: CaseKind
    subject: str

    def __str__(self):
        return f"{self.kind.value}({self.subject})"


SATISFIED = "satisfied"


def assess_satisfaction(req: ContextualRequirement, ctx_value: Optional[bool],
                        beh: BehaviorState):
    """Compare context truth with the behavior state.

    Returns :data:`SATISFIED`, an :class:`UncertaintyCase`, or ``None`` when
    the context is unknown for a non-empty operationalization (sensor-level
    detection reports that situation instead).
    """
    if beh.behavior_id != req.behavior_id:
        raise ModelError(f"behavior {beh.behavior_id} does not belong to {req.id}")
    if ctx_value is None:
        if req.operationalization.empty:
            return UncertaintyCase(CaseKind.NO_OPERATIONALIZATION, req.id)
        return None
    if ctx_value and not beh.active:
        return UncertaintyCase(CaseKind.VIOLATION, req.id)
    if not ctx_value and beh.active:
        return UncertaintyCase(CaseKind.WRONG_CONTEXT, req.id)
    return SATISFIED


class SensorStatus(enum.Enum):
    HEALTHY = "healthy"
    LOST = "lost"
    DECALIBRATED = "decalibrated"


def detect_sensor_anomaly(spec: VariableSpec, snapshot: EnvironmentSnapshot,
                          prior_status: SensorStatus = SensorStatus.HEALTHY):
    """Return ``(case or None, new_status)`` for one variable at one tick.

    Validity bounds are checked on the un-clamped normalized value.
    """
    value = snapshot.unclamped.get(spec.name)
    if value is None:
        return UncertaintyCase(CaseKind.SENSOR_LOST, spec.name), SensorStatus.LOST
    if not spec.valid_min <= value <= spec.valid_max or math.isnan(value):
        return UncertaintyCase(CaseKind.SENSOR_DECALIBRATED, spec.name), SensorStatus.DECALIBRATED
    if prior_status is not SensorStatus.HEALTHY:
        return UncertaintyCase(CaseKind.SENSOR_UP, spec.name), SensorStatus.HEALTHY
    return None, SensorStatus.HEALTHY


# --------------------------------------------------------------------------
# scikit-learn facing normalizer


class SensorNormalizer(TransformerMixin, BaseEstimator):
    """Min-max normalizer over fixed per-column raw bounds.

    Unlike ``MinMaxScaler`` the bounds come from the monitoring policy, not
    from the data, so ``fit`` only validates the input width.

    Parameters
    ----------
    specs : sequence of VariableSpec
        One spec per input column, in column order.
    clip : bool, default=True
        Clamp the output into [0, 1].
    """

    def __init__(self, specs=(), clip=True):
        self.specs = specs
        self.clip = clip

    def fit(self, X, y=None):
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != len(self.specs):
            raise ValueError(f"expected {len(self.specs)} columns, got {X.shape[1]}")
        self.n_features_in_ = X.shape[1]
        self.lo_ = np.array([s.raw_min for s in self.specs], dtype=float)
        self.span_ = np.array([s.raw_max - s.raw_min for s in self.specs], dtype=float)
        return self

    def transform(self, X):
        check_is_fitted(self, "lo_")
        X = check_array(X, ensure_all_finite="allow-nan")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = (X - self.lo_) / self.span_
        return np.clip(out, 0.0, 1.0) if self.clip else out

    def get_feature_names_out(self, input_features=None):
        return np.array([s.name for s in self.specs], dtype=object)
