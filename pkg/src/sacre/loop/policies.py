"""Configuration policies for loop elements, stored as ``.properties`` files.

Each role reads its own file of flat ``key=value`` pairs with role-prefixed
keys (``monitor.variables``, ``plan.precisionMin``, ``kb.frequency`` ...).
A manager file gives the structure (how many elements of each role) and
points at the role files by path, relative to itself.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from ..reqmodel import CaseKind, VariableSpec, format_number


class PolicyError(ValueError):
    pass


class Role(enum.Enum):
    MONITOR = "monitor"
    ANALYZE = "analyze"
    PLAN = "plan"
    EXECUTE = "execute"
    KNOWLEDGE_BASE = "kb"
    SENSORS = "sensors"
    EFFECTORS = "effectors"

    @property
    def label(self) -> str:
        return {"kb": "KnowledgeBase"}.get(self.value, self.value.capitalize())


MAPEK_ROLES = (Role.MONITOR, Role.ANALYZE, Role.PLAN, Role.EXECUTE, Role.KNOWLEDGE_BASE)


# --------------------------------------------------------------------------
# properties files


def parse_properties(text: str) -> dict[str, str]:
    props = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", "!")):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise PolicyError(f"line {lineno}: expected key=value, got {line!r}")
        props[key.strip()] = value.strip()
    return props


def read_properties(path) -> dict[str, str]:
    return parse_properties(Path(path).read_text(encoding="utf-8"))


def dump_properties(props: Mapping[str, str], comment: Optional[str] = None) -> str:
    lines = [f"# {comment}"] if comment else []
    lines += [f"{k}={v}" for k, v in props.items()]
    return "\n".join(lines) + "\n"


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _float(props, key, default=None) -> float:
    if key not in props:
        if default is None:
            raise PolicyError(f"missing key {key}")
        return default
    try:
        return float(props[key])
    except ValueError:
        raise PolicyError(f"{key}: {props[key]!r} is not a number") from None


def _int(props, key, default=None) -> int:
    v = _float(props, key, default)
    if not float(v).is_integer():
        raise PolicyError(f"{key}: expected an integer")
    return int(v)


def _per_case(props, prefix) -> dict[CaseKind, int]:
    out = {}
    for key in props:
        if key.startswith(prefix + "."):
            tag = key[len(prefix) + 1:]
            try:
                kind = CaseKind(tag)
            except ValueError:
                raise PolicyError(f"{key}: unknown uncertainty case {tag!r}") from None
            out[kind] = _int(props, key)
    return out


def _case_props(prefix, table) -> dict[str, str]:
    return {f"{prefix}.{k.value}": str(v) for k, v in table.items()}


# --------------------------------------------------------------------------
# role policies


@dataclass(frozen=True)
class MonitorPolicy:
    variables: tuple[VariableSpec, ...]

    def spec(self, name: str) -> VariableSpec:
        for s in self.variables:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.variables)

    @classmethod
    def from_properties(cls, props):
        specs = []
        for name in _list(props.get("monitor.variables", "")):
            levels = props.get(f"monitor.levels.{name}")
            window = props.get(f"monitor.preprocessing.{name}", "none")
            if window != "none":
                if not window.startswith("perclos:"):
                    raise PolicyError(f"monitor.preprocessing.{name}: unknown {window!r}")
                window = int(window.split(":", 1)[1])
            else:
                window = None
            specs.append(VariableSpec(
                name,
                _float(props, f"monitor.normalization.min.{name}", 0.0),
                _float(props, f"monitor.normalization.max.{name}"),
                _float(props, f"monitor.threshold.min.{name}", 0.0),
                _float(props, f"monitor.threshold.max.{name}", 1.0),
                window,
                tuple(float(x) for x in _list(levels)) if levels else None,
            ))
        if not specs:
            raise PolicyError("monitor.variables is empty")
        return cls(tuple(specs))

    def to_properties(self):
        props = {"monitor.variables": ",".join(self.names)}
        for s in self.variables:
            props[f"monitor.normalization.min.{s.name}"] = format_number(s.raw_min)
            props[f"monitor.normalization.max.{s.name}"] = format_number(s.raw_max)
            props[f"monitor.threshold.min.{s.name}"] = format_number(s.valid_min)
            props[f"monitor.threshold.max.{s.name}"] = format_number(s.valid_max)
            props[f"monitor.preprocessing.{s.name}"] = (
                "none" if s.perclos_window is None else f"perclos:{s.perclos_window}")
            if s.levels is not None:
                props[f"monitor.levels.{s.name}"] = ",".join(format_number(x) for x in s.levels)
        return props


@dataclass(frozen=True)
class AnalyzePolicy:
    variables: tuple[str, ...]
    algorithm: str = "ripper"
    measures: tuple[str, ...] = ("precision", "recall", "fmeasure")
    min_analysis_iterations: Mapping[CaseKind, int] = field(default_factory=dict)
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.algorithm != "ripper":
            raise PolicyError(f"unsupported algorithm {self.algorithm!r}")
        if self.folds < 2:
            raise PolicyError("analyze.folds must be >= 2")

    def iterations_for(self, kind: CaseKind) -> int:
        return self.min_analysis_iterations.get(kind, 0)

    @classmethod
    def from_properties(cls, props):
        return cls(
            tuple(_list(props.get("analyze.variables", ""))),
            props.get("analyze.algorithm", "ripper"),
            tuple(_list(props.get("analyze.measures", "precision,recall,fmeasure"))),
            _per_case(props, "analyze.minAnalysisIterations"),
            _int(props, "analyze.folds", 10),
            _int(props, "analyze.seed", 0),
        )

    def to_properties(self):
        props = {
            "analyze.algorithm": self.algorithm,
            "analyze.variables": ",".join(self.variables),
            "analyze.measures": ",".join(self.measures),
            "analyze.folds": str(self.folds),
            "analyze.seed": str(self.seed),
        }
        props.update(_case_props("analyze.minAnalysisIterations", self.min_analysis_iterations))
        return props


@dataclass(frozen=True)
class PlanPolicy:
    precision_min: float = 0.95
    recall_min: float = 0.95
    fmeasure_min: float = 0.95

    def __post_init__(self):
        for name in ("precision_min", "recall_min", "fmeasure_min"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise PolicyError(f"plan threshold {name} outside [0, 1]")

    @classmethod
    def from_properties(cls, props):
        return cls(_float(props, "plan.precisionMin", 0.95), _float(props, "plan.recallMin", 0.95),
                   _float(props, "plan.fMeasureMin", 0.95))

    def to_properties(self):
        return {"plan.precisionMin": format_number(self.precision_min),
                "plan.recallMin": format_number(self.recall_min),
                "plan.fMeasureMin": format_number(self.fmeasure_min)}


@dataclass(frozen=True)
class ExecutePolicy:
    managed_elements: tuple[str, ...]

    @classmethod
    def from_properties(cls, props):
        ids = tuple(_list(props.get("execute.managedElements", "")))
        if not ids:
            raise PolicyError("execute.managedElements is empty")
        return cls(ids)

    def to_properties(self):
        return {"execute.managedElements": ",".join(self.managed_elements)}


@dataclass(frozen=True)
class KnowledgeBasePolicy:
    persist: tuple[str, ...]
    frequency: float = 14.28
    min_uncertainty_iterations: Mapping[CaseKind, int] = field(default_factory=dict)
    # where per-requirement datasets are written for the learner; None keeps
    # them in memory
    data_dir: Optional[str] = None

    def __post_init__(self):
        if self.frequency <= 0:
            raise PolicyError("kb.frequency must be positive")

    def iterations_for(self, kind: CaseKind) -> int:
        return self.min_uncertainty_iterations.get(kind, 0)

    @classmethod
    def from_properties(cls, props):
        return cls(tuple(_list(props.get("kb.persist", ""))), _float(props, "kb.frequency", 14.28),
                   _per_case(props, "kb.minUncertaintyIterations"),
                   props.get("kb.dataDir") or None)

    def to_properties(self):
        props = {"kb.frequency": format_number(self.frequency), "kb.persist": ",".join(self.persist)}
        props.update(_case_props("kb.minUncertaintyIterations", self.min_uncertainty_iterations))
        if self.data_dir is not None:
            props["kb.dataDir"] = str(self.data_dir)
        return props


ROLE_POLICY = {
    Role.MONITOR: MonitorPolicy,
    Role.ANALYZE: AnalyzePolicy,
    Role.PLAN: PlanPolicy,
    Role.EXECUTE: ExecutePolicy,
    Role.KNOWLEDGE_BASE: KnowledgeBasePolicy,
}


@dataclass(frozen=True)
class ManagerPolicy:
    """Loop structure plus the policy each element runs with.

    ``assignments`` maps element ids (``monitor1``, ``analyze1`` ...) to a
    policy name in the owning :class:`PolicySet`; unassigned elements use
    the role's default policy, named after the role.
    """

    structure: Mapping[Role, int]
    assignments: Mapping[str, str] = field(default_factory=dict)

    def element_ids(self, role: Role) -> list[str]:
        return [f"{role.value}{i}" for i in range(1, self.structure.get(role, 0) + 1)]

    def policy_name(self, element_id: str, role: Role) -> str:
        return self.assignments.get(element_id, role.value)

    def missing_roles(self) -> list[Role]:
        return [r for r in MAPEK_ROLES if self.structure.get(r, 0) < 1]


@dataclass(frozen=True)
class PolicySet:
    manager: ManagerPolicy
    policies: Mapping[str, object]

    def __post_init__(self):
        for role, cls in ROLE_POLICY.items():
            p = self.policies.get(role.value)
            if p is not None and not isinstance(p, cls):
                raise PolicyError(f"policy {role.value!r} must be a {cls.__name__}")

    @property
    def monitor(self) -> MonitorPolicy:
        return self.policies[Role.MONITOR.value]

    @property
    def analyze(self) -> AnalyzePolicy:
        return self.policies[Role.ANALYZE.value]

    @property
    def plan(self) -> PlanPolicy:
        return self.policies[Role.PLAN.value]

    @property
    def execute(self) -> ExecutePolicy:
        return self.policies[Role.EXECUTE.value]

    @property
    def knowledge_base(self) -> KnowledgeBasePolicy:
        return self.policies[Role.KNOWLEDGE_BASE.value]

    def replace(self, name: str, policy) -> "PolicySet":
        policies = dict(self.policies)
        policies[name] = policy
        return PolicySet(self.manager, policies)

    def with_structure(self, **counts) -> "PolicySet":
        structure = dict(self.manager.structure)
        for role_value, n in counts.items():
            structure[Role(role_value)] = n
        return PolicySet(dataclasses.replace(self.manager, structure=structure), self.policies)


# --------------------------------------------------------------------------
# loading and saving


def _policy_kind(props) -> Role:
    prefixes = {k.split(".", 1)[0] for k in props}
    roles = [r for r in ROLE_POLICY if r.value in prefixes]
    if len(roles) != 1:
        raise PolicyError(f"cannot tell the role of a policy file with keys {sorted(prefixes)}")
    return roles[0]


def load_role_policy(path):
    props = read_properties(path)
    role = _policy_kind(props)
    return ROLE_POLICY[role].from_properties(props)


def load_policy_set(manager_path) -> PolicySet:
    """Read a manager file and every role file it references.

    Keys: ``manager.structure.<role>=<count>``, ``manager.policy.<name>=<file>``
    (the five role defaults use the role value as name) and
    ``manager.assign.<element id>=<name>``.
    """
    manager_path = Path(manager_path)
    props = read_properties(manager_path)
    structure = {}
    for role in Role:
        key = f"manager.structure.{role.value}"
        if key in props:
            structure[role] = _int(props, key)
    policies = {}
    for key, rel in props.items():
        if key.startswith("manager.policy."):
            name = key[len("manager.policy."):]
            path = manager_path.parent / rel
            if not path.exists():
                raise PolicyError(f"{key}: policy file {path} not found")
            policies[name] = load_role_policy(path)
    assignments = {k[len("manager.assign."):]: v for k, v in props.items()
                   if k.startswith("manager.assign.")}
    return PolicySet(ManagerPolicy(structure, assignments), policies)


def dump_policy_set(ps: PolicySet, directory) -> Path:
    """Write the manager file and one file per named policy; returns the manager path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mprops = {f"manager.structure.{r.value}": str(n) for r, n in ps.manager.structure.items()}
    for name, policy in ps.policies.items():
        fname = f"{name}.properties"
        (directory / fname).write_text(dump_properties(policy.to_properties()), encoding="utf-8")
        mprops[f"manager.policy.{name}"] = fname
    for element_id, name in ps.manager.assignments.items():
        mprops[f"manager.assign.{element_id}"] = name
    path = directory / "manager.properties"
    path.write_text(dump_properties(mprops), encoding="utf-8")
    return path


def default_policy_dir():
    return resources.files("sacre") / "policies"


def default_policy_set() -> PolicySet:
    with resources.as_file(default_policy_dir()) as d:
        return load_policy_set(Path(d) / "manager.properties")
