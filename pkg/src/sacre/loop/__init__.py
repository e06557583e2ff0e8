"""The requirements-adaptation loop: policies, elements and their manager."""

from .elements import (Acknowledgement, Analyze, AnalysisAttempt, DispatchError, Effectors,
                       Element, Execute, Health, Inbox, KBRecord, KnowledgeBase, Monitor,
                       NoHealthyElement, Plan, Sensors)
from .manager import (TOPOLOGY, AutonomicManager, HealthReport, Loop, LoopNotStarted,
                      SetupError, setup)
from .messages import ActiveSetChange, AlreadyEnacted, ChangePlan, RequestForChange, Symptom
from .policies import (MAPEK_ROLES, AnalyzePolicy, ExecutePolicy, KnowledgeBasePolicy,
                       ManagerPolicy, MonitorPolicy, PlanPolicy, PolicyError, PolicySet, Role,
                       default_policy_set, dump_policy_set, load_policy_set, parse_properties,
                       read_properties)

__all__ = [
    "Acknowledgement", "ActiveSetChange", "AlreadyEnacted", "Analyze", "AnalysisAttempt",
    "AnalyzePolicy", "AutonomicManager", "ChangePlan", "DispatchError", "Effectors", "Element",
    "Execute", "ExecutePolicy", "Health", "HealthReport", "Inbox", "KBRecord", "KnowledgeBase",
    "KnowledgeBasePolicy", "Loop", "LoopNotStarted", "MAPEK_ROLES", "ManagerPolicy", "Monitor",
    "MonitorPolicy", "NoHealthyElement", "Plan", "PlanPolicy", "PolicyError", "PolicySet",
    "RequestForChange", "Role", "Sensors", "SetupError", "Symptom", "TOPOLOGY", "setup",
    "default_policy_set", "dump_policy_set", "load_policy_set", "parse_properties",
    "read_properties",
]
