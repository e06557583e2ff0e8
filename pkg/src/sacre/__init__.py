"""Runtime adaptation of contextual requirements.

A MAPE-K loop watches a managed system, detects when its contextual
requirements are no longer satisfied, re-learns the context
operationalizations from monitored history and enacts them.  The package
ships a simulated smart vehicle and an experiment harness around it.
"""

__version__ = "0.1.0"
