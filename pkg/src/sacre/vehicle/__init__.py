"""Trace-driven smart vehicle used as the managed element."""

from .actuators import ACTUATORS, Action, ActuatorState, DriverAction, Override, effective
from .scenarios import (FULL_SCALE_ITERATIONS, MIN_HISTORY_ITERATIONS, SACRE_RATE, SCENARIOS,
                        VEHICLE_RATE, BudgetError, Scenario, ScenarioSpec, ScenarioTemplate,
                        build_scenario, generate_scenario, load_scenario)
from .traces import (SensorTraceRow, TraceError, dumps_actions, dumps_sensor_trace, read_actions,
                     read_sensor_trace, write_actions, write_sensor_trace)
from .vehicle import (SimulationComplete, SmartVehicle, TraceDriver, UnknownRequirement,
                      VehicleConfig, VehicleReport, load_vehicle_config)

__all__ = [
    "ACTUATORS", "Action", "ActuatorState", "BudgetError", "DriverAction", "FULL_SCALE_ITERATIONS",
    "MIN_HISTORY_ITERATIONS", "Override", "SACRE_RATE", "SCENARIOS", "Scenario", "ScenarioSpec",
    "ScenarioTemplate", "SensorTraceRow", "SimulationComplete", "SmartVehicle", "TraceDriver",
    "TraceError", "UnknownRequirement", "VEHICLE_RATE", "VehicleConfig", "VehicleReport",
    "build_scenario", "dumps_actions", "dumps_sensor_trace", "effective", "generate_scenario",
    "load_scenario", "load_vehicle_config", "read_actions", "read_sensor_trace", "write_actions",
    "write_sensor_trace",
]
