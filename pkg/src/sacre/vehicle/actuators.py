"""Actuator state machines and driver actions."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Override(enum.Enum):
    NONE = "none"
    TURNED_OFF = "turned_off"
    DISABLED = "disabled"
    TURNED_ON = "turned_on"


class Action(enum.Enum):
    TURN_ON = "turn_on"
    TURN_OFF = "turn_off"
    DISABLE = "disable"
    ENABLE = "enable"


ACTUATORS = ("seat_vibration", "sound_light", "lane_keeping")
# only lane keeping can be switched on by hand
MANUAL_ON = ("lane_keeping",)


@dataclass(frozen=True)
class DriverAction:
    tick: int
    actuator_id: str
    action: Action

    def __post_init__(self):
        if self.actuator_id not in ACTUATORS:
            raise ValueError(f"unknown actuator {self.actuator_id!r}")
        if self.action is Action.TURN_ON and self.actuator_id not in MANUAL_ON:
            raise ValueError(f"{self.actuator_id} cannot be turned on by the driver")

    @classmethod
    def parse(cls, tick: str, actuator: str, action: str) -> "DriverAction":
        try:
            kind = Action(action)
        except ValueError:
            raise ValueError(f"unknown action {action!r}") from None
        return cls(int(tick), actuator, kind)


@dataclass
class ActuatorState:
    """What the system asks for and what the driver did about it.

    Precedence: disabled > turned_on > turned_off > system command.  A
    ``turned_off`` override lasts until the system stops commanding the
    actuator; ``disabled`` lasts until the driver enables it again.
    """

    actuator_id: str
    system_commanded: bool = False
    driver_override: Override = Override.NONE

    @property
    def effective_active(self) -> bool:
        return effective(self.driver_override, self.system_commanded)

    def command(self, on: bool) -> None:
        self.system_commanded = bool(on)
        if not on and self.driver_override is Override.TURNED_OFF:
            self.driver_override = Override.NONE

    def apply(self, action: Action) -> None:
        if action is Action.TURN_ON:
            if self.actuator_id not in MANUAL_ON:
                raise ValueError(f"{self.actuator_id} cannot be turned on by the driver")
            self.driver_override = Override.TURNED_ON
        elif action is Action.TURN_OFF:
            self.driver_override = Override.TURNED_OFF
        elif action is Action.DISABLE:
            self.driver_override = Override.DISABLED
        elif self.driver_override is Override.DISABLED:
            self.driver_override = Override.NONE


def effective(override: Override, commanded: bool) -> bool:
    if override is Override.DISABLED:
        return False
    if override is Override.TURNED_ON:
        return True
    if override is Override.TURNED_OFF:
        return False
    return commanded
