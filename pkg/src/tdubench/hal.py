"""Backend-agnostic drive interface mirroring a CAN motor-controller stack.

A :class:`Drive` exposes torque, velocity-PID and position-PID control of
two motors, fan control, and telemetry snapshots.  The :class:`SimDrive`
backend runs the controllers at a fixed rate against the in-process plant;
a frame-codec backend lives in :mod:`tdubench.framedrive`.

Commands latch atomically: a (mode, target) pair takes effect as a unit at
the next control tick, so no tick ever mixes an old mode with a new target.
"""

from __future__ import annotations

import enum
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import DriveFault, RangeError, UnknownMotorError
from .plant import Fixture, Plant

VELOCITY_TARGET_LIMIT = 100.0  # rad/s, sanity bound well above no-load speed


class DriveMode(enum.Enum):
    IDLE = 0
    TORQUE = 1
    VELOCITY_PID = 2
    POSITION_PID = 3


@dataclass(frozen=True)
class DriveCommand:
    motor_id: int
    mode: DriveMode
    target: float = 0.0   # N*m, rad/s or rad depending on mode
    timestamp: float = 0.0


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0

    def validate(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0.0:
            raise RangeError("PID gains must be >= 0")
        if self.integral_limit <= 0.0:
            raise RangeError("integral_limit must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_err: float = 0.0
    output: float = 0.0


# Shipped tuning for the velocity loop against the default plant.  The gains
# were chosen so that small-amplitude sinusoid tracking shows the expected
# low-speed lag (stiction deadband plus cogging) while large amplitudes stay
# within a 15 degree phase budget through 2 Hz.
DEFAULT_VELOCITY_GAINS = PidGains(kp=0.06, ki=0.7, kd=0.0, integral_limit=3.0)
# Outer position loop is a pure proportional cascade onto the velocity loop.
DEFAULT_POSITION_KP = 10.0  # (rad/s) per rad


def pid_step(
    err: float,
    gains: PidGains,
    state: PidState,
    dt: float,
    output_limit: float,
) -> tuple[float, PidState]:
    """One PID update with integral anti-windup and output clamping.

    Pure function of its arguments: replaying a logged error sequence
    reproduces the output sequence bit-exactly.
    """
    integral = state.integral + err * dt
    lim = gains.integral_limit
    if integral > lim:
        integral = lim
    elif integral < -lim:
        integral = -lim
    out = gains.kp * err + gains.ki * integral + gains.kd * (err - state.prev_err) / dt
    if out > output_limit:
        out = output_limit
    elif out < -output_limit:
        out = -output_limit
    return out, PidState(integral=integral, prev_err=err, output=out)


@dataclass(frozen=True)
class TelemetrySample:
    """One timestamped per-motor reading."""

    t: float
    motor_id: int
    position: float       # rad
    velocity: float       # rad/s
    torque: float         # N*m, delivered (phase-current estimate)
    current: float        # A
    stator_temp: float    # deg C
    pack_voltage: float   # V


class Drive(ABC):
    """Control and telemetry surface of one two-motor drive unit."""

    @abstractmethod
    def send_command(self, cmd: DriveCommand) -> None:
        """Validate and latch a (mode, target) pair for one motor."""

    @abstractmethod
    def set_gains(self, motor_id: int, gains: PidGains) -> None:
        """Replace the velocity-loop gains for one motor."""

    @abstractmethod
    def set_fans(self, on: bool) -> None:
        """Toggle the cooling fans (thermal regime and acoustic source)."""

    @abstractmethod
    def sample(self, motor_id: int) -> TelemetrySample:
        """Snapshot one motor's telemetry at the current drive time."""

    @abstractmethod
    def run(
        self,
        duration: float,
        targets: Optional[Callable[[float], tuple[float, float]]] = None,
        on_tick: Optional[Callable[[float], None]] = None,
        tick_divisor: int = 1,
    ) -> None:
        """Advance the control loop.

        ``targets(t)``, when given, supplies per-tick targets for both
        motors in their currently latched modes (setpoint streaming).
        ``on_tick(t)`` fires after every ``tick_divisor``-th tick.
        """

    @abstractmethod
    def time(self) -> float:
        """Drive-local time in seconds."""


class SimDrive(Drive):
    """Drive backend running controllers at a fixed rate on the sim plant."""

    def __init__(
        self,
        plant: Plant,
        velocity_gains: PidGains = DEFAULT_VELOCITY_GAINS,
        position_kp: float = DEFAULT_POSITION_KP,
    ):
        velocity_gains.validate()
        self.plant = plant
        self.dt = plant.params.dt
        self.position_kp = position_kp
        self._gains = [velocity_gains, velocity_gains]
        self._mode = [DriveMode.IDLE, DriveMode.IDLE]
        self._target = [0.0, 0.0]
        # velocity-loop integrator and previous error, per motor
        self._integ = [0.0, 0.0]
        self._prev_err = [0.0, 0.0]
        self.faulted = False

    # -- command path --------------------------------------------------------

    def _check_motor(self, motor_id: int) -> int:
        if motor_id not in (1, 2):
            raise UnknownMotorError(f"no motor {motor_id}; unit has motors 1 and 2")
        return motor_id - 1

    def send_command(self, cmd: DriveCommand) -> None:
        if self.faulted:
            raise DriveFault("drive is faulted; power-cycle required")
        i = self._check_motor(cmd.motor_id)
        target = cmd.target
        if not math.isfinite(target):
            raise RangeError("command target must be finite")
        if cmd.mode is DriveMode.TORQUE:
            peak = self.plant.params.motor(cmd.motor_id).peak_torque
            if abs(target) > peak:
                raise RangeError(
                    f"torque target {target:g} exceeds peak {peak:g} N*m"
                )
        elif cmd.mode is DriveMode.VELOCITY_PID:
            if abs(target) > VELOCITY_TARGET_LIMIT:
                raise RangeError(
                    f"velocity target {target:g} exceeds {VELOCITY_TARGET_LIMIT:g} rad/s"
                )
        elif cmd.mode is DriveMode.IDLE:
            target = 0.0
        if cmd.mode is not self._mode[i]:
            # fresh controller state on every mode change
            self._integ[i] = 0.0
            self._prev_err[i] = 0.0
        self._mode[i] = cmd.mode
        self._target[i] = target

    def set_gains(self, motor_id: int, gains: PidGains) -> None:
        gains.validate()
        i = self._check_motor(motor_id)
        self._gains[i] = gains
        self._integ[i] = 0.0
        self._prev_err[i] = 0.0

    def set_fans(self, on: bool) -> None:
        self.plant.set_fans(on)

    # -- telemetry -------------------------------------------------------------

    def sample(self, motor_id: int) -> TelemetrySample:
        i = self._check_motor(motor_id)
        p = self.plant
        tau = p.applied[i]
        kt = p.params.motor(motor_id).kt
        return TelemetrySample(
            t=p.sim_time,
            motor_id=motor_id,
            position=p.pos[i],
            velocity=p.vel[i],
            torque=tau,
            current=tau / kt,
            stator_temp=p.temp[i],
            pack_voltage=p.pack_voltage,
        )

    def time(self) -> float:
        return self.plant.sim_time

    # -- control loop ------------------------------------------------------------

    def _cmd_for(self, i: int, dt: float) -> float:
        """Resolve one motor's torque command from its latched mode."""
        mode = self._mode[i]
        if mode is DriveMode.TORQUE:
            return self._target[i]
        if mode is DriveMode.IDLE:
            return 0.0
        plant = self.plant
        if mode is DriveMode.POSITION_PID:
            vel_ref = self.position_kp * (self._target[i] - plant.pos[i])
        else:
            vel_ref = self._target[i]
        err = vel_ref - plant.vel[i]
        g = self._gains[i]
        integral = self._integ[i] + err * dt
        lim = g.integral_limit
        if integral > lim:
            integral = lim
        elif integral < -lim:
            integral = -lim
        out = g.kp * err + g.ki * integral + g.kd * (err - self._prev_err[i]) / dt
        peak = plant.params.motor(i + 1).peak_torque
        if out > peak:
            out = peak
        elif out < -peak:
            out = -peak
        self._integ[i] = integral
        self._prev_err[i] = err
        return out

    def run(self, duration, targets=None, on_tick=None, tick_divisor=1):
        if self.faulted:
            raise DriveFault("drive is faulted; power-cycle required")
        plant = self.plant
        dt = self.dt
        n = int(round(duration / dt))
        cmd_for = self._cmd_for
        step = plant.step
        target = self._target
        for k in range(n):
            if targets is not None:
                tg = targets(plant.sim_time)
                if tg is not None:
                    target[0] = tg[0]
                    target[1] = tg[1]
            try:
                step(cmd_for(0, dt), cmd_for(1, dt), dt)
            except DriveFault:
                self.faulted = True
                raise
            if on_tick is not None and (k + 1) % tick_divisor == 0:
                on_tick(plant.sim_time)


@dataclass
class Rig:
    """A drive plus the bench instrumentation the protocols need.

    Both shipped backends emulate the unit at desk scale, so the rig also
    exposes the underlying plant for fixture changes and accelerated-time
    advances; a hardware bridge would substitute wall-clock equivalents.
    """

    backend: str
    drive: Drive
    plant: Plant

    def attach(self, fixture: Fixture) -> None:
        self.plant.attach(fixture)

    def zero_motion(self) -> None:
        self.plant.zero_motion()

    def read_tension(self, motor_id: int) -> float:
        return self.plant.tension(motor_id)

    def mic_level(self) -> float:
        return self.plant.mic_level()

    def fast_forward(self, duration: float, **kw) -> None:
        self.plant.fast_forward(duration, **kw)
