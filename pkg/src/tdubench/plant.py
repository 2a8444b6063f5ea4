"""Deterministic fixed-step physics backend for the simulated driver unit.

Models two direct-drive motors plus the shared battery, per-motor stator
thermal nodes, and an acoustic source model.  The mechanical integrator is
semi-implicit Euler (implicit in the viscous term), the thermal update is
the exact exponential solution of the single-node RC model, and the battery
is straight energy bookkeeping with an SOC -> voltage lookup.

A plant instance is single-owner: exactly one control loop steps it.  All
state transitions are pure float arithmetic, so identical inputs reproduce
bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DriveFault
from .params import GRAVITY, MotorParams, PlantParams


def torque_map(cmd: float, motor: MotorParams) -> tuple[float, bool]:
    """Commanded -> delivered torque, with a saturation flag.

    Delivered torque is sign(cmd) * max(0, gain*|cmd| - offset): the drive
    under-delivers by a gain factor and loses a fixed offset to stiction.
    Commands beyond peak torque are clamped and flagged, not rejected.
    """
    saturated = abs(cmd) > motor.peak_torque
    if saturated:
        cmd = math.copysign(motor.peak_torque, cmd)
    mag = motor.torque_gain * abs(cmd) - motor.torque_offset
    if mag <= 0.0:
        return 0.0, saturated
    if mag > motor.peak_torque:
        mag = motor.peak_torque
        saturated = True
    return math.copysign(mag, cmd), saturated


def applied_torque(cmd: float, motor: MotorParams) -> float:
    """Torque delivered at the rotor for a commanded torque."""
    return torque_map(cmd, motor)[0]


def cable_tension(torque: float, pulley_radius: float) -> float:
    """Tension produced by a rotor torque on a pulley of the given radius."""
    if pulley_radius <= 0.0:
        raise ValueError("pulley radius must be positive")
    return torque / pulley_radius


def thermal_step(
    temp_c: float,
    electrical_loss_w: float,
    *,
    heat_capacity: float,
    r_th: float,
    ambient_c: float,
    dt: float,
) -> float:
    """Exact one-step update of C*dT/dt = P - (T - ambient)/R."""
    t_inf = ambient_c + electrical_loss_w * r_th
    return t_inf + (temp_c - t_inf) * math.exp(-dt / (r_th * heat_capacity))


def electrical_power(
    torques: tuple[float, float],
    speeds: tuple[float, float],
    motors: tuple[MotorParams, MotorParams],
    idle_power_w: float,
) -> float:
    """Pack power draw: idle load plus mechanical output plus copper loss.

    Mechanical power is non-regenerative: a motor being backdriven returns
    nothing to the pack.
    """
    total = idle_power_w
    for tau, omega, m in zip(torques, speeds, motors):
        mech = tau * omega
        if mech > 0.0:
            total += mech
        i = tau / m.kt
        total += i * i * m.winding_resistance
    return total


def battery_voltage(soc: float, curve: tuple[tuple[float, float], ...]) -> float:
    """Piecewise-linear pack voltage at a state of charge in [0, 1]."""
    if soc <= curve[0][0]:
        return curve[0][1]
    for (s0, v0), (s1, v1) in zip(curve, curve[1:]):
        if soc <= s1:
            return v0 + (v1 - v0) * (soc - s0) / (s1 - s0)
    return curve[-1][1]


def battery_step(soc, power_w, dt, params):
    """Drain ``power_w * dt`` of energy; returns (soc', voltage, depleted)."""
    soc = soc - power_w * dt / params.usable_energy_j
    if soc < 0.0:
        soc = 0.0
    voltage = battery_voltage(soc, params.soc_voltage_curve)
    return soc, voltage, voltage <= params.cutoff_voltage


def sound_level(
    speeds: tuple[float, float],
    fans_on: bool,
    params,
) -> float:
    """Level at the virtual microphone for the given motor speeds.

    Energetic sum of the room floor, the fan source (when running) and one
    speed-dependent source per spinning motor.  A stationary motor emits
    nothing.
    """
    energy = 10.0 ** (params.room_floor_db / 10.0)
    if fans_on:
        energy += 10.0 ** (params.fans_level_db / 10.0)
    for omega in speeds:
        omega = abs(omega)
        if omega > 1e-12:  # below encoder resolution the source is silent
            level = params.motor_ref_level_db + params.motor_slope_db_per_decade * (
                math.log10(omega / params.motor_ref_speed)
            )
            energy += 10.0 ** (level / 10.0)
    return 10.0 * math.log10(energy)


# --------------------------------------------------------------------------
# Load fixtures
# --------------------------------------------------------------------------

FREE = "free"
LOCKED = "locked"
GRAVITY_WINCH = "gravity"
COUPLED = "coupled"


@dataclass(frozen=True)
class Fixture:
    """Mechanical boundary condition attached to the rotors.

    kind:
      free     - rotors spin unloaded (pulleys detached).
      locked   - rotors clamped through a cable to a rigid scale; the
                 tension channel reads applied torque / pulley radius.
      gravity  - each rotor winds a cable lifting ``mass`` kg on a pulley,
                 via a redirect pulley with fractional friction loss.
      coupled  - the two rotors are tied together (theta2 = -theta1)
                 through a redirect pulley.
    """

    kind: str = FREE
    pulley_radius: float = 0.015   # m
    mass1: float = 0.0             # kg
    mass2: float = 0.0             # kg
    friction: float = 0.0          # fractional tension loss per redirect


@dataclass
class PlantState:
    """Snapshot of the full simulation state."""

    sim_time: float
    position: tuple[float, float]
    velocity: tuple[float, float]
    applied_torque: tuple[float, float]
    stator_temp: tuple[float, float]
    fans_on: bool
    soc: float
    pack_voltage: float
    depleted: bool


class Plant:
    """Two-motor plant stepped at a fixed dt by one owner."""

    def __init__(self, params: PlantParams, fixture: Fixture | None = None):
        params.validate()
        self.params = params
        self.fixture = fixture or Fixture()
        ambient = params.thermal.ambient_c
        self.pos = [0.0, 0.0]
        self.vel = [0.0, 0.0]
        self.applied = [0.0, 0.0]
        self.loss_w = [0.0, 0.0]
        self.temp = [ambient, ambient]
        self.fans_on = True
        self.soc = 1.0
        self.pack_voltage = battery_voltage(1.0, params.battery.soc_voltage_curve)
        self.depleted = False
        self.sim_time = 0.0
        self._decay_cache: dict[tuple[bool, float], float] = {}

    # -- setup -------------------------------------------------------------

    def attach(self, fixture: Fixture) -> None:
        self.fixture = fixture

    def zero_motion(self) -> None:
        """Bring the rotors to rest (test rig reset between conditions)."""
        self.pos = [0.0, 0.0]
        self.vel = [0.0, 0.0]
        self.applied = [0.0, 0.0]
        self.loss_w = [0.0, 0.0]

    def set_fans(self, on: bool) -> None:
        self.fans_on = bool(on)

    def recharge(self) -> None:
        """Swap in a fully charged pack."""
        self.soc = 1.0
        self.pack_voltage = battery_voltage(1.0, self.params.battery.soc_voltage_curve)
        self.depleted = False

    # -- readouts ------------------------------------------------------------

    def state(self) -> PlantState:
        return PlantState(
            sim_time=self.sim_time,
            position=(self.pos[0], self.pos[1]),
            velocity=(self.vel[0], self.vel[1]),
            applied_torque=(self.applied[0], self.applied[1]),
            stator_temp=(self.temp[0], self.temp[1]),
            fans_on=self.fans_on,
            soc=self.soc,
            pack_voltage=self.pack_voltage,
            depleted=self.depleted,
        )

    def tension(self, motor_id: int) -> float:
        """Cable tension at the fixture scale; slack cable reads zero."""
        tau = self.applied[motor_id - 1]
        t = cable_tension(tau, self.fixture.pulley_radius)
        return t if t > 0.0 else 0.0

    def mic_level(self) -> float:
        return sound_level(
            (self.vel[0], self.vel[1]), self.fans_on, self.params.acoustics
        )

    # -- stepping ------------------------------------------------------------

    def _decay(self, dt: float) -> float:
        key = (self.fans_on, dt)
        d = self._decay_cache.get(key)
        if d is None:
            th = self.params.thermal
            r = th.r_th_fans_on if self.fans_on else th.r_th_fans_off
            d = math.exp(-dt / (r * th.heat_capacity))
            self._decay_cache[key] = d
        return d

    def step(self, cmd1: float, cmd2: float, dt: float | None = None) -> None:
        """Advance mechanics, thermals and battery by one control period."""
        p = self.params
        if dt is None:
            dt = p.dt
        fx = self.fixture
        kind = fx.kind

        m1, m2 = p.motor1, p.motor2
        tau1, _ = torque_map(cmd1, m1)
        tau2, _ = torque_map(cmd2, m2)

        pos = self.pos
        vel = self.vel

        if kind == LOCKED:
            vel[0] = 0.0
            vel[1] = 0.0
        elif kind == COUPLED:
            # Rigid tie theta1 = -theta2: one mechanical DOF in motor-2
            # coordinates; motor 1 torque and cogging enter with a sign flip.
            j = m1.rotor_inertia + m2.rotor_inertia
            c = m1.viscous_friction + m2.viscous_friction
            th2 = pos[1]
            cog = m2.cogging_amplitude * math.sin(
                m2.cogging_cycles_per_rev * th2
            ) - m1.cogging_amplitude * math.sin(-m1.cogging_cycles_per_rev * th2)
            net = tau2 - tau1 + cog
            w = (vel[1] + dt * net / j) / (1.0 + dt * c / j)
            vel[1] = w
            pos[1] = th2 + dt * w
            vel[0] = -w
            pos[0] = -pos[1]
        else:
            masses = (fx.mass1, fx.mass2)
            taus = (tau1, tau2)
            motors = (m1, m2)
            r = fx.pulley_radius
            for i in range(2):
                m = motors[i]
                j = m.rotor_inertia
                tau_g = 0.0
                if kind == GRAVITY_WINCH and masses[i] > 0.0:
                    j += masses[i] * r * r
                    tau_g = masses[i] * GRAVITY * r
                    if fx.friction > 0.0:
                        if vel[i] > 0.0:
                            tau_g *= 1.0 + fx.friction
                        elif vel[i] < 0.0:
                            tau_g *= 1.0 - fx.friction
                cog = m.cogging_amplitude * math.sin(m.cogging_cycles_per_rev * pos[i])
                net = taus[i] + cog - tau_g
                if m.stiction > 0.0 and abs(vel[i]) < 1e-9 and abs(net) <= m.stiction:
                    w = 0.0
                else:
                    w = (vel[i] + dt * net / j) / (1.0 + dt * m.viscous_friction / j)
                vel[i] = w
                pos[i] += dt * w

        self.applied[0] = tau1
        self.applied[1] = tau2

        i1 = tau1 / m1.kt
        i2 = tau2 / m2.kt
        loss1 = i1 * i1 * m1.winding_resistance
        loss2 = i2 * i2 * m2.winding_resistance
        self.loss_w[0] = loss1
        self.loss_w[1] = loss2

        th = p.thermal
        r_th = th.r_th_fans_on if self.fans_on else th.r_th_fans_off
        decay = self._decay(dt)
        amb = th.ambient_c
        t_inf = amb + loss1 * r_th
        self.temp[0] = t_inf + (self.temp[0] - t_inf) * decay
        t_inf = amb + loss2 * r_th
        self.temp[1] = t_inf + (self.temp[1] - t_inf) * decay

        power = p.battery.idle_power_w + loss1 + loss2
        mech = tau1 * vel[0]
        if mech > 0.0:
            power += mech
        mech = tau2 * vel[1]
        if mech > 0.0:
            power += mech
        self.soc, self.pack_voltage, self.depleted = battery_step(
            self.soc, power, dt, p.battery
        )

        self.sim_time += dt
        if not (
            math.isfinite(vel[0])
            and math.isfinite(vel[1])
            and math.isfinite(pos[0])
            and math.isfinite(pos[1])
        ):
            raise DriveFault(
                f"non-finite plant state at t={self.sim_time:.6f}s "
                f"(vel={vel}, pos={pos})",
                code="PLANT_STATE_NONFINITE",
            )

    def fast_forward(
        self,
        duration: float,
        *,
        motor_losses_w: tuple[float, float] = (0.0, 0.0),
        mech_power_w: float = 0.0,
        dt: float = 0.1,
        on_sample=None,
        stop=None,
    ) -> None:
        """Advance thermals and battery without stepping the mechanics.

        Used by protocols whose mechanical motion is either absent (stall,
        released load) or periodic with a known mean power: the thermal
        update is exact for constant loss, and the battery drains at the
        measured mean power.  ``on_sample(t)`` fires after every coarse step;
        a ``stop()`` predicate, checked after each step, ends the advance.
        """
        p = self.params
        th = p.thermal
        steps = int(round(duration / dt))
        r_th = th.r_th_fans_on if self.fans_on else th.r_th_fans_off
        decay = math.exp(-dt / (r_th * th.heat_capacity))
        amb = th.ambient_c
        power = p.battery.idle_power_w + mech_power_w + sum(motor_losses_w)
        for _ in range(steps):
            t_inf = amb + motor_losses_w[0] * r_th
            self.temp[0] = t_inf + (self.temp[0] - t_inf) * decay
            t_inf = amb + motor_losses_w[1] * r_th
            self.temp[1] = t_inf + (self.temp[1] - t_inf) * decay
            self.soc, self.pack_voltage, self.depleted = battery_step(
                self.soc, power, dt, p.battery
            )
            self.sim_time += dt
            if on_sample is not None:
                on_sample(self.sim_time)
            if stop is not None and stop():
                return
