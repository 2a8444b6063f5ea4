"""Frame-codec drive backend: a wire-level client plus a drive emulator.

:class:`DriveEmulator` terminates register-protocol frames against an
in-process :class:`~tdubench.hal.SimDrive`, exactly as a bus bridge to real
drive firmware would.  :class:`FrameDrive` implements the
:class:`~tdubench.hal.Drive` interface purely in terms of encoded frames, so
every command and telemetry read crosses the codec.  The transport below
the framing layer is pluggable; the shipped :class:`LoopbackTransport` is a
synchronous in-process pair.

Time marching stays out-of-band (the rig "waits"), mirroring a bench where
the operator, not the bus, owns the clock.  Values crossing the wire are
quantized to binary32, which is the backend's documented precision.
"""

from __future__ import annotations

from typing import Callable, Optional

from . import codec
from .codec import Channel, Frame, GainField, Opcode
from .errors import BackendError
from .hal import Drive, DriveCommand, DriveMode, PidGains, SimDrive, TelemetrySample


class LoopbackTransport:
    """Synchronous request/response pair bound to one emulator."""

    def __init__(self, emulator: "DriveEmulator"):
        self.emulator = emulator
        self.frames_sent = 0

    def request(self, frame: Frame) -> Optional[Frame]:
        self.frames_sent += 1
        return self.emulator.handle(frame)


class DriveEmulator:
    """Register-protocol endpoint in front of a simulated drive."""

    def __init__(self, inner: SimDrive):
        self.inner = inner
        self._modes = [DriveMode.IDLE, DriveMode.IDLE]
        self._gains = [inner._gains[0], inner._gains[1]]

    def handle(self, frame: Frame) -> Optional[Frame]:
        msg = codec.decode(frame)
        i = msg.motor_id - 1
        op = msg.opcode
        if op is Opcode.SET_MODE:
            mode = DriveMode(msg.mode)
            self._modes[i] = mode
            # a mode switch always lands with a zero target; the follow-up
            # SET_TARGET then moves it, so mode and target never mix stale
            self.inner.send_command(DriveCommand(msg.motor_id, mode, 0.0))
            return None
        if op is Opcode.SET_TARGET:
            self.inner.send_command(
                DriveCommand(msg.motor_id, self._modes[i], msg.target)
            )
            return None
        if op is Opcode.SET_GAINS:
            g = self._gains[i]
            fields = {
                GainField.KP: "kp",
                GainField.KI: "ki",
                GainField.KD: "kd",
                GainField.INTEGRAL_LIMIT: "integral_limit",
            }
            kwargs = {
                "kp": g.kp,
                "ki": g.ki,
                "kd": g.kd,
                "integral_limit": g.integral_limit,
            }
            kwargs[fields[GainField(msg.gain_id)]] = msg.gain_value
            g = PidGains(**kwargs)
            self._gains[i] = g
            self.inner.set_gains(msg.motor_id, g)
            return None
        if op is Opcode.FAN_CTL:
            self.inner.set_fans(msg.fans_on)
            return None
        if op is Opcode.TELEMETRY_REQ:
            s = self.inner.sample(msg.motor_id)
            values = {
                Channel.TIME: s.t,
                Channel.POSITION: s.position,
                Channel.VELOCITY: s.velocity,
                Channel.TORQUE: s.torque,
                Channel.CURRENT: s.current,
                Channel.STATOR_TEMP: s.stator_temp,
                Channel.PACK_VOLTAGE: s.pack_voltage,
            }
            resp = codec.telemetry_resp(
                msg.motor_id, msg.channel, values[Channel(msg.channel)]
            )
            return codec.encode(resp)
        raise BackendError(f"emulator cannot serve {op.name} frames")

    def tick(self, duration: float) -> None:
        """Advance the emulated drive's control loop (out-of-band clock)."""
        self.inner.run(duration)


class FrameDrive(Drive):
    """Drive client that talks only encoded frames over a transport."""

    def __init__(self, transport, tick: Callable[[float], None], dt: float):
        self.transport = transport
        self._tick = tick
        self.dt = dt
        self._modes = [DriveMode.IDLE, DriveMode.IDLE]
        self._time = 0.0

    def _send(self, msg) -> Optional[Frame]:
        return self.transport.request(codec.encode(msg))

    def send_command(self, cmd: DriveCommand) -> None:
        i = cmd.motor_id - 1
        if cmd.mode is not self._modes[i]:
            self._send(codec.set_mode(cmd.motor_id, cmd.mode.value))
            self._modes[i] = cmd.mode
        self._send(codec.set_target(cmd.motor_id, cmd.target))

    def set_gains(self, motor_id: int, gains: PidGains) -> None:
        gains.validate()
        for gid, value in (
            (GainField.KP, gains.kp),
            (GainField.KI, gains.ki),
            (GainField.KD, gains.kd),
            (GainField.INTEGRAL_LIMIT, gains.integral_limit),
        ):
            self._send(codec.set_gains(motor_id, gid, value))

    def set_fans(self, on: bool) -> None:
        self._send(codec.fan_ctl(on))

    def _read(self, motor_id: int, channel: Channel) -> float:
        resp = self._send(codec.telemetry_req(motor_id, channel))
        if resp is None:
            raise BackendError(
                f"telemetry request {channel.name} got no response",
                code="TELEMETRY_TIMEOUT",
            )
        msg = codec.decode(resp)
        if channel == Channel.STATOR_TEMP:
            return msg.temp_centi_c / 100.0
        return msg.value

    def sample(self, motor_id: int) -> TelemetrySample:
        t = self._read(motor_id, Channel.TIME)
        return TelemetrySample(
            t=t,
            motor_id=motor_id,
            position=self._read(motor_id, Channel.POSITION),
            velocity=self._read(motor_id, Channel.VELOCITY),
            torque=self._read(motor_id, Channel.TORQUE),
            current=self._read(motor_id, Channel.CURRENT),
            stator_temp=self._read(motor_id, Channel.STATOR_TEMP),
            pack_voltage=self._read(motor_id, Channel.PACK_VOLTAGE),
        )

    def run(self, duration, targets=None, on_tick=None, tick_divisor=1):
        n = int(round(duration / self.dt))
        for k in range(n):
            if targets is not None:
                tg = targets(self._time)
                if tg is not None:
                    self._send(codec.set_target(1, tg[0]))
                    self._send(codec.set_target(2, tg[1]))
            self._tick(self.dt)
            self._time += self.dt
            if on_tick is not None and (k + 1) % tick_divisor == 0:
                on_tick(self._time)

    def time(self) -> float:
        return self._time


def loopback_pair(inner: SimDrive) -> tuple[FrameDrive, DriveEmulator]:
    """Build a frame-backed drive wired to an emulator over a loopback."""
    emulator = DriveEmulator(inner)
    transport = LoopbackTransport(emulator)
    drive = FrameDrive(transport, emulator.tick, inner.dt)
    return drive, emulator
