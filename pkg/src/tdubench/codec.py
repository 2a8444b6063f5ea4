"""Bit-exact encoder/decoder for the drive register protocol.

The unit speaks a compact CAN-2.0-style protocol: 11-bit frame ids, up to
8 payload bytes.  Canonical layout (all multi-byte fields little-endian):

    frame id   = BASE_ID + motor_id            (motor 1 -> 0x201, 2 -> 0x202)
    byte 0     = opcode
    byte 1     = motor_id (must match the frame id)
    bytes 2..  = opcode-specific body, at most 6 bytes

Opcodes and bodies:

    0x01 SET_MODE        body: u8 mode (0 idle, 1 torque, 2 velocity, 3 position)
    0x02 SET_TARGET      body: f32 target (N*m / rad/s / rad per current mode)
    0x03 SET_GAINS       body: u8 gain id (0 kp, 1 ki, 2 kd, 3 integral limit),
                               f32 value
    0x04 FAN_CTL         body: u8 on/off (unit-wide; addressed to motor 1)
    0x05 TELEMETRY_REQ   body: u8 channel
    0x06 TELEMETRY_RESP  body: u8 channel, then i16 centi-degC for the
                               stator-temp channel or f32 for all others

Telemetry channels: 0 time_s, 1 position_rad, 2 velocity_rad_s,
3 torque_nm, 4 current_a, 5 stator_temp (i16, 0.01 degC), 6 pack_voltage_v.

Floats travel as IEEE-754 binary32; message values are quantized to that
precision on construction so decode(encode(m)) == m holds exactly.
Encoding is canonical: equal messages produce byte-identical frames.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field

from .errors import (
    BadFieldError,
    BadLengthError,
    BodyOverflowError,
    CodecError,
    ReservedIdError,
    UnknownOpcodeError,
)

BASE_ID = 0x200
MAX_BODY = 6

_F32 = struct.Struct("<f")
_I16 = struct.Struct("<h")


class Opcode(enum.IntEnum):
    SET_MODE = 0x01
    SET_TARGET = 0x02
    SET_GAINS = 0x03
    FAN_CTL = 0x04
    TELEMETRY_REQ = 0x05
    TELEMETRY_RESP = 0x06


class Channel(enum.IntEnum):
    TIME = 0
    POSITION = 1
    VELOCITY = 2
    TORQUE = 3
    CURRENT = 4
    STATOR_TEMP = 5
    PACK_VOLTAGE = 6


class GainField(enum.IntEnum):
    KP = 0
    KI = 1
    KD = 2
    INTEGRAL_LIMIT = 3


MODE_COUNT = 4  # idle, torque, velocity, position


def f32(x: float) -> float:
    """Quantize to the nearest IEEE-754 binary32 value."""
    return _F32.unpack(_F32.pack(x))[0]


@dataclass(frozen=True)
class Frame:
    """One bus frame: 11-bit id plus 0..8 payload bytes."""

    id: int
    payload: bytes

    def __post_init__(self):
        if not (0 <= self.id < 2048):
            raise CodecError(f"frame id {self.id:#x} outside 11-bit range")
        if len(self.payload) > 8:
            raise BadLengthError(f"payload of {len(self.payload)} bytes exceeds 8")

    @property
    def dlc(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class RegisterMessage:
    """Decoded register-protocol message; body fields depend on the opcode."""

    motor_id: int
    opcode: Opcode
    mode: int | None = None
    target: float | None = None
    gain_id: int | None = None
    gain_value: float | None = None
    fans_on: bool | None = None
    channel: int | None = None
    value: float | None = None
    temp_centi_c: int | None = None

    def __post_init__(self):
        # wire floats are binary32; quantize up front so round-trips are exact
        if self.target is not None:
            object.__setattr__(self, "target", f32(self.target))
        if self.gain_value is not None:
            object.__setattr__(self, "gain_value", f32(self.gain_value))
        if self.value is not None:
            object.__setattr__(self, "value", f32(self.value))


def set_mode(motor_id: int, mode: int) -> RegisterMessage:
    return RegisterMessage(motor_id, Opcode.SET_MODE, mode=mode)


def set_target(motor_id: int, target: float) -> RegisterMessage:
    return RegisterMessage(motor_id, Opcode.SET_TARGET, target=target)


def set_gains(motor_id: int, gain_id: int, value: float) -> RegisterMessage:
    return RegisterMessage(
        motor_id, Opcode.SET_GAINS, gain_id=gain_id, gain_value=value
    )


def fan_ctl(on: bool) -> RegisterMessage:
    return RegisterMessage(1, Opcode.FAN_CTL, fans_on=bool(on))


def telemetry_req(motor_id: int, channel: int) -> RegisterMessage:
    return RegisterMessage(motor_id, Opcode.TELEMETRY_REQ, channel=channel)


def telemetry_resp(motor_id: int, channel: int, value: float) -> RegisterMessage:
    if channel == Channel.STATOR_TEMP:
        centi = int(round(value * 100.0))
        if not (-32768 <= centi <= 32767):
            raise BadFieldError(f"temperature {value:g} degC outside i16 range")
        return RegisterMessage(
            motor_id, Opcode.TELEMETRY_RESP, channel=channel, temp_centi_c=centi
        )
    return RegisterMessage(
        motor_id, Opcode.TELEMETRY_RESP, channel=channel, value=value
    )


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise BadFieldError(msg)


def _pack_body(opcode: Opcode, motor_id: int, body: bytes) -> Frame:
    if len(body) > MAX_BODY:
        raise BodyOverflowError(
            f"{opcode.name} body of {len(body)} bytes exceeds {MAX_BODY}"
        )
    return Frame(BASE_ID + motor_id, bytes([opcode, motor_id]) + body)


def encode(msg: RegisterMessage) -> Frame:
    """Serialize a message to its canonical frame."""
    _require(msg.motor_id in (1, 2), f"motor_id {msg.motor_id} not in {{1, 2}}")
    op = msg.opcode
    if op is Opcode.SET_MODE:
        _require(
            msg.mode is not None and 0 <= msg.mode < MODE_COUNT,
            f"mode {msg.mode} invalid",
        )
        body = bytes([msg.mode])
    elif op is Opcode.SET_TARGET:
        _require(
            msg.target is not None and math.isfinite(msg.target),
            "target must be a finite float",
        )
        body = _F32.pack(msg.target)
    elif op is Opcode.SET_GAINS:
        _require(
            msg.gain_id is not None and msg.gain_id in iter(GainField),
            f"gain id {msg.gain_id} invalid",
        )
        _require(
            msg.gain_value is not None and math.isfinite(msg.gain_value),
            "gain value must be a finite float",
        )
        body = bytes([msg.gain_id]) + _F32.pack(msg.gain_value)
    elif op is Opcode.FAN_CTL:
        _require(msg.fans_on is not None, "fans_on missing")
        body = bytes([1 if msg.fans_on else 0])
    elif op is Opcode.TELEMETRY_REQ:
        _require(
            msg.channel is not None and msg.channel in iter(Channel),
            f"channel {msg.channel} invalid",
        )
        body = bytes([msg.channel])
    elif op is Opcode.TELEMETRY_RESP:
        _require(
            msg.channel is not None and msg.channel in iter(Channel),
            f"channel {msg.channel} invalid",
        )
        if msg.channel == Channel.STATOR_TEMP:
            _require(msg.temp_centi_c is not None, "temp_centi_c missing")
            body = bytes([msg.channel]) + _I16.pack(msg.temp_centi_c)
        else:
            _require(
                msg.value is not None and math.isfinite(msg.value),
                "value must be a finite float",
            )
            body = bytes([msg.channel]) + _F32.pack(msg.value)
    else:  # pragma: no cover - enum is closed
        raise UnknownOpcodeError(f"opcode {op} not encodable")
    return _pack_body(op, msg.motor_id, body)


def _body_len(n: int, opcode: str, body: bytes) -> None:
    if len(body) != n:
        raise BadLengthError(
            f"{opcode} expects dlc {n + 2}, got {len(body) + 2}"
        )


def decode(frame: Frame) -> RegisterMessage:
    """Parse a frame; inverse of :func:`encode` on its image.

    Every failure raises a :class:`~tdubench.errors.CodecError` subclass with
    a distinct code: BAD_DLC, UNKNOWN_OPCODE, RESERVED_ID or BAD_FIELD.
    """
    motor_from_id = frame.id - BASE_ID
    if motor_from_id not in (1, 2):
        raise ReservedIdError(f"frame id {frame.id:#x} is not a drive register id")
    if frame.dlc < 2:
        raise BadLengthError(f"frame needs opcode and motor bytes, dlc={frame.dlc}")
    op_byte, motor_id = frame.payload[0], frame.payload[1]
    try:
        op = Opcode(op_byte)
    except ValueError:
        raise UnknownOpcodeError(f"opcode {op_byte:#04x} unknown") from None
    if motor_id != motor_from_id:
        raise BadFieldError(
            f"motor byte {motor_id} disagrees with frame id {frame.id:#x}"
        )
    body = frame.payload[2:]

    if op is Opcode.SET_MODE:
        _body_len(1, op.name, body)
        _require(body[0] < MODE_COUNT, f"mode {body[0]} invalid")
        return RegisterMessage(motor_id, op, mode=body[0])
    if op is Opcode.SET_TARGET:
        _body_len(4, op.name, body)
        target = _F32.unpack(body)[0]
        _require(math.isfinite(target), "target must be finite")
        return RegisterMessage(motor_id, op, target=target)
    if op is Opcode.SET_GAINS:
        _body_len(5, op.name, body)
        _require(body[0] in iter(GainField), f"gain id {body[0]} invalid")
        value = _F32.unpack(body[1:])[0]
        _require(math.isfinite(value), "gain value must be finite")
        return RegisterMessage(motor_id, op, gain_id=body[0], gain_value=value)
    if op is Opcode.FAN_CTL:
        _body_len(1, op.name, body)
        _require(body[0] in (0, 1), f"fan state {body[0]} invalid")
        return RegisterMessage(motor_id, op, fans_on=bool(body[0]))
    if op is Opcode.TELEMETRY_REQ:
        _body_len(1, op.name, body)
        _require(body[0] in iter(Channel), f"channel {body[0]} invalid")
        return RegisterMessage(motor_id, op, channel=body[0])
    # TELEMETRY_RESP
    if len(body) < 1:
        raise BadLengthError("TELEMETRY_RESP needs a channel byte")
    _require(body[0] in iter(Channel), f"channel {body[0]} invalid")
    channel = body[0]
    if channel == Channel.STATOR_TEMP:
        _body_len(3, "TELEMETRY_RESP[temp]", body)
        return RegisterMessage(
            motor_id, op, channel=channel, temp_centi_c=_I16.unpack(body[1:])[0]
        )
    _body_len(5, "TELEMETRY_RESP", body)
    value = _F32.unpack(body[1:])[0]
    _require(math.isfinite(value), "telemetry value must be finite")
    return RegisterMessage(motor_id, op, channel=channel, value=value)
