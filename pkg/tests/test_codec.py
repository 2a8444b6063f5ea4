import math
import struct
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from tdubench import codec
from tdubench.codec import BASE_ID, Channel, Frame, GainField, Opcode
from tdubench.errors import (
    BadFieldError,
    BadLengthError,
    BodyOverflowError,
    CodecError,
    ReservedIdError,
    UnknownOpcodeError,
)

GOLDEN = Path(__file__).parent / "data" / "codec_golden.txt"


def golden_entries():
    rebuild = {
        "set_mode motor1 velocity": codec.set_mode(1, 2),
        "set_mode motor2 idle": codec.set_mode(2, 0),
        "set_target motor1 1.0": codec.set_target(1, 1.0),
        "set_target motor2 0.0": codec.set_target(2, 0.0),
        "set_target motor2 -1.5": codec.set_target(2, -1.5),
        "set_gains motor1 kp 0.06": codec.set_gains(1, GainField.KP, 0.06),
        "set_gains motor2 integral_limit 3.0": codec.set_gains(
            2, GainField.INTEGRAL_LIMIT, 3.0
        ),
        "fan_ctl on": codec.fan_ctl(True),
        "fan_ctl off": codec.fan_ctl(False),
        "telemetry_req motor2 velocity": codec.telemetry_req(2, Channel.VELOCITY),
        "telemetry_req motor1 pack_voltage": codec.telemetry_req(
            1, Channel.PACK_VOLTAGE
        ),
        "telemetry_resp motor1 velocity 12.5": codec.telemetry_resp(
            1, Channel.VELOCITY, 12.5
        ),
        "telemetry_resp motor2 stator_temp 36.75C": codec.telemetry_resp(
            2, Channel.STATOR_TEMP, 36.75
        ),
        "telemetry_resp motor1 torque 0.795": codec.telemetry_resp(
            1, Channel.TORQUE, 0.795
        ),
    }
    out = []
    for line in GOLDEN.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        desc, frame_id, payload = [p.strip() for p in line.split("|")]
        out.append((rebuild[desc], int(frame_id, 16), bytes.fromhex(payload)))
    return out


class TestGoldenFrames:
    def test_fixture_covers_every_opcode(self):
        ops = {msg.opcode for msg, _, _ in golden_entries()}
        assert ops == set(Opcode)

    @pytest.mark.parametrize(
        "msg,frame_id,payload", golden_entries(), ids=lambda v: str(v)[:40]
    )
    def test_encode_matches_golden(self, msg, frame_id, payload):
        frame = codec.encode(msg)
        assert frame.id == frame_id
        assert frame.payload == payload

    @pytest.mark.parametrize(
        "msg,frame_id,payload", golden_entries(), ids=lambda v: str(v)[:40]
    )
    def test_decode_inverts_golden(self, msg, frame_id, payload):
        assert codec.decode(Frame(frame_id, payload)) == msg

    def test_set_target_example_bytes(self):
        frame = codec.encode(codec.set_target(1, 1.0))
        assert frame.dlc == 6
        assert frame.payload == bytes([0x02, 0x01, 0x00, 0x00, 0x80, 0x3F])

    def test_zero_target_body_is_zero(self):
        frame = codec.encode(codec.set_target(2, 0.0))
        assert frame.payload[2:] == b"\x00\x00\x00\x00"


def messages():
    finite32 = st.floats(
        allow_nan=False, allow_infinity=False, width=32, min_value=-1e6, max_value=1e6
    )
    motor = st.sampled_from([1, 2])
    return st.one_of(
        st.builds(codec.set_mode, motor, st.integers(0, 3)),
        st.builds(codec.set_target, motor, finite32),
        st.builds(
            codec.set_gains, motor, st.sampled_from(list(GainField)), finite32
        ),
        st.builds(codec.fan_ctl, st.booleans()),
        st.builds(codec.telemetry_req, motor, st.sampled_from(list(Channel))),
        st.builds(
            codec.telemetry_resp,
            motor,
            st.sampled_from([c for c in Channel if c != Channel.STATOR_TEMP]),
            finite32,
        ),
        st.builds(
            codec.telemetry_resp,
            motor,
            st.just(Channel.STATOR_TEMP),
            st.floats(min_value=-300.0, max_value=300.0),
        ),
    )


class TestRoundTrip:
    @given(messages())
    def test_decode_encode_identity(self, msg):
        assert codec.decode(codec.encode(msg)) == msg

    @given(messages(), messages())
    def test_canonical_encoding(self, a, b):
        fa, fb = codec.encode(a), codec.encode(b)
        if a == b:
            assert (fa.id, fa.payload) == (fb.id, fb.payload)
        else:
            assert (fa.id, fa.payload) != (fb.id, fb.payload)

    def test_float_payload_round_trip_bulk(self):
        import numpy as np

        rng = np.random.default_rng(11)
        values = rng.uniform(-1e6, 1e6, size=10_000).astype(np.float32)
        for v in values:
            msg = codec.telemetry_resp(1, Channel.VELOCITY, float(v))
            back = codec.decode(codec.encode(msg))
            assert struct.pack("<f", back.value) == struct.pack("<f", float(v))


class TestDecodeErrors:
    def test_bad_dlc_for_set_target(self):
        with pytest.raises(BadLengthError):
            codec.decode(Frame(BASE_ID + 1, bytes([0x02, 0x01, 0x00])))

    def test_unknown_opcode(self):
        with pytest.raises(UnknownOpcodeError):
            codec.decode(Frame(BASE_ID + 1, bytes([0xFF, 0x01])))

    def test_reserved_id(self):
        with pytest.raises(ReservedIdError):
            codec.decode(Frame(0x100, bytes([0x02, 0x01, 0, 0, 0, 0])))

    def test_motor_byte_mismatch(self):
        with pytest.raises(BadFieldError):
            codec.decode(Frame(BASE_ID + 1, bytes([0x02, 0x02, 0, 0, 0, 0])))

    def test_non_finite_target(self):
        inf = struct.pack("<f", math.inf)
        with pytest.raises(BadFieldError):
            codec.decode(Frame(BASE_ID + 1, bytes([0x02, 0x01]) + inf))

    def test_body_overflow(self):
        with pytest.raises(BodyOverflowError):
            codec._pack_body(Opcode.SET_TARGET, 1, bytes(7))

    def test_oversized_frame(self):
        with pytest.raises(BadLengthError):
            Frame(BASE_ID + 1, bytes(9))

    def test_bad_frame_id(self):
        with pytest.raises(CodecError):
            Frame(4096, b"")

    @given(
        st.integers(0, 2047),
        st.binary(min_size=0, max_size=8),
    )
    def test_total_decode_never_panics(self, frame_id, payload):
        try:
            msg = codec.decode(Frame(frame_id, payload))
        except CodecError:
            return
        assert isinstance(msg, codec.RegisterMessage)
