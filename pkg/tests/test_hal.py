import math

import pytest

from tdubench.errors import RangeError, UnknownMotorError
from tdubench.hal import (
    DEFAULT_VELOCITY_GAINS,
    DriveCommand,
    DriveMode,
    PidGains,
    PidState,
    SimDrive,
    pid_step,
)
from tdubench.params import default_params, with_motor
from tdubench.plant import Fixture, Plant


def make_drive(params=None):
    plant = Plant(params or default_params(), Fixture())
    return SimDrive(plant), plant


class TestPidStep:
    def test_zero_error_zero_state(self):
        out, state = pid_step(0.0, PidGains(kp=1, ki=1, kd=0, integral_limit=1), PidState(), 0.001, 3.0)
        assert out == 0.0
        assert state.integral == 0.0

    def test_proportional_only(self):
        gains = PidGains(kp=2.0, ki=0.0, kd=0.0, integral_limit=1.0)
        state = PidState()
        for _ in range(10):
            out, state = pid_step(1.0, gains, state, 0.001, 10.0)
            assert out == 2.0

    def test_anti_windup_pins_integral_and_output(self):
        gains = PidGains(kp=1.0, ki=10.0, kd=0.0, integral_limit=2.0)
        state = PidState()
        for _ in range(50000):
            out, state = pid_step(100.0, gains, state, 0.001, 3.0)
        assert out == 3.0
        assert state.integral == 2.0

    def test_derivative_term(self):
        gains = PidGains(kp=0.0, ki=0.0, kd=0.5, integral_limit=1.0)
        out, state = pid_step(1.0, gains, PidState(), 0.1, 100.0)
        assert out == pytest.approx(5.0)  # (1 - 0) / 0.1 * 0.5
        out, _ = pid_step(1.0, gains, state, 0.1, 100.0)
        assert out == 0.0

    def test_replay_is_bit_exact(self):
        import random

        rng = random.Random(3)
        errs = [rng.uniform(-5, 5) for _ in range(500)]
        gains = DEFAULT_VELOCITY_GAINS

        def replay():
            state = PidState()
            outs = []
            for e in errs:
                out, state = pid_step(e, gains, state, 0.001, 3.0)
                outs.append(out)
            return outs

        assert replay() == replay()


class TestSendCommand:
    def test_torque_latch_applies_map_next_step(self):
        drive, plant = make_drive()
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, 1.0))
        assert plant.applied[0] == 0.0  # takes effect on the next tick
        drive.run(plant.params.dt)
        assert plant.applied[0] == pytest.approx(0.795)

    def test_torque_above_peak_rejected_state_unchanged(self):
        drive, plant = make_drive()
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, 1.0))
        with pytest.raises(RangeError):
            drive.send_command(DriveCommand(1, DriveMode.TORQUE, 5.0))
        drive.run(plant.params.dt)
        assert plant.applied[0] == pytest.approx(0.795)

    def test_unknown_motor(self):
        drive, _ = make_drive()
        with pytest.raises(UnknownMotorError):
            drive.send_command(DriveCommand(3, DriveMode.IDLE, 0.0))

    def test_non_finite_target(self):
        drive, _ = make_drive()
        with pytest.raises(RangeError):
            drive.send_command(DriveCommand(1, DriveMode.TORQUE, math.nan))

    def test_velocity_step_reaches_setpoint(self):
        drive, plant = make_drive()
        drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 30.0))
        drive.send_command(DriveCommand(2, DriveMode.VELOCITY_PID, 30.0))
        tail = []
        drive.run(1.0, on_tick=lambda t: tail.append(plant.vel[0]))
        mean = sum(tail[700:]) / 300
        assert mean == pytest.approx(30.0, abs=0.1)

    def test_settles_within_half_second_across_range(self):
        for target in (-30.0, -10.0, 5.0, 15.0, 30.0):
            drive, plant = make_drive()
            drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, target))
            drive.send_command(DriveCommand(2, DriveMode.VELOCITY_PID, target))
            vals = []
            drive.run(0.5, on_tick=lambda t: vals.append(plant.vel[0]))
            mean_tail = sum(vals[300:]) / len(vals[300:])
            assert abs(mean_tail - target) <= 0.02 * abs(target)

    def test_mode_change_resets_controller_state(self):
        drive, plant = make_drive()
        drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 20.0))
        drive.run(0.2)
        assert drive._integ[0] != 0.0
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, 0.5))
        assert drive._integ[0] == 0.0

    def test_idle_mode_zeroes_torque(self):
        drive, plant = make_drive()
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, 1.0))
        drive.run(0.01)
        drive.send_command(DriveCommand(1, DriveMode.IDLE, 123.0))
        drive.run(plant.params.dt)
        assert plant.applied[0] == 0.0


class TestSample:
    def test_idle_snapshot(self):
        drive, plant = make_drive()
        drive.run(0.01)
        s = drive.sample(1)
        assert s.velocity == 0.0
        assert s.torque == 0.0
        assert s.stator_temp == pytest.approx(plant.params.thermal.ambient_c, abs=0.01)

    def test_stall_current_estimate(self):
        # command chosen so the delivered torque is exactly 1.5 N*m
        params = default_params()
        cmd = (1.5 + params.motor1.torque_offset) / params.motor1.torque_gain
        drive, plant = make_drive()
        plant.attach(Fixture(kind="locked"))
        drive.send_command(DriveCommand(1, DriveMode.TORQUE, cmd))
        drive.run(0.01)
        s = drive.sample(1)
        assert s.torque == pytest.approx(1.5, abs=1e-9)
        assert s.current == pytest.approx(14.93, abs=0.01)

    def test_decimated_sampling_contract(self):
        drive, plant = make_drive()
        rows = []
        drive.run(20.0, on_tick=lambda t: rows.append(drive.sample(1)), tick_divisor=10)
        assert len(rows) == 2000
        ts = [s.t for s in rows]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        period = 0.01
        assert max(b - a for a, b in zip(ts, ts[1:])) <= 2 * period + 1e-12


class TestFans:
    def test_fan_regime_switches_thermal_resistance(self):
        params = default_params()
        th = params.thermal

        def cool_time(fans_on):
            plant = Plant(params, Fixture())
            drive = SimDrive(plant)
            plant.temp = [80.0, 80.0]
            drive.set_fans(fans_on)
            t = 0.0
            while plant.temp[0] > 30.0:
                plant.fast_forward(1.0, dt=1.0)
                t += 1.0
            return t

        fast, slow = cool_time(True), cool_time(False)
        assert fast < slow
        tau_on = th.r_th_fans_on * th.heat_capacity
        assert fast == pytest.approx(tau_on * math.log(57.0 / 7.0), rel=0.01)

    def test_fans_off_idle_reads_room_floor(self):
        drive, plant = make_drive()
        drive.set_fans(False)
        assert plant.mic_level() == plant.params.acoustics.room_floor_db

    def test_fan_toggle_switches_acoustic_source(self):
        drive, plant = make_drive()
        drive.set_fans(True)
        on = plant.mic_level()
        drive.set_fans(False)
        off = plant.mic_level()
        assert on > off


class TestLoopConsistency:
    def test_drive_loop_matches_pid_step_reference(self):
        """The inlined controller must equal the pure pid_step function."""
        params = default_params()
        gains = DEFAULT_VELOCITY_GAINS
        drive, plant = make_drive(params)
        drive.send_command(DriveCommand(1, DriveMode.VELOCITY_PID, 12.0))
        got = []
        drive.run(0.3, on_tick=lambda t: got.append(plant.vel[0]))

        from tdubench.hal import PidState

        ref_plant = Plant(default_params(), Fixture())
        state = PidState()
        expected = []
        peak = params.motor1.peak_torque
        for _ in range(300):
            err = 12.0 - ref_plant.vel[0]
            out, state = pid_step(err, gains, state, ref_plant.params.dt, peak)
            ref_plant.step(out, 0.0)
            expected.append(ref_plant.vel[0])
        assert got == expected
