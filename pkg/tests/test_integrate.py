import numpy as np
import pytest

from dispcurve.cli_io import make_config
from dispcurve.flow import FlowParams, PRESETS, preset
from dispcurve.geometry import Curve, UnitSphere, great_circle, latitude_circle
from dispcurve.grid import Grid
from dispcurve.integrate import (
    BlowUpError,
    State,
    StepperConfig,
    estimate_dt,
    run,
    step,
)


class TestEstimateDt:
    def test_formula_value(self):
        p = FlowParams(1.0, 0.0, 0.0, 0.0)
        dt = estimate_dt(p, 64)
        assert dt == pytest.approx(1.0 / 32**4, rel=1e-5)
        assert dt == 1.0 / (32**4 + 1)

    def test_quartic_scaling(self):
        p = FlowParams(1.0, 0.0, 0.0, 0.0)
        assert estimate_dt(p, 64) / estimate_dt(p, 128) == pytest.approx(16.0, rel=1e-3)

    def test_second_order_only(self):
        dt = estimate_dt(preset("schrodinger-map"), 64)
        assert dt == 1.0 / (32**2 + 1)

    def test_degenerate_params_rejected(self):
        with pytest.raises(ValueError):
            estimate_dt(FlowParams(0.0, 1.0, 1.0, 0.0), 64)

    def test_bad_safety_rejected(self):
        with pytest.raises(ValueError):
            estimate_dt(preset("integrable"), 64, safety=0.0)

    def test_eps_counts_toward_stiffness(self):
        p = FlowParams(1.0, 0.0, 0.0, 0.0, eps=1.0)
        assert estimate_dt(p, 64) == 1.0 / (2 * 32**4 + 1)


class TestStepperConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            StepperConfig(dt=-1.0)
        with pytest.raises(ValueError):
            StepperConfig(scheme="euler")
        with pytest.raises(ValueError):
            StepperConfig(safety=2.0)
        with pytest.raises(ValueError):
            StepperConfig(renormalize_every=0)


class TestStep:
    def test_great_circle_is_stationary_over_100_steps(self):
        g = Grid(32)
        sph = UnitSphere()
        params = preset("integrable")
        dt = estimate_dt(params, g.n)
        state = State(0.0, great_circle(g))
        start = state.curve.points.copy()
        for _ in range(100):
            state = step(state, dt, "extrinsic-sphere", sph, params)
        assert np.max(np.abs(state.curve.points - start)) <= 1e-11
        assert state.step_count == 100

    def test_constraint_preserved_every_step(self):
        g = Grid(32)
        sph = UnitSphere()
        params = preset("heisenberg-biquadratic")
        dt = estimate_dt(params, g.n)
        cfg = make_config({
            "target": "sphere",
            "initial": {"kind": "perturbed-great-circle", "mode": 3, "amplitude": 0.1},
            "preset": "heisenberg-biquadratic",
            "n": 32, "t_end": 0.0,
        })
        state = State(0.0, cfg.build_initial())
        for _ in range(50):
            state = step(state, dt, "extrinsic-sphere", sph, params)
            assert np.max(np.abs(np.linalg.norm(state.curve.points, axis=1) - 1.0)) <= 1e-12

    def test_negative_time_equals_negated_parameters(self):
        # one step backward with (a, b, c, lam) equals one step forward
        # with all four negated, bit for bit
        g = Grid(32)
        sph = UnitSphere()
        p = FlowParams(1.0, 2.0, 1.0, 1.0)
        p_neg = FlowParams(-1.0, -2.0, -1.0, -1.0)
        dt = estimate_dt(p, g.n)
        cfg = make_config({
            "target": "sphere",
            "initial": {"kind": "perturbed-great-circle", "mode": 3, "amplitude": 0.1},
            "params": {"a": 1.0}, "n": 32, "t_end": 0.0,
        })
        c0 = cfg.build_initial()
        back = step(State(0.0, c0), -dt, "extrinsic-sphere", sph, p)
        fwd = step(State(0.0, c0), dt, "extrinsic-sphere", sph, p_neg)
        assert np.array_equal(back.curve.points, fwd.curve.points)

    def test_nonfinite_raises_blowup(self):
        g = Grid(32)
        sph = UnitSphere()
        params = preset("integrable")
        state = State(0.0, latitude_circle(g, 0.6))
        with pytest.raises(BlowUpError) as err:
            s = state
            for _ in range(50):
                s = step(s, 1.0, "extrinsic-sphere", sph, params)  # wildly unstable dt
        assert err.value.state is not None

    def test_mode_amplitude_decays_at_quartic_rate_under_regularization(self):
        # flat torus, b = c = lam = 0: each mode obeys the scalar equation
        # dz/dt = (-eps + i a) m^4 z, so |z| decays like exp(-eps m^4 t)
        g = Grid(32)
        from dispcurve.geometry import FlatTorus
        torus = FlatTorus()
        m, delta = 2, 1e-3
        pts = delta * np.stack([np.cos(m * g.nodes), np.sin(m * g.nodes)], axis=1)
        params = FlowParams(1.0, 0.0, 0.0, 0.0, eps=1.0)
        dt = 1e-3
        state = State(0.0, Curve(g, pts))
        nsteps = 20
        for _ in range(nsteps):
            state = step(state, dt, "regularized", torus, params)
        amp0 = delta
        amp1 = np.max(np.linalg.norm(state.curve.points, axis=1))
        expected = amp0 * np.exp(-params.eps * m**4 * nsteps * dt)
        assert amp1 == pytest.approx(expected, rel=1e-7)


class TestRun:
    def _config(self, **over):
        doc = {
            "target": "sphere",
            "initial": {"kind": "latitude", "r": 0.6},
            "params": {"a": 1.0, "b": 0.0, "c": 0.0, "lambda": 1.0},
            "rhs": "extrinsic-sphere",
            "n": 32,
            "t_end": 0.005,
            "diag_every": 200,
            "snap_every": 1000,
        }
        doc.update(over)
        return make_config(doc)

    def test_zero_horizon_keeps_only_the_initial_snapshot(self):
        traj = run(self._config(t_end=0.0))
        assert traj.n_steps == 0
        assert len(traj.snapshots) == 1
        assert traj.snapshots[0][0] == 0.0
        assert len(traj.diagnostics) == 1

    def test_identical_configs_are_bit_identical(self):
        t1 = run(self._config())
        t2 = run(self._config())
        assert t1.n_steps == t2.n_steps
        for (ta, pa), (tb, pb) in zip(t1.snapshots, t2.snapshots):
            assert ta == tb
            assert np.array_equal(pa, pb)
        for ra, rb in zip(t1.diagnostics, t2.diagnostics):
            assert ra == rb

    def test_rotating_wave_reaches_the_shifted_latitude(self):
        cfg = self._config(t_end=0.01)
        traj = run(cfg)
        g = Grid(cfg.n)
        r, h = 0.6, 0.8
        omega = h * (1.0 - 1.0 - 1.0 * r * r)
        x = g.nodes + omega * traj.final_state.t
        exact = np.stack([r * np.cos(x), r * np.sin(x), np.full(g.n, h)], axis=1)
        assert np.max(np.abs(traj.final_state.curve.points - exact)) <= 1e-8

    def test_final_state_always_snapshotted(self):
        traj = run(self._config())
        assert traj.snapshots[-1][0] == pytest.approx(0.005, abs=0)
        assert traj.diagnostics[-1].t == pytest.approx(0.005, abs=0)

    def test_blowup_carries_partial_trajectory(self):
        cfg = self._config(dt=0.5, t_end=5.0, snap_every=1, diag_every=1)
        with pytest.raises(BlowUpError) as err:
            run(cfg)
        assert err.value.trajectory is not None
        assert len(err.value.trajectory.snapshots) >= 1
        assert err.value.trajectory.halted_reason == "blow-up"

    def test_dt_override_is_respected(self):
        cfg = self._config(dt=1e-5, t_end=1e-4)
        traj = run(cfg)
        assert traj.n_steps == 10
        assert traj.dt == pytest.approx(1e-5)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_every_preset_runs_a_few_steps(self, name):
        cfg = make_config({
            "target": "sphere",
            "initial": "great-circle",
            "preset": name,
            "n": 32,
            "t_end": 0.0,
        })
        params = cfg.build_params()
        dt = estimate_dt(params, 32)
        state = State(0.0, cfg.build_initial())
        sph = UnitSphere()
        for _ in range(5):
            state = step(state, dt, "extrinsic-sphere", sph, params)
        assert np.isfinite(state.curve.points).all()
