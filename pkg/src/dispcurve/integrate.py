"""
Time integration with surface-constraint maintenance.

The stepper is classical four-stage Runge-Kutta on the ambient samples;
each stage slope is evaluated (and optionally re-projected tangent) at
its own stage point, and the accepted state is renormalized back to the
target surface.  The leading dispersive term makes the system stiff,
dt ~ n^-4, which is what `estimate_dt` encodes; explicit stepping stays
affordable at desk-scale resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import energy_report
from .flow import evaluate_rhs_values
from .geometry import Curve

CONSTRAINT_TOL = 1e-12
BLOWUP_FACTOR = 1e6

SCHEMES = ("rk4", "rk4-projected")


@dataclass(frozen=True)
class StepperConfig:
    """Time-stepping knobs; dt = None means use `estimate_dt`."""

    dt: float | None = None
    scheme: str = "rk4-projected"
    safety: float = 1.0
    renormalize_every: int = 1

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")
        if self.renormalize_every < 1:
            raise ValueError("renormalize_every must be a positive step count")


@dataclass(frozen=True)
class State:
    """One accepted point of a run."""

    t: float
    curve: Curve
    step_count: int = 0
    renorm_total: float = 0.0


class BlowUpError(RuntimeError):
    """Raised when the solution leaves the representable range.

    Carries the last good state and, when raised from `run`, the partial
    trajectory recorded so far.
    """

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


def estimate_dt(params, n, safety=1.0):
    """
    Stable explicit step for the stiff dispersive term:

        dt = safety / ((|a| + eps) k_max^4 + |lam| k_max^2 + 1),  k_max = n/2.
    """
    if abs(params.a) + params.eps + abs(params.lam) == 0.0:
        raise ValueError("degenerate parameters: a, eps and lam all vanish")
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"safety must lie in (0, 1], got {safety}")
    k_max = n // 2
    return safety / ((abs(params.a) + params.eps) * k_max**4 + abs(params.lam) * k_max**2 + 1.0)


def step(state, dt, rhs_kind, target, params, scheme="rk4-projected",
         renormalize_every=1, dealias=False):
    """
    Advance one Runge-Kutta step of length dt (dt may be negative).

    Stage slopes are projected tangent at their stage points under the
    default 'rk4-projected' scheme; the accepted point is renormalized to
    the surface on schedule or whenever the constraint residual exceeds
    the tolerance, and the renormalization magnitude is accumulated.
    """
    grid = state.curve.grid
    u = state.curve.points

    def slope(pts):
        f = evaluate_rhs_values(rhs_kind, grid, target, params, pts, dealias)
        if scheme == "rk4-projected":
            f = target.project(pts, f)
        return f

    k1 = slope(u)
    k2 = slope(u + (0.5 * dt) * k1)
    k3 = slope(u + (0.5 * dt) * k2)
    k4 = slope(u + dt * k3)
    new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(new).all():
        raise BlowUpError(
            f"non-finite values after step {state.step_count + 1} at t = {state.t}",
            state=state,
        )

    count = state.step_count + 1
    drift = 0.0
    residual = float(np.max(np.abs(target.constraint_values(new))))
    if count % renormalize_every == 0 or residual > CONSTRAINT_TOL:
        fixed = target.renormalize(new)
        drift = float(np.max(np.linalg.norm(fixed - new, axis=1)))
        new = fixed
    return State(state.t + dt, Curve(grid, new), count, state.renorm_total + drift)


@dataclass
class Trajectory:
    """Recorded output of one run: snapshots, diagnostics, bookkeeping."""

    config: object
    dt: float
    n_steps: int
    snapshots: list = field(default_factory=list)   # (t, points array)
    diagnostics: list = field(default_factory=list)  # EnergyReport
    final_state: State | None = None
    halted_reason: str | None = None
    energy_crossing_time: float | None = None


def run(config, target=None, params=None, initial=None):
    """
    Integrate a full experiment described by a RunConfig.

    Snapshots are recorded every `snap_every` steps and diagnostics every
    `diag_every` steps (both always include the initial and final state).
    The gauged energy is monitored at diagnostic times: the first time it
    exceeds twice its initial value is recorded, and when the config asks
    for it the run halts there with a diagnostic instead of continuing.
    Deterministic for a fixed config.  Blow-up raises `BlowUpError` with
    the partial trajectory attached.
    """
    target = target if target is not None else config.build_target()
    params = params if params is not None else config.build_params(target)
    if initial is None:
        initial = config.build_initial()
    grid = initial.grid

    stepper = config.stepper
    if config.t_end > 0.0:
        dt_req = stepper.dt if stepper.dt is not None else estimate_dt(
            params, grid.n, stepper.safety
        )
        n_steps = max(1, int(np.ceil(config.t_end / dt_req - 1e-9)))
        dt = config.t_end / n_steps
    else:
        dt, n_steps = 0.0, 0

    state = State(0.0, initial)
    traj = Trajectory(config=config, dt=dt, n_steps=n_steps)
    traj.snapshots.append((0.0, initial.points.copy()))

    def diagnose(s):
        report = energy_report(
            target, s.curve, params, config.energy_level, t=s.t,
            renorm_drift=s.renorm_total,
        )
        traj.diagnostics.append(report)
        return report

    first = diagnose(state)
    gauged0 = first.gauged
    ux_sup0 = float(np.max(np.linalg.norm(initial.derivative(1), axis=1)))

    for i in range(1, n_steps + 1):
        try:
            state = step(
                state, dt, config.rhs, target, params,
                scheme=stepper.scheme,
                renormalize_every=stepper.renormalize_every,
                dealias=config.dealias,
            )
        except BlowUpError as err:
            err.trajectory = traj
            traj.halted_reason = "blow-up"
            raise
        ux_sup = float(np.max(np.linalg.norm(state.curve.derivative(1), axis=1)))
        if ux_sup > BLOWUP_FACTOR * ux_sup0:
            traj.halted_reason = "blow-up"
            raise BlowUpError(
                f"sup |u_x| grew by more than {BLOWUP_FACTOR:.0e} at t = {state.t}",
                state=state, trajectory=traj,
            )
        at_end = i == n_steps
        if i % config.snap_every == 0 or at_end:
            traj.snapshots.append((state.t, state.curve.points.copy()))
        if i % config.diag_every == 0 or at_end:
            report = diagnose(state)
            if traj.energy_crossing_time is None and report.gauged > 2.0 * gauged0:
                traj.energy_crossing_time = state.t
                if config.halt_on_energy_growth:
                    traj.halted_reason = "energy-growth"
                    break

    traj.final_state = state
    return traj
