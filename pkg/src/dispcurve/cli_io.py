"""
Configuration, persistence, and the command-line surface.

Configs are strict JSON: unknown keys are rejected by name, defaults are
filled in, and parse(serialize(cfg)) is the identity.  Numeric series go
to CSV with 17 significant digits (exact float64 round-trip), studies to
NDJSON plus a plain-text summary, and every output directory gets a
manifest tying the config to the content hashes of everything written.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .flow import PRESETS, RHS_KINDS, FlowParams, preset, preset_constraint
from .geometry import make_initial, make_target
from .grid import Grid
from .integrate import BlowUpError, StepperConfig


class ConfigError(ValueError):
    """A config document violates the schema; the message names the key."""


_TARGET_KINDS = ("sphere", "flat-torus", "ellipsoid")
_PARAM_KEYS = ("a", "b", "c", "lambda", "epsilon")
_INITIAL_DEFAULTS = {
    "great-circle": {},
    "latitude": {"r": 0.6},
    "perturbed-great-circle": {"mode": 3, "amplitude": 0.05, "mode2": 0, "amplitude2": 0.0},
    "band-limited-random": {"max_mode": 5, "amplitude": 0.05},
    "planar-mode": {"mode": 1, "amplitude": 0.1},
}

_TOP_LEVEL_KEYS = {
    "target", "initial", "preset", "params", "rhs", "n", "t_end", "dt",
    "scheme", "safety", "renormalize_every", "snap_every", "diag_every",
    "k", "seed", "out", "dealias", "compensated_quadrature",
    "halt_on_energy_growth",
}


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved experiment description."""

    target: dict
    initial: dict
    params: FlowParams
    rhs: str
    n: int
    t_end: float
    stepper: StepperConfig
    snap_every: int = 1000
    diag_every: int = 100
    energy_level: int = 4
    seed: int = 0
    out: str | None = None
    dealias: bool = False
    compensated_quadrature: bool = False
    halt_on_energy_growth: bool = True
    preset_name: str | None = None

    def build_target(self):
        return make_target(self.target["kind"], self.target.get("semi_axes"))

    def build_params(self, target=None):
        target = target if target is not None else self.build_target()
        if target.constant_curvature is not None:
            return self.params.with_target(target)
        return self.params

    def build_initial(self):
        grid = Grid(self.n)
        spec = dict(self.initial)
        kind = spec.pop("kind")
        target = self.build_target()
        if kind == "planar-mode":
            x = grid.nodes
            pts = spec["amplitude"] * np.stack(
                [np.cos(spec["mode"] * x), np.sin(spec["mode"] * x)], axis=1
            )
            from .geometry import Curve
            return Curve(grid, pts)
        curve = make_initial(kind, grid, seed=self.seed, **spec)
        if target.kind == "ellipsoid":
            from .geometry import Curve
            axes = np.asarray(self.target["semi_axes"], dtype=float)
            return Curve(grid, target.renormalize(curve.points * axes))
        return curve


def _expect(condition, message):
    if not condition:
        raise ConfigError(message)


def _reject_unknown(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _as_number(value, key, integer=False):
    ok = isinstance(value, int) and not isinstance(value, bool) if integer else (
        isinstance(value, (int, float)) and not isinstance(value, bool)
    )
    _expect(ok, f"key {key!r} expects {'an integer' if integer else 'a number'}, "
               f"got {type(value).__name__}")
    return int(value) if integer else float(value)


def _as_bool(value, key):
    _expect(isinstance(value, bool), f"key {key!r} expects a boolean")
    return value


def _parse_target(raw):
    if isinstance(raw, str):
        raw = {"kind": raw}
    _expect(isinstance(raw, dict), "key 'target' expects a string or an object")
    _reject_unknown(raw, {"kind", "semi_axes"}, "'target'")
    kind = raw.get("kind")
    _expect(kind in _TARGET_KINDS,
            f"key 'target.kind' expects one of {_TARGET_KINDS}, got {kind!r}")
    out = {"kind": kind}
    if kind == "ellipsoid":
        axes = raw.get("semi_axes")
        _expect(isinstance(axes, (list, tuple)) and len(axes) == 3,
                "key 'target.semi_axes' expects a list of three positive numbers")
        axes = [_as_number(v, "target.semi_axes") for v in axes]
        _expect(min(axes) > 0, "key 'target.semi_axes' expects positive entries")
        out["semi_axes"] = axes
    else:
        _expect("semi_axes" not in raw, "key 'semi_axes' only applies to ellipsoid targets")
    return out


def _parse_initial(raw, target):
    if isinstance(raw, str):
        raw = {"kind": raw}
    _expect(isinstance(raw, dict), "key 'initial' expects a string or an object")
    kind = raw.get("kind")
    _expect(kind in _INITIAL_DEFAULTS,
            f"key 'initial.kind' expects one of {tuple(_INITIAL_DEFAULTS)}, got {kind!r}")
    defaults = _INITIAL_DEFAULTS[kind]
    _reject_unknown(raw, {"kind", *defaults}, f"'initial' ({kind})")
    out = {"kind": kind}
    for key, default in defaults.items():
        value = raw.get(key, default)
        integer = key in ("mode", "mode2", "max_mode")
        out[key] = _as_number(value, f"initial.{key}", integer=integer)
    if kind == "latitude":
        _expect(0.0 < out["r"] <= 1.0, "key 'initial.r' expects a value in (0, 1]")
    if kind == "planar-mode":
        _expect(target["kind"] == "flat-torus",
                "'planar-mode' initial data requires the flat-torus target")
    elif target["kind"] == "flat-torus":
        raise ConfigError("flat-torus runs need 'planar-mode' initial data")
    return out


def _parse_params(raw, preset_name):
    base = {"a": 0.0, "b": 0.0, "c": 0.0, "lambda": 0.0, "epsilon": 0.0}
    if preset_name is not None:
        _expect(preset_name in PRESETS,
                f"key 'preset' expects one of {tuple(sorted(PRESETS))}, got {preset_name!r}")
        p = preset(preset_name)
        base.update({"a": p.a, "b": p.b, "c": p.c, "lambda": p.lam, "epsilon": p.eps})
    if raw is not None:
        _expect(isinstance(raw, dict), "key 'params' expects an object")
        _reject_unknown(raw, set(_PARAM_KEYS), "'params'")
        for key in _PARAM_KEYS:
            if key in raw:
                base[key] = _as_number(raw[key], f"params.{key}")
    elif preset_name is None:
        raise ConfigError("either 'preset' or 'params' must be given")
    _expect(0.0 <= base["epsilon"] <= 1.0, "key 'params.epsilon' expects a value in [0, 1]")
    return FlowParams(base["a"], base["b"], base["c"], base["lambda"], eps=base["epsilon"])


def _resolve_rhs(raw, target, params):
    _expect(raw in RHS_KINDS + ("auto",),
            f"key 'rhs' expects one of {RHS_KINDS + ('auto',)}, got {raw!r}")
    if raw == "auto":
        if params.eps > 0.0:
            return "regularized"
        return "extrinsic-sphere" if target["kind"] == "sphere" else "intrinsic"
    if raw == "extrinsic-sphere":
        _expect(target["kind"] == "sphere",
                "key 'rhs': the cross-product form requires the sphere target")
    return raw


def parse_config_dict(doc):
    """Validate a config document and build the RunConfig."""
    _expect(isinstance(doc, dict), "config root must be a JSON object")
    _reject_unknown(doc, _TOP_LEVEL_KEYS, "the config")
    for key in ("target", "initial", "n", "t_end"):
        _expect(key in doc, f"missing required key {key!r}")

    target = _parse_target(doc["target"])
    initial = _parse_initial(doc["initial"], target)
    preset_name = doc.get("preset")
    params = _parse_params(doc.get("params"), preset_name)

    n = _as_number(doc["n"], "n", integer=True)
    _expect(n % 2 == 0 and n >= 8, "key 'n' expects an even integer >= 8")
    t_end = _as_number(doc["t_end"], "t_end")
    _expect(t_end >= 0.0, "key 't_end' expects a nonnegative number")

    dt = doc.get("dt")
    if dt is not None:
        dt = _as_number(dt, "dt")
        _expect(dt > 0.0, "key 'dt' expects a positive number")
    scheme = doc.get("scheme", "rk4-projected")
    _expect(scheme in ("rk4", "rk4-projected"),
            f"key 'scheme' expects 'rk4' or 'rk4-projected', got {scheme!r}")
    safety = _as_number(doc.get("safety", 1.0), "safety")
    _expect(0.0 < safety <= 1.0, "key 'safety' expects a value in (0, 1]")
    renorm = _as_number(doc.get("renormalize_every", 1), "renormalize_every", integer=True)
    _expect(renorm >= 1, "key 'renormalize_every' expects a positive integer")

    snap_every = _as_number(doc.get("snap_every", 1000), "snap_every", integer=True)
    diag_every = _as_number(doc.get("diag_every", 100), "diag_every", integer=True)
    _expect(snap_every >= 1, "key 'snap_every' expects a positive integer")
    _expect(diag_every >= 1, "key 'diag_every' expects a positive integer")
    k = _as_number(doc.get("k", 4), "k", integer=True)
    _expect(k >= 2, "key 'k' expects an integer >= 2")
    seed = _as_number(doc.get("seed", 0), "seed", integer=True)
    out = doc.get("out")
    if out is not None:
        _expect(isinstance(out, str), "key 'out' expects a string path")

    rhs = _resolve_rhs(doc.get("rhs", "auto"), target, params)
    return RunConfig(
        target=target,
        initial=initial,
        params=params,
        rhs=rhs,
        n=n,
        t_end=t_end,
        stepper=StepperConfig(dt=dt, scheme=scheme, safety=safety,
                              renormalize_every=renorm),
        snap_every=snap_every,
        diag_every=diag_every,
        energy_level=k,
        seed=seed,
        out=out,
        dealias=_as_bool(doc.get("dealias", False), "dealias"),
        compensated_quadrature=_as_bool(
            doc.get("compensated_quadrature", False), "compensated_quadrature"),
        halt_on_energy_growth=_as_bool(
            doc.get("halt_on_energy_growth", True), "halt_on_energy_growth"),
        preset_name=preset_name,
    )


def parse_config(text):
    """Parse a JSON config document into a validated RunConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return parse_config_dict(doc)


def make_config(doc):
    """parse_config_dict with a friendlier name for programmatic use."""
    return parse_config_dict(doc)


def config_to_dict(cfg):
    """Serialize a RunConfig to its canonical (fully defaulted) document."""
    doc = {
        "target": dict(cfg.target),
        "initial": dict(cfg.initial),
        "params": {
            "a": cfg.params.a, "b": cfg.params.b, "c": cfg.params.c,
            "lambda": cfg.params.lam, "epsilon": cfg.params.eps,
        },
        "rhs": cfg.rhs,
        "n": cfg.n,
        "t_end": cfg.t_end,
        "dt": cfg.stepper.dt,
        "scheme": cfg.stepper.scheme,
        "safety": cfg.stepper.safety,
        "renormalize_every": cfg.stepper.renormalize_every,
        "snap_every": cfg.snap_every,
        "diag_every": cfg.diag_every,
        "k": cfg.energy_level,
        "seed": cfg.seed,
        "out": cfg.out,
        "dealias": cfg.dealias,
        "compensated_quadrature": cfg.compensated_quadrature,
        "halt_on_energy_growth": cfg.halt_on_energy_growth,
    }
    if cfg.preset_name is not None:
        doc["preset"] = cfg.preset_name
    return doc


def serialize_config(cfg):
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


def config_hash(cfg_or_doc):
    """Content hash of a config (RunConfig or plain document dict)."""
    doc = config_to_dict(cfg_or_doc) if isinstance(cfg_or_doc, RunConfig) else cfg_or_doc
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


# --------------------------------------------------------------------------
# output files

def _fmt(value):
    return f"{value:.17g}"


def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(outdir, described_config, paths):
    outdir = Path(outdir)
    manifest = {
        "version": __version__,
        "config": described_config,
        "outputs": {
            str(p.relative_to(outdir)): _sha256_file(p) for p in sorted(paths)
        },
    }
    target = outdir / "manifest.json"
    target.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return target


def write_trajectory(trajectory, outdir):
    """
    Write one run: diagnostics CSV, per-time snapshot CSVs, and the
    manifest.  All floats carry 17 significant digits.
    """
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "snapshots").mkdir(exist_ok=True)
        cfg = trajectory.config
        written = []

        k = cfg.energy_level
        diag = outdir / "diagnostics.csv"
        header = ["t"] + [f"l2_{l}" for l in range(k + 1)] + [
            f"N_{k}", "length", "obstruction", "renorm_drift"]
        lines = [",".join(header)]
        for rep in trajectory.diagnostics:
            row = [rep.t, *rep.level_norms, rep.gauged, rep.length,
                   rep.obstruction, rep.renorm_drift]
            lines.append(",".join(_fmt(v) for v in row))
        diag.write_text("\n".join(lines) + "\n")
        written.append(diag)

        ambient = trajectory.snapshots[0][1].shape[1]
        cols = ["x", "u1", "u2", "u3"]
        index_lines = ["index,t,file"]
        nodes = Grid(cfg.n).nodes
        for idx, (t, pts) in enumerate(trajectory.snapshots):
            path = outdir / "snapshots" / f"snap_{idx:06d}.csv"
            rows = [",".join(cols)]
            for j in range(pts.shape[0]):
                vals = [nodes[j], *pts[j], *([0.0] * (3 - ambient))]
                rows.append(",".join(_fmt(v) for v in vals))
            path.write_text("\n".join(rows) + "\n")
            written.append(path)
            index_lines.append(f"{idx},{_fmt(t)},snapshots/{path.name}")
        index = outdir / "snapshots" / "index.csv"
        index.write_text("\n".join(index_lines) + "\n")
        written.append(index)

        run_info = outdir / "run.json"
        run_info.write_text(json.dumps({
            "dt": trajectory.dt,
            "n_steps": trajectory.n_steps,
            "halted_reason": trajectory.halted_reason,
            "energy_crossing_time": trajectory.energy_crossing_time,
        }, sort_keys=True, indent=2) + "\n")
        written.append(run_info)

        return _write_manifest(outdir, config_to_dict(cfg), written)
    except OSError as err:
        raise OSError(f"failed writing run outputs under {outdir}: {err}") from err


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_study(result, outdir):
    """Write a study: NDJSON (one case per line), summary table, manifest."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        ndjson = outdir / "cases.ndjson"
        lines = []
        for idx, case in enumerate(result.cases):
            record = {"study": result.name, "case": idx, **_jsonable(case)}
            lines.append(json.dumps(record, sort_keys=True))
        ndjson.write_text("\n".join(lines) + "\n")
        written.append(ndjson)

        summary = outdir / "summary.txt"
        rows = [f"study: {result.name}", ""]
        rows.append("parameters:")
        for key, val in sorted(result.parameters.items()):
            rows.append(f"  {key} = {val}")
        rows.append("")
        rows.append("fitted:")
        for key, val in sorted(_jsonable(result.fitted).items()):
            rows.append(f"  {key} = {val}")
        rows.append("")
        rows.append("checks:")
        width = max((len(k) for k in result.passed), default=0)
        for key, ok in sorted(result.passed.items()):
            rows.append(f"  {key.ljust(width)}  {'pass' if ok else 'FAIL'}")
        rows.append("")
        rows.append(f"overall: {'pass' if result.all_passed() else 'FAIL'}")
        summary.write_text("\n".join(rows) + "\n")
        written.append(summary)

        described = {"study": result.name, "parameters": _jsonable(result.parameters)}
        return _write_manifest(outdir, described, written)
    except OSError as err:
        raise OSError(f"failed writing study outputs under {outdir}: {err}") from err


def write_outputs(obj, outdir):
    """Dispatch on trajectory vs study."""
    if hasattr(obj, "snapshots"):
        return write_trajectory(obj, outdir)
    return write_study(obj, outdir)


# --------------------------------------------------------------------------
# command line

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dispcurve",
        description="Fourth-order dispersive curve-flow simulator and verifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=False):
        if config:
            p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="parallel workers for independent cases")
        p.add_argument("--quiet", action="store_true", help="suppress progress text")

    p_run = sub.add_parser("run", help="integrate one configured experiment")
    common(p_run, config=True)

    p_study = sub.add_parser("study", help="run a named study")
    p_study.add_argument("name", choices=("convergence", "epsilon", "stability", "identities"))
    common(p_study, config=True)

    p_verify = sub.add_parser("verify", help="run the identity suite with defaults")
    common(p_verify)

    sub.add_parser("presets", help="print the preset table")
    return parser


def _say(quiet, *parts):
    if not quiet:
        print(*parts)


def _cmd_run(args):
    if not args.config:
        print("run needs --config PATH", file=sys.stderr)
        return 2
    path = Path(args.config)
    if not path.exists():
        print(f"config file not found: {path}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(path.read_text())
    except ConfigError as err:
        print(f"bad config {path}: {err}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if cfg.out is None:
        print("no output directory: set 'out' in the config or pass --out DIR",
              file=sys.stderr)
        return 2

    from . import integrate
    try:
        traj = integrate.run(cfg)
    except BlowUpError as err:
        if err.trajectory is not None:
            err.trajectory.final_state = err.state
            write_trajectory(err.trajectory, cfg.out)
            _say(args.quiet, f"blow-up: {err}; partial outputs in {cfg.out}")
        else:
            print(f"blow-up: {err}", file=sys.stderr)
        return 1
    manifest = write_trajectory(traj, cfg.out)
    if traj.halted_reason == "energy-growth":
        _say(args.quiet,
             f"halted: gauged energy crossed twice its initial value at "
             f"t = {traj.energy_crossing_time}")
    _say(args.quiet, f"run complete: {traj.n_steps} steps, outputs in {cfg.out}")
    _say(args.quiet, f"manifest: {manifest}")
    return 0


def _cmd_study(args):
    from . import experiments
    kwargs = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            print(f"config file not found: {path}", file=sys.stderr)
            return 2
        try:
            kwargs = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            print(f"bad study config {path}: {err}", file=sys.stderr)
            return 2
    if args.seed is not None and args.name == "epsilon":
        kwargs["seed"] = args.seed
    try:
        result = experiments.run_study(args.name, jobs=args.jobs, **kwargs)
    except (ValueError, TypeError) as err:
        print(f"study failed to start: {err}", file=sys.stderr)
        return 2
    if args.out:
        manifest = write_study(result, args.out)
        _say(args.quiet, f"manifest: {manifest}")
    for key, ok in sorted(result.passed.items()):
        _say(args.quiet, f"{result.name}: {key}: {'pass' if ok else 'FAIL'}")
    return 0 if result.all_passed() else 1


def _cmd_verify(args):
    from . import experiments
    result = experiments.identity_suite(jobs=args.jobs)
    for key, ok in sorted(result.passed.items()):
        _say(args.quiet, f"{key}: {'pass' if ok else 'FAIL'}")
    if args.out:
        manifest = write_study(result, args.out)
        _say(args.quiet, f"manifest: {manifest}")
    if result.all_passed():
        _say(args.quiet, "verification passed")
        return 0
    print("verification FAILED", file=sys.stderr)
    return 1


def _cmd_presets(_args):
    width = max(len(name) for name in PRESETS)
    print(f"{'name'.ljust(width)}  {'a':>5} {'b':>5} {'c':>5} {'lambda':>6}  constraint")
    for name in sorted(PRESETS):
        p = preset(name)
        print(f"{name.ljust(width)}  {p.a:>5g} {p.b:>5g} {p.c:>5g} {p.lam:>6g}  "
              f"{preset_constraint(name)}")
    return 0


def cli(argv=None):
    """Entry point; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 0 if err.code in (0, None) else 2
    handlers = {
        "run": _cmd_run,
        "study": _cmd_study,
        "verify": _cmd_verify,
        "presets": _cmd_presets,
    }
    return handlers[args.command](args)


def main():
    raise SystemExit(cli())
