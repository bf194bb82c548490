"""Command-line front end.

Every command resolves its configuration (JSON file plus flags), validates it
before any computation, runs the requested analysis, and writes CSV/JSON
outputs plus a run manifest (config hash, seed, library versions) into the
output directory.  Files are written to a temporary name and atomically
renamed, so a failed run never leaves partial outputs.  Exit codes: 0 on
success, 2 on validation errors, 3 on numerical failure.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import analysis as an
from . import hilbert as hb
from . import protocols as pr
from . import reconstruction as rc
from . import tomography as tg
from .dynamics import DeviceParams, NoiseConfig, prep_error_mixture

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling

_DEVICE_KEYS = {f.name for f in fields(DeviceParams)}
_NOISE_KEYS = {"kerr_during_waits", "amplitude_damping", "parity_phase_error",
               "visibility", "readout_error", "prep_error"}
_TOP_KEYS = {"device", "noise", "dims", "seed", "output_dir"}
_DIMS_KEYS = {"cutoff_a", "cutoff_b"}


def load_config(path: str | None) -> dict:
    """Read and schema-check the JSON run config; unknown keys are rejected."""
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationFailure(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationFailure("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ValidationFailure(f"unknown config keys: {sorted(unknown)}")
    for block, allowed in (("device", _DEVICE_KEYS), ("noise", _NOISE_KEYS),
                           ("dims", _DIMS_KEYS)):
        sub = raw.get(block, {})
        if not isinstance(sub, dict):
            raise ValidationFailure(f"config block {block!r} must be an object")
        bad = set(sub) - allowed
        if bad:
            raise ValidationFailure(f"unknown keys in config block {block!r}: {sorted(bad)}")
    return raw


def device_from_config(cfg: dict) -> DeviceParams:
    try:
        return DeviceParams(**cfg.get("device", {}))
    except (TypeError, ValueError) as exc:
        raise ValidationFailure(f"bad device parameters: {exc}") from None


def noise_from_config(cfg: dict, **overrides) -> NoiseConfig:
    kw = dict(cfg.get("noise", {}))
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return NoiseConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ValidationFailure(f"bad noise parameters: {exc}") from None


# ---------------------------------------------------------------------------
# output plumbing


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


class RunWriter:
    """Collects output files for one command and writes them atomically."""

    def __init__(self, out_dir: str, command: str, config: dict, seed=None):
        self.dir = Path(out_dir)
        self.command = command
        self.config = config
        self.seed = seed
        self.files: list[str] = []
        self._pending: list[tuple[Path, str]] = []

    def add_csv(self, name: str, header, rows):
        self._pending.append((self.dir / name, _csv_text(header, rows)))
        self.files.append(name)

    def add_json(self, name: str, obj):
        self._pending.append((self.dir / name, _json_text(obj)))
        self.files.append(name)

    def add_text(self, name: str, text: str):
        self._pending.append((self.dir / name, text))
        self.files.append(name)

    def finish(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
            "seed": self.seed,
            "outputs": self.files,
            "versions": {
                "twobox": __version__,
                "numpy": np.__version__,
                "scipy": __import__("scipy").__version__,
                "python": ".".join(map(str, sys.version_info[:3])),
            },
        }
        self._pending.append((self.dir / "manifest.json", _json_text(manifest)))
        for path, text in self._pending:
            _atomic_write(path, text)


# ---------------------------------------------------------------------------
# shared option handling


def _threads_option(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get("TWOBOX_THREADS", "")
    return max(1, int(env)) if env.isdigit() else 1


def _parse_phase(text: str) -> float:
    t = text.strip().lower()
    if t in ("pi", "+pi"):
        return float(np.pi)
    if t == "-pi":
        return float(-np.pi)
    if t in ("0", "0.0"):
        return 0.0
    try:
        return float(t)
    except ValueError:
        raise ValidationFailure(f"bad phase {text!r} (use 'pi', '0' or a float in radians)")


def _build_state(state: str, alpha_a: float, alpha_b: float, phase: float,
                 dims: hb.SystemDims, sequence_file: str | None,
                 params: DeviceParams):
    if state == "cat":
        return hb.two_mode_cat(dims, alpha_a, alpha_b, phase)
    if state == "product-cat":
        sign = -1 if abs(phase - np.pi) < 1e-9 else 1
        return an.make_product_cat(dims, alpha_a, (sign, sign))
    if state == "sequence":
        if not sequence_file:
            raise ValidationFailure("state 'sequence' needs --sequence FILE")
        try:
            seq = pr.sequence_from_text(Path(sequence_file).read_text())
        except OSError as exc:
            raise ValidationFailure(f"cannot read sequence: {exc}") from None
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from None
        vac = hb.two_mode_cat(dims, 0.0, 0.0, 0.0)
        return pr.simulate_sequence(seq, vac, params).state
    raise ValidationFailure(f"unknown state kind {state!r}")


def _run(func):
    """Run a command body with the documented exit-code mapping."""
    import warnings
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", hb.TruncationWarning)
            func()
    except ValidationFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


def common_options(fn):
    fn = click.option("--config", type=str, default=None,
                      help="JSON run config (device/noise/dims blocks).")(fn)
    fn = click.option("--out-dir", type=str, default="twobox-out",
                      help="Output directory.")(fn)
    fn = click.option("--threads", type=int, default=None,
                      help="Worker cap (or env TWOBOX_THREADS).")(fn)
    return fn


STATE_OPTIONS = [
    click.option("--state", type=click.Choice(["cat", "product-cat", "sequence"]),
                 default="cat", show_default=True),
    click.option("--alpha", "alpha_a", type=float, default=1.92, show_default=True,
                 help="Cat amplitude (cavity A, and B unless --alpha-b)."),
    click.option("--alpha-b", type=float, default=None,
                 help="Cavity-B amplitude (defaults to --alpha)."),
    click.option("--phase", type=str, default="pi", show_default=True,
                 help="Superposition phase: 'pi', '0' or radians."),
    click.option("--cutoff", type=int, default=12, show_default=True,
                 help="Fock cutoff (cavity A, and B unless --cutoff-b)."),
    click.option("--cutoff-b", type=int, default=None),
    click.option("--sequence", "sequence_file", type=str, default=None,
                 help="Gate-sequence file for --state sequence."),
]


def state_options(fn):
    for opt in reversed(STATE_OPTIONS):
        fn = opt(fn)
    return fn


def _resolve_dims(cfg: dict, cutoff: int, cutoff_b: int | None) -> hb.SystemDims:
    dims_cfg = cfg.get("dims", {})
    ca = dims_cfg.get("cutoff_a", cutoff)
    cb = dims_cfg.get("cutoff_b", cutoff_b if cutoff_b is not None else ca)
    try:
        return hb.SystemDims(int(ca), int(cb))
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(__version__)
def main():
    """Two-cavity cat-state simulation, tomography, and reconstruction."""


@main.command("solve-times")
@click.option("--protocol", type=click.Choice(list(pr.PROTOCOLS)), default="ge_then_gf",
              show_default=True)
@click.option("--targets", type=str, default="1,1", show_default=True,
              help="Target phases per cavity in units of pi, e.g. '1,1'.")
@click.option("--max-branch", type=int, default=3, show_default=True)
@common_options
def cmd_solve_times(protocol, targets, max_branch, config, out_dir, threads):
    """Solve the two-epoch wait times for given conditional-phase targets."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        try:
            ta, tb = (float(x) * np.pi for x in targets.split(","))
        except ValueError:
            raise ValidationFailure(f"bad --targets {targets!r}; expected 'x,y' in pi units")
        sol = pr.solve_wait_times(params, protocol, ta, tb, max_branch)
        eps = (abs(sol.achieved_phi_a - ta) + abs(sol.achieved_phi_b - tb)) / (2 * np.pi)
        eps = min(eps, 0.5)
        dims = hb.SystemDims(16, 16)
        cat = hb.two_mode_cat(dims, 1.92, 1.92, np.pi)
        from .dynamics import parity_error_operator
        perturbed = float(np.real(hb.expectation(cat, parity_error_operator(eps, dims))))
        deficit = 1.0 - abs(perturbed)
        click.echo(f"protocol {protocol}: dt1 = {sol.dt1 * 1e9:.2f} ns, "
                   f"dt2 = {sol.dt2 * 1e9:.2f} ns (feasible={sol.feasible})")
        click.echo(f"achieved phases: ({sol.achieved_phi_a / np.pi:.4f} pi, "
                   f"{sol.achieved_phi_b / np.pi:.4f} pi), residual {sol.residual:.3e} rad")
        click.echo(f"predicted parity deficit at eps={eps:.4f}: {deficit * 100:.2f} %")
        w = RunWriter(out_dir, "solve-times", {"config": cfg, "protocol": protocol,
                                               "targets": targets, "max_branch": max_branch})
        w.add_json("solution.json", {
            "protocol": protocol, "dt1_s": sol.dt1, "dt2_s": sol.dt2,
            "branch_a": sol.branch_a, "branch_b": sol.branch_b,
            "achieved_phi_a_rad": sol.achieved_phi_a,
            "achieved_phi_b_rad": sol.achieved_phi_b,
            "feasible": sol.feasible, "residual_rad": sol.residual,
            "predicted_parity_deficit": deficit,
        })
        w.finish()
    _run(body)


@main.command("generate")
@click.option("--style", type=click.Choice(["conditional", "dispersive"]),
              default="conditional", show_default=True)
@click.option("--wait-ns", type=float, default=472.0, show_default=True,
              help="Dispersive-style effective wait (ns).")
@click.option("--initial-amp", type=float, default=2.25, show_default=True,
              help="Dispersive-style first displacement amplitude.")
@state_options
@common_options
def cmd_generate(style, wait_ns, initial_amp, state, alpha_a, alpha_b, phase,
                 cutoff, cutoff_b, sequence_file, config, out_dir, threads):
    """Compile a cat-generation sequence, simulate it, and report fidelity."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        seq = pr.build_cat_generation(alpha_a, ab, ph, style=style, params=params,
                                      initial_amplitude_a=initial_amp,
                                      initial_amplitude_b=initial_amp,
                                      wait_time=wait_ns * 1e-9)
        vac = hb.two_mode_cat(dims, 0.0, 0.0, 0.0)
        out = pr.simulate_sequence(seq, vac, params)
        if style == "conditional":
            target = hb.two_mode_cat(dims, alpha_a, ab, ph)
            fit = {"alpha_a": alpha_a, "alpha_b": ab, "phase": ph}
        else:
            geo = pr.dispersive_generation_geometry(params, initial_amp, initial_amp,
                                                    wait_ns * 1e-9)
            target = hb.two_mode_cat(dims, geo["cat_alpha_a"], geo["cat_alpha_b"], ph)
            fit = {"alpha_a": abs(geo["cat_alpha_a"]), "alpha_b": abs(geo["cat_alpha_b"]),
                   "phase": ph,
                   "frame_angle_a": float(np.angle(geo["cat_alpha_a"])),
                   "frame_angle_b": float(np.angle(geo["cat_alpha_b"]))}
        fid = hb.fidelity(target, out.state)
        pj = float(np.real(hb.expectation(out.state, hb.joint_parity_operator(dims))))
        click.echo(f"generated cat: fidelity to target {fid:.6f}, <P_J> = {pj:+.6f}")
        w = RunWriter(out_dir, "generate", {"config": cfg, "style": style,
                                            "alpha_a": alpha_a, "alpha_b": ab,
                                            "phase": ph, "cutoffs": list(dims.factors[:2])})
        w.add_text("sequence.txt", pr.sequence_to_text(seq))
        rho = out.state.data
        rows = [(i, j, _fmt(rho[i, j].real), _fmt(rho[i, j].imag))
                for i in range(rho.shape[0]) for j in range(rho.shape[1])
                if abs(rho[i, j]) > 1e-14]
        w.add_csv("state.csv", ["row", "col", "re", "im"], rows)
        w.add_json("summary.json", {"fidelity": fid, "joint_parity": pj, "target": fit})
        w.finish()
    _run(body)


@main.command("wigner")
@click.option("--cut", type=click.Choice(list(tg.PLANE_KINDS)), default="ReRe",
              show_default=True)
@click.option("--n", "n_axis", type=int, default=81, show_default=True)
@click.option("--extent", type=float, default=2.8, show_default=True)
@state_options
@common_options
def cmd_wigner(cut, n_axis, extent, state, alpha_a, alpha_b, phase, cutoff,
               cutoff_b, sequence_file, config, out_dir, threads):
    """Exact scaled joint Wigner values on a plane cut."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        plan = tg.plane_cut(cut, extent, n_axis)
        vals = tg.joint_wigner_grid(st, plan.points, n_threads=_threads_option(threads))
        guard = any(tg._guard_exceeded(p.beta_a, dims.n_a) or
                    tg._guard_exceeded(p.beta_b, dims.n_b) for p in plan.points)
        w = RunWriter(out_dir, "wigner", {"config": cfg, "state": state, "cut": cut,
                                          "n": n_axis, "extent": extent,
                                          "alpha_a": alpha_a, "alpha_b": ab, "phase": ph,
                                          "cutoffs": list(dims.factors[:2])})
        rows = [( _fmt(p.beta_a.real), _fmt(p.beta_a.imag), _fmt(p.beta_b.real),
                  _fmt(p.beta_b.imag), _fmt(v)) for p, v in zip(plan.points, vals)]
        w.add_csv("wigner.csv", ["re_ba", "im_ba", "re_bb", "im_bb", "value"], rows)
        w.add_json("wigner_meta.json", {
            "scaled_convention": "values are displaced joint parity in [-1, 1]",
            "quasiprobability_scale": tg.JOINT_WIGNER_SCALE,
            "truncation_guard_exceeded": bool(guard),
            "min_value": float(np.min(vals)), "max_value": float(np.max(vals)),
        })
        w.finish()
        click.echo(f"wrote {len(vals)} Wigner values "
                   f"(min {np.min(vals):+.4f}, max {np.max(vals):+.4f})")
    _run(body)


@main.command("sample")
@click.option("--cut", type=click.Choice(list(tg.PLANE_KINDS) + ["sprinkle4d"]),
              default="ReRe", show_default=True)
@click.option("--n", "n_axis", type=int, default=81, show_default=True,
              help="Points per axis (plane cuts) or total points (sprinkle4d).")
@click.option("--extent", type=float, default=2.8, show_default=True)
@click.option("--nrep", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--visibility", type=float, default=None)
@click.option("--readout-error", type=float, default=None)
@state_options
@common_options
def cmd_sample(cut, n_axis, extent, nrep, seed, visibility, readout_error, state,
               alpha_a, alpha_b, phase, cutoff, cutoff_b, sequence_file,
               config, out_dir, threads):
    """Draw binomial shot-noise parity data over a sampling plan."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        noise = noise_from_config(cfg, visibility=visibility, readout_error=readout_error)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        if cut == "sprinkle4d":
            plan = tg.sprinkle_4d(n_axis, extent, seed=seed, n_rep=nrep)
        else:
            plan = tg.plane_cut(cut, extent, n_axis, n_rep=nrep)
        ds = tg.sample_dataset(st, plan, noise, seed=seed,
                               n_threads=_threads_option(threads),
                               provenance={"state": state, "alpha_a": alpha_a,
                                           "alpha_b": ab, "phase": ph,
                                           "dims": list(dims.factors)})
        w = RunWriter(out_dir, "sample", {"config": cfg, "state": state, "cut": cut,
                                          "n": n_axis, "extent": extent, "nrep": nrep,
                                          "alpha_a": alpha_a, "alpha_b": ab, "phase": ph,
                                          "cutoffs": list(dims.factors[:2])}, seed=seed)
        rows = [(_fmt(r.point.beta_a.real), _fmt(r.point.beta_a.imag),
                 _fmt(r.point.beta_b.real), _fmt(r.point.beta_b.imag),
                 r.n_even, r.n_total) for r in ds.records]
        w.add_csv("dataset.csv", ["re_ba", "im_ba", "re_bb", "im_bb", "n_even", "n_total"],
                  rows)
        w.add_json("dataset.csv.json", ds.provenance)
        w.finish()
        click.echo(f"sampled {len(ds)} points x {nrep} repetitions (seed {seed})")
    _run(body)


@main.command("reconstruct")
@click.option("--in", "dataset_path", type=str, required=True,
              help="Dataset CSV from the sample command.")
@click.option("--cutoff", type=int, default=8, show_default=True)
@click.option("--cutoff-b", type=int, default=None)
@click.option("--lam", type=float, default=10.0, show_default=True)
@click.option("--max-iters", type=int, default=2000, show_default=True)
@common_options
def cmd_reconstruct(dataset_path, cutoff, cutoff_b, lam, max_iters, config,
                    out_dir, threads):
    """Maximum-likelihood density matrix from a parity dataset."""
    def body():
        cfg = load_config(config)
        try:
            ds = tg.TomographyDataset.read_csv(dataset_path)
        except OSError as exc:
            raise ValidationFailure(f"cannot read dataset: {exc}") from None
        except (KeyError, ValueError) as exc:
            raise ValidationFailure(f"bad dataset CSV: {exc}") from None
        if len(ds) == 0:
            raise ValidationFailure("dataset is empty")
        mcfg = rc.MLEConfig(cutoff_a=cutoff,
                            cutoff_b=cutoff_b if cutoff_b is not None else cutoff,
                            lam=lam, max_iters=max_iters)
        res = rc.reconstruct(ds, mcfg)
        if not res.converged:
            click.echo("warning: optimizer did not converge; best iterate returned",
                       err=True)
        w = RunWriter(out_dir, "reconstruct", {"config": cfg, "dataset": dataset_path,
                                               "cutoff_a": mcfg.cutoff_a,
                                               "cutoff_b": mcfg.cutoff_b, "lam": lam,
                                               "max_iters": max_iters})
        rho = res.rho.data
        rows = [(i, j, _fmt(rho[i, j].real), _fmt(rho[i, j].imag))
                for i in range(rho.shape[0]) for j in range(rho.shape[1])]
        w.add_csv("rho.csv", ["row", "col", "re", "im"], rows)
        w.add_json("metrics.json", {
            "log_likelihood": res.log_likelihood,
            "trace_deviation": res.trace_deviation,
            "iterations": res.iterations,
            "converged": res.converged,
            "lambda_final": res.lam_final,
            **res.metrics,
        })
        w.finish()
        click.echo(f"reconstructed rho ({mcfg.cutoff_a}x{mcfg.cutoff_b} per cavity): "
                   f"largest overlap {res.metrics['lambda_max']:.4f}, "
                   f"purity {res.metrics['purity']:.4f}")
    _run(body)


@main.command("bell")
@click.option("--visibility", type=float, default=None)
@state_options
@common_options
def cmd_bell(visibility, state, alpha_a, alpha_b, phase, cutoff, cutoff_b,
             sequence_file, config, out_dir, threads):
    """Parity-correlation Bell signal at the near-optimal fringe corners."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        noise = noise_from_config(cfg, visibility=visibility)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        spec = an.BellSpec.for_cat(alpha_a)
        vals = an.bell_corner_values(st, spec, noise.visibility)
        b = float(abs(vals[0] + vals[1] + vals[2] - vals[3]))
        w = RunWriter(out_dir, "bell", {"config": cfg, "state": state,
                                        "alpha_a": alpha_a, "alpha_b": ab, "phase": ph,
                                        "visibility": noise.visibility,
                                        "cutoffs": list(dims.factors[:2])})
        rows = [(_fmt(pt.beta_a.real), _fmt(pt.beta_a.imag), _fmt(pt.beta_b.real),
                 _fmt(pt.beta_b.imag), _fmt(v), sign)
                for pt, v, sign in zip(spec.corners, vals, ("+", "+", "+", "-"))]
        w.add_csv("bell.csv",
                  ["re_ba", "im_ba", "re_bb", "im_bb", "value", "combination_sign"], rows)
        w.add_json("bell.json", {"bell_signal": b, "visibility": noise.visibility,
                                 "classical_bound": 2.0})
        w.finish()
        click.echo(f"Bell signal B = {b:.4f} (classical bound 2)")
    _run(body)


@main.command("pauli")
@click.option("--visibility", type=float, default=None)
@click.option("--prep-error", type=float, default=None)
@state_options
@common_options
def cmd_pauli(visibility, prep_error, state, alpha_a, alpha_b, phase, cutoff,
              cutoff_b, sequence_file, config, out_dir, threads):
    """Encoded two-qubit Pauli tomography in the coherent-state basis."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        noise = noise_from_config(cfg, visibility=visibility, prep_error=prep_error)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        if noise.prep_error > 0:
            st = prep_error_mixture(st, noise.prep_error)
        code = an.LogicalCode(alpha_a)
        pl = an.pauli_tomography(
            lambda ba, bb: noise.visibility * tg.joint_wigner(st, (ba, bb)), code)
        fid = an.direct_fidelity_estimate(pl)
        w = RunWriter(out_dir, "pauli", {"config": cfg, "state": state,
                                         "alpha_a": alpha_a, "alpha_b": ab, "phase": ph,
                                         "visibility": noise.visibility,
                                         "prep_error": noise.prep_error,
                                         "cutoffs": list(dims.factors[:2])})
        w.add_csv("pauli.csv", ["observable", "value"],
                  [(k, _fmt(pl[k])) for k in an.PAULI_LABELS])
        w.add_json("pauli.json", {"direct_fidelity_estimate": fid,
                                  "observables": {k: pl[k] for k in an.PAULI_LABELS}})
        w.finish()
        click.echo(f"direct fidelity estimate (II+XX-YY+ZZ)/4 = {fid:.4f}")
    _run(body)


@main.command("decay")
@click.option("--tau-a-ms", type=float, default=2.6, show_default=True)
@click.option("--tau-b-ms", type=float, default=1.5, show_default=True)
@click.option("--tmax-us", type=float, default=600.0, show_default=True)
@click.option("--n", "n_times", type=int, default=61, show_default=True)
@state_options
@common_options
def cmd_decay(tau_a_ms, tau_b_ms, tmax_us, n_times, state, alpha_a, alpha_b, phase,
              cutoff, cutoff_b, sequence_file, config, out_dir, threads):
    """Joint-parity decay: closed form vs amplitude-damping simulation."""
    def body():
        cfg = load_config(config)
        base = device_from_config(cfg)
        from dataclasses import replace
        params = replace(base, t1_a_ms=tau_a_ms, t1_b_ms=tau_b_ms)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        times = np.linspace(0.0, tmax_us * 1e-6, n_times)
        p0 = float(np.real(hb.expectation(
            st if isinstance(st, hb.DensityMatrix) else st.to_density(),
            hb.joint_parity_operator(dims))))
        ana = an.parity_decay_analytic(times, alpha_a, params.t1_a, params.t1_b, p0)
        sim = an.parity_decay_simulated(st, times, params)
        amp, taufit = an.fit_exponential_decay(times, ana)
        w = RunWriter(out_dir, "decay", {"config": cfg, "alpha_a": alpha_a,
                                         "tau_a_ms": tau_a_ms, "tau_b_ms": tau_b_ms,
                                         "tmax_us": tmax_us, "n": n_times,
                                         "cutoffs": list(dims.factors[:2])})
        rows = [(_fmt(t), _fmt(a), _fmt(s)) for (t, a), (_, s) in zip(zip(times, ana), sim)]
        w.add_csv("decay.csv", ["t_s", "analytic", "simulated"], rows)
        w.add_json("decay.json", {"fit_amplitude": amp, "fit_time_constant_s": taufit,
                                  "max_analytic_vs_simulated": float(
                                      np.max(np.abs(ana - np.array([v for _, v in sim]))))})
        w.finish()
        click.echo(f"single-exponential fit time constant: {taufit * 1e6:.1f} us")
    _run(body)


@main.command("spectrum")
@state_options
@common_options
def cmd_spectrum(state, alpha_a, alpha_b, phase, cutoff, cutoff_b, sequence_file,
                 config, out_dir, threads):
    """Total-photon-number distribution (spectroscopy observable)."""
    def body():
        cfg = load_config(config)
        params = device_from_config(cfg)
        dims = _resolve_dims(cfg, cutoff, cutoff_b)
        ph = _parse_phase(phase)
        ab = alpha_b if alpha_b is not None else alpha_a
        st = _build_state(state, alpha_a, ab, ph, dims, sequence_file, params)
        dist = an.total_photon_distribution(st)
        w = RunWriter(out_dir, "spectrum", {"config": cfg, "state": state,
                                            "alpha_a": alpha_a, "alpha_b": ab,
                                            "phase": ph,
                                            "cutoffs": list(dims.factors[:2])})
        w.add_csv("spectrum.csv", ["n_total", "probability"],
                  [(n, _fmt(p)) for n, p in enumerate(dist)])
        w.finish()
        dominant = "odd" if dist[1::2].sum() > dist[0::2].sum() else "even"
        click.echo(f"total-photon distribution written ({dominant}-N weight "
                   f"{max(dist[1::2].sum(), dist[0::2].sum()):.4f})")
    _run(body)


if __name__ == "__main__":
    main()
