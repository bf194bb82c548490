"""Pulse-protocol compiler and simulator.

Protocols are expressed as a small gate IR (displacements, ancilla rotations,
waits, projections) and simulated by exact unitaries from :mod:`.dynamics`.
Pulses are instantaneous in simulation; finite pulse duration enters only the
operating-point phase bookkeeping (``estimate_protocol_phases``) through the
per-rotation ``pulse_padding``.

Gate sequences serialize to a line-oriented text form, one gate per line::

    LABEL joint-parity
    PADDING 1.6e-08
    ROT GE 1.5707963267948966@0.0
    WAIT 2.98e-08
    ROT EF 3.141592653589793@0.0
    DISP A 2.25@-1.03 COND=G
    ROT GE 3.141592653589793@0.0 COND=VAC00
    PROJECT G

``DISP <mode> <mag>@<phase> [COND=G]`` displaces by ``mag * exp(i phase)``,
optionally only when the ancilla is in g.  ``ROT <GE|EF> <angle>@<axis>
[COND=VAC00]`` rotates in the given two-level manifold about an equatorial
axis, optionally conditioned on both cavities being in vacuum.  ``WAIT`` takes
seconds; ``PROJECT`` post-selects an ancilla level.

Building and simulating are pure functions; independent simulations can run
concurrently (one simulation is internally sequential, since gate order is a
data dependency).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import hilbert as hb
from .dynamics import (
    DeviceParams,
    NoiseConfig,
    amplitude_damping_channel,
    conditional_phase_unitary,
    kerr_unitary,
    parity_error_operator,
)
from .hilbert import ANCILLA_LEVELS, DensityMatrix, QOperator, StateVector, SystemDims

__all__ = [
    "Displace",
    "AncillaRotation",
    "Wait",
    "ProjectAncilla",
    "GateSequence",
    "WaitTimeSolution",
    "solve_wait_times",
    "estimate_protocol_phases",
    "build_cat_generation",
    "dispersive_generation_geometry",
    "build_joint_parity",
    "SimulationResult",
    "simulate_sequence",
    "measure_joint_parity",
    "sequence_to_text",
    "sequence_from_text",
]

DEFAULT_PULSE_PADDING = 16e-9

PROTOCOLS = ("ge_then_gf", "ef_then_gf")


# ---------------------------------------------------------------------------
# gate IR


@dataclass(frozen=True)
class Displace:
    mode: str                      # "a" | "b"
    beta: complex
    condition: str = "none"        # "none" | "ancilla_g"

    def __post_init__(self):
        if self.mode not in ("a", "b"):
            raise ValueError(f"bad displacement mode {self.mode!r}")
        if self.condition not in ("none", "ancilla_g"):
            raise ValueError(f"bad displacement condition {self.condition!r}")


@dataclass(frozen=True)
class AncillaRotation:
    subspace: str                  # "ge" | "ef"
    angle: float
    axis_phase: float = 0.0
    condition: str = "none"        # "none" | "cavities_vacuum"

    def __post_init__(self):
        if self.subspace not in ("ge", "ef"):
            raise ValueError(f"bad rotation subspace {self.subspace!r}")
        if not np.isfinite(self.angle):
            raise ValueError("rotation angle must be finite")
        if self.condition not in ("none", "cavities_vacuum"):
            raise ValueError(f"bad rotation condition {self.condition!r}")


@dataclass(frozen=True)
class Wait:
    dt: float

    def __post_init__(self):
        if self.dt < 0:
            raise ValueError("wait time must be non-negative")


@dataclass(frozen=True)
class ProjectAncilla:
    level: str                     # "g" | "e" | "f"

    def __post_init__(self):
        if self.level not in ANCILLA_LEVELS:
            raise ValueError(f"bad ancilla level {self.level!r}")


GateOp = Displace | AncillaRotation | Wait | ProjectAncilla


@dataclass(frozen=True)
class GateSequence:
    ops: tuple[GateOp, ...]
    label: str = ""
    pulse_padding: float = DEFAULT_PULSE_PADDING

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)


# ---------------------------------------------------------------------------
# wait-time solver


@dataclass(frozen=True)
class WaitTimeSolution:
    dt1: float
    dt2: float
    branch_a: int
    branch_b: int
    achieved_phi_a: float
    achieved_phi_b: float
    feasible: bool
    residual: float


def _protocol_rates(params: DeviceParams, protocol: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-cavity phase rates (rad/s) of the two wait epochs."""
    if protocol == "ge_then_gf":
        c1 = np.array([params.chi_ge_a, params.chi_ge_b])
    elif protocol == "ef_then_gf":
        c1 = np.array([params.chi_ef_a, params.chi_ef_b])
    else:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    c2 = np.array([params.chi_gf_a, params.chi_gf_b])
    return c1, c2


def solve_wait_times(params: DeviceParams, protocol: str,
                     target_phi_a: float = np.pi, target_phi_b: float = np.pi,
                     max_branch: int = 3) -> WaitTimeSolution:
    """Find waits (dt1, dt2) giving per-cavity conditional phases (mod 2 pi).

    The two epochs accrue phase at rates (chi^ge or chi^ef, then chi^gf); each
    2x2 linear system ``rate1 * dt1 + rate2 * dt2 = target + 2 pi k`` is solved
    over branch indices k_a, k_b <= ``max_branch``.  Among feasible
    (non-negative) solutions the one with minimal total wait wins; if none is
    feasible, the least-residual solution with negative times clamped to zero
    is returned with ``feasible=False``.
    """
    c1, c2 = _protocol_rates(params, protocol)
    M = np.column_stack([c1, c2])
    if abs(np.linalg.det(M)) < 1e-6 * np.abs(M).max() ** 2:
        raise ValueError("chi rate matrix is singular for this protocol")

    feasible_best = None   # (total, dts, branches)
    clamped_best = None    # (residual, total, dts, branches)
    for k_a in range(max_branch + 1):
        for k_b in range(max_branch + 1):
            rhs = np.array([target_phi_a + 2 * np.pi * k_a,
                            target_phi_b + 2 * np.pi * k_b])
            t = np.linalg.solve(M, rhs)
            if t.min() >= -1e-15:
                t = np.clip(t, 0.0, None)
                cand = (t.sum(), tuple(t), (k_a, k_b))
                if feasible_best is None or cand[0] < feasible_best[0]:
                    feasible_best = cand
                continue
            # clamp one time to zero and least-squares the other over both equations
            for pattern in ((0,), (1,), (0, 1)):
                t_c = np.zeros(2)
                free = [i for i in (0, 1) if i not in pattern]
                if free:
                    col = M[:, free[0]]
                    t_c[free[0]] = max(0.0, float(col @ rhs / (col @ col)))
                resid = float(np.linalg.norm(M @ t_c - rhs))
                cand = (resid, t_c.sum(), tuple(t_c), (k_a, k_b))
                if clamped_best is None or cand[:2] < clamped_best[:2]:
                    clamped_best = cand

    if feasible_best is not None:
        _, (dt1, dt2), (k_a, k_b) = feasible_best
        feasible, residual = True, 0.0
    else:
        residual, _, (dt1, dt2), (k_a, k_b) = clamped_best
        feasible = False
    return WaitTimeSolution(
        dt1=dt1, dt2=dt2, branch_a=k_a, branch_b=k_b,
        achieved_phi_a=float(c1[0] * dt1 + c2[0] * dt2),
        achieved_phi_b=float(c1[1] * dt1 + c2[1] * dt2),
        feasible=feasible, residual=residual,
    )


def estimate_protocol_phases(params: DeviceParams, dt1: float, dt2: float,
                             protocol: str = "ge_then_gf",
                             pulse_padding: float = DEFAULT_PULSE_PADDING,
                             skip_ef_pulses: bool = False) -> tuple[float, float]:
    """Accumulated conditional phases of a programmed operating point.

    Finite-pulse bookkeeping: the second epoch (at the g-f rate) is bracketed
    by the two e-f rotations and absorbs both full pulse durations, so
    ``dt2_eff = dt2 + 2 * pulse_padding``; the first epoch boundaries are set
    by the g-e pulses and take the programmed ``dt1``.  With
    ``skip_ef_pulses`` (e-f rotations omitted entirely, as in a single-cavity
    parity setting that exploits a chi ratio) the whole wait runs at the
    first-epoch rate.
    """
    c1, c2 = _protocol_rates(params, protocol)
    if skip_ef_pulses:
        phi = c1 * (dt1 + dt2)
    else:
        phi = c1 * dt1 + c2 * (dt2 + 2.0 * pulse_padding)
    return float(phi[0]), float(phi[1])


# ---------------------------------------------------------------------------
# sequence builders


def build_cat_generation(alpha_a: complex, alpha_b: complex, phase: float = np.pi,
                         style: str = "conditional",
                         params: DeviceParams | None = None,
                         initial_amplitude_a: float = 2.25,
                         initial_amplitude_b: float = 2.25,
                         wait_time: float = 4.72e-7,
                         pulse_padding: float = DEFAULT_PULSE_PADDING) -> GateSequence:
    """Deterministic two-mode cat generation sequence.

    ``style="conditional"`` emits the idealized form: ancilla half-rotation,
    cavity displacements by 2 alpha conditioned on the ancilla staying in g, a
    vacuum-conditioned ancilla reset, and centering displacements.  The axis
    of the conditional reset sets the superposition phase.

    ``style="dispersive"`` decomposes each conditional displacement into
    unconditional displacements separated by a shared wait, during which the
    e-branch rotates by chi^ge * wait per cavity; the second displacements
    return the e-branch to the origin and are derived from ``params`` via
    :func:`dispersive_generation_geometry` (the cat amplitudes then follow
    from the geometry rather than the requested alphas).  Zero-amplitude
    cavities get no pulses at all, leaving that cavity in vacuum.
    """
    axis = np.pi - phase    # reset about this axis leaves relative phase e^{i*phase}
    if style == "conditional":
        ops: list[GateOp] = [AncillaRotation("ge", np.pi / 2, 0.0)]
        for mode, alpha in (("a", alpha_a), ("b", alpha_b)):
            if alpha != 0:
                ops.append(Displace(mode, 2 * alpha, condition="ancilla_g"))
        ops.append(AncillaRotation("ge", np.pi, axis_phase=axis, condition="cavities_vacuum"))
        for mode, alpha in (("a", alpha_a), ("b", alpha_b)):
            if alpha != 0:
                ops.append(Displace(mode, -alpha))
        return GateSequence(tuple(ops), label="cat-generation", pulse_padding=pulse_padding)

    if style == "dispersive":
        if params is None:
            raise ValueError("dispersive style needs device params")
        geo = dispersive_generation_geometry(params, initial_amplitude_a,
                                             initial_amplitude_b, wait_time)
        use_a = alpha_a != 0 and initial_amplitude_a != 0
        use_b = alpha_b != 0 and initial_amplitude_b != 0
        ops = [AncillaRotation("ge", np.pi / 2, 0.0)]
        if use_a:
            ops.append(Displace("a", geo["first_a"]))
        if use_b:
            ops.append(Displace("b", geo["first_b"]))
        ops.append(Wait(wait_time))
        if use_a:
            ops.append(Displace("a", geo["second_a"]))
        if use_b:
            ops.append(Displace("b", geo["second_b"]))
        ops.append(AncillaRotation("ge", np.pi, axis_phase=axis, condition="cavities_vacuum"))
        if use_a:
            ops.append(Displace("a", -geo["cat_alpha_a"]))
        if use_b:
            ops.append(Displace("b", -geo["cat_alpha_b"]))
        return GateSequence(tuple(ops), label="cat-generation-dispersive",
                            pulse_padding=pulse_padding)

    raise ValueError(f"unknown generation style {style!r}")


def dispersive_generation_geometry(params: DeviceParams, amp_a: float, amp_b: float,
                                   wait_time: float) -> dict:
    """Geometry of the displacement + wait decomposition of a conditional displacement.

    After the first displacement the g-branch sits at amp and the e-branch
    rotates to amp * exp(i chi^ge * wait); the second displacement
    ``-amp * exp(i chi^ge * wait)`` brings the e-branch back to the origin,
    leaving the g-branch at ``d = amp (1 - exp(i chi^ge wait))``.  The cat is
    centered at +/- d/2, so its complex amplitude is d/2 per cavity.
    """
    out = {}
    for tag, amp, chi in (("a", amp_a, params.chi_ge_a), ("b", amp_b, params.chi_ge_b)):
        rot = np.exp(1j * chi * wait_time)
        out[f"first_{tag}"] = complex(amp)
        out[f"second_{tag}"] = -amp * rot
        out[f"cat_alpha_{tag}"] = amp * (1.0 - rot) / 2.0
    return out


def build_joint_parity(solution: WaitTimeSolution, protocol: str = "ge_then_gf",
                       pulse_padding: float = DEFAULT_PULSE_PADDING) -> GateSequence:
    """Ancilla-mediated parity mapping; terminal populations encode parity as p_e - p_g.

    ``ge_then_gf``: the ancilla waits dt1 in a g/e superposition and dt2 with
    the excited branch parked in f.  ``ef_then_gf``: the excited amplitude is
    split between e and f for dt1 (relative rate chi^ef), then the e part is
    stashed in g for dt2 (relative rate chi^gf).  Final rotation axes are
    chosen so even joint parity maps to |e>.
    """
    if protocol == "ge_then_gf":
        ops = (
            AncillaRotation("ge", np.pi / 2, 0.0),
            Wait(solution.dt1),
            AncillaRotation("ef", np.pi, 0.0),
            Wait(solution.dt2),
            AncillaRotation("ef", np.pi, 0.0),
            AncillaRotation("ge", np.pi / 2, np.pi),
        )
        label = "joint-parity-ge"
    elif protocol == "ef_then_gf":
        ops = (
            AncillaRotation("ge", np.pi, 0.0),
            AncillaRotation("ef", np.pi / 2, 0.0),
            Wait(solution.dt1),
            AncillaRotation("ge", np.pi, 0.0),
            Wait(solution.dt2),
            AncillaRotation("ef", np.pi, 0.0),
            AncillaRotation("ge", np.pi / 2, 0.0),
        )
        label = "joint-parity-ef"
    else:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    return GateSequence(ops, label=label, pulse_padding=pulse_padding)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimulationResult:
    state: DensityMatrix
    measurements: tuple[tuple[str, float], ...] = ()
    """(level, probability) for each ProjectAncilla, in order."""


def _rotation_matrix(angle: float, axis_phase: float) -> np.ndarray:
    """2x2 rotation exp(-i angle/2 (cos(ax) sx + sin(ax) sy))."""
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([
        [c, -1j * np.exp(-1j * axis_phase) * s],
        [-1j * np.exp(1j * axis_phase) * s, c],
    ])


def gate_unitary(op: GateOp, params: DeviceParams, dims: SystemDims,
                 noise: NoiseConfig | None = None) -> QOperator:
    """Exact unitary of a single (non-measurement) gate op."""
    noise = noise or NoiseConfig.ideal()
    if isinstance(op, Displace):
        d = hb.displacement(dims.mode_dim(op.mode), op.beta, method="expm")
        full = hb.embed(d, op.mode, dims)
        if op.condition == "none":
            return full
        pg = np.zeros((dims.n_q, dims.n_q), dtype=complex)
        pg[0, 0] = 1.0
        proj = hb.embed(QOperator(pg, (dims.n_q,)), "ancilla", dims)
        eye = np.eye(dims.total)
        return QOperator(full.data @ proj.data + (eye - proj.data), dims.factors, dims.labels)
    if isinstance(op, AncillaRotation):
        r3 = np.eye(3, dtype=complex)
        lo = 0 if op.subspace == "ge" else 1
        r3[lo:lo + 2, lo:lo + 2] = _rotation_matrix(op.angle, op.axis_phase)
        full = hb.embed(QOperator(r3, (dims.n_q,)), "ancilla", dims)
        if op.condition == "none":
            return full
        vac = np.zeros(dims.total)
        sel = np.kron(np.kron(np.eye(dims.n_a)[0], np.eye(dims.n_b)[0]), np.ones(dims.n_q))
        proj = np.diag(sel.astype(complex))
        eye = np.eye(dims.total)
        return QOperator(full.data @ proj + (eye - proj), dims.factors, dims.labels)
    if isinstance(op, Wait):
        u = conditional_phase_unitary(params, op.dt, dims)
        if noise.kerr_during_waits:
            u = u @ kerr_unitary(params, op.dt, dims)
        return u
    raise TypeError(f"no unitary for gate {op!r}")


def simulate_sequence(seq: GateSequence, initial, params: DeviceParams,
                      noise: NoiseConfig | None = None) -> SimulationResult:
    """Left-fold the sequence over the initial state.

    Pure inputs stay state vectors until damping or the final conversion;
    ProjectAncilla ops post-select (renormalize) and record the outcome
    probability.  The returned state is always a density matrix.
    """
    noise = noise or NoiseConfig.ideal()
    if isinstance(initial, StateVector):
        if abs(initial.norm - 1.0) > 1e-9:
            raise ValueError("initial state is not normalized")
        dims = SystemDims(*initial.dims)
        vec: np.ndarray | None = initial.amplitudes.copy()
        rho: np.ndarray | None = None
    elif isinstance(initial, DensityMatrix):
        dims = SystemDims(*initial.dims)
        vec, rho = None, initial.data.copy()
    else:
        raise TypeError(f"cannot simulate from {type(initial)!r}")

    def to_density():
        nonlocal vec, rho
        if rho is None:
            rho = np.outer(vec, vec.conj())
            vec = None

    measurements: list[tuple[str, float]] = []
    for op in seq:
        if isinstance(op, ProjectAncilla):
            lvl = ANCILLA_LEVELS[op.level]
            mask = np.kron(np.ones(dims.n_a * dims.n_b), np.eye(dims.n_q)[lvl])
            if vec is not None:
                kept = vec * mask
                prob = float(np.vdot(kept, kept).real)
                if prob < 1e-15:
                    raise ValueError(f"projection onto ancilla {op.level!r} has zero probability")
                vec = kept / np.sqrt(prob)
            else:
                kept = mask[:, None] * rho * mask[None, :]
                prob = float(np.trace(kept).real)
                if prob < 1e-15:
                    raise ValueError(f"projection onto ancilla {op.level!r} has zero probability")
                rho = kept / prob
            measurements.append((op.level, prob))
            continue
        if isinstance(op, Wait) and noise.amplitude_damping and op.dt > 0:
            to_density()
            u = gate_unitary(op, params, dims, noise)
            rho = u.data @ rho @ u.data.conj().T
            rho = amplitude_damping_channel(
                DensityMatrix(hb._hermitize(rho), dims.factors, dims.labels),
                op.dt, params).data.copy()
            continue
        u = gate_unitary(op, params, dims, noise)
        if vec is not None:
            vec = u.data @ vec
        else:
            rho = u.data @ rho @ u.data.conj().T
    to_density()
    return SimulationResult(
        DensityMatrix(hb._hermitize(rho), dims.factors, dims.labels),
        tuple(measurements))


def ancilla_populations(rho: DensityMatrix) -> dict[str, float]:
    """Populations of g, e, f after tracing out the cavities."""
    reduced = hb.partial_trace(rho, "ancilla")
    diag = np.real(np.diag(reduced.data))
    return {lvl: float(diag[i]) for lvl, i in ANCILLA_LEVELS.items()}


def measure_joint_parity(state, beta_a: complex, beta_b: complex,
                         params: DeviceParams, noise: NoiseConfig | None = None,
                         method: str = "exact",
                         solution: WaitTimeSolution | None = None,
                         protocol: str = "ge_then_gf") -> float:
    """Displaced joint parity <P_J(beta_a, beta_b)>, scaled by the visibility.

    ``method="exact"`` evaluates the observable directly (the phase-error
    perturbed one when noise carries a nonzero epsilon).  ``method="sequence"``
    displaces the state and runs the full parity-mapping pulse sequence,
    reading the estimate off the terminal ancilla populations as p_e - p_g.
    """
    noise = noise or NoiseConfig.ideal()
    if isinstance(state, StateVector):
        state = state.to_density()
    dims = SystemDims(*state.dims)
    if method == "exact":
        obs = parity_error_operator(noise.parity_phase_error, dims)
        if beta_a != 0 or beta_b != 0:
            d = hb.embed(hb.displacement(dims.n_a, beta_a, "expm"), "a", dims) @ \
                hb.embed(hb.displacement(dims.n_b, beta_b, "expm"), "b", dims)
            obs = QOperator(d.data @ obs.data @ d.data.conj().T, dims.factors, dims.labels)
        return noise.visibility * float(np.real(hb.expectation(state, obs)))
    if method == "sequence":
        if solution is None:
            solution = solve_wait_times(params, protocol)
        pre = []
        if beta_a != 0:
            pre.append(Displace("a", -beta_a))
        if beta_b != 0:
            pre.append(Displace("b", -beta_b))
        seq = build_joint_parity(solution, protocol)
        seq = replace(seq, ops=tuple(pre) + seq.ops)
        out = simulate_sequence(seq, state, params, noise)
        pops = ancilla_populations(out.state)
        return noise.visibility * (pops["e"] - pops["g"])
    raise ValueError(f"unknown measurement method {method!r}")


# ---------------------------------------------------------------------------
# text serialization

_MODE_NAMES = {"a": "A", "b": "B"}
_LEVEL_NAMES = {"g": "G", "e": "E", "f": "F"}


def _fmt_complex(z: complex) -> str:
    return f"{abs(z):.17g}@{np.angle(z):.17g}"


def _parse_complex(tok: str) -> complex:
    mag, _, ph = tok.partition("@")
    return float(mag) * np.exp(1j * float(ph or 0.0))


def sequence_to_text(seq: GateSequence) -> str:
    lines = []
    if seq.label:
        lines.append(f"LABEL {seq.label}")
    lines.append(f"PADDING {seq.pulse_padding:.17g}")
    for op in seq:
        if isinstance(op, Displace):
            line = f"DISP {_MODE_NAMES[op.mode]} {_fmt_complex(op.beta)}"
            if op.condition == "ancilla_g":
                line += " COND=G"
        elif isinstance(op, AncillaRotation):
            line = f"ROT {op.subspace.upper()} {op.angle:.17g}@{op.axis_phase:.17g}"
            if op.condition == "cavities_vacuum":
                line += " COND=VAC00"
        elif isinstance(op, Wait):
            line = f"WAIT {op.dt:.17g}"
        elif isinstance(op, ProjectAncilla):
            line = f"PROJECT {_LEVEL_NAMES[op.level]}"
        else:
            raise TypeError(f"cannot serialize {op!r}")
        lines.append(line)
    return "\n".join(lines) + "\n"


def sequence_from_text(text: str) -> GateSequence:
    label = ""
    padding = DEFAULT_PULSE_PADDING
    ops: list[GateOp] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0].upper()
        try:
            if kind == "LABEL":
                label = " ".join(parts[1:])
            elif kind == "PADDING":
                padding = float(parts[1])
            elif kind == "DISP":
                mode = parts[1].lower()
                beta = _parse_complex(parts[2])
                cond = "ancilla_g" if "COND=G" in parts[3:] else "none"
                ops.append(Displace(mode, beta, cond))
            elif kind == "ROT":
                sub = parts[1].lower()
                angle, _, axis = parts[2].partition("@")
                cond = "cavities_vacuum" if "COND=VAC00" in parts[3:] else "none"
                ops.append(AncillaRotation(sub, float(angle), float(axis or 0.0), cond))
            elif kind == "WAIT":
                ops.append(Wait(float(parts[1])))
            elif kind == "PROJECT":
                ops.append(ProjectAncilla(parts[1].lower()))
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"sequence parse error at line {ln}: {raw!r} ({exc})") from None
    return GateSequence(tuple(ops), label=label, pulse_padding=padding)
