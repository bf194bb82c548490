"""Dispersive-frame Hamiltonian and the exact unitaries/channels it generates.

The model is the rotating frame of two cavities coupled to a three-level
ancilla: number-conserving dispersive shifts (chi terms), self/cross Kerr
corrections, and zero-temperature photon loss.  Every operator here is
diagonal in the Fock x ancilla basis except the damping channel, which is a
Kraus map.  Bare mode frequencies are carried in :class:`DeviceParams` for
config fidelity but never enter any evolution.

All functions are pure maps over immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .hilbert import (
    ANCILLA_LEVELS,
    DensityMatrix,
    QOperator,
    StateVector,
    SystemDims,
    _hermitize,
)

__all__ = [
    "DeviceParams",
    "NoiseConfig",
    "dispersive_hamiltonian",
    "conditional_phase_unitary",
    "kerr_unitary",
    "amplitude_damping_channel",
    "parity_error_operator",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DeviceParams:
    """Device constants, stored in the units the config files use.

    Dispersive shifts are cyclic frequencies in MHz, Kerr constants in kHz,
    lifetimes in ms; properties convert to angular frequencies (rad/s) and
    seconds for the evolution code.  chi^gf is always derived as
    chi^ge + chi^ef, never stored.
    """

    chi_ge_a_mhz: float = 0.71
    chi_ge_b_mhz: float = 1.41
    chi_ef_a_mhz: float = 1.54
    chi_ef_b_mhz: float = 0.93
    kerr_a_khz: float = 0.83
    kerr_b_khz: float = 5.6
    kerr_ab_khz: float = -9.0
    t1_a_ms: float = 2.75
    t1_b_ms: float = 1.45
    # bare frequencies (GHz), documentation only; evolution is frame-rotating
    omega_a_ghz: float = 4.2196612
    omega_b_ghz: float = 5.4467677
    omega_ge_ghz: float = 4.87805
    omega_ef_ghz: float = 4.76288
    parity_visibility: float = 1.0
    prep_error: float = 0.0
    readout_error: float = 0.0

    def __post_init__(self):
        if self.t1_a_ms <= 0 or self.t1_b_ms <= 0:
            raise ValueError("cavity lifetimes must be positive")
        for name in ("parity_visibility", "prep_error", "readout_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    # angular frequencies, rad/s
    @property
    def chi_ge_a(self) -> float:
        return TWO_PI * self.chi_ge_a_mhz * 1e6

    @property
    def chi_ge_b(self) -> float:
        return TWO_PI * self.chi_ge_b_mhz * 1e6

    @property
    def chi_ef_a(self) -> float:
        return TWO_PI * self.chi_ef_a_mhz * 1e6

    @property
    def chi_ef_b(self) -> float:
        return TWO_PI * self.chi_ef_b_mhz * 1e6

    @property
    def chi_gf_a(self) -> float:
        return self.chi_ge_a + self.chi_ef_a

    @property
    def chi_gf_b(self) -> float:
        return self.chi_ge_b + self.chi_ef_b

    @property
    def kerr_a(self) -> float:
        return TWO_PI * self.kerr_a_khz * 1e3

    @property
    def kerr_b(self) -> float:
        return TWO_PI * self.kerr_b_khz * 1e3

    @property
    def kerr_ab(self) -> float:
        return TWO_PI * self.kerr_ab_khz * 1e3

    # lifetimes, seconds
    @property
    def t1_a(self) -> float:
        return self.t1_a_ms * 1e-3

    @property
    def t1_b(self) -> float:
        return self.t1_b_ms * 1e-3

    def without_kerr(self) -> "DeviceParams":
        return replace(self, kerr_a_khz=0.0, kerr_b_khz=0.0, kerr_ab_khz=0.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Which imperfections a simulation applies, and their magnitudes.

    ``parity_phase_error`` is the dimensionless epsilon of the perturbed
    joint-parity observable exp(-i eps pi n_A) exp(+i eps pi n_B) P_J.
    """

    kerr_during_waits: bool = False
    amplitude_damping: bool = False
    parity_phase_error: float = 0.0
    visibility: float = 1.0
    readout_error: float = 0.0
    prep_error: float = 0.0

    def __post_init__(self):
        if not -0.5 <= self.parity_phase_error <= 0.5:
            raise ValueError("parity phase error outside [-0.5, 0.5]")
        for name in ("visibility", "readout_error", "prep_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def ideal(cls) -> "NoiseConfig":
        return cls()

    @classmethod
    def from_device(cls, params: DeviceParams, **overrides) -> "NoiseConfig":
        kw = dict(
            visibility=params.parity_visibility,
            readout_error=params.readout_error,
            prep_error=params.prep_error,
        )
        kw.update(overrides)
        return cls(**kw)


def _mode_numbers(dims: SystemDims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonals of n_A, n_B and the ancilla level index on the full space."""
    na = np.arange(dims.n_a)
    nb = np.arange(dims.n_b)
    nq = np.arange(dims.n_q)
    n_a = np.kron(np.kron(na, np.ones(dims.n_b)), np.ones(dims.n_q))
    n_b = np.kron(np.kron(np.ones(dims.n_a), nb), np.ones(dims.n_q))
    lvl = np.kron(np.kron(np.ones(dims.n_a), np.ones(dims.n_b)), nq)
    return n_a, n_b, lvl


def dispersive_hamiltonian(params: DeviceParams, dims: SystemDims,
                           include_kerr: bool = True) -> QOperator:
    """Rotating-frame H/hbar: chi and Kerr terms only, diagonal by construction.

    H/hbar = - chi_A^ge n_A |e><e| - chi_A^gf n_A |f><f|  (same for B)
             - (K_A/2) n_A (n_A - 1) - (K_B/2) n_B (n_B - 1) - K_AB n_A n_B
    """
    n_a, n_b, lvl = _mode_numbers(dims)
    in_e = (lvl == ANCILLA_LEVELS["e"]).astype(float)
    in_f = (lvl == ANCILLA_LEVELS["f"]).astype(float)
    diag = (
        -params.chi_ge_a * n_a * in_e - params.chi_gf_a * n_a * in_f
        - params.chi_ge_b * n_b * in_e - params.chi_gf_b * n_b * in_f
    )
    if include_kerr:
        diag = diag + (
            -0.5 * params.kerr_a * n_a * (n_a - 1)
            - 0.5 * params.kerr_b * n_b * (n_b - 1)
            - params.kerr_ab * n_a * n_b
        )
    return QOperator(np.diag(diag.astype(complex)), dims.factors, dims.labels)


def conditional_phase_unitary(params: DeviceParams, dt: float, dims: SystemDims) -> QOperator:
    """Free dispersive evolution for a wait of ``dt`` seconds (Kerr excluded).

    U(dt) = I x I x |g><g|
          + e^{i chi^ge_A dt n_A} e^{i chi^ge_B dt n_B} x |e><e|
          + e^{i chi^gf_A dt n_A} e^{i chi^gf_B dt n_B} x |f><f|

    which equals exp(-i H dt / hbar) for the Kerr-free Hamiltonian; a coherent
    state on the e branch rotates by +chi^ge dt.
    """
    if dt < 0:
        raise ValueError("wait time must be non-negative")
    n_a, n_b, lvl = _mode_numbers(dims)
    phase = np.zeros(dims.total)
    in_e = lvl == ANCILLA_LEVELS["e"]
    in_f = lvl == ANCILLA_LEVELS["f"]
    phase[in_e] = (params.chi_ge_a * n_a + params.chi_ge_b * n_b)[in_e] * dt
    phase[in_f] = (params.chi_gf_a * n_a + params.chi_gf_b * n_b)[in_f] * dt
    return QOperator(np.diag(np.exp(1j * phase)), dims.factors, dims.labels)


def kerr_unitary(params: DeviceParams, dt: float, dims: SystemDims) -> QOperator:
    """Kerr part of exp(-i H dt), i.e. exp(+i dt [K_A/2 n(n-1) + K_B/2 n(n-1) + K_AB n_A n_B])."""
    if dt < 0:
        raise ValueError("wait time must be non-negative")
    n_a, n_b, _ = _mode_numbers(dims)
    phase = dt * (
        0.5 * params.kerr_a * n_a * (n_a - 1)
        + 0.5 * params.kerr_b * n_b * (n_b - 1)
        + params.kerr_ab * n_a * n_b
    )
    return QOperator(np.diag(np.exp(1j * phase)), dims.factors, dims.labels)


def _damping_kraus(dim: int, gamma: float) -> list[np.ndarray]:
    """Zero-temperature amplitude-damping Kraus set for one mode.

    E_k = sum_n sqrt(C(n, k) (1-gamma)^(n-k) gamma^k) |n-k><n|
    """
    ns = np.arange(dim)
    ops = []
    for k in range(dim):
        if k == 0:
            diag = np.sqrt((1.0 - gamma) ** ns)
            ops.append(np.diag(diag).astype(complex))
            continue
        if gamma == 0.0:
            break
        rows = ns[k:] - k
        # log-binomial keeps large-n coefficients finite
        logc = gammaln(ns[k:] + 1) - gammaln(rows + 1) - gammaln(k + 1)
        amp = np.exp(0.5 * (logc + (ns[k:] - k) * np.log1p(-gamma) + k * np.log(gamma)))
        e = np.zeros((dim, dim), dtype=complex)
        e[rows, ns[k:]] = amp
        ops.append(e)
    return ops


def _damping_amplitudes(dim: int, gamma: float) -> np.ndarray:
    """amp[n, k] = sqrt(C(n, k) (1-gamma)^(n-k) gamma^k), zero for k > n."""
    n = np.arange(dim)[:, None]
    k = np.arange(dim)[None, :]
    with np.errstate(divide="ignore"):
        logg = np.where(k > 0, k * np.log(gamma) if gamma > 0 else -np.inf, 0.0)
    logc = gammaln(n + 1) - gammaln(np.maximum(n - k, 0) + 1) - gammaln(k + 1)
    out = np.exp(0.5 * (logc + (n - k) * np.log1p(-gamma) + logg))
    return np.where(k <= n, out, 0.0)


def _damp_first_axis(rho4: np.ndarray, amp: np.ndarray) -> np.ndarray:
    """Apply the loss channel along axes (0, 2) of a (m, r, m, r) tensor.

    Each Kraus operator is a single superdiagonal, so the conjugation is an
    index-shifted weighted accumulation instead of dense matmuls.
    """
    m = rho4.shape[0]
    out = np.zeros_like(rho4)
    for k in range(m):
        a = amp[k:, k]
        if not np.any(a):
            continue
        out[:m - k, :, :m - k, :] += (a[:, None, None, None] * a[None, None, :, None]
                                      * rho4[k:, :, k:, :])
    return out


def amplitude_damping_channel(rho: DensityMatrix, t: float, params: DeviceParams) -> DensityMatrix:
    """Photon loss on both cavities for a delay ``t`` (ancilla untouched).

    Applies the zero-temperature Kraus map with gamma_i = 1 - exp(-t / tau_i)
    independently to A and B; the two single-mode channels commute, so they
    are applied in sequence.
    """
    if t < 0:
        raise ValueError("delay must be non-negative")
    if t == 0:
        return rho
    if len(rho.dims) != 3:
        raise ValueError("damping channel expects the full (A, B, ancilla) space")
    n_a, n_b, n_q = rho.dims
    d = rho.total
    gamma_a = 1.0 - np.exp(-t / params.t1_a)
    gamma_b = 1.0 - np.exp(-t / params.t1_b)
    out = rho.data.reshape(n_a, n_b * n_q, n_a, n_b * n_q)
    out = _damp_first_axis(out, _damping_amplitudes(n_a, gamma_a))
    # bring cavity B to the leading axis: (a, b, q, a, b, q) -> (b, (a q), b, (a q))
    out = out.reshape(n_a, n_b, n_q, n_a, n_b, n_q).transpose(1, 0, 2, 4, 3, 5)
    out = np.ascontiguousarray(out).reshape(n_b, n_a * n_q, n_b, n_a * n_q)
    out = _damp_first_axis(out, _damping_amplitudes(n_b, gamma_b))
    out = out.reshape(n_b, n_a, n_q, n_b, n_a, n_q).transpose(1, 0, 2, 4, 3, 5)
    out = np.ascontiguousarray(out).reshape(d, d)
    return DensityMatrix(_hermitize(out), rho.dims, rho.labels)


def prep_error_mixture(state, prob: float) -> DensityMatrix:
    """Mix a state with the vacuum by the preparation-failure probability.

    Initialization errors are aggregated into one scalar: with probability
    ``prob`` the run starts from a wrong state, modeled as the ground state of
    the full system.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prep error probability outside [0, 1]")
    if isinstance(state, StateVector):
        state = state.to_density()
    vac = np.zeros(state.total)
    vac[0] = 1.0
    data = (1.0 - prob) * state.data + prob * np.outer(vac, vac)
    return DensityMatrix(data, state.dims, state.labels)


def parity_error_operator(eps: float, dims: SystemDims) -> QOperator:
    """Perturbed joint-parity observable e^{-i eps pi n_A} e^{+i eps pi n_B} P_J.

    eps = 0 recovers P_J exactly; the ancilla factor is the identity.
    """
    if not -0.5 <= eps <= 0.5:
        raise ValueError("eps outside [-0.5, 0.5]")
    n_a, n_b, _ = _mode_numbers(dims)
    diag = np.exp(-1j * eps * np.pi * n_a) * np.exp(1j * eps * np.pi * n_b) \
        * (-1.0) ** n_a * (-1.0) ** n_b
    return QOperator(np.diag(diag), dims.factors, dims.labels)
