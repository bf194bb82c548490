"""Truncated Fock-space linear algebra for two cavities and a three-level ancilla.

Everything downstream (gate unitaries, Wigner kernels, likelihood models) is
built from the dense states and operators defined here.  The tensor layout is
fixed once and for all: cavity A is the slowest index, then cavity B, then the
ancilla, so a basis state |i_a, i_b, i_q> lives at flat index
``((i_a * n_b) + i_b) * n_q + i_q``.  All objects are immutable after
construction (arrays are frozen), so they are safe to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm as _expm
from scipy.special import eval_genlaguerre, gammaln

__all__ = [
    "TruncationWarning",
    "SystemDims",
    "QOperator",
    "StateVector",
    "DensityMatrix",
    "ANCILLA_LEVELS",
    "fock_state",
    "coherent_state",
    "two_mode_cat",
    "annihilation",
    "creation",
    "number",
    "parity",
    "identity",
    "displacement",
    "displaced_parity_matrix",
    "embed",
    "tensor",
    "partial_trace",
    "apply",
    "expectation",
    "fidelity",
    "purity",
    "joint_parity_operator",
]

ANCILLA_LEVELS = {"g": 0, "e": 1, "f": 2}

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10
TRACE_TOL = 1e-9


class TruncationWarning(UserWarning):
    """A displacement amplitude is large enough that Fock truncation may bite."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.flags.writeable = False
    return a


def _truncation_guard(dim: int, beta: complex, what: str) -> None:
    if abs(beta) > 0.5 * np.sqrt(dim):
        warnings.warn(
            f"{what}: |amplitude|={abs(beta):.3f} exceeds sqrt(dim)/2={0.5 * np.sqrt(dim):.3f} "
            f"for dim={dim}; truncation artifacts are likely",
            TruncationWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class SystemDims:
    """Truncation sizes of the three-mode space (cavity A, cavity B, ancilla)."""

    n_a: int
    n_b: int
    n_q: int = 3

    def __post_init__(self):
        if self.n_a < 1 or self.n_b < 1:
            raise ValueError("cavity cutoffs must be >= 1")
        if self.n_q != 3:
            raise ValueError("ancilla is a fixed three-level system")

    @property
    def total(self) -> int:
        return self.n_a * self.n_b * self.n_q

    @property
    def factors(self) -> tuple[int, int, int]:
        return (self.n_a, self.n_b, self.n_q)

    @property
    def labels(self) -> tuple[str, str, str]:
        return ("a", "b", "ancilla")

    def index(self, i_a: int, i_b: int, i_q: int) -> int:
        """Flat basis index of |i_a, i_b, i_q>."""
        return (i_a * self.n_b + i_b) * self.n_q + i_q

    def mode_dim(self, mode: str) -> int:
        return {"a": self.n_a, "b": self.n_b, "ancilla": self.n_q}[mode]


def _as_factors(dims) -> tuple[tuple[int, ...], tuple[str, ...]]:
    """Normalize a dims argument to (factor dims, labels)."""
    if isinstance(dims, SystemDims):
        return dims.factors, dims.labels
    if isinstance(dims, int):
        return (dims,), ("mode",)
    factors = tuple(int(d) for d in dims)
    return factors, tuple(f"m{i}" for i in range(len(factors)))


@dataclass(frozen=True)
class QOperator:
    """Dense operator with its factor dimensions attached.

    ``dims`` is the tuple of tensor-factor dimensions in the fixed (A, B,
    ancilla) order; a single-mode operator carries a one-element tuple.
    """

    data: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        d = int(np.prod(self.dims))
        if self.data.shape != (d, d):
            raise ValueError(f"operator shape {self.data.shape} does not match dims {self.dims}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"m{i}" for i in range(len(self.dims))))

    @property
    def total(self) -> int:
        return self.data.shape[0]

    def dagger(self) -> "QOperator":
        return QOperator(self.data.conj().T, self.dims, self.labels)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return float(np.abs(self.data - self.data.conj().T).max()) < tol

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        d = self.data.shape[0]
        return float(np.abs(self.data @ self.data.conj().T - np.eye(d)).max()) < tol

    def __matmul__(self, other):
        if isinstance(other, QOperator):
            _check_same_space(self, other)
            return QOperator(self.data @ other.data, self.dims, self.labels)
        if isinstance(other, StateVector):
            _check_same_space(self, other)
            return StateVector(self.data @ other.amplitudes, other.dims, other.labels,
                               discarded_weight=other.discarded_weight, normalized=False)
        return NotImplemented


@dataclass(frozen=True)
class StateVector:
    """Pure state over the factor dims, unit norm unless flagged otherwise."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] = ()
    discarded_weight: float = 0.0
    normalized: bool = True

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", _freeze(amps))
        if amps.shape[0] != int(np.prod(self.dims)):
            raise ValueError(f"vector length {amps.shape[0]} does not match dims {self.dims}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"m{i}" for i in range(len(self.dims))))
        if self.normalized:
            n = float(np.linalg.norm(amps))
            if abs(n - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {n} deviates from 1 beyond {NORM_TOL}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def unit(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return StateVector(self.amplitudes / n, self.dims, self.labels,
                           discarded_weight=self.discarded_weight)

    def to_density(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), self.dims, self.labels)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace operator; positivity checked via :meth:`validate`."""

    data: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        d = int(np.prod(self.dims))
        if self.data.shape != (d, d):
            raise ValueError(f"density matrix shape {self.data.shape} does not match dims {self.dims}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"m{i}" for i in range(len(self.dims))))
        herm = float(np.abs(self.data - self.data.conj().T).max())
        if herm > HERMITIAN_TOL * max(1.0, float(np.abs(self.data).max())):
            raise ValueError(f"density matrix not Hermitian (max asymmetry {herm:.2e})")
        tr = complex(np.trace(self.data))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1 beyond {TRACE_TOL}")

    @property
    def total(self) -> int:
        return self.data.shape[0]

    def validate(self, eig_tol: float = 1e-9) -> "DensityMatrix":
        """Raise if any eigenvalue is below ``-eig_tol``; returns self."""
        w = np.linalg.eigvalsh(self.data)
        if float(w.min()) < -eig_tol:
            raise ValueError(f"density matrix has negative eigenvalue {w.min():.3e}")
        return self


def _check_same_space(x, y) -> None:
    if tuple(x.dims) != tuple(y.dims):
        raise ValueError(f"dimension mismatch: {x.dims} vs {y.dims}")


def _state_input(state) -> tuple[np.ndarray, tuple[int, ...], bool]:
    """Return (array, dims, is_density) for a StateVector or DensityMatrix."""
    if isinstance(state, StateVector):
        return state.amplitudes, state.dims, False
    if isinstance(state, DensityMatrix):
        return state.data, state.dims, True
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state)!r}")


# ---------------------------------------------------------------------------
# single-mode constructors


def fock_state(dim: int, n: int) -> StateVector:
    """Number state |n> in a ``dim``-dimensional mode."""
    if not 0 <= n < dim:
        raise ValueError(f"Fock index {n} outside [0, {dim})")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return StateVector(v, (dim,))


def coherent_amplitudes(dim: int, alpha: complex) -> np.ndarray:
    """Truncated coherent-state amplitudes c_n = e^{-|a|^2/2} a^n / sqrt(n!)."""
    n = np.arange(dim)
    if alpha == 0:
        c = np.zeros(dim, dtype=complex)
        c[0] = 1.0
        return c
    # log-domain magnitudes avoid overflow in a^n / sqrt(n!)
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    phase = np.exp(1j * n * np.angle(alpha))
    return np.exp(logmag) * phase


def coherent_state(dim: int, alpha: complex, renormalize: bool = True) -> StateVector:
    """Truncated coherent state |alpha>.

    The weight lost to truncation, ``1 - sum |c_n|^2``, is reported on the
    returned state as ``discarded_weight``.  With ``renormalize`` (default)
    the truncated vector is scaled back to unit norm.
    """
    _truncation_guard(dim, alpha, "coherent_state")
    c = coherent_amplitudes(dim, alpha)
    kept = float(np.vdot(c, c).real)
    lost = max(0.0, 1.0 - kept)
    if renormalize:
        c = c / np.sqrt(kept)
        return StateVector(c, (dim,), discarded_weight=lost)
    return StateVector(c, (dim,), discarded_weight=lost, normalized=False)


def two_mode_cat(dims: SystemDims, alpha_a: complex, alpha_b: complex,
                 phase: float = np.pi, ancilla_level: str = "g") -> StateVector:
    """Superposition N(|a_A, a_B> + e^{i phase} |-a_A, -a_B>) with the ancilla spectator.

    Normalization uses the exact branch overlap exp(-2(|a_A|^2 + |a_B|^2))
    before truncation; the truncated vector is then renormalized and the
    discarded weight reported.
    """
    s = np.exp(-2.0 * (abs(alpha_a) ** 2 + abs(alpha_b) ** 2))
    norm_sq = 2.0 * (1.0 + s * np.cos(phase))
    if norm_sq < 1e-12:
        raise ValueError(
            "degenerate cat: branches cancel (zero amplitudes with opposite-sign phase)")
    u = np.kron(coherent_amplitudes(dims.n_a, alpha_a), coherent_amplitudes(dims.n_b, alpha_b))
    v = np.kron(coherent_amplitudes(dims.n_a, -alpha_a), coherent_amplitudes(dims.n_b, -alpha_b))
    cav = (u + np.exp(1j * phase) * v) / np.sqrt(norm_sq)
    lost = max(0.0, 1.0 - float(np.vdot(cav, cav).real))
    q = np.zeros(dims.n_q, dtype=complex)
    q[ANCILLA_LEVELS[ancilla_level]] = 1.0
    full = np.kron(cav, q)
    full = full / np.linalg.norm(full)
    return StateVector(full, dims.factors, dims.labels, discarded_weight=lost)


# ---------------------------------------------------------------------------
# single-mode operators


def annihilation(dim: int) -> QOperator:
    return QOperator(np.diag(np.sqrt(np.arange(1, dim)), 1), (dim,))


def creation(dim: int) -> QOperator:
    return QOperator(np.diag(np.sqrt(np.arange(1, dim)), -1), (dim,))


def number(dim: int) -> QOperator:
    return QOperator(np.diag(np.arange(dim, dtype=float)), (dim,))


def parity(dim: int) -> QOperator:
    return QOperator(np.diag((-1.0) ** np.arange(dim)), (dim,))


def identity(dims) -> QOperator:
    factors, labels = _as_factors(dims)
    return QOperator(np.eye(int(np.prod(factors))), factors, labels)


def _displacement_analytic(dim: int, beta: complex) -> np.ndarray:
    """Exact (untruncated-space) matrix elements <m|D(beta)|n>.

    For m >= n:  sqrt(n!/m!) beta^(m-n) e^{-|b|^2/2} L_n^{(m-n)}(|b|^2),
    and the m < n block follows from D(beta)^dag = D(-beta).
    """
    if beta == 0:
        return np.eye(dim, dtype=complex)
    x = abs(beta) ** 2
    m = np.arange(dim)[:, None]
    n = np.arange(dim)[None, :]
    k = np.minimum(m, n)            # lower index of the Laguerre polynomial
    diff = np.abs(m - n)
    # log-magnitude of sqrt(min!/max!) |beta|^(|m-n|) e^{-x/2}
    logmag = 0.5 * (gammaln(k + 1) - gammaln(k + diff + 1)) + diff * np.log(abs(beta)) - 0.5 * x
    lag = eval_genlaguerre(k, diff, x)
    # m < n picks up (-conj(beta))^{n-m}, i.e. an extra sign (-1)^{n-m}
    phase = np.exp(1j * (m - n) * np.angle(beta)) * np.where(m >= n, 1.0, (-1.0) ** (n - m))
    return np.exp(logmag) * lag * phase


def displacement(dim: int, beta: complex, method: str = "expm") -> QOperator:
    """Displacement operator D(beta) = exp(beta a^dag - beta* a).

    ``method="expm"`` exponentiates the truncated generator (exactly unitary
    on the truncated space); ``method="analytic"`` fills in the exact
    infinite-space matrix elements via associated Laguerre polynomials
    (exact per element, only approximately unitary near the truncation edge).
    """
    _truncation_guard(dim, beta, "displacement")
    if method == "expm":
        a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
        g = beta * a.conj().T - np.conjugate(beta) * a
        return QOperator(_expm(g), (dim,))
    if method == "analytic":
        return QOperator(_displacement_analytic(dim, beta), (dim,))
    raise ValueError(f"unknown displacement method {method!r}")


def displaced_parity_matrix(dim: int, beta: complex, method: str = "analytic") -> QOperator:
    """Kernel K(beta) with elements <m| D(beta) P D(beta)^dag |n>.

    Computed through the operator identity D(beta) P D(beta)^dag = D(2 beta) P,
    which holds exactly (P a P = -a, and equal generators commute).  The
    analytic route therefore reduces to exact displacement matrix elements at
    2 beta with column signs (-1)^n; it is certified against brute-force
    conjugation of the expm route in the test suite.
    """
    D2 = displacement(dim, 2.0 * beta, method=method).data
    signs = (-1.0) ** np.arange(dim)
    return QOperator(D2 * signs[None, :], (dim,))


# ---------------------------------------------------------------------------
# composite-space plumbing


def tensor(*ops: QOperator) -> QOperator:
    """Kronecker product in the given order (A before B before ancilla)."""
    data = ops[0].data
    for op in ops[1:]:
        data = np.kron(data, op.data)
    dims = tuple(d for op in ops for d in op.dims)
    labels = tuple(l for op in ops for l in op.labels)
    return QOperator(data, dims, labels)


def embed(op: QOperator, mode: str, dims: SystemDims) -> QOperator:
    """Lift a single-mode operator to the full space: I x ... x op x ... x I."""
    if mode not in ("a", "b", "ancilla"):
        raise ValueError(f"unknown mode {mode!r}")
    if op.total != dims.mode_dim(mode):
        raise ValueError(
            f"operator dim {op.total} does not match mode {mode!r} dim {dims.mode_dim(mode)}")
    blocks = [np.eye(dims.n_a), np.eye(dims.n_b), np.eye(dims.n_q)]
    blocks[("a", "b", "ancilla").index(mode)] = op.data
    data = np.kron(np.kron(blocks[0], blocks[1]), blocks[2])
    return QOperator(data, dims.factors, dims.labels)


def joint_parity_operator(dims: SystemDims) -> QOperator:
    """P_J = P_A P_B (identity on the ancilla)."""
    return embed(parity(dims.n_a), "a", dims) @ embed(parity(dims.n_b), "b", dims)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out all factors not named in ``keep`` (a label or list of labels)."""
    if isinstance(keep, str):
        keep = (keep,)
    keep = tuple(keep)
    if not keep:
        raise ValueError("keep-set must not be empty")
    labels = rho.labels
    missing = [k for k in keep if k not in labels]
    if missing:
        raise ValueError(f"unknown mode labels {missing}; have {labels}")
    nfac = len(rho.dims)
    keep_idx = sorted(labels.index(k) for k in keep)
    t = rho.data.reshape(rho.dims + rho.dims)
    # trace out dropped factors from highest index down so positions stay valid
    for i in reversed(range(nfac)):
        if i not in keep_idx:
            t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    d = int(np.prod([rho.dims[i] for i in keep_idx]))
    out = t.reshape(d, d)
    return DensityMatrix(out, tuple(rho.dims[i] for i in keep_idx),
                         tuple(labels[i] for i in keep_idx))


def apply(op: QOperator, state):
    """Apply a unitary/general operator: U|psi> or U rho U^dag."""
    _check_same_space(op, state)
    if isinstance(state, StateVector):
        out = op.data @ state.amplitudes
        keeps_norm = abs(float(np.linalg.norm(out)) - 1.0) <= NORM_TOL
        return StateVector(out, state.dims, state.labels,
                           discarded_weight=state.discarded_weight,
                           normalized=state.normalized and keeps_norm)
    return DensityMatrix(_hermitize(op.data @ state.data @ op.data.conj().T),
                         state.dims, state.labels)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def expectation(state, op: QOperator) -> complex:
    """<psi|O|psi> or Tr[rho O]."""
    arr, dims, is_rho = _state_input(state)
    _check_same_space(op, state)
    if is_rho:
        return complex(np.trace(arr @ op.data))
    return complex(np.vdot(arr, op.data @ arr))


def fidelity(state, target) -> float:
    """State fidelity; at least one argument pure gives <psi|rho|psi>."""
    if isinstance(state, StateVector) and isinstance(target, StateVector):
        _check_same_space(state, target)
        return float(abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2)
    if isinstance(target, StateVector):
        state, target = target, state
    if isinstance(state, StateVector):
        _check_same_space(state, target)
        v = state.amplitudes
        return float(np.real(np.vdot(v, target.data @ v)))
    # general mixed-mixed fidelity (Tr sqrt(sqrt(r) s sqrt(r)))^2
    _check_same_space(state, target)
    w, u = np.linalg.eigh(state.data)
    w = np.clip(w, 0.0, None)
    sq = (u * np.sqrt(w)) @ u.conj().T
    inner = sq @ target.data @ sq
    ev = np.clip(np.linalg.eigvalsh(_hermitize(inner)), 0.0, None)
    return float(np.sum(np.sqrt(ev)) ** 2)


def purity(rho: DensityMatrix) -> float:
    """Tr[rho^2]."""
    return float(np.real(np.trace(rho.data @ rho.data)))
