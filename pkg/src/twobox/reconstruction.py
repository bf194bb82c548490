"""Maximum-likelihood density-matrix reconstruction from parity datasets.

The estimate is rho = A A^dag / Tr[A A^dag] over the two-cavity space, with A
an unconstrained complex matrix, so positivity holds by construction.  The
objective is the binomial log-likelihood of the observed even counts plus a
quadratic trace penalty,

    f(A) = sum_k [ n_k ln p_k + (N_k - n_k) ln(1 - p_k) ]
           - lam (Tr[A A^dag] - 1)^2,
    p_k = (W_k(A A^dag) + 1) / 2,

where W_k is the scaled joint Wigner value at the k-th sampling point.  The
gradient is analytic (Wirtinger convention: the optimizer sees d f / d Re A
and d f / d Im A, which are 2 Re and 2 Im of the conjugate-coordinate
gradient (1/2) sum_k w_k Q_k A - 2 lam (Tr - 1) A with Q_k the kernel of
W_k).  Optimization is quasi-Newton (L-BFGS-B) on the stacked real
parameters; the penalty weight doubles until the trace settles within 1e-3.

Likelihood and gradient sums over dataset points reduce in a fixed order
(dense matmuls over the stacked kernels), so repeated fits of the same data
are bit-reproducible; the optimizer loop itself is sequential.

A scikit-learn style wrapper, :class:`MLEReconstructor`, exposes the same
fit as an estimator with ``get_params``/``set_params``, ``fit`` on a
:class:`~twobox.tomography.TomographyDataset`, and ``predict`` of
even-outcome probabilities at new phase-space points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator

from . import hilbert as hb
from .hilbert import DensityMatrix
from .tomography import SamplePoint, TomographyDataset, kernel_cache

__all__ = [
    "MLEConfig",
    "MLEResult",
    "PrecomputedKernels",
    "log_likelihood",
    "likelihood_gradient",
    "reconstruct",
    "best_fit_cat",
    "MLEReconstructor",
]


@dataclass(frozen=True)
class MLEConfig:
    cutoff_a: int = 12
    cutoff_b: int = 12
    lam: float = 10.0
    lam_cap: float = 1e6
    max_iters: int = 2000
    grad_tolerance: float = 1e-6
    probability_floor: float = 1e-6
    trace_tolerance: float = 1e-3
    init: str = "identity"          # "identity" | "random"
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("trace penalty weight must be positive")
        if not 0.0 < self.probability_floor <= 0.01:
            raise ValueError("probability floor outside (0, 0.01]")
        if self.cutoff_a < 1 or self.cutoff_b < 1:
            raise ValueError("cutoffs must be >= 1")

    @property
    def dim(self) -> int:
        return self.cutoff_a * self.cutoff_b


@dataclass(frozen=True)
class MLEResult:
    rho: DensityMatrix
    log_likelihood: float
    trace_deviation: float
    iterations: int
    converged: bool
    lam_final: float
    metrics: dict = field(default_factory=dict)


class PrecomputedKernels:
    """Per-point per-mode displaced-parity kernels, stacked for fast contraction.

    Kernels are flattened so both the value and gradient contractions run as
    two dense matmuls per call: W_k = Tr[rho (K_A^k kron K_B^k)] groups rho as
    a (mi) x (jn) matrix, and the gradient sum over k is a (mi) x (nj) outer
    product accumulated by a single gemm.
    """

    def __init__(self, points, cutoff_a: int, cutoff_b: int):
        pts = [p if isinstance(p, SamplePoint) else SamplePoint(*p) for p in points]
        ca, cb = kernel_cache(cutoff_a), kernel_cache(cutoff_b)
        self.cutoff_a, self.cutoff_b = cutoff_a, cutoff_b
        self.ka = np.stack([ca(p.beta_a) for p in pts])      # (k, m, i)
        self.kb = np.stack([cb(p.beta_b) for p in pts])      # (k, n, j)
        self.n_points = len(pts)
        self._ka2 = np.ascontiguousarray(self.ka.reshape(self.n_points, -1))
        self._kb2 = np.ascontiguousarray(self.kb.reshape(self.n_points, -1))

    def wigner_values(self, rho: np.ndarray) -> np.ndarray:
        na, nb = self.cutoff_a, self.cutoff_b
        c = rho.reshape(na, nb, na, nb)
        # C2[(m,i),(n,j)] = rho[(i,j),(m,n)]
        c2 = np.ascontiguousarray(c.transpose(2, 0, 3, 1).reshape(na * na, nb * nb))
        t1 = self._ka2 @ c2                       # (k, (n,j))
        return np.real(np.sum(t1 * self._kb2, axis=1))

    def weighted_kernel_sum(self, w: np.ndarray) -> np.ndarray:
        """sum_k w_k (K_A^k kron K_B^k) as a dim x dim matrix."""
        na, nb = self.cutoff_a, self.cutoff_b
        g = self._ka2.T @ (w[:, None] * self._kb2)    # ((m,i),(n,j))
        g = g.reshape(na, na, nb, nb).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(g.reshape(na * nb, na * nb))


def _dataset_arrays(dataset: TomographyDataset):
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    ba, bb, ne, nt = dataset.to_arrays()
    return ba, bb, ne.astype(float), nt.astype(float)


def _objective_parts(a: np.ndarray, ne, nt, kernels: PrecomputedKernels,
                     lam: float, floor: float, ll_scale: float = 1.0):
    """Penalized log-likelihood and its conjugate-coordinate gradient.

    ``ll_scale`` rescales the likelihood term (the optimizer uses 1/total
    shots so the trace penalty weight acts on an O(1) objective).
    """
    rho = a @ a.conj().T
    tr = float(np.real(np.trace(rho)))
    w = kernels.wigner_values(rho)
    p_raw = 0.5 * (w + 1.0)
    p = np.clip(p_raw, floor, 1.0 - floor)
    ll = float(np.sum(ne * np.log(p) + (nt - ne) * np.log1p(-p)))
    f = ll * ll_scale - lam * (tr - 1.0) ** 2
    # d p_k / d rho = Q_k / 2; where the floor clamps p the objective is
    # locally flat in p, so those points carry zero weight
    weights = (ne / p - (nt - ne) / (1.0 - p)) * ll_scale
    weights[(p_raw < floor) | (p_raw > 1.0 - floor)] = 0.0
    g_rho = 0.5 * kernels.weighted_kernel_sum(weights)
    grad_conj = g_rho @ a - 2.0 * lam * (tr - 1.0) * a
    return f, grad_conj, ll, tr


def log_likelihood(a: np.ndarray, dataset: TomographyDataset,
                   kernels: PrecomputedKernels, lam: float = 10.0,
                   probability_floor: float = 1e-6) -> float:
    """Penalized objective f(A); binomial coefficients are constant and omitted."""
    d = kernels.cutoff_a * kernels.cutoff_b
    if a.shape != (d, d):
        raise ValueError(f"A has shape {a.shape}, kernels expect {(d, d)}")
    if kernels.n_points != len(dataset):
        raise ValueError("kernel/dataset point-count mismatch")
    _, _, ne, nt = _dataset_arrays(dataset)
    f, _, _, _ = _objective_parts(a, ne, nt, kernels, lam, probability_floor)
    return f


def likelihood_gradient(a: np.ndarray, dataset: TomographyDataset,
                        kernels: PrecomputedKernels, lam: float = 10.0,
                        probability_floor: float = 1e-6) -> np.ndarray:
    """Gradient of f with respect to conj(A); real/imag parts are 2 Re / 2 Im of it."""
    d = kernels.cutoff_a * kernels.cutoff_b
    if a.shape != (d, d):
        raise ValueError(f"A has shape {a.shape}, kernels expect {(d, d)}")
    if kernels.n_points != len(dataset):
        raise ValueError("kernel/dataset point-count mismatch")
    _, _, ne, nt = _dataset_arrays(dataset)
    _, grad, _, _ = _objective_parts(a, ne, nt, kernels, lam, probability_floor)
    return grad


def _initial_a(config: MLEConfig) -> np.ndarray:
    d = config.dim
    if config.init == "identity":
        return np.eye(d, dtype=complex) / np.sqrt(d)
    if config.init == "random":
        rng = np.random.default_rng(config.seed)
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return a / np.sqrt(np.real(np.trace(a @ a.conj().T)))
    raise ValueError(f"unknown init {config.init!r}")


def reconstruct(dataset: TomographyDataset, config: MLEConfig = MLEConfig(),
                kernels: PrecomputedKernels | None = None,
                init_matrix: np.ndarray | None = None) -> MLEResult:
    """Run the penalized MLE and return the normalized density matrix with metrics.

    The penalty weight starts at ``config.lam`` and doubles (warm-starting
    from the current iterate) until |Tr[A A^dag] - 1| < trace tolerance or the
    cap is reached.  Non-convergence within the iteration budget returns the
    best iterate flagged ``converged=False``.
    """
    ba, bb, ne, nt = _dataset_arrays(dataset)
    if kernels is None:
        kernels = PrecomputedKernels(
            [SamplePoint(x, y) for x, y in zip(ba, bb)], config.cutoff_a, config.cutoff_b)
    d = config.dim
    a = init_matrix.astype(complex).copy() if init_matrix is not None else _initial_a(config)

    def pack(m):
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    def unpack(x):
        return x[:d * d].reshape(d, d) + 1j * x[d * d:].reshape(d, d)

    # optimize the shot-normalized likelihood so that the documented penalty
    # schedule (start at lam, double to the cap) has a scale-free meaning
    ll_scale = 1.0 / float(np.sum(nt))
    lam = config.lam
    total_iters = 0
    converged = False
    while True:
        def fun(x, lam=lam):
            m = unpack(x)
            f, grad, _, _ = _objective_parts(m, ne, nt, kernels, lam,
                                             config.probability_floor, ll_scale)
            return -f, -pack(2.0 * grad)

        res = minimize(fun, pack(a), jac=True, method="L-BFGS-B",
                       options={"maxiter": config.max_iters,
                                "gtol": config.grad_tolerance,
                                "ftol": 1e-14})
        a = unpack(res.x)
        total_iters += int(res.nit)
        converged = bool(res.success) or res.status == 0
        tr = float(np.real(np.trace(a @ a.conj().T)))
        if abs(tr - 1.0) < config.trace_tolerance or lam >= config.lam_cap:
            break
        lam *= 2.0

    rho_raw = a @ a.conj().T
    tr = float(np.real(np.trace(rho_raw)))
    rho = hb._hermitize(rho_raw / tr)
    dm = DensityMatrix(rho, (config.cutoff_a, config.cutoff_b), ("a", "b"))
    f_final, _, ll, _ = _objective_parts(a, ne, nt, kernels, lam, config.probability_floor)

    evals, evecs = np.linalg.eigh(rho)
    dom = evecs[:, -1]
    pa = (-1.0) ** np.arange(config.cutoff_a)
    pb = (-1.0) ** np.arange(config.cutoff_b)
    pj = np.kron(pa, pb)
    alpha_a, alpha_b, phase, fid = best_fit_cat(dm)
    metrics = {
        "lambda_max": float(evals[-1]),
        "purity": float(np.real(np.sum(evals ** 2))),
        "parity_of_dominant_eigenvector": float(np.real(np.sum(pj * np.abs(dom) ** 2))),
        "eigenvector_parities": [float(np.real(np.sum(pj * np.abs(evecs[:, i]) ** 2)))
                                 for i in range(len(evals) - 1, max(len(evals) - 5, -1), -1)],
        "best_fit_cat": {"alpha_a": alpha_a, "alpha_b": alpha_b,
                         "phase": phase, "fidelity": fid},
    }
    return MLEResult(
        rho=dm, log_likelihood=ll, trace_deviation=abs(tr - 1.0),
        iterations=total_iters, converged=converged, lam_final=lam, metrics=metrics)


def _cat_overlap(rho: np.ndarray, na: int, nb: int,
                 alpha_a: complex, alpha_b: complex, phase: float) -> float:
    s = np.exp(-2.0 * (abs(alpha_a) ** 2 + abs(alpha_b) ** 2))
    norm_sq = 2.0 * (1.0 + s * np.cos(phase))
    if norm_sq < 1e-12:
        return 0.0
    u = np.kron(hb.coherent_amplitudes(na, alpha_a), hb.coherent_amplitudes(nb, alpha_b))
    v = np.kron(hb.coherent_amplitudes(na, -alpha_a), hb.coherent_amplitudes(nb, -alpha_b))
    psi = (u + np.exp(1j * phase) * v) / np.sqrt(norm_sq)
    n = np.linalg.norm(psi)
    if n == 0:
        return 0.0
    psi = psi / n
    return float(np.real(np.vdot(psi, rho @ psi)))


def best_fit_cat(rho: DensityMatrix, search: str = "general",
                 alpha_max: float | None = None):
    """Highest-fidelity two-branch cat: returns (alpha_a, alpha_b, phase, fidelity).

    Coarse grid over real amplitudes and superposition phase, then Nelder-Mead
    refinement.  ``search="symmetric"`` constrains alpha_a = alpha_b and phase
    to {0, pi}; ``"general"`` lets both amplitudes and the phase float.
    """
    if search not in ("symmetric", "general"):
        raise ValueError(f"unknown search mode {search!r}")
    na, nb = rho.dims
    data = rho.data
    if alpha_max is None:
        nbar_a = float(np.real(np.einsum("ii->", data.reshape(na, nb, na, nb)
                                         .trace(axis1=1, axis2=3) * np.arange(na)[:, None])))
        alpha_max = max(1.0, np.sqrt(max(nbar_a, 1.0)) + 1.5)
    amps = np.linspace(0.2, alpha_max, 24)

    if search == "symmetric":
        best = (-1.0, 0.2, 0.0)
        for aa in amps:
            for ph in (0.0, np.pi):
                f = _cat_overlap(data, na, nb, aa, aa, ph)
                if f > best[0]:
                    best = (f, aa, ph)
        from scipy.optimize import minimize_scalar
        ph = best[2]
        res = minimize_scalar(lambda x: -_cat_overlap(data, na, nb, x, x, ph),
                              bracket=None, bounds=(0.05, alpha_max * 1.2), method="bounded")
        aa = float(res.x)
        return aa, aa, ph, _cat_overlap(data, na, nb, aa, aa, ph)

    best = (-1.0, 0.2, 0.2, 0.0)
    for aa in amps:
        for ph in np.linspace(-np.pi, np.pi, 13, endpoint=False):
            f = _cat_overlap(data, na, nb, aa, aa, ph)
            if f > best[0]:
                best = (f, aa, aa, ph)
    x0 = np.array(best[1:])
    res = minimize(lambda x: -_cat_overlap(data, na, nb, x[0], x[1], x[2]),
                   x0, method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
    aa, ab, ph = res.x
    ph = float((ph + np.pi) % (2 * np.pi) - np.pi)
    return float(aa), float(ab), ph, _cat_overlap(data, na, nb, aa, ab, ph)


class MLEReconstructor(BaseEstimator):
    """Scikit-learn style estimator around :func:`reconstruct`.

    Parameters mirror :class:`MLEConfig`.  ``fit`` accepts a
    :class:`TomographyDataset` (or an (n, 6) array in the CSV column order)
    and exposes ``rho_``, ``result_`` and ``metrics_``; ``predict`` returns
    even-outcome probabilities of the fitted state at new points.
    """

    def __init__(self, cutoff_a=8, cutoff_b=8, lam=10.0, lam_cap=1e6,
                 max_iters=2000, grad_tolerance=1e-6, probability_floor=1e-6,
                 trace_tolerance=1e-3, init="identity", seed=0):
        self.cutoff_a = cutoff_a
        self.cutoff_b = cutoff_b
        self.lam = lam
        self.lam_cap = lam_cap
        self.max_iters = max_iters
        self.grad_tolerance = grad_tolerance
        self.probability_floor = probability_floor
        self.trace_tolerance = trace_tolerance
        self.init = init
        self.seed = seed

    def _config(self) -> MLEConfig:
        return MLEConfig(
            cutoff_a=self.cutoff_a, cutoff_b=self.cutoff_b, lam=self.lam,
            lam_cap=self.lam_cap, max_iters=self.max_iters,
            grad_tolerance=self.grad_tolerance,
            probability_floor=self.probability_floor,
            trace_tolerance=self.trace_tolerance, init=self.init, seed=self.seed)

    @staticmethod
    def _as_dataset(X) -> TomographyDataset:
        if isinstance(X, TomographyDataset):
            return X
        from .tomography import MeasurementRecord
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError("expected a TomographyDataset or an (n, 6) array "
                             "[re_ba, im_ba, re_bb, im_bb, n_even, n_total]")
        recs = tuple(
            MeasurementRecord(SamplePoint(complex(r[0], r[1]), complex(r[2], r[3])),
                              int(r[4]), int(r[5])) for r in arr)
        return TomographyDataset(recs)

    def fit(self, X, y=None):
        dataset = self._as_dataset(X)
        self.result_ = reconstruct(dataset, self._config())
        self.rho_ = self.result_.rho
        self.metrics_ = self.result_.metrics
        return self

    def predict(self, X) -> np.ndarray:
        """Even-outcome probabilities at points given as an (n, 2) complex or (n, 4) real array."""
        if not hasattr(self, "rho_"):
            raise RuntimeError("call fit before predict")
        arr = np.asarray(X)
        if arr.ndim == 2 and arr.shape[1] == 4 and not np.iscomplexobj(arr):
            pts = [SamplePoint(complex(r[0], r[1]), complex(r[2], r[3])) for r in arr]
        elif arr.ndim == 2 and arr.shape[1] == 2:
            pts = [SamplePoint(complex(r[0]), complex(r[1])) for r in arr]
        else:
            raise ValueError("expected an (n, 2) complex or (n, 4) real point array")
        kern = PrecomputedKernels(pts, self.cutoff_a, self.cutoff_b)
        w = kern.wigner_values(self.rho_.data)
        return 0.5 * (w + 1.0)

    def score(self, X, y=None) -> float:
        """Mean unpenalized log-likelihood per record of the fitted state."""
        dataset = self._as_dataset(X)
        ba, bb, ne, nt = _dataset_arrays(dataset)
        kern = PrecomputedKernels([SamplePoint(x, y_) for x, y_ in zip(ba, bb)],
                                  self.cutoff_a, self.cutoff_b)
        w = kern.wigner_values(self.rho_.data)
        p = np.clip(0.5 * (w + 1.0), self.probability_floor, 1 - self.probability_floor)
        return float(np.mean(ne * np.log(p) + (nt - ne) * np.log1p(-p)))
