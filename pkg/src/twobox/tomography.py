"""Joint Wigner evaluation, sampling plans, and synthetic shot-noise datasets.

All public Wigner values follow the scaled convention: the number reported at
a phase-space point is the displaced joint (or single-cavity) parity
expectation, bounded by [-1, 1] up to truncation slack.  The conventional
quasi-probability normalization factors (4/pi^2 joint, 2/pi single) are
applied only in export metadata.

Datasets persist as CSV ``re_ba,im_ba,re_bb,im_bb,n_even,n_total`` with a JSON
sidecar holding provenance (state label, seed, noise knobs, dims).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import hilbert as hb
from .dynamics import NoiseConfig
from .hilbert import DensityMatrix, StateVector

__all__ = [
    "SamplePoint",
    "TomographyPlan",
    "MeasurementRecord",
    "TomographyDataset",
    "WignerValue",
    "kernel_cache",
    "joint_wigner",
    "joint_wigner_grid",
    "single_wigner",
    "plane_cut",
    "sprinkle_4d",
    "sample_dataset",
    "dataset_to_wigner_estimates",
    "JOINT_WIGNER_SCALE",
    "SINGLE_WIGNER_SCALE",
]

JOINT_WIGNER_SCALE = 4.0 / np.pi ** 2
SINGLE_WIGNER_SCALE = 2.0 / np.pi

PLANE_KINDS = ("ReRe", "ImIm", "ReIm_A", "ReIm_B")


@dataclass(frozen=True)
class SamplePoint:
    beta_a: complex
    beta_b: complex

    def __post_init__(self):
        if not (np.isfinite(self.beta_a) and np.isfinite(self.beta_b)):
            raise ValueError("sample point must be finite")


@dataclass(frozen=True)
class TomographyPlan:
    points: tuple[SamplePoint, ...]
    n_rep: int = 2000
    kind: str = "custom"
    axes: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("plan has no points")
        if self.n_rep < 1:
            raise ValueError("n_rep must be >= 1")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class MeasurementRecord:
    point: SamplePoint
    n_even: int
    n_total: int

    def __post_init__(self):
        if not 0 <= self.n_even <= self.n_total:
            raise ValueError(f"counts {self.n_even}/{self.n_total} out of range")


@dataclass(frozen=True)
class TomographyDataset:
    records: tuple[MeasurementRecord, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self):
        return len(self.records)

    @property
    def ragged(self) -> bool:
        totals = {r.n_total for r in self.records}
        return len(totals) > 1

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(beta_a, beta_b, n_even, n_total) as flat arrays."""
        ba = np.array([r.point.beta_a for r in self.records])
        bb = np.array([r.point.beta_b for r in self.records])
        ne = np.array([r.n_even for r in self.records], dtype=np.int64)
        nt = np.array([r.n_total for r in self.records], dtype=np.int64)
        return ba, bb, ne, nt

    def write_csv(self, path, sidecar: bool = True) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_ba", "im_ba", "re_bb", "im_bb", "n_even", "n_total"])
            for r in self.records:
                w.writerow([f"{r.point.beta_a.real:.17g}", f"{r.point.beta_a.imag:.17g}",
                            f"{r.point.beta_b.real:.17g}", f"{r.point.beta_b.imag:.17g}",
                            r.n_even, r.n_total])
        if sidecar:
            with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
                json.dump(self.provenance, fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def read_csv(cls, path) -> "TomographyDataset":
        path = Path(path)
        records = []
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            for row in rd:
                records.append(MeasurementRecord(
                    SamplePoint(complex(float(row["re_ba"]), float(row["im_ba"])),
                                complex(float(row["re_bb"]), float(row["im_bb"]))),
                    int(row["n_even"]), int(row["n_total"])))
        prov = {}
        side = path.with_suffix(path.suffix + ".json")
        if side.exists():
            prov = json.loads(side.read_text())
        return cls(tuple(records), prov)


@dataclass(frozen=True)
class WignerValue:
    value: float
    truncation_flagged: bool = False


# ---------------------------------------------------------------------------
# kernels and exact evaluation


class kernel_cache:
    """Memoized displaced-parity kernels K(beta) for one mode dimension.

    Grid evaluation reuses one kernel per distinct displacement, which is the
    dominant cost saving for plane cuts (81 kernels instead of 6561 per axis).
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._store: dict[complex, np.ndarray] = {}

    def __call__(self, beta: complex) -> np.ndarray:
        key = complex(beta)
        k = self._store.get(key)
        if k is None:
            signs = (-1.0) ** np.arange(self.dim)
            k = hb._displacement_analytic(self.dim, 2.0 * key) * signs[None, :]
            self._store[key] = k
        return k


def _cavity_density(state) -> tuple[np.ndarray, int, int]:
    """Two-cavity density matrix (ancilla traced out if present)."""
    if isinstance(state, StateVector):
        state = state.to_density()
    if not isinstance(state, DensityMatrix):
        raise TypeError(f"expected StateVector or DensityMatrix, got {type(state)!r}")
    if "ancilla" in state.labels and len(state.dims) == 3:
        state = hb.partial_trace(state, ("a", "b"))
    if len(state.dims) != 2:
        raise ValueError(f"need a two-cavity state, got factor dims {state.dims}")
    na, nb = state.dims
    return state.data, na, nb


def _guard_exceeded(beta: complex, dim: int) -> bool:
    return abs(beta) > 0.5 * np.sqrt(dim)


def joint_wigner(state, point: SamplePoint | tuple, *, flag_truncation: bool = False):
    """Scaled joint Wigner value <P_J(beta_a, beta_b)> for a state.

    Contracts the two-cavity density matrix against exact displaced-parity
    kernels.  With ``flag_truncation`` the return is a :class:`WignerValue`
    whose flag reports that a displacement exceeded the sqrt(dim)/2 guard.
    """
    if isinstance(point, tuple):
        point = SamplePoint(*point)
    rho, na, nb = _cavity_density(state)
    ka = kernel_cache(na)(point.beta_a)
    kb = kernel_cache(nb)(point.beta_b)
    c = rho.reshape(na, nb, na, nb)
    val = float(np.real(np.einsum("ijmn,mi,nj->", c, ka, kb, optimize=True)))
    if flag_truncation:
        flagged = _guard_exceeded(point.beta_a, na) or _guard_exceeded(point.beta_b, nb)
        return WignerValue(val, flagged)
    return val


def joint_wigner_grid(state, points, n_threads: int = 1) -> np.ndarray:
    """Scaled joint Wigner values at many points, kernel-cached and vectorized.

    ``n_threads`` chunks the einsum over points; results are reduced in point
    order, so the output is identical for any thread count.
    """
    rho, na, nb = _cavity_density(state)
    pts = [p if isinstance(p, SamplePoint) else SamplePoint(*p) for p in points]
    ca, cb = kernel_cache(na), kernel_cache(nb)
    ka = np.stack([ca(p.beta_a) for p in pts])
    kb = np.stack([cb(p.beta_b) for p in pts])
    c = rho.reshape(na, nb, na, nb)

    def contract(sl: slice) -> np.ndarray:
        return np.real(np.einsum("ijmn,kmi,knj->k", c, ka[sl], kb[sl], optimize=True))

    if n_threads <= 1 or len(pts) < 2 * n_threads:
        return contract(slice(None))
    from concurrent.futures import ThreadPoolExecutor
    bounds = np.linspace(0, len(pts), n_threads + 1, dtype=int)
    out = np.empty(len(pts))
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futs = [(i, pool.submit(contract, slice(bounds[i], bounds[i + 1])))
                for i in range(n_threads)]
        for i, f in futs:
            out[bounds[i]:bounds[i + 1]] = f.result()
    return out


def single_wigner(state, mode: str, beta: complex) -> float:
    """Scaled single-cavity Wigner value Tr[rho D P D^dag] for one mode."""
    if mode not in ("a", "b"):
        raise ValueError(f"unknown cavity {mode!r}")
    if isinstance(state, StateVector):
        state = state.to_density()
    reduced = hb.partial_trace(state, mode) if len(state.dims) > 1 else state
    dim = reduced.dims[0]
    k = kernel_cache(dim)(beta)
    return float(np.real(np.trace(reduced.data @ k)))


# ---------------------------------------------------------------------------
# plans


def plane_cut(kind: str, half_extent: float = 2.8, n_axis: int = 81,
              n_rep: int = 2000) -> TomographyPlan:
    """2D grid embedded in the 4D phase space, off-plane coordinates zero.

    ``ReRe``: (x, y) -> (beta_a = x, beta_b = y); ``ImIm``: (ix, iy);
    ``ReIm_A``: beta_a = x + iy with beta_b = 0, and symmetrically ``ReIm_B``.
    Points are emitted row-major over (axis1, axis2).
    """
    if kind not in PLANE_KINDS:
        raise ValueError(f"unknown plane kind {kind!r}; expected one of {PLANE_KINDS}")
    if n_axis < 2:
        raise ValueError("need at least 2 points per axis")
    ax = np.linspace(-half_extent, half_extent, n_axis)
    pts = []
    for x in ax:
        for y in ax:
            if kind == "ReRe":
                pts.append(SamplePoint(complex(x, 0), complex(y, 0)))
            elif kind == "ImIm":
                pts.append(SamplePoint(complex(0, x), complex(0, y)))
            elif kind == "ReIm_A":
                pts.append(SamplePoint(complex(x, y), 0j))
            else:
                pts.append(SamplePoint(0j, complex(x, y)))
    return TomographyPlan(tuple(pts), n_rep=n_rep, kind=kind,
                          axes={"half_extent": half_extent, "n_axis": n_axis})


def sprinkle_4d(n_points: int, half_extent: float = 2.0, seed: int = 0,
                n_rep: int = 2000) -> TomographyPlan:
    """Low-discrepancy (Halton) coverage of the full 4D phase space."""
    if n_points < 1:
        raise ValueError("need at least one point")
    sampler = qmc.Halton(d=4, scramble=True, seed=seed)
    u = sampler.random(n_points)
    xs = (2.0 * u - 1.0) * half_extent
    pts = tuple(SamplePoint(complex(r[0], r[1]), complex(r[2], r[3])) for r in xs)
    return TomographyPlan(pts, n_rep=n_rep, kind="sprinkle4d",
                          axes={"half_extent": half_extent, "seed": seed})


def combine_plans(*plans: TomographyPlan, n_rep: int | None = None) -> TomographyPlan:
    pts = tuple(p for plan in plans for p in plan.points)
    return TomographyPlan(pts, n_rep=n_rep or plans[0].n_rep, kind="combined")


# ---------------------------------------------------------------------------
# sampling


def sample_dataset(state, plan: TomographyPlan, noise: NoiseConfig | None = None,
                   seed: int = 0, n_threads: int = 1,
                   provenance: dict | None = None) -> TomographyDataset:
    """Binomial shot-noise measurements of the plan's points.

    Per point, the even-outcome probability is
    ``p = (v * <P_J(beta)> + 1) / 2`` folded with a symmetric readout flip
    ``p' = p (1 - r) + (1 - p) r``; counts are Binomial(n_rep, p').  Each
    point draws from its own counter-derived stream (SeedSequence spawn key =
    point index), so serial and parallel sampling agree bit for bit.
    """
    noise = noise or NoiseConfig.ideal()
    values = joint_wigner_grid(state, plan.points, n_threads=n_threads)
    p = 0.5 * (noise.visibility * np.clip(values, -1.0, 1.0) + 1.0)
    p = p * (1.0 - noise.readout_error) + (1.0 - p) * noise.readout_error
    root = np.random.SeedSequence(seed)
    records = []
    for k, (pt, pk) in enumerate(zip(plan.points, p)):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(k,)))
        n_even = int(rng.binomial(plan.n_rep, pk))
        records.append(MeasurementRecord(pt, n_even, plan.n_rep))
    prov = {
        "seed": seed,
        "n_rep": plan.n_rep,
        "plan_kind": plan.kind,
        "noise": {
            "visibility": noise.visibility,
            "readout_error": noise.readout_error,
            "prep_error": noise.prep_error,
            "parity_phase_error": noise.parity_phase_error,
        },
    }
    prov.update(provenance or {})
    return TomographyDataset(tuple(records), prov)


def dataset_to_wigner_estimates(dataset: TomographyDataset):
    """Per-record (point, scaled-Wigner estimate, binomial standard error)."""
    out = []
    for r in dataset.records:
        if r.n_total == 0:
            raise ValueError("record with zero repetitions")
        phat = r.n_even / r.n_total
        est = 2.0 * phat - 1.0
        stderr = 2.0 * np.sqrt(max(phat * (1.0 - phat), 0.0) / r.n_total)
        out.append((r.point, est, stderr))
    return out


def write_wigner_csv(path, points, values) -> None:
    """CSV export ``re_ba,im_ba,re_bb,im_bb,value`` of scaled Wigner values."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_ba", "im_ba", "re_bb", "im_bb", "value"])
        for pt, v in zip(points, values):
            p = pt if isinstance(pt, SamplePoint) else SamplePoint(*pt)
            w.writerow([f"{p.beta_a.real:.17g}", f"{p.beta_a.imag:.17g}",
                        f"{p.beta_b.real:.17g}", f"{p.beta_b.imag:.17g}", f"{v:.17g}"])
