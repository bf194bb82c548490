import numpy as np
import pytest

from twobox.dynamics import DeviceParams
from twobox.hilbert import SystemDims, DensityMatrix


@pytest.fixture
def device():
    return DeviceParams()


@pytest.fixture
def dims12():
    return SystemDims(12, 12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(dims, rng, rank=None):
    """Random full- or low-rank density matrix on the given factor dims."""
    d = int(np.prod(dims if isinstance(dims, tuple) else dims.factors))
    r = rank or d
    x = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = x @ x.conj().T
    rho /= np.trace(rho).real
    if isinstance(dims, SystemDims):
        return DensityMatrix(rho, dims.factors, dims.labels)
    return DensityMatrix(rho, tuple(dims))


def random_cavity_pure(dims: SystemDims, rng):
    """Random pure two-cavity state with the ancilla in g."""
    from twobox.hilbert import StateVector
    v = rng.normal(size=dims.n_a * dims.n_b) + 1j * rng.normal(size=dims.n_a * dims.n_b)
    v /= np.linalg.norm(v)
    q = np.zeros(dims.n_q)
    q[0] = 1.0
    return StateVector(np.kron(v, q), dims.factors, dims.labels)
