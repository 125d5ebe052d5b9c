import numpy as np
import pytest

from branchqd.qstate import PureState, SubsystemLayout


def random_state(rng, layout):
    d = layout.total_dim
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v), layout)


def random_unitary(rng, d):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def ghz(y, n_env=4, m=2):
    """sqrt(y0)|0>|0..0> + sqrt(y1)|1>|1..1> with the first m env qubits as fragment."""
    amps = np.zeros(2 ** (n_env + 1), dtype=complex)
    amps[0] = np.sqrt(y[0])
    amps[-1] = np.sqrt(y[1])
    return PureState(amps, SubsystemLayout.qubits(n_env, m))


def bits(lam):
    lam = np.asarray([x for x in lam if x > 0])
    return float(-np.sum(lam * np.log2(lam)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
