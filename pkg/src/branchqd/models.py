"""State preparation for the c-maybe information-extraction model.

A system qubit prepared in ``sqrt(1-p)|0> + sqrt(p) e^{i phi}|1>`` is coupled to
``N`` environment qubits, initially all ``|0>``, by controlled unitaries
``|0><0| (x) U0_i + |1><1| (x) U1_i`` applied to qubits 1..N in order. The
gamma variant uses ``U0 = I`` and ``U1 = sqrt(gamma) X + sqrt(1-gamma) Z``;
the Haar variant draws every ``U0_i, U1_i`` independently from Haar on U(2).

Factor 0 is the system, factors 1..N the environment qubits; the first ``m``
environment qubits form the fragment.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .geometry import GeometricState
from .qstate import PureState, SubsystemLayout, apply_controlled_unitary

MAX_ENV_QUBITS = 20

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class CMaybeSpec:
    """Parameters of one c-maybe state.

    ``gamma`` is a float in (0, 1], ``"ideal"`` (perfect c-not, gamma = 1) or
    ``"haar"``. ``m`` defaults to ``N // 2``.
    """

    p: float
    N: int
    gamma: float | str = 1.0
    phi: float = 0.0
    m: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p!r} outside [0, 1]")
        if self.N < 1:
            raise ValueError("need at least one environment qubit")
        if self.N > MAX_ENV_QUBITS:
            raise ValueError("dense limit exceeded")
        if self.m is None:
            object.__setattr__(self, "m", self.N // 2)
        if not 0 <= self.m <= self.N:
            raise ValueError(f"fragment size m={self.m} outside [0, {self.N}]")
        g = self.gamma
        if isinstance(g, str):
            if g not in ("ideal", "haar"):
                raise ValueError(f"unknown gamma tag {g!r}")
        elif not 0.0 < float(g) <= 1.0:
            raise ValueError(f"gamma={g!r} outside (0, 1]")

    @property
    def is_haar(self) -> bool:
        return self.gamma == "haar"

    @property
    def gamma_value(self) -> float:
        if self.is_haar:
            raise ValueError("Haar mode has no gamma")
        return 1.0 if self.gamma == "ideal" else float(self.gamma)

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout.qubits(self.N, self.m)


def gamma_gate(gamma: float) -> np.ndarray:
    return np.sqrt(gamma) * SIGMA_X + np.sqrt(1.0 - gamma) * SIGMA_Z


def initial_state(spec: CMaybeSpec) -> PureState:
    amps = np.zeros(spec.layout.total_dim, dtype=complex)
    amps[0] = np.sqrt(1.0 - spec.p)
    amps[1] = np.sqrt(spec.p) * np.exp(1j * spec.phi)
    return PureState(amps, spec.layout)


def build_cmaybe_state(spec: CMaybeSpec) -> PureState:
    """Gate-by-gate evolution of the c-maybe model."""
    if spec.is_haar:
        return build_haar_cmaybe_state(spec)
    u1 = gamma_gate(spec.gamma_value)
    psi = initial_state(spec)
    for i in range(1, spec.N + 1):
        psi = apply_controlled_unitary(psi, 0, i, IDENTITY, u1)
    return psi


def analytic_cmaybe_state(spec: CMaybeSpec) -> PureState:
    """Closed form ``sqrt(1-p)|0>|0..0> + sqrt(p) e^{i phi} |1>|g>^N`` with ``|g> = U1|0>``."""
    if spec.is_haar:
        raise ValueError("no closed form for the Haar model")
    g = spec.gamma_value
    zero = np.array([1.0, 0.0], dtype=complex)
    gvec = np.array([np.sqrt(1.0 - g), np.sqrt(g)], dtype=complex)
    env0 = np.ones(1, dtype=complex)
    env1 = np.ones(1, dtype=complex)
    for _ in range(spec.N):
        env0 = np.kron(zero, env0)
        env1 = np.kron(gvec, env1)
    amps = np.sqrt(1.0 - spec.p) * np.kron(env0, zero) + np.sqrt(spec.p) * np.exp(1j * spec.phi) * np.kron(
        env1, np.array([0.0, 1.0])
    )
    return PureState(amps, spec.layout)


def limiting_geometric_state(p: float) -> GeometricState:
    """Two-point measure ``(1-p) delta_|0> + p delta_|1>`` (zero-weight points dropped)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p!r} outside [0, 1]")
    pts = [(w, v, 0, b) for b, (w, v) in enumerate([(1.0 - p, [1, 0]), (p, [0, 1])]) if w > 0.0]
    return GeometricState.from_points(pts, shape=(1, 2))


def haar_random_su2(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed 2x2 unitary: QR of a complex Gaussian with R's diagonal phases removed."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def derive_seed(base_seed: int, experiment: str, k: int) -> np.random.SeedSequence:
    """Stream for trial ``k`` of ``experiment``: ``SeedSequence([base, crc32(name), k])``."""
    return np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(experiment.encode()), int(k)])


def trial_seed(base_seed: int, experiment: str, k: int) -> int:
    """64-bit integer seed for trial ``k``; see :func:`derive_seed`."""
    return int(derive_seed(base_seed, experiment, k).generate_state(1, np.uint64)[0])


def haar_gates(seed, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(seed)
    return [(haar_random_su2(rng), haar_random_su2(rng)) for _ in range(n)]


def build_haar_cmaybe_state(spec: CMaybeSpec) -> PureState:
    """c-maybe evolution with independent Haar pairs ``(U0_i, U1_i)`` drawn from ``spec.seed``."""
    if not spec.is_haar:
        raise ValueError("spec is not in Haar mode")
    psi = initial_state(spec)
    for i, (u0, u1) in enumerate(haar_gates(spec.seed, spec.N), start=1):
        psi = apply_controlled_unitary(psi, 0, i, u0, u1)
    return psi
