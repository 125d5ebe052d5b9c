"""Dense state-vector and density-matrix kernels over labeled tensor factors.

Index convention is little-endian: factor 0 is the fastest-varying index of
the flat amplitude vector, so for dims ``(d0, d1, ...)`` the flat index is
``i0 + d0*i1 + d0*d1*i2 + ...``. Entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SYSTEM = "system"
FRAGMENT = "fragment"
REMAINDER = "remainder"
_ROLES = (SYSTEM, FRAGMENT, REMAINDER)

NORM_TOL = 1e-12
HERM_TOL = 1e-12
NEG_EIG_TOL = 1e-10
# Above this dimension the PSD check on DensityMatrix is skipped (eigvalsh cost).
_PSD_CHECK_MAX_DIM = 512


@dataclass(frozen=True)
class SubsystemLayout:
    """Local dimensions plus a role tag (system/fragment/remainder) per factor."""

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(self.labels)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        if len(dims) != len(labels):
            raise ValueError("dims and labels must have equal length")
        if any(d < 1 for d in dims):
            raise ValueError(f"local dimensions must be positive, got {dims}")
        bad = [lab for lab in labels if lab not in _ROLES]
        if bad:
            raise ValueError(f"unknown factor labels {bad}")

    @classmethod
    def qubits(cls, n_env: int, m: int | None = None, system_dim: int = 2) -> "SubsystemLayout":
        """System factor 0 followed by ``n_env`` qubits; the first ``m`` form the fragment."""
        if m is None:
            m = n_env
        if not 0 <= m <= n_env:
            raise ValueError(f"fragment size m={m} outside [0, {n_env}]")
        labels = (SYSTEM,) + (FRAGMENT,) * m + (REMAINDER,) * (n_env - m)
        return cls((system_dim,) + (2,) * n_env, labels)

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def factors(self, role: str) -> tuple[int, ...]:
        return tuple(k for k, lab in enumerate(self.labels) if lab == role)

    @property
    def system(self) -> tuple[int, ...]:
        return self.factors(SYSTEM)

    @property
    def fragment(self) -> tuple[int, ...]:
        return self.factors(FRAGMENT)

    @property
    def remainder(self) -> tuple[int, ...]:
        return self.factors(REMAINDER)

    @property
    def environment(self) -> tuple[int, ...]:
        return tuple(k for k, lab in enumerate(self.labels) if lab != SYSTEM)

    def dim_of(self, factors: Iterable[int]) -> int:
        return int(np.prod([self.dims[k] for k in factors], dtype=np.int64))

    def check_full(self):
        """A global layout has exactly one system factor."""
        if len(self.system) != 1:
            raise ValueError(f"expected exactly one system factor, got {len(self.system)}")

    def restrict(self, keep: Sequence[int]) -> "SubsystemLayout":
        return SubsystemLayout(tuple(self.dims[k] for k in keep), tuple(self.labels[k] for k in keep))

    def split(self, m: int) -> "SubsystemLayout":
        """Relabel environment factors so the first ``m`` are the fragment."""
        env = self.environment
        if not 0 <= m <= len(env):
            raise ValueError(f"fragment size m={m} outside [0, {len(env)}]")
        labels = list(self.labels)
        for j, k in enumerate(env):
            labels[k] = FRAGMENT if j < m else REMAINDER
        return SubsystemLayout(self.dims, tuple(labels))


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    layout: SubsystemLayout

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        self.layout.check_full()
        if amps.size != self.layout.total_dim:
            raise ValueError(f"amplitude length {amps.size} != layout dimension {self.layout.total_dim}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def tensor(self) -> np.ndarray:
        """View with one axis per factor, axis k = factor k."""
        return as_tensor(self.amplitudes, self.dims)

    def with_fragment(self, m: int) -> "PureState":
        return PureState(self.amplitudes, self.layout.split(m))

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    layout: SubsystemLayout

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        d = self.layout.total_dim
        if mat.shape != (d, d):
            raise ValueError(f"matrix shape {mat.shape} does not match layout dimension {d}")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERM_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > HERM_TOL:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        if d <= _PSD_CHECK_MAX_DIM and np.linalg.eigvalsh(mat)[0] < -NEG_EIG_TOL:
            raise ValueError("density matrix has negative eigenvalues")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    @classmethod
    def single(cls, matrix, role: str = SYSTEM) -> "DensityMatrix":
        """Wrap a bare matrix as a one-factor density matrix."""
        mat = np.asarray(matrix, dtype=complex)
        return cls(mat, SubsystemLayout((mat.shape[0],), (role,)))


def as_tensor(flat: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    n = len(dims)
    return np.asarray(flat).reshape(tuple(dims)[::-1]).transpose(tuple(range(n - 1, -1, -1)))


def flatten_tensor(tensor: np.ndarray) -> np.ndarray:
    n = tensor.ndim
    return tensor.transpose(tuple(range(n - 1, -1, -1))).reshape(-1)


def grouped(state: PureState, *groups: Sequence[int]) -> np.ndarray:
    """Amplitude tensor with one axis per factor group plus a trailing rest axis.

    Each group is flattened little-endian in the order given. The trailing axis
    collects every factor not named in a group (size 1 if none).
    """
    named = [k for g in groups for k in g]
    if len(set(named)) != len(named):
        raise ValueError("factor groups overlap")
    rest = [k for k in range(state.layout.n_factors) if k not in named]
    order = []
    shape = []
    for g in list(groups) + [rest]:
        order.extend(reversed(list(g)))
        shape.append(state.layout.dim_of(g))
    return state.tensor().transpose(order).reshape(shape)


def ungroup(t: np.ndarray, layout: SubsystemLayout, *groups: Sequence[int], renormalize: bool = False) -> PureState:
    """Inverse of :func:`grouped`: rebuild a state from a grouped amplitude tensor."""
    named = [k for g in groups for k in g]
    rest = [k for k in range(layout.n_factors) if k not in named]
    order = [k for g in list(groups) + [rest] for k in reversed(list(g))]
    full = np.asarray(t).reshape([layout.dims[k] for k in order])
    pos = {k: i for i, k in enumerate(order)}
    flat = full.transpose([pos[k] for k in range(layout.n_factors - 1, -1, -1)]).reshape(-1)
    if renormalize:
        flat = flat / np.linalg.norm(flat)
    return PureState(flat, layout)


def normalize(v, layout: SubsystemLayout | None = None) -> PureState:
    v = np.asarray(v, dtype=complex).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("null state")
    if layout is None:
        layout = SubsystemLayout((v.size,), (SYSTEM,))
    return PureState(v / norm, layout)


def _check_factors(layout: SubsystemLayout, factors) -> tuple[int, ...]:
    factors = tuple(sorted(set(int(k) for k in factors)))
    if not factors:
        raise ValueError("empty factor set")
    if factors[0] < 0 or factors[-1] >= layout.n_factors:
        raise ValueError(f"factor indices {factors} out of range for {layout.n_factors} factors")
    return factors


def partial_trace(state: PureState | DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (kept factors stay in ascending order)."""
    keep = _check_factors(state.layout, keep)
    layout = state.layout
    if isinstance(state, PureState):
        m = grouped(state, keep).reshape(layout.dim_of(keep), -1)
        rho = m @ m.conj().T
    else:
        n = layout.n_factors
        drop = [k for k in range(n) if k not in keep]
        t = state.matrix.reshape(tuple(layout.dims[::-1]) * 2)
        # axis of factor k in the row block is n-1-k, in the column block 2n-1-k
        row = [n - 1 - k for k in reversed(keep)]
        col = [2 * n - 1 - k for k in reversed(keep)]
        tr_r = [n - 1 - k for k in drop]
        tr_c = [2 * n - 1 - k for k in drop]
        labels = list(range(2 * n))
        for r, c in zip(tr_r, tr_c):
            labels[c] = labels[r]
        t = np.einsum(t, labels, [labels[a] for a in row + col])
        d = layout.dim_of(keep)
        rho = t.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, layout.restrict(keep))


def entropy_from_eigenvalues(lam) -> float:
    """Shannon entropy in bits of a spectrum; 0 log 0 = 0, tiny negatives clipped."""
    lam = np.asarray(lam, dtype=float)
    if lam.size and lam.min() < -NEG_EIG_TOL:
        raise ValueError(f"eigenvalue {lam.min()!r} below -{NEG_EIG_TOL}: not a density matrix")
    lam = lam[lam > 0.0]
    return float(-np.sum(lam * np.log2(lam)))


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(mat))


def batch_entropy(mats: np.ndarray) -> np.ndarray:
    """Entropies in bits of a stack of Hermitian PSD matrices (no normalization)."""
    mats = np.asarray(mats)
    if mats.shape[-1] == 2:
        a = mats[..., 0, 0].real
        d = mats[..., 1, 1].real
        b = np.abs(mats[..., 0, 1])
        half = 0.5 * (a + d)
        rad = np.sqrt(0.25 * (a - d) ** 2 + b**2)
        lam = np.stack([half - rad, half + rad], axis=-1)
    else:
        lam = np.linalg.eigvalsh(mats)
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0.0, -lam * np.log2(np.where(lam > 0.0, lam, 1.0)), 0.0)
    return terms.sum(axis=-1)


def schmidt_decompose(state: PureState, cut, atol: float = 1e-14):
    """Schmidt decomposition across ``cut`` | complement.

    Returns ``(coeffs, left, right)`` with coefficients descending and the
    Schmidt vectors as columns; coefficients below ``atol`` are dropped.
    """
    cut = _check_factors(state.layout, cut)
    if len(cut) == state.layout.n_factors:
        raise ValueError("bipartition needs factors on both sides")
    m = grouped(state, cut).reshape(state.layout.dim_of(cut), -1)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    k = max(1, int(np.sum(s > atol)))
    return s[:k], u[:, :k], vh[:k].T


def subsystem_entropy(state: PureState, factors) -> float:
    """Entropy of the reduced state on ``factors``, via the smaller side of the cut."""
    factors = _check_factors(state.layout, factors)
    if len(factors) == state.layout.n_factors:
        return 0.0
    m = grouped(state, factors).reshape(state.layout.dim_of(factors), -1)
    gram = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
    return von_neumann_entropy(gram)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.vdot(rho.matrix, rho.matrix)))


def is_unitary(u, tol: float = NORM_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=tol)


def apply_local(state: PureState, factor: int, u) -> PureState:
    """Apply a single-factor operator ``u`` on ``factor``."""
    u = np.asarray(u, dtype=complex)
    t = np.moveaxis(np.tensordot(u, state.tensor(), axes=([1], [factor])), 0, factor)
    return PureState(flatten_tensor(t), state.layout)


def apply_controlled_unitary(state: PureState, control: int, target: int, u0, u1) -> PureState:
    """Apply ``|0><0| (x) u0 + |1><1| (x) u1`` with the system qubit as control."""
    layout = state.layout
    if layout.labels[control] != SYSTEM or layout.dims[control] != 2:
        raise ValueError("control must be the system qubit")
    if target == control or layout.labels[target] == SYSTEM:
        raise ValueError("target must be an environment factor")
    u0 = np.asarray(u0, dtype=complex)
    u1 = np.asarray(u1, dtype=complex)
    d = layout.dims[target]
    for u in (u0, u1):
        if u.shape != (d, d) or not is_unitary(u):
            raise ValueError("controlled gate blocks must be unitary")
    t = np.array(state.tensor())
    for c, u in ((0, u0), (1, u1)):
        sl = [slice(None)] * t.ndim
        sl[control] = c
        sub = t[tuple(sl)]
        ax = target if target < control else target - 1
        t[tuple(sl)] = np.moveaxis(np.tensordot(u, sub, axes=([1], [ax])), 0, ax)
    amps = flatten_tensor(t)
    # absorb round-off so the norm invariant survives long gate sequences
    amps = amps / np.linalg.norm(amps)
    return PureState(amps, layout)
