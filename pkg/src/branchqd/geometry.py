"""Geometric quantum states of the system and Fubini-Study geometry on them.

A geometric state is a finite weighted point measure on the system's
projective space: one point per (fragment label, remainder label) cell,
carrying the cell's probability mass and the normalized conditional system
state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import SYSTEM, DensityMatrix, PureState, SubsystemLayout, grouped

PRUNE_WEIGHT = 1e-14
_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class GeometricState:
    """Weighted points ``(weights[k], chis[k])`` labeled by ``(alpha[k], beta[k])``.

    ``shape`` records ``(D_F, D_Fbar)``, the number of fragment and remainder
    labels, so that dense label tables can be rebuilt.
    """

    weights: np.ndarray
    chis: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        chis = np.asarray(self.chis, dtype=complex)
        if chis.ndim != 2 or chis.shape[0] != w.size:
            raise ValueError("chis must be a (n_points, D_S) array matching weights")
        if w.size and abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if w.size and np.max(np.abs(np.linalg.norm(chis, axis=1) - 1.0)) > 1e-12:
            raise ValueError("conditional states must be unit vectors")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "chis", chis)
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.int64))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=np.int64))

    def __len__(self):
        return self.weights.size

    @property
    def system_dim(self) -> int:
        return self.chis.shape[1]

    def weight_table(self) -> np.ndarray:
        """Dense ``X[alpha, beta]`` table."""
        x = np.zeros(self.shape)
        x[self.alpha, self.beta] = self.weights
        return x

    @classmethod
    def from_points(cls, points, shape=None) -> "GeometricState":
        """Build from ``(weight, chi, alpha, beta)`` tuples; chis are normalized."""
        w = np.array([p[0] for p in points], dtype=float)
        chis = np.array([np.asarray(p[1], dtype=complex) / np.linalg.norm(p[1]) for p in points])
        a = np.array([p[2] for p in points], dtype=np.int64)
        b = np.array([p[3] for p in points], dtype=np.int64)
        if shape is None:
            shape = (int(a.max()) + 1, int(b.max()) + 1)
        return cls(w, chis, a, b, tuple(shape))


@dataclass(frozen=True)
class PointerBasis:
    vectors: np.ndarray  # columns

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("pointer basis must be a square matrix of column vectors")
        if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0]))) > 1e-12:
            raise ValueError("pointer basis is not orthonormal")
        object.__setattr__(self, "vectors", v)

    @classmethod
    def computational(cls, d: int = 2) -> "PointerBasis":
        return cls(np.eye(d, dtype=complex))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class ClusterAssignment:
    """``omega[k]`` is the pointer index of point k, or -1 when at or below the mass floor."""

    omega: np.ndarray
    radii: np.ndarray
    masses: np.ndarray

    def members(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.omega == n)


def check_orthonormal(basis, dim: int, what: str = "basis") -> np.ndarray:
    b = np.asarray(basis, dtype=complex)
    if b.shape != (dim, dim):
        raise ValueError(f"{what} must be a {dim}x{dim} matrix of column vectors, got {b.shape}")
    if np.max(np.abs(b.conj().T @ b - np.eye(dim))) > _ORTHO_TOL:
        raise ValueError(f"{what} is not orthonormal")
    return b


def conditional_amplitudes(state: PureState, fragment_basis=None, remainder_basis=None) -> np.ndarray:
    """Amplitudes ``psi[i, alpha, beta]`` in the given fragment/remainder bases."""
    lay = state.layout
    t = grouped(state, lay.system, lay.fragment)  # (D_S, D_F, D_Fbar)
    d_f, d_fb = t.shape[1], t.shape[2]
    if fragment_basis is not None:
        bf = check_orthonormal(fragment_basis, d_f, "fragment basis")
        t = np.einsum("ab,iac->ibc", bf.conj(), t)
    if remainder_basis is not None:
        bfb = check_orthonormal(remainder_basis, d_fb, "remainder basis")
        t = np.einsum("cd,iac->iad", bfb.conj(), t)
    return t


def extract_geometric_state(state: PureState, fragment_basis=None, remainder_basis=None) -> GeometricState:
    """Geometric state of the system for the given fragment/remainder bases.

    Bases are square matrices whose columns are the basis vectors, indexed in
    the little-endian order of the fragment (resp. remainder) factors; ``None``
    means the computational basis. The remainder factors need not be
    contiguous with the fragment, but the system factor must be unique.
    """
    t = conditional_amplitudes(state, fragment_basis, remainder_basis)
    d_s, d_f, d_fb = t.shape
    x = np.sum(np.abs(t) ** 2, axis=0)
    a, b = np.nonzero(x >= PRUNE_WEIGHT)  # row-major: sorted by (alpha, beta)
    w = x[a, b]
    chis = t[:, a, b].T / np.sqrt(w)[:, None]
    # renormalize after pruning so the mass invariant is exact
    w = w / w.sum()
    return GeometricState(w, chis, a, b, (d_f, d_fb))


def fubini_study_distance(a, b) -> float:
    a = np.asarray(a, dtype=complex).reshape(-1)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")
    ov = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(1.0, ov)))


def fubini_study_distances(chis, center) -> np.ndarray:
    """Distances from each row of ``chis`` to ``center``."""
    center = np.asarray(center, dtype=complex).reshape(-1)
    center = center / np.linalg.norm(center)
    ov = np.abs(np.asarray(chis) @ center.conj())
    return np.arccos(np.clip(ov, 0.0, 1.0))


def bloch_coordinates(chi) -> np.ndarray:
    """Bloch vector ``(b_x, b_y, b_z)`` of a qubit state, or of each row of a stack."""
    chi = np.asarray(chi, dtype=complex)
    if chi.shape[-1] != 2:
        raise ValueError("Bloch coordinates need a 2-dimensional state")
    c0, c1 = chi[..., 0], chi[..., 1]
    cross = np.conj(c0) * c1
    return np.stack([2 * cross.real, 2 * cross.imag, np.abs(c0) ** 2 - np.abs(c1) ** 2], axis=-1)


def cap_measure(gqs: GeometricState, center, radius: float) -> float:
    """Mass of points within Fubini-Study distance ``radius * pi`` of ``center``.

    ``radius`` is a fraction of pi in ``[0, 0.5]``; 0.25 is a hemisphere of
    the Bloch sphere and 0.5 the whole space.
    """
    if not 0.0 <= radius <= 0.5:
        raise ValueError(f"cap radius {radius!r} outside [0, 0.5]")
    if radius == 0.5:
        return float(gqs.weights.sum())
    d = fubini_study_distances(gqs.chis, center)
    return float(gqs.weights[d <= radius * np.pi].sum())


def cap_profile(gqs: GeometricState, center, radii) -> np.ndarray:
    """``cap_measure`` over a grid of radii, sharing one distance pass."""
    radii = np.asarray(radii, dtype=float)
    if radii.size and (radii.min() < 0.0 or radii.max() > 0.5):
        raise ValueError("cap radii must lie in [0, 0.5]")
    d = fubini_study_distances(gqs.chis, center)
    out = np.array([gqs.weights[d <= r * np.pi].sum() for r in radii])
    out[radii == 0.5] = gqs.weights.sum()
    return out


def assign_clusters(gqs: GeometricState, pointers: PointerBasis, mass_floor: float = 0.0) -> ClusterAssignment:
    if not 0.0 <= mass_floor < 1.0:
        raise ValueError("mass_floor must lie in [0, 1)")
    ov = np.abs(gqs.chis @ pointers.vectors.conj())  # (points, pointers)
    dist = np.arccos(np.clip(ov, 0.0, 1.0))
    # argmin keeps the first (lowest-index) pointer on exact ties
    nearest = np.argmin(dist, axis=1)
    keep = gqs.weights > mass_floor
    omega = np.where(keep, nearest, -1)
    radii = np.zeros(pointers.dim)
    masses = np.zeros(pointers.dim)
    for n in range(pointers.dim):
        sel = omega == n
        if sel.any():
            radii[n] = dist[sel, n].max()
            masses[n] = gqs.weights[sel].sum()
    return ClusterAssignment(omega, radii, masses)


def reconstruct_density(gqs: GeometricState) -> DensityMatrix:
    rho = np.einsum("k,ki,kj->ij", gqs.weights, gqs.chis, gqs.chis.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, SubsystemLayout((gqs.system_dim,), (SYSTEM,)))
