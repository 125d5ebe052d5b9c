"""Entropic diagnostics: mutual information, Holevo quantities, discord bounds.

Discord ``D(S:F)`` with the fragment measured is bounded from above by
``I(S:F) - max chi`` where the max runs over a finite family of projective
measurements on the fragment. Every reported discord is such an upper bound.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .qstate import (
    DensityMatrix,
    PureState,
    _check_factors,
    as_tensor,
    batch_entropy,
    grouped,
    subsystem_entropy,
    von_neumann_entropy,
)

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-14
GRID = "exhaustive-grid"
POINTER = "pointer-induced"


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal rank-1 outcomes (columns of ``vectors``) on a subsystem.

    With fewer columns than the subsystem dimension, the orthogonal
    complement counts as one extra coarse-grained outcome, so the projectors
    always resolve the identity.
    """

    vectors: np.ndarray
    angles: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[1] > v.shape[0]:
            raise ValueError("basis vectors must be a (dim, k<=dim) matrix")
        # the identity is common and costly to check by a dense product
        is_eye = v.shape[0] == v.shape[1] and np.array_equal(v, np.eye(v.shape[0]))
        if not is_eye and np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))) > 1e-10:
            raise ValueError("measurement vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def has_complement(self) -> bool:
        return self.vectors.shape[1] < self.vectors.shape[0]

    @property
    def projectors(self) -> np.ndarray:
        v = self.vectors
        p = np.einsum("ak,bk->kab", v, v.conj())
        if self.has_complement:
            p = np.concatenate([p, (np.eye(self.dim) - p.sum(axis=0))[None]], axis=0)
        return p

    @classmethod
    def computational(cls, dim: int) -> "MeasurementBasis":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def bloch(cls, theta: float, phi: float) -> "MeasurementBasis":
        return cls(_bloch_pair(np.array([theta]), np.array([phi]))[0], angles=(theta, phi))

    @classmethod
    def product(cls, *bases: "MeasurementBasis") -> "MeasurementBasis":
        """Product basis; ``bases[0]`` acts on the fastest-varying factor."""
        v = np.ones((1, 1), dtype=complex)
        for b in bases:
            v = np.kron(b.vectors, v)
        angles = tuple(a for b in bases for a in (b.angles or ()))
        return cls(v, angles=angles or None)


@dataclass(frozen=True)
class DiscordConfig:
    """Search family for the Holevo maximization.

    ``mode`` is ``"auto"`` (grid for fragments up to ``grid_max_qubits``
    qubits, pointer-induced beyond), ``"exhaustive-grid"`` or
    ``"pointer-induced"``. Grid sizes count intervals, so doubling them
    yields a node superset.
    """

    mode: str = "auto"
    n_theta: int = 64
    n_phi: int = 128
    refine_rounds: int = 3
    product_n_theta: int = 12
    product_n_phi: int = 24
    grid_max_qubits: int = 2


@dataclass(frozen=True)
class DiscordReport:
    mutual_information: float
    holevo_best: float
    discord_upper: float
    best_basis: MeasurementBasis
    optimizer: str
    holevo_pointer: float | None = None
    holevo_grid: float | None = None
    system_entropy: float = field(default=0.0)


def _bloch_pair(theta, phi) -> np.ndarray:
    """(K, 2, 2) stack of qubit bases; column 0 points along (theta, phi)."""
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    e = np.exp(1j * phi)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 1, 0] = e * s
    out[..., 0, 1] = -np.conj(e) * s
    out[..., 1, 1] = c
    return out


def _check_disjoint(a, b):
    if set(a) & set(b):
        raise ValueError(f"subsystems overlap: {sorted(set(a) & set(b))}")


def mutual_information(state: PureState, part_a, part_b) -> float:
    """``H_A + H_B - H_AB`` in bits."""
    a = _check_factors(state.layout, part_a)
    b = _check_factors(state.layout, part_b)
    _check_disjoint(a, b)
    h_a = subsystem_entropy(state, a)
    h_b = subsystem_entropy(state, b)
    h_ab = subsystem_entropy(state, a + b)
    return h_a + h_b - h_ab


def _chi_from_blocks(sigmas: np.ndarray, h_total: float) -> np.ndarray:
    """Holevo quantity from unnormalized conditional states ``sigmas[..., x, :, :]``."""
    p = np.trace(sigmas, axis1=-2, axis2=-1).real
    h = batch_entropy(sigmas)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > PROB_FLOOR, p * np.log2(np.where(p > PROB_FLOOR, p, 1.0)), 0.0)
    cond = np.where(p > PROB_FLOOR, h + plogp, 0.0)
    return h_total - cond.sum(axis=-1)


def _outcome_blocks(t: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Conditioned amplitudes ``<x| psi`` for each column x, shape (k, D_o, D_rest)."""
    if vectors.shape[0] == vectors.shape[1] and np.array_equal(vectors, np.eye(vectors.shape[0])):
        return t
    return np.einsum("ax,aor->xor", vectors.conj(), t)


def _holevo_tensor(t: np.ndarray, basis: MeasurementBasis, h_other: float) -> float:
    blocks = _outcome_blocks(t, basis.vectors)
    sig = blocks @ blocks.conj().transpose(0, 2, 1)
    if basis.has_complement:
        resid = t - np.einsum("ax,xor->aor", basis.vectors, blocks)
        flat = resid.transpose(1, 0, 2).reshape(t.shape[1], -1)
        sig = np.concatenate([sig, (flat @ flat.conj().T)[None]], axis=0)
    return float(_chi_from_blocks(sig, h_other))


def holevo(state: PureState, measured, other, basis: MeasurementBasis) -> float:
    """Holevo quantity about ``other`` from measuring ``measured`` in ``basis``.

    Outcomes with probability below 1e-14 contribute nothing.
    """
    measured = _check_factors(state.layout, measured)
    other = _check_factors(state.layout, other)
    _check_disjoint(measured, other)
    t = grouped(state, measured, other)
    if basis.dim != t.shape[0]:
        raise ValueError(f"basis dimension {basis.dim} != measured dimension {t.shape[0]}")
    h_other = subsystem_entropy(state, other)
    return _holevo_tensor(t, basis, h_other)


def _rho_other_meas(t: np.ndarray) -> np.ndarray:
    """``R[o, a, o', b] = <o a| rho |o' b>`` for the measured/other pair."""
    return np.einsum("aor,bpr->oapb", t, t.conj())


def _grid_chi(r: np.ndarray, bases: np.ndarray, h_other: float) -> np.ndarray:
    """Holevo values for a stack of full bases ``bases[k, a, x]``."""
    sig = np.einsum("kax,oapb,kbx->kxop", bases.conj(), r, bases, optimize=True)
    return _chi_from_blocks(sig, h_other)


def _qubit_grid_search(r, h_other, cfg: DiscordConfig):
    th = np.arange(cfg.n_theta + 1) * np.pi / cfg.n_theta
    ph = np.arange(cfg.n_phi) * 2 * np.pi / cfg.n_phi
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    chi = _grid_chi(r, _bloch_pair(tt, pp), h_other)
    k = int(np.argmax(chi))  # first maximum = lexicographically smallest (theta, phi)
    best = np.array([tt[k], pp[k]])
    best_chi = float(chi[k])
    grid_chi = best_chi
    step = np.array([np.pi / cfg.n_theta, 2 * np.pi / cfg.n_phi])
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=2)), dtype=float)
    for _ in range(cfg.refine_rounds):
        step = step / 2
        cand = best + offs * step
        c = _grid_chi(r, _bloch_pair(cand[:, 0], cand[:, 1]), h_other)
        j = int(np.argmax(c))
        if c[j] > best_chi:
            best, best_chi = cand[j], float(c[j])
    basis = MeasurementBasis.bloch(float(best[0]), float(best[1]))
    return best_chi, grid_chi, basis


def _product_bases(angles: np.ndarray) -> np.ndarray:
    """angles (K, 4) = (theta0, phi0, theta1, phi1) -> (K, 4, 4) product bases."""
    b0 = _bloch_pair(angles[:, 0], angles[:, 1])
    b1 = _bloch_pair(angles[:, 2], angles[:, 3])
    # little-endian: qubit 0 is the fast index
    return np.einsum("kac,kbd->kbadc", b0, b1).reshape(-1, 4, 4)


def _two_qubit_grid_search(r, h_other, cfg: DiscordConfig):
    th = np.arange(cfg.product_n_theta + 1) * np.pi / cfg.product_n_theta
    ph = np.arange(cfg.product_n_phi) * 2 * np.pi / cfg.product_n_phi
    single = np.array(list(itertools.product(th, ph)))
    n = len(single)
    best_chi = -np.inf
    best = None
    # chunk over qubit-1 nodes to bound memory
    for i0 in range(0, n, 32):
        blk = single[i0 : i0 + 32]
        ang = np.concatenate([np.repeat(single, len(blk), axis=0), np.tile(blk, (n, 1))], axis=1)
        order = np.lexsort((ang[:, 3], ang[:, 2], ang[:, 1], ang[:, 0]))
        ang = ang[order]
        chi = _grid_chi(r, _product_bases(ang), h_other)
        k = int(np.argmax(chi))
        if chi[k] > best_chi or (chi[k] == best_chi and tuple(ang[k]) < tuple(best)):
            best_chi, best = float(chi[k]), ang[k]
    grid_chi = best_chi
    step = np.array([np.pi / cfg.product_n_theta, 2 * np.pi / cfg.product_n_phi] * 2)
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=4)), dtype=float)
    for _ in range(cfg.refine_rounds):
        step = step / 2
        cand = best + offs * step
        c = _grid_chi(r, _product_bases(cand), h_other)
        j = int(np.argmax(c))
        if c[j] > best_chi:
            best, best_chi = cand[j], float(c[j])
    basis = MeasurementBasis.product(
        MeasurementBasis.bloch(float(best[0]), float(best[1])),
        MeasurementBasis.bloch(float(best[2]), float(best[3])),
    )
    return best_chi, grid_chi, basis


def _lowdin(vecs: np.ndarray) -> np.ndarray | None:
    """Closest orthonormal set to the columns of ``vecs`` (polar factor)."""
    u, s, vh = np.linalg.svd(vecs, full_matrices=False)
    if s.size == 0 or s[-1] < 1e-8:
        return None
    return u @ vh


def pointer_induced_bases(state: PureState, system=None, fragment=None, pointers=None) -> list[MeasurementBasis]:
    """Candidate fragment measurements derived from the branch structure.

    1. the range eigenbasis of the fragment marginal;
    2. the orthonormalized leading fragment vectors of each pointer branch,
       with the complement as a coarse outcome;
    3. the computational basis of the fragment.
    """
    lay = state.layout
    system = lay.system if system is None else tuple(system)
    fragment = lay.fragment if fragment is None else tuple(fragment)
    t = grouped(state, fragment, system)  # (D_F, D_S, D_rest)
    d_f, d_s = t.shape[0], t.shape[1]
    out = []
    flat = t.reshape(d_f, -1)
    u, s, _ = np.linalg.svd(flat, full_matrices=False)
    r = int(np.sum(s > 1e-12))
    out.append(MeasurementBasis(u[:, :r]))
    if pointers is None:
        pointers = np.eye(d_s)
    branch = np.einsum("on,aor->anr", np.asarray(pointers).conj(), t)
    lead = []
    for n in range(branch.shape[1]):
        blk = branch[:, n, :]
        if np.linalg.norm(blk) ** 2 < PROB_FLOOR:
            continue
        ub, _, _ = np.linalg.svd(blk, full_matrices=False)
        lead.append(ub[:, 0])
    if lead:
        q = _lowdin(np.array(lead).T)
        if q is not None:
            out.append(MeasurementBasis(q))
    out.append(MeasurementBasis.computational(d_f))
    return out


def discord(state: PureState, system=None, fragment=None, config: DiscordConfig | None = None) -> DiscordReport:
    """Upper bound on ``D(S:F)`` with the fragment measured."""
    cfg = config or DiscordConfig()
    lay = state.layout
    system = _check_factors(lay, lay.system if system is None else system)
    fragment = _check_factors(lay, lay.fragment if fragment is None else fragment)
    _check_disjoint(system, fragment)
    n_qubits = len(fragment)
    qubit_frag = all(lay.dims[k] == 2 for k in fragment)
    mode = cfg.mode
    if mode == "auto":
        mode = GRID if (qubit_frag and n_qubits <= cfg.grid_max_qubits) else POINTER
    if mode == GRID and (not qubit_frag or n_qubits > min(2, cfg.grid_max_qubits)):
        raise ValueError(
            f"exhaustive grid supports qubit fragments of at most {min(2, cfg.grid_max_qubits)} qubits, got {n_qubits}"
        )
    if mode not in (GRID, POINTER):
        raise ValueError(f"unknown discord mode {mode!r}")

    h_s = subsystem_entropy(state, system)
    mi = mutual_information(state, system, fragment)
    t = grouped(state, fragment, system)

    best_basis = None
    h_ptr = -np.inf
    for b in pointer_induced_bases(state, system, fragment):
        c = _holevo_tensor(t, b, h_s)
        if c > h_ptr:
            h_ptr, best_basis = c, b
    h_best = h_ptr
    h_grid = None
    if mode == GRID:
        r = _rho_other_meas(t)
        search = _qubit_grid_search if n_qubits == 1 else _two_qubit_grid_search
        h_grid, _, gbasis = search(r, h_s, cfg)
        if h_grid >= h_best:
            h_best, best_basis = h_grid, gbasis
    return DiscordReport(
        mutual_information=mi,
        holevo_best=float(h_best),
        discord_upper=float(mi - h_best),
        best_basis=best_basis,
        optimizer=mode,
        holevo_pointer=float(h_ptr),
        holevo_grid=None if h_grid is None else float(h_grid),
        system_entropy=h_s,
    )


def _group_perm(dims, a) -> np.ndarray:
    """Index permutation taking a matrix to (A slow, rest fast) ordering."""
    n = len(dims)
    rest = [k for k in range(n) if k not in a]
    idx = as_tensor(np.arange(int(np.prod(dims))), dims)
    return idx.transpose(list(reversed(a)) + list(reversed(rest))).reshape(-1)


def dephase(rho: DensityMatrix, basis: MeasurementBasis, subsystem=None) -> DensityMatrix:
    """``sum_x (P_x (x) I) rho (P_x (x) I)`` for the projectors of ``basis`` on ``subsystem``."""
    lay = rho.layout
    if subsystem is None:
        subsystem = tuple(range(lay.n_factors)) if lay.n_factors == 1 else lay.fragment
    a = _check_factors(lay, subsystem)
    d_a = lay.dim_of(a)
    if basis.dim != d_a:
        raise ValueError(f"basis dimension {basis.dim} does not match subsystem dimension {d_a}")
    perm = _group_perm(lay.dims, a)
    d = lay.total_dim
    g = rho.matrix[np.ix_(perm, perm)].reshape(d_a, d // d_a, d_a, d // d_a)
    out = np.zeros_like(g)
    for p in basis.projectors:
        out += np.einsum("xa,arbs,by->xrys", p, g, p)
    out = out.reshape(d, d)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(d)
    res = out[np.ix_(inv, inv)]
    return DensityMatrix(0.5 * (res + res.conj().T), lay)


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix, support_tol: float = 1e-10) -> float:
    """``D(rho || sigma)`` in bits; ``inf`` (with a logged warning) on support violation."""
    a = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    lam_s, v_s = np.linalg.eigh(b)
    diag = np.einsum("ak,ab,bk->k", v_s.conj(), a, v_s).real
    null = lam_s <= support_tol
    if diag[null].sum() > support_tol:
        log.warning("relative entropy: support of rho not contained in support of sigma (leak %.3g)", diag[null].sum())
        return math.inf
    cross = float(np.sum(diag[~null] * np.log2(lam_s[~null])))
    return -von_neumann_entropy(a) - cross


def hilbert_schmidt_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """``tr[(a-b)(a-b)^dagger]``, the squared Frobenius norm of the difference."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    diff = ma - mb
    return float(np.vdot(diff, diff).real)


def entropy_gap_check(state: PureState, m: int, eps_i: float, tol: float = 1e-9):
    """Return ``(ok, H_F - H_Fbar)`` with the fragment the first ``m`` environment factors."""
    s = state.with_fragment(m)
    h_f = subsystem_entropy(s, s.layout.fragment)
    h_fb = subsystem_entropy(s, s.layout.remainder) if s.layout.remainder else 0.0
    gap = h_f - h_fb
    return (-eps_i - tol <= gap <= tol), gap
