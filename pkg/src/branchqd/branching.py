"""Branch decomposition and nearest generalized-GHZ (branching) states.

Writing the global state in a pointer basis of the system,
``psi = sum_n sqrt(y_n) |n> |phi_n>``, each branch ``phi_n`` lives on the
environment and is stored as a ``(D_F, D_Fbar)`` amplitude matrix. A branching
candidate replaces every branch by a product ``f_n (x) fbar_n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PointerBasis, fubini_study_distance
from .infotheory import DiscordConfig, MeasurementBasis, dephase, discord, relative_entropy
from .qstate import (
    PureState,
    SubsystemLayout,
    entropy_from_eigenvalues,
    grouped,
    partial_trace,
    subsystem_entropy,
    ungroup,
)

BRANCH_FLOOR = 1e-14
DEGENERACY_GAP = 1e-12
GOOD_DECOHERENCE = 1e-3


@dataclass(frozen=True)
class BranchDecomposition:
    """``y[k]`` and normalized ``blocks[k]`` for pointer index ``index[k]``.

    ``blocks[k][a, b]`` is the branch amplitude on fragment label ``a`` and
    remainder label ``b``.
    """

    y: np.ndarray
    blocks: np.ndarray
    index: np.ndarray
    pointer_basis: PointerBasis
    layout: SubsystemLayout

    @property
    def branch_states(self) -> np.ndarray:
        """Branches as flat vectors on F (x) F-bar, fragment index fastest."""
        return self.blocks.transpose(0, 2, 1).reshape(len(self.y), -1)

    @property
    def m(self) -> int:
        return len(self.layout.fragment)


@dataclass(frozen=True)
class BranchingCandidate:
    """``sum_k sqrt(y[k]) |p_k> f[:, k] fbar[:, k]`` on ``layout``.

    ``gram_f``/``gram_fbar`` are overlap matrices of the leading Schmidt
    vectors of the branches (before any orthogonalization), kept as
    diagnostics. ``overlaps`` holds ``|<f_k fbar_k|phi_k>|``.
    """

    y: np.ndarray
    f: np.ndarray
    fbar: np.ndarray
    pointers: np.ndarray
    layout: SubsystemLayout
    gram_f: np.ndarray
    gram_fbar: np.ndarray
    overlaps: np.ndarray
    degenerate: tuple = ()
    orthogonal: bool = True
    iterations: int = 0

    def state(self) -> PureState:
        return ghz_state(self)


@dataclass(frozen=True)
class TheoremRecord:
    eps_D: float
    eps_I: float
    fidelity: float
    eta: float
    branch_entropies: tuple
    branch_entropy_sum: float
    y: tuple
    mutual_information: float
    system_entropy: float
    relative_entropy: float
    entropy_gap: float
    offdiag_mass: float
    good_decoherence: bool
    fs_distance: float
    max_gram_offdiag: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.eta < -1e-9:
            raise ValueError(f"eta={self.eta!r} is negative")

    @property
    def eps_sum(self) -> float:
        return self.eps_D + self.eps_I

    def bound_checks(self, slack: float = 1e-6) -> dict:
        """The three inequalities expected to hold under good decoherence."""
        e = self.eps_I + self.eps_D
        return {
            "branch_entropy": self.branch_entropy_sum <= e + slack,
            "relative_entropy": self.relative_entropy <= 2 * e + slack,
            "entropy_gap": -self.eps_I - slack <= self.entropy_gap <= slack,
        }


def _pointer_matrix(state: PureState, pointers) -> np.ndarray:
    d_s = state.layout.dims[state.layout.system[0]]
    if pointers is None:
        return np.eye(d_s, dtype=complex)
    p = pointers.vectors if isinstance(pointers, PointerBasis) else np.asarray(pointers, dtype=complex)
    if p.shape != (d_s, d_s):
        raise ValueError(f"pointer basis must be {d_s}x{d_s}")
    return PointerBasis(p).vectors


def branch_decompose(state: PureState, pointers=None) -> BranchDecomposition:
    lay = state.layout
    p = _pointer_matrix(state, pointers)
    t = grouped(state, lay.system, lay.fragment)  # (D_S, D_F, D_Fbar)
    b = np.einsum("in,iab->nab", p.conj(), t)
    y = np.einsum("nab,nab->n", b, b.conj()).real
    keep = np.flatnonzero(y >= BRANCH_FLOOR)
    blocks = b[keep] / np.sqrt(y[keep])[:, None, None]
    yk = y[keep] / y[keep].sum()
    return BranchDecomposition(yk, blocks, keep, PointerBasis(p), lay)


def reassemble(decomp: BranchDecomposition) -> PureState:
    p = decomp.pointer_basis.vectors[:, decomp.index]
    t = np.einsum("in,n,nab->iab", p, np.sqrt(decomp.y), decomp.blocks)
    lay = decomp.layout
    return ungroup(t, lay, lay.system, lay.fragment, renormalize=True)


def _leading_pairs(blocks: np.ndarray):
    """Leading Schmidt pair of every block plus its Schmidt spectrum."""
    fs, fbs, spectra, degen = [], [], [], []
    for k, phi in enumerate(blocks):
        u, s, vh = np.linalg.svd(phi, full_matrices=False)
        fs.append(u[:, 0])
        fbs.append(vh[0])
        spectra.append(s**2)
        if s.size > 1 and s[0] - s[1] < DEGENERACY_GAP:
            degen.append(k)
        # fix the gauge so the first nonzero entry of f is real positive
        j = int(np.flatnonzero(np.abs(fs[-1]) > 1e-12)[0])
        ph = fs[-1][j] / abs(fs[-1][j])
        fs[-1] = fs[-1] / ph
        fbs[-1] = fbs[-1] * ph
    return np.array(fs).T, np.array(fbs).T, spectra, tuple(degen)


def _polar(a: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh


def _amplitudes(blocks, f, fbar) -> np.ndarray:
    """``a_k = <f_k (x) fbar_k | phi_k>``."""
    return np.einsum("ak,kab,bk->k", f.conj(), blocks, fbar.conj())


def closest_branching_candidate(
    decomp: BranchDecomposition,
    cut: int | None = None,
    orthogonal: bool = True,
    max_iter: int = 500,
    tol: float = 1e-15,
) -> BranchingCandidate:
    """Nearest product-branch (generalized GHZ) state for the decomposition.

    Starts from the leading Schmidt pair of every branch. With
    ``orthogonal=True`` the fragment and remainder vectors are further
    constrained to be orthonormal across branches (on any side whose dimension
    allows it) and refined by alternating polar updates, each of which cannot
    lower the fidelity. Branch weights are reset to ``y_k |a_k|^2``
    (normalized), which maximizes the overlap for fixed vectors.
    """
    if cut is not None and cut != decomp.m:
        decomp = branch_decompose(reassemble(decomp).with_fragment(cut), decomp.pointer_basis)
    blocks = decomp.blocks
    y = decomp.y
    n = len(y)
    f0, fb0, _, degen = _leading_pairs(blocks)
    gram_f = f0.conj().T @ f0
    gram_fb = fb0.conj().T @ fb0
    f, fb = f0.copy(), fb0.copy()
    it = 0
    if orthogonal and n > 1:
        ortho_f = f.shape[0] >= n
        ortho_fb = fb.shape[0] >= n
        obj = -np.inf
        for it in range(1, max_iter + 1):
            if ortho_f:
                w = np.einsum("kab,bk->ak", blocks, fb.conj())
                c = np.einsum("ak,ak->k", f.conj(), w)
                f = _polar(w * (y * c.conj()))
            if ortho_fb:
                w = np.einsum("kab,ak->bk", blocks, f.conj())
                c = np.einsum("bk,bk->k", fb.conj(), w)
                fb = _polar(w * (y * c.conj()))
            new = float(np.sum(y * np.abs(_amplitudes(blocks, f, fb)) ** 2))
            if new - obj <= tol:
                obj = max(obj, new)
                break
            obj = new
    a = _amplitudes(blocks, f, fb)
    mag = np.abs(a)
    # absorb the amplitude phase into f so every overlap is real and positive
    ph = np.where(mag > 0, a / np.where(mag > 0, mag, 1.0), 1.0)
    f = f * ph[None, :]
    w = y * mag**2
    total = w.sum()
    y_new = w / total if total > 0 else y.copy()
    return BranchingCandidate(
        y=y_new,
        f=f,
        fbar=fb,
        pointers=decomp.pointer_basis.vectors[:, decomp.index],
        layout=decomp.layout,
        gram_f=gram_f,
        gram_fbar=gram_fb,
        overlaps=mag,
        degenerate=degen,
        orthogonal=orthogonal,
        iterations=it,
    )


def ghz_state(candidate: BranchingCandidate) -> PureState:
    c = candidate
    t = np.einsum("in,n,an,bn->iab", c.pointers, np.sqrt(c.y), c.f, c.fbar)
    lay = c.layout
    return ungroup(t, lay, lay.system, lay.fragment, renormalize=True)


def ghz_fidelity(state: PureState, candidate: BranchingCandidate) -> float:
    """``|<psi|GHZ>|^2`` from the assembled amplitude vectors."""
    if state.layout.dims != candidate.layout.dims:
        raise ValueError(f"dimension mismatch: {state.layout.dims} vs {candidate.layout.dims}")
    g = ghz_state(candidate)
    return float(min(1.0, abs(np.vdot(state.amplitudes, g.amplitudes)) ** 2))


def fubini_study_to_branching(state: PureState, candidate: BranchingCandidate) -> float:
    if state.layout.dims != candidate.layout.dims:
        raise ValueError(f"dimension mismatch: {state.layout.dims} vs {candidate.layout.dims}")
    return fubini_study_distance(state.amplitudes, ghz_state(candidate).amplitudes)


def branch_entropies(decomp: BranchDecomposition) -> np.ndarray:
    """Entanglement entropy (bits) of every branch across the fragment cut."""
    out = []
    for phi in decomp.blocks:
        s = np.linalg.svd(phi, compute_uv=False)
        out.append(entropy_from_eigenvalues(s**2))
    return np.array(out)


def offdiag_mass(state: PureState, pointers=None) -> float:
    """Sum of |off-diagonal| entries of rho_S in the pointer basis."""
    p = _pointer_matrix(state, pointers)
    rho = partial_trace(state, state.layout.system).matrix
    r = p.conj().T @ rho @ p
    return float(np.sum(np.abs(r - np.diag(np.diag(r)))))


def theorem_check(
    state: PureState,
    m: int,
    config: DiscordConfig | None = None,
    pointers=None,
    orthogonal: bool = True,
) -> TheoremRecord:
    n_env = len(state.layout.environment)
    if not 0 < m < n_env:
        raise ValueError(f"need 0 < m < N, got m={m}, N={n_env}")
    state = state.with_fragment(m)
    lay = state.layout
    rep = discord(state, config=config)
    h_s = rep.system_entropy
    eps_i = abs(rep.mutual_information - h_s)
    decomp = branch_decompose(state, pointers)
    cand = closest_branching_candidate(decomp, orthogonal=orthogonal)
    fid = ghz_fidelity(state, cand)
    h_n = branch_entropies(decomp)

    # D(rho_SF || rho_SF dephased on S in the pointer basis)
    rho_sf = partial_trace(state, lay.system + lay.fragment)
    s_idx = tuple(i for i, k in enumerate(lay.system + lay.fragment) if k in lay.system)
    rho_t = dephase(rho_sf, MeasurementBasis(decomp.pointer_basis.vectors), s_idx)
    d_rel = relative_entropy(rho_sf, rho_t)

    gap = subsystem_entropy(state, lay.fragment) - subsystem_entropy(state, lay.remainder)
    off = offdiag_mass(state, pointers)
    gmax = 0.0
    if len(decomp.y) > 1:
        for g in (cand.gram_f, cand.gram_fbar):
            gmax = max(gmax, float(np.max(np.abs(g - np.diag(np.diag(g))))))
    return TheoremRecord(
        eps_D=float(max(rep.discord_upper, 0.0)),
        eps_I=float(eps_i),
        fidelity=fid,
        eta=1.0 - fid,
        branch_entropies=tuple(float(h) for h in h_n),
        branch_entropy_sum=float(np.dot(decomp.y, h_n)),
        y=tuple(float(v) for v in decomp.y),
        mutual_information=float(rep.mutual_information),
        system_entropy=float(h_s),
        relative_entropy=float(d_rel),
        entropy_gap=float(gap),
        offdiag_mass=off,
        good_decoherence=off < GOOD_DECOHERENCE,
        fs_distance=float(np.arccos(np.sqrt(min(1.0, fid)))),
        max_gram_offdiag=gmax,
        extra={"optimizer": rep.optimizer, "discord_raw": float(rep.discord_upper), "iterations": cand.iterations},
    )
