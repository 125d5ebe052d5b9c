"""Structural certificates for vanishing discord.

Three equivalent conditions are checked on a global pure state written in
fragment/remainder bases, ``psi = sum_ab sqrt(X_ab) |chi_ab>|f_a>|fbar_b>``:

* cross condition: ``X_ab X_a'b = 0`` for every remainder label ``b`` and
  ``a != a'``;
* a deterministic map ``g(b)`` with ``X_ab = delta(a, g(b)) X_g(b)b``;
* the Frobenius identity ``||rho_Fbar||^2 = 1/2 (||rho~||^2 + ||rho||^2 - D_HS(rho~, rho))``
  where ``rho = rho_FFbar`` and ``rho~`` is its dephasing in the fragment basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometricState, extract_geometric_state
from .infotheory import MeasurementBasis, dephase, hilbert_schmidt_distance
from .qstate import (
    FRAGMENT,
    REMAINDER,
    SYSTEM,
    PureState,
    SubsystemLayout,
    grouped,
    partial_trace,
    ungroup,
)

TOL_EXACT = 1e-10
TOL_PERTURBED = 1e-6


class AmbiguousLabelError(ValueError):
    """A remainder label carries weight on more than one fragment label."""


@dataclass(frozen=True)
class NullityCertificate:
    max_cross_product: float
    g_map: dict
    frobenius_residual: float
    x_condition: bool
    g_exists: bool
    frobenius_identity: bool
    intermediate_residual: float = 0.0
    tol: float = TOL_EXACT
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.x_condition and self.g_exists and self.frobenius_identity

    def to_dict(self) -> dict:
        return {
            "max_cross_product": self.max_cross_product,
            "g_map": {str(k): int(v) for k, v in sorted(self.g_map.items())},
            "frobenius_residual": self.frobenius_residual,
            "intermediate_residual": self.intermediate_residual,
            "tol": self.tol,
            "passed": {
                "x_condition": self.x_condition,
                "g_map": self.g_exists,
                "frobenius_identity": self.frobenius_identity,
                "all": self.passed,
            },
            "notes": list(self.notes),
        }


def _top_two(x: np.ndarray):
    """Largest and second-largest entry of every column of ``x``."""
    if x.shape[0] == 1:
        return x[0], np.zeros(x.shape[1])
    part = -np.sort(-x, axis=0)
    return part[0], part[1]


def check_x_condition(gqs: GeometricState, tol: float = TOL_EXACT):
    """``(passed, max_cross_product)``; the max over a column is top1 * top2."""
    x = gqs.weight_table()
    top, second = _top_two(x)
    cross = float(np.max(top * second, initial=0.0))
    return cross <= tol, cross


def extract_g(gqs: GeometricState, tol: float = TOL_EXACT) -> dict:
    """Map each occupied remainder label to its unique fragment label.

    A column is occupied when its total mass exceeds ``tol``. A column whose
    two heaviest entries have product above ``tol`` has no unique label; the
    threshold matches :func:`check_x_condition`, so the two checks agree.
    """
    x = gqs.weight_table()
    top, second = _top_two(x)
    bad = np.flatnonzero(top * second > tol)
    if bad.size:
        raise AmbiguousLabelError(f"proposition 2 violated: remainder label {int(bad[0])} is ambiguous")
    mass = x.sum(axis=0)
    occupied = np.flatnonzero(mass > tol)
    arg = np.argmax(x, axis=0)
    return {int(b): int(arg[b]) for b in occupied}


def rebuild_branching_state(gqs: GeometricState, g: dict, layout: SubsystemLayout, fragment_basis=None, remainder_basis=None) -> PureState:
    """``sum_b sqrt(X_g(b)b) |chi_g(b)b>|f_g(b)>|fbar_b>`` on ``layout``."""
    d_f, d_fb = gqs.shape
    d_s = gqs.system_dim
    t = np.zeros((d_s, d_f, d_fb), dtype=complex)
    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(gqs.alpha, gqs.beta))}
    for b, a in g.items():
        k = lookup.get((a, b))
        if k is not None:
            t[:, a, b] = np.sqrt(gqs.weights[k]) * gqs.chis[k]
    if fragment_basis is not None:
        t = np.einsum("ab,ibc->iac", np.asarray(fragment_basis), t)
    if remainder_basis is not None:
        t = np.einsum("cd,iad->iac", np.asarray(remainder_basis), t)
    return ungroup(t, layout, layout.system, layout.fragment, renormalize=True)


def default_basis(rho: np.ndarray) -> np.ndarray:
    """Eigenbasis of ``rho``; the computational basis when ``rho`` is already diagonal."""
    off = rho - np.diag(np.diag(rho))
    if np.max(np.abs(off), initial=0.0) < 1e-12:
        return np.eye(rho.shape[0], dtype=complex)
    _, v = np.linalg.eigh(rho)
    return v[:, ::-1]


def default_bases(state: PureState):
    """Certificate bases: eigenbases of the fragment and remainder marginals."""
    lay = state.layout
    t = grouped(state, lay.fragment, lay.system)  # (D_F, D_S, D_Fbar)
    m = t.reshape(t.shape[0], -1)
    bf = default_basis(m @ m.conj().T)
    u = grouped(state, lay.remainder, lay.system)
    m = u.reshape(u.shape[0], -1)
    bfb = default_basis(m @ m.conj().T)
    return bf, bfb


def frobenius_terms(state: PureState, fragment_basis=None) -> dict:
    """All terms of the Frobenius identity for ``rho_FFbar`` dephased in the fragment basis."""
    lay = state.layout
    ff = lay.fragment + lay.remainder
    rho = partial_trace(state, ff)
    sub = rho.layout
    frag_in_sub = tuple(i for i, lab in enumerate(sub.labels) if lab == FRAGMENT)
    d_f = lay.dim_of(lay.fragment)
    basis = MeasurementBasis.computational(d_f) if fragment_basis is None else MeasurementBasis(fragment_basis)
    rho_t = dephase(rho, basis, frag_in_sub)
    if lay.remainder:
        rho_fb = partial_trace(state, lay.remainder).matrix
    else:
        rho_fb = np.ones((1, 1))
    n_fb = float(np.vdot(rho_fb, rho_fb).real)
    n_t = float(np.vdot(rho_t.matrix, rho_t.matrix).real)
    n_r = float(np.vdot(rho.matrix, rho.matrix).real)
    d_hs = hilbert_schmidt_distance(rho_t, rho)
    # intermediate form: sum over fragment label X of the squared (X, X) block
    t = grouped(state, lay.fragment, lay.system)  # (D_F, D_S, D_Fbar)
    if fragment_basis is not None:
        t = np.einsum("ax,aor->xor", np.asarray(fragment_basis).conj(), t)
    blocks = np.einsum("xob,xoc->xbc", t, t.conj())
    intermediate = float(np.sum(np.abs(blocks) ** 2))
    return {
        "rho_fbar_norm2": n_fb,
        "dephased_norm2": n_t,
        "rho_norm2": n_r,
        "d_hs": d_hs,
        "rhs": 0.5 * (n_t + n_r - d_hs),
        "intermediate": intermediate,
    }


def check_frobenius_identity(state: PureState, fragment_basis=None, tol: float = TOL_EXACT):
    """``(passed, residual)`` of the Frobenius identity; residual = |lhs - rhs|."""
    terms = frobenius_terms(state, fragment_basis)
    residual = abs(terms["rho_fbar_norm2"] - terms["rhs"])
    return residual <= tol, residual


def certify(state: PureState, fragment_basis=None, remainder_basis=None, tol: float = TOL_EXACT) -> NullityCertificate:
    """Run all three checks in the given bases (default: marginal eigenbases)."""
    if fragment_basis is None and remainder_basis is None:
        fragment_basis, remainder_basis = default_bases(state)
    gqs = extract_geometric_state(state, fragment_basis, remainder_basis)
    x_ok, cross = check_x_condition(gqs, tol)
    notes = []
    try:
        g = extract_g(gqs, tol)
        g_ok = True
    except AmbiguousLabelError as exc:
        g, g_ok = {}, False
        notes.append(str(exc))
    terms = frobenius_terms(state, fragment_basis)
    residual = abs(terms["rho_fbar_norm2"] - terms["rhs"])
    inter = abs(terms["rho_fbar_norm2"] - terms["intermediate"])
    return NullityCertificate(
        max_cross_product=cross,
        g_map=g,
        frobenius_residual=residual,
        x_condition=x_ok,
        g_exists=g_ok,
        frobenius_identity=residual <= tol,
        intermediate_residual=inter,
        tol=tol,
        notes=notes,
    )


def _qubits_for(d: int) -> int:
    return max(1, int(np.ceil(np.log2(d)))) if d > 1 else 1


def build_zero_discord_state(p, sigmas, seed=0, fbar_dim: int | None = None) -> PureState:
    """Purify ``sum_j p_j sigma_j (x) |j><j|`` into system (x) fragment (x) remainder.

    The fragment records ``j`` in its computational basis (qubits). Each
    ``sigma_j`` is eigendecomposed and purified into its own block of
    remainder labels, so the state has the branching form exactly. ``seed``
    randomizes which remainder labels each block occupies.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or abs(p.sum() - 1.0) > 1e-12 or p.min() < 0.0:
        raise ValueError("p must be a probability vector")
    sig = [np.asarray(s, dtype=complex) for s in sigmas]
    if len(sig) != p.size:
        raise ValueError("need one sigma per probability")
    d_s = sig[0].shape[0]
    eig = []
    for s in sig:
        if s.shape != (d_s, d_s) or np.max(np.abs(s - s.conj().T)) > 1e-12 or abs(np.trace(s).real - 1) > 1e-12:
            raise ValueError("sigmas must be unit-trace Hermitian matrices of equal size")
        lam, v = np.linalg.eigh(s)
        if lam.min() < -1e-10:
            raise ValueError("sigma is not positive semidefinite")
        keep = lam > 1e-14
        eig.append((lam[keep], v[:, keep]))
    needed = sum(lam.size for (lam, _), pj in zip(eig, p) if pj > 0)
    n_f = _qubits_for(p.size)
    if fbar_dim is None:
        fbar_dim = 2 ** _qubits_for(needed)
    if fbar_dim < needed:
        raise ValueError(f"remainder dimension {fbar_dim} too small: purification needs {needed}")
    n_fb = _qubits_for(fbar_dim)
    if 2**n_fb != fbar_dim:
        raise ValueError("remainder dimension must be a power of two")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(fbar_dim)
    t = np.zeros((d_s, 2**n_f, fbar_dim), dtype=complex)
    slot = 0
    for j, ((lam, v), pj) in enumerate(zip(eig, p)):
        if pj <= 0:
            continue
        for k in range(lam.size):
            t[:, j, labels[slot]] = np.sqrt(pj * lam[k]) * v[:, k]
            slot += 1
    layout = SubsystemLayout((d_s,) + (2,) * (n_f + n_fb), (SYSTEM,) + (FRAGMENT,) * n_f + (REMAINDER,) * n_fb)
    return ungroup(t, layout, layout.system, layout.fragment, renormalize=True)


def perturb_forbidden_slot(state: PureState, eps: float, fragment_basis=None, remainder_basis=None, direction=None) -> PureState:
    """Add amplitude ``eps`` to a forbidden ``(a', b)`` cell and renormalize.

    ``b`` is the heaviest remainder label and ``a'`` the next fragment label
    after ``g(b)`` (cyclically); the added system vector is ``direction``
    (default ``|0>``).
    """
    gqs = extract_geometric_state(state, fragment_basis, remainder_basis)
    x = gqs.weight_table()
    col = x.sum(axis=0)
    b = int(np.argmax(col))
    a = int(np.argmax(x[:, b]))
    a2 = (a + 1) % x.shape[0]
    lay = state.layout
    d_s = lay.dims[lay.system[0]]
    vec = np.zeros(d_s, dtype=complex)
    vec[0] = 1.0
    if direction is not None:
        vec = np.asarray(direction, dtype=complex)
        vec = vec / np.linalg.norm(vec)
    t = np.array(grouped(state, lay.system, lay.fragment))
    bf = np.eye(t.shape[1]) if fragment_basis is None else np.asarray(fragment_basis)
    bfb = np.eye(t.shape[2]) if remainder_basis is None else np.asarray(remainder_basis)
    t += eps * np.einsum("i,a,c->iac", vec, bf[:, a2], bfb[:, b])
    return ungroup(t, lay, lay.system, lay.fragment, renormalize=True)
