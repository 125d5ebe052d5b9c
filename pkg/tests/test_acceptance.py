"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (shown even when output capture is
on) and then asserts. Tolerances are pinned as module constants.
"""

import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from branchqd.experiments import ExperimentConfig, run_cluster, run_plateau, run_props, run_theorem
from branchqd.infotheory import MeasurementBasis, holevo, mutual_information
from branchqd.models import CMaybeSpec, analytic_cmaybe_state, build_cmaybe_state
from branchqd.qstate import (
    PureState,
    SubsystemLayout,
    apply_local,
    partial_trace,
    schmidt_decompose,
    ungroup,
    von_neumann_entropy,
)

from conftest import random_state, random_unitary

# pinned tolerances and grids
ORACLE_TOL = 1e-12
PLATEAU_BAND = (0.95, 1.05)
FULL_RATIO_TOL = 1e-8
CLUSTER_NS = [6, 8, 10, 12, 14]
CLUSTER_SEEDS = 20
CAP_RADIUS = 0.1
PLATEAU_RADIUS = 0.25  # hemisphere; radius is a fraction of pi
PLATEAU_TARGET, PLATEAU_TOL = 0.3, 0.02
EXACT_TOL = 1e-10
DISCORD_ZERO = 1e-6
PERTURB_EPS = 1e-3
PERTURB_BAND = (1e-7, 1e-5)
REBUILD_TOL = 1e-10
THEOREM_GAMMAS = [0.99, 0.95, 0.9, 0.8, 0.7]
HAAR_SEEDS = 20
SPEARMAN_MIN = 0.9
ETA_IDEAL = 1e-10
BOUND_SLACK = 1e-6
KERNEL_CASES = 1000
KERNEL_TOL = 1e-10


@pytest.fixture
def report(capsys):
    def emit(n, ok, what, detail):
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'}: {what} ({detail})")

    return emit


@pytest.fixture(scope="module")
def theorem_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("theorem")
    cfg = ExperimentConfig(
        "theorem",
        model={"p": 0.3, "N": 10, "m": 5},
        sweep={"gamma": [1.0] + THEOREM_GAMMAS, "haar_seeds": HAAR_SEEDS},
        seed=0,
        output=str(out),
    )
    t0 = time.perf_counter()
    rows, _ = run_theorem(cfg)
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def props_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("props")
    cfg = ExperimentConfig("props", sweep={"count": 100, "eps": PERTURB_EPS}, seed=0, output=str(out))
    t0 = time.perf_counter()
    rep = run_props(cfg)
    return rep, time.perf_counter() - t0


def test_criterion_1_gate_matches_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for p in (0.0, 0.3, 0.7):
        for g in (0.2, 0.5, 0.9, 1.0):
            for n in (4, 8, 12):
                spec = CMaybeSpec(p=p, N=n, gamma=g)
                a = build_cmaybe_state(spec).amplitudes
                b = analytic_cmaybe_state(spec).amplitudes
                worst = max(worst, abs(1 - abs(np.vdot(a, b))))
    dt = time.perf_counter() - t0
    ok = worst <= ORACLE_TOL and dt < 10
    report(1, ok, "gate-built vs closed form", f"max |1-overlap| = {worst:.2e}, tol {ORACLE_TOL:g}, {dt:.1f}s")
    assert ok


def test_criterion_2_plateau(report, tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("plateau", model={"p": 0.3, "N": 12, "gamma": 0.9}, output=str(tmp_path))
    rows = run_plateau(cfg)
    dt = time.perf_counter() - t0
    mid = [r["I_over_H_S"] for r in rows if 3 <= r["m"] <= 9]
    full = next(r for r in rows if r["m"] == 12)
    full_err = abs(full["I_SF"] - 2 * full["H_S"])
    ok = len(mid) == 7 and all(PLATEAU_BAND[0] <= x <= PLATEAU_BAND[1] for x in mid)
    ok = ok and full_err <= FULL_RATIO_TOL and dt < 30
    report(
        2,
        ok,
        "plateau p=0.3 gamma=0.9 N=12",
        f"ratio range [{min(mid):.4f}, {max(mid):.4f}] for m=3..9, |I-2H_S| at m=N = {full_err:.1e}, {dt:.1f}s",
    )
    assert ok


def test_criterion_3_clustering(report, tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(
        "cluster",
        model={"p": 0.3},
        sweep={"N": CLUSTER_NS, "seeds": CLUSTER_SEEDS, "radius": [CAP_RADIUS, PLATEAU_RADIUS]},
        seed=0,
        output=str(tmp_path),
    )
    summary = run_cluster(cfg)
    dt = time.perf_counter() - t0
    cap = [next(s["cap_mass_1"] for s in summary if s["N"] == n and s["radius"] == CAP_RADIUS) for n in CLUSTER_NS]
    plateau = next(s["cap_mass_1"] for s in summary if s["N"] == 14 and s["radius"] == PLATEAU_RADIUS)
    rising = all(b > a for a, b in zip(cap, cap[1:]))
    ok = rising and abs(plateau - PLATEAU_TARGET) <= PLATEAU_TOL and dt < 600
    report(
        3,
        ok,
        f"Haar clustering, {CLUSTER_SEEDS} seeds per N",
        f"cap_mass_1(r={CAP_RADIUS}) = {', '.join(f'{c:.3f}' for c in cap)}; "
        f"plateau(r={PLATEAU_RADIUS}, N=14) = {plateau:.4f}, target {PLATEAU_TARGET}+-{PLATEAU_TOL}; {dt:.0f}s",
    )
    assert ok


def test_criterion_4_zero_discord_equivalence(report, props_report):
    rep, dt = props_report
    zero = [r for r in rep["records"] if r["kind"] == "zero-discord"]
    pert = [r for r in rep["records"] if r["kind"] == "perturbed"]
    z_ok = all(r["certificate"]["passed"]["all"] for r in zero)
    z_disc = max(r["discord_upper"] for r in zero)
    z_frob = max(r["certificate"]["frobenius_residual"] for r in zero)
    res = [r["certificate"]["frobenius_residual"] for r in pert]
    p_ok = not any(r["certificate"]["passed"]["all"] for r in pert)
    band = all(PERTURB_BAND[0] <= x <= PERTURB_BAND[1] for x in res)
    ok = len(zero) == len(pert) == 100 and z_ok and z_disc < DISCORD_ZERO and p_ok and band and dt < 300
    report(
        4,
        ok,
        "zero-discord certificates",
        f"{sum(r['certificate']['passed']['all'] for r in zero)}/100 pass at tol {rep['tol']:g}, "
        f"max residual {z_frob:.1e}, max discord {z_disc:.1e}; "
        f"{len(pert) - sum(r['certificate']['passed']['all'] for r in pert)}/100 perturbed fail, "
        f"residual in [{min(res):.2e}, {max(res):.2e}]; {dt:.1f}s",
    )
    assert ok


def test_criterion_5_branching_reconstruction(report, props_report):
    rep, _ = props_report
    overlaps = [r["rebuild_overlap"] for r in rep["records"] if r["certificate"]["g_map"]]
    missing = [r for r in rep["records"] if r["certificate"]["g_map"] and "rebuild_overlap" not in r]
    worst = 1 - min(overlaps)
    ok = not missing and len(overlaps) >= 100 and worst <= REBUILD_TOL
    report(5, ok, "rebuild from extracted g", f"{len(overlaps)} states, max 1-overlap^2 = {worst:.1e}")
    assert ok


def test_criterion_6_theorem_trend(report, theorem_rows):
    rows, dt = theorem_rows
    ideal = [r for r in rows if r["gamma"] == 1.0]
    grid = [r for r in rows if r["gamma"] in THEOREM_GAMMAS]
    haar = [r for r in rows if r["gamma"] == "haar"]

    def rho(sub):
        return float(spearmanr([r["eps_D"] + r["eps_I"] for r in sub], [r["eta"] for r in sub]).statistic)

    rho_g, rho_h = rho(grid), rho(haar)
    eta_ideal = max(r["eta"] for r in ideal)
    ok = rho_g > SPEARMAN_MIN and rho_h > SPEARMAN_MIN and eta_ideal < ETA_IDEAL and dt < 600
    report(
        6,
        ok,
        "eta tracks eps_D + eps_I",
        f"Spearman gamma grid = {rho_g:.3f} (n={len(grid)}), Haar pool = {rho_h:.3f} (n={len(haar)}), "
        f"min {SPEARMAN_MIN}; eta at gamma=1 = {eta_ideal:.1e}; {dt:.1f}s",
    )
    assert ok


def test_criterion_7_bounds_on_flagged_records(report, theorem_rows):
    rows, _ = theorem_rows
    flagged = [r for r in rows if r["decoherence_flag"]]
    fails = {"branch_entropy": [], "relative_entropy": [], "entropy_gap": []}
    for r in flagged:
        e = r["eps_I"] + r["eps_D"]
        if not r["branch_entropy_sum"] <= e + BOUND_SLACK:
            fails["branch_entropy"].append(r)
        if not r["relative_entropy"] <= 2 * e + BOUND_SLACK:
            fails["relative_entropy"].append(r)
        if not -r["eps_I"] - BOUND_SLACK <= r["entropy_gap"] <= BOUND_SLACK:
            fails["entropy_gap"].append(r)
    ok = len(flagged) > 0 and not any(fails.values())
    detail = f"{len(flagged)} flagged records; failures: " + ", ".join(f"{k}={len(v)}" for k, v in fails.items())
    for r in fails["entropy_gap"]:
        detail += f"; gamma={r['gamma']} seed={r['seed']} gap={r['entropy_gap']:.2e} eps_I={r['eps_I']:.2e}"
    report(7, ok, "entropy bounds under good decoherence", detail)
    assert ok


def test_criterion_8_kernel_properties(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    n_per = KERNEL_CASES // 5
    worst = dict.fromkeys(["norm", "trace", "hermitian", "unitary_entropy", "schmidt", "holevo"], 0.0)
    cases = 0
    for _ in range(n_per):
        n_env = int(rng.integers(1, 5))
        lay = SubsystemLayout.qubits(n_env, int(rng.integers(1, n_env + 1)))
        s = random_state(rng, lay)
        k = int(rng.integers(0, lay.n_factors))

        # norm preservation under a local unitary
        t = apply_local(s, k, random_unitary(rng, 2))
        worst["norm"] = max(worst["norm"], abs(np.linalg.norm(t.amplitudes) - 1))

        # partial trace is unit-trace and Hermitian
        keep = sorted(rng.choice(lay.n_factors, size=int(rng.integers(1, lay.n_factors + 1)), replace=False))
        rho = partial_trace(s, keep).matrix
        worst["trace"] = max(worst["trace"], abs(np.trace(rho) - 1))
        worst["hermitian"] = max(worst["hermitian"], float(np.max(np.abs(rho - rho.conj().T))))

        # entropy is invariant under unitary conjugation
        u = random_unitary(rng, rho.shape[0])
        worst["unitary_entropy"] = max(
            worst["unitary_entropy"], abs(von_neumann_entropy(rho) - von_neumann_entropy(u @ rho @ u.conj().T))
        )

        # Schmidt reconstruction across system | environment
        c, left, right = schmidt_decompose(s, [0])
        back = ungroup(np.einsum("k,ak,bk->ab", c, left, right), lay, [0])
        worst["schmidt"] = max(worst["schmidt"], float(np.max(np.abs(back.amplitudes - s.amplitudes))))

        # Holevo never exceeds mutual information
        f = list(lay.fragment)
        b = MeasurementBasis(random_unitary(rng, lay.dim_of(f)))
        gap = holevo(s, f, [0], b) - mutual_information(s, [0], f)
        worst["holevo"] = max(worst["holevo"], gap)
        cases += 5
    dt = time.perf_counter() - t0
    ok = cases >= KERNEL_CASES and max(worst.values()) <= KERNEL_TOL and dt < 120
    report(
        8,
        ok,
        f"kernel properties over {cases} randomized cases",
        ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; tol {KERNEL_TOL:g}; {dt:.1f}s",
    )
    assert ok
