import numpy as np
import pytest

from branchqd.discord_structure import (
    TOL_EXACT,
    AmbiguousLabelError,
    build_zero_discord_state,
    certify,
    check_frobenius_identity,
    check_x_condition,
    extract_g,
    frobenius_terms,
    perturb_forbidden_slot,
    rebuild_branching_state,
    default_bases,
)
from branchqd.experiments import random_density, zero_discord_instance
from branchqd.geometry import GeometricState, extract_geometric_state
from branchqd.infotheory import discord
from branchqd.models import CMaybeSpec, build_cmaybe_state
from branchqd.qstate import PureState, SubsystemLayout

from conftest import ghz


def test_x_condition_examples():
    ok, cross = check_x_condition(extract_geometric_state(ghz((0.7, 0.3))))
    assert ok and cross == 0.0
    bad = GeometricState.from_points([(0.5, [1, 0], 0, 0), (0.5, [0, 1], 1, 0)], shape=(2, 1))
    ok, cross = check_x_condition(bad)
    assert not ok and cross == pytest.approx(0.25)
    s = build_cmaybe_state(CMaybeSpec(p=0.4, N=6, gamma=1.0, m=3))
    ok, cross = check_x_condition(extract_geometric_state(s))
    assert ok and cross < 1e-14


def test_extract_g_examples():
    g = extract_g(extract_geometric_state(ghz((0.7, 0.3))))
    assert g == {0: 0, 3: 3}
    s = build_cmaybe_state(CMaybeSpec(p=0.4, N=4, gamma="ideal", m=2))
    assert extract_g(extract_geometric_state(s)) == {0b00: 0b00, 0b11: 0b11}
    bad = GeometricState.from_points([(0.5, [1, 0], 0, 0), (0.5, [0, 1], 1, 0)], shape=(2, 1))
    with pytest.raises(AmbiguousLabelError, match="proposition 2 violated"):
        extract_g(bad)


def test_frobenius_examples():
    ok, res = check_frobenius_identity(ghz((0.7, 0.3)))
    assert ok and res < 1e-10
    # Bell pair, F-bar trivial: ||rho_Fbar||^2 = 1 while the right side is (1/2 + 1/2)/2
    b = PureState(np.array([1, 0, 0, 1]) / np.sqrt(2), SubsystemLayout.qubits(1, 1))
    ok, res = check_frobenius_identity(b)
    assert not ok and res == pytest.approx(0.5)


def test_frobenius_tracks_discord():
    s = build_cmaybe_state(CMaybeSpec(p=0.5, N=8, gamma=0.8, m=1))
    fb, _ = default_bases(s)
    _, res = check_frobenius_identity(s, fb)
    d = discord(s).discord_upper
    assert d / 10 <= res <= 10 * d


def test_frobenius_intermediate_form(rng):
    from conftest import random_state

    s = random_state(rng, SubsystemLayout.qubits(3, 1))
    t = frobenius_terms(s)
    # the block sum equals the right side (and ||rho~||^2) on every state;
    # only the identity itself needs zero discord
    assert t["intermediate"] == pytest.approx(t["rhs"], abs=1e-12)
    assert t["intermediate"] == pytest.approx(t["dephased_norm2"], abs=1e-12)
    assert abs(t["rho_fbar_norm2"] - t["rhs"]) > 1e-3


def test_build_examples():
    s = build_zero_discord_state([1.0], [np.diag([1.0, 0.0])])
    assert np.count_nonzero(np.abs(s.amplitudes) > 1e-12) == 1
    s = build_zero_discord_state([0.5, 0.5], [np.diag([1.0, 0]), np.diag([0, 1.0])], seed=4)
    rho = np.abs(s.amplitudes) ** 2
    assert np.count_nonzero(rho > 1e-12) == 2
    assert np.allclose(sorted(rho[rho > 1e-12]), [0.5, 0.5])
    with pytest.raises(ValueError):
        build_zero_discord_state([0.5, 0.5], [np.eye(2) / 2, np.eye(2) / 2], fbar_dim=2)


def test_round_trip_certificate(rng):
    sig = [random_density(rng, 2), random_density(rng, 2)]
    s = build_zero_discord_state([0.6, 0.4], sig, seed=9)
    cert = certify(s)
    assert cert.passed
    assert cert.max_cross_product == 0.0
    assert discord(s).discord_upper < 1e-8
    d = cert.to_dict()
    assert d["passed"]["all"] is True and set(d["g_map"]) <= {str(b) for b in range(4)}


def test_equivalence_over_random_instances():
    for k in range(100):
        s = zero_discord_instance(k)
        cert = certify(s)
        x_ok, _ = check_x_condition(extract_geometric_state(s, *default_bases(s)), TOL_EXACT)
        assert cert.g_exists == x_ok
        assert cert.passed
        assert discord(s).discord_upper < 1e-6


def test_rebuild_is_identity_on_branching_states():
    for k in range(20):
        s = zero_discord_instance(100 + k)
        fb, fbb = default_bases(s)
        gqs = extract_geometric_state(s, fb, fbb)
        r = rebuild_branching_state(gqs, extract_g(gqs), s.layout, fb, fbb)
        assert abs(np.vdot(s.amplitudes, r.amplitudes)) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_perturbation_scales_quadratically():
    s = zero_discord_instance(3)
    comp = (np.eye(2), np.eye(s.layout.dim_of(s.layout.remainder)))
    res = []
    for eps in (1e-3, 2e-3, 4e-3):
        cert = certify(perturb_forbidden_slot(s, eps, *comp), *comp)
        assert not cert.passed
        res.append(cert.max_cross_product)
    assert res[1] / res[0] == pytest.approx(4, rel=0.01)
    assert res[2] / res[1] == pytest.approx(4, rel=0.01)
