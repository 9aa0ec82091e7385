import random

import numpy as np
import pytest

from semid import (
    DegenerateSampleError,
    InfeasibleEdgeError,
    MixedGraph,
    Parameters,
    alternative_parameters,
    covariance,
    enumerate_treks,
    jacobian_rank,
    recover_edge_ratio,
    sample_parameters,
    solve_determinantal_system,
    solve_recovery_system,
    subdeterminant,
    trek_monomial,
)
from semid.oracle import (
    n_free_parameters,
    numeric_rank,
    restricted_covariance,
    sigma_jacobian,
    validate_parameters,
)

from conftest import (
    HTC_FAIL_GRAPH,
    IV_GRAPH,
    JOINT_SYSTEM_GRAPH,
    ONE_EDGE_NONID_GRAPH,
    random_mixed_graph,
)


def test_sampling_respects_supports_and_determinism():
    p = sample_parameters(IV_GRAPH, seed=4)
    assert validate_parameters(IV_GRAPH, p) == []
    again = sample_parameters(IV_GRAPH, seed=4)
    assert np.array_equal(p.lam, again.lam) and np.array_equal(p.omega, again.omega)
    assert not np.array_equal(p.lam, sample_parameters(IV_GRAPH, seed=5).lam)


def test_sampling_empty_graph():
    p = sample_parameters(MixedGraph(3), seed=0)
    assert np.all(p.lam == 0)
    assert np.array_equal(p.omega, np.diag(np.diag(p.omega)))
    assert np.all(np.diag(p.omega) > 0)


def test_sampling_iv_omega_pattern():
    p = sample_parameters(IV_GRAPH, seed=1)
    off = p.omega - np.diag(np.diag(p.omega))
    nonzero = {(i + 1, j + 1) for i, j in zip(*np.nonzero(off))}
    assert nonzero == {(2, 3), (3, 2)}


def test_sampling_cyclic_rejection():
    cyclic = MixedGraph(3, [(1, 2), (2, 3), (3, 1)], [])
    for seed in range(10):
        p = sample_parameters(cyclic, seed)
        assert abs(np.linalg.det(np.eye(3) - p.lam)) > 1e-3


def test_covariance_iv_entries():
    p = sample_parameters(IV_GRAPH, seed=2)
    sig = covariance(p)
    lam, om = p.lam, p.omega
    assert sig[0, 2] == pytest.approx(lam[0, 1] * lam[1, 2] * om[0, 0], rel=1e-12)
    assert sig[1, 2] == pytest.approx(
        lam[1, 2] * (lam[0, 1] ** 2 * om[0, 0] + om[1, 1]) + om[1, 2], rel=1e-12
    )
    # diagonal entry from the walk expansion, not any printed formula
    assert sig[2, 2] == pytest.approx(
        om[2, 2] + 2 * om[1, 2] * lam[1, 2] + lam[1, 2] ** 2 * sig[1, 1], rel=1e-12
    )


def test_covariance_without_directed_part_is_omega():
    g = MixedGraph(3, [], [(1, 2)])
    p = sample_parameters(g, seed=0)
    assert np.allclose(covariance(p), p.omega)


def test_covariance_symmetric_pd():
    rng = random.Random(7)
    for _ in range(30):
        g = random_mixed_graph(rng, rng.randint(1, 6))
        p = sample_parameters(g, seed=rng.randint(0, 10**6))
        sig = covariance(p)
        assert np.max(np.abs(sig - sig.T)) < 1e-12
        assert np.min(np.linalg.eigvalsh(sig)) > 0


def test_covariance_singular_guard():
    lam = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DegenerateSampleError):
        covariance(Parameters(lam=lam, omega=np.eye(2)))


def test_enumerate_treks_iv():
    treks = enumerate_treks(IV_GRAPH, 1, 3)
    assert len(treks) == 1
    assert treks[0].left == (1,) and treks[0].right == (1, 2, 3)

    treks_23 = enumerate_treks(IV_GRAPH, 2, 3)
    assert len(treks_23) == 3
    p = sample_parameters(IV_GRAPH, seed=3)
    total = sum(trek_monomial(t, p) for t in treks_23)
    assert total == pytest.approx(covariance(p)[1, 2], rel=1e-12)


def test_enumerate_treks_empty_trek():
    g = MixedGraph(2)
    treks = enumerate_treks(g, 1, 1)
    assert len(treks) == 1 and treks[0].left == treks[0].right == (1,)
    p = sample_parameters(g, seed=0)
    assert trek_monomial(treks[0], p) == pytest.approx(p.omega[0, 0])


def test_enumerate_treks_rejects_cyclic():
    with pytest.raises(ValueError):
        enumerate_treks(MixedGraph(2, [(1, 2), (2, 1)], []), 1, 2)


def test_trek_rule_on_fixtures():
    for g in (IV_GRAPH, HTC_FAIL_GRAPH, ONE_EDGE_NONID_GRAPH, JOINT_SYSTEM_GRAPH):
        p = sample_parameters(g, seed=9)
        sig = covariance(p)
        for v in g.vertices:
            for w in g.vertices:
                total = sum(trek_monomial(t, p) for t in enumerate_treks(g, v, w))
                scale = max(1.0, abs(sig[v - 1, w - 1]))
                assert abs(total - sig[v - 1, w - 1]) < 1e-9 * scale


def test_subdeterminant_examples():
    p = sample_parameters(HTC_FAIL_GRAPH, seed=11)
    sig = covariance(p)
    assert abs(subdeterminant(sig, [1, 2, 4], [1, 3, 5])) > 1e-6
    bar = MixedGraph(5, [(1, 2), (1, 3), (1, 4)], HTC_FAIL_GRAPH.bidirected)
    pbar = sample_parameters(bar, seed=11)
    sbar = covariance(pbar)
    det = subdeterminant(sbar, [1, 2, 4], [1, 3, 5])
    assert abs(det) < 1e-9 * max(1.0, abs(subdeterminant(sbar, [1, 2, 4], [1, 2, 4])))
    assert subdeterminant(sig, [3], [3]) > 0
    with pytest.raises(ValueError):
        subdeterminant(sig, [1, 2], [1])


def test_subdeterminant_column_order_sign():
    p = sample_parameters(HTC_FAIL_GRAPH, seed=13)
    sig = covariance(p)
    a = subdeterminant(sig, [1, 2], [3, 4])
    b = subdeterminant(sig, [1, 2], [4, 3])
    assert a == pytest.approx(-b, rel=1e-12)


def test_recover_edge_ratio_examples():
    p = sample_parameters(HTC_FAIL_GRAPH, seed=17)
    sig = covariance(p)
    lam45 = recover_edge_ratio(sig, [1, 2, 4], [1, 3], 5, 4)
    assert lam45 == pytest.approx(p.lam[3, 4], rel=1e-9)

    from conftest import DESCENDANT_SOURCE_GRAPH

    pd_ = sample_parameters(DESCENDANT_SOURCE_GRAPH, seed=17)
    sd = covariance(pd_)
    assert recover_edge_ratio(sd, [3, 5], [4], 2, 1) == pytest.approx(pd_.lam[0, 1], rel=1e-9)

    piv = sample_parameters(IV_GRAPH, seed=17)
    siv = covariance(piv)
    assert recover_edge_ratio(siv, [1], [], 3, 2) == pytest.approx(
        siv[0, 2] / siv[0, 1], rel=1e-12
    )


def test_recover_edge_ratio_known_subtraction():
    # strip a solved sibling edge: recover 1->4 on the ratio graph by hand
    p = sample_parameters(HTC_FAIL_GRAPH, seed=19)
    sig = covariance(p)
    # lambda45 known; recover via a system in which it is a prerequisite
    lam45 = p.lam[3, 4]
    got = recover_edge_ratio(sig, [1, 2, 4], [1, 3], 5, 4, known={})
    assert got == pytest.approx(lam45, rel=1e-9)


def test_recover_edge_ratio_degenerate_denominator():
    sig = np.eye(4)
    with pytest.raises(DegenerateSampleError):
        recover_edge_ratio(sig, [1, 2], [3], 4, 3)


def test_solve_recovery_system_iv():
    p = sample_parameters(IV_GRAPH, seed=23)
    sig = covariance(p)
    values = solve_recovery_system(sig, 3, [2], [], [1], [[]])
    assert values[(2, 3)] == pytest.approx(p.lam[1, 2], rel=1e-9)
    assert solve_recovery_system(sig, 3, [], [], [], []) == {}


def test_solve_recovery_system_with_corrections():
    # recover 1 -> 4 on the ratio graph: source 2 needs its parent 1 stripped
    g = HTC_FAIL_GRAPH
    p = sample_parameters(g, seed=29)
    sig = covariance(p)
    known = {(1, 2): p.lam[0, 1]}
    values = solve_recovery_system(sig, 4, [1], [], [2], [[1]], known)
    assert values[(1, 4)] == pytest.approx(p.lam[0, 3], rel=1e-9)


def test_jacobian_against_finite_differences():
    rng = random.Random(37)
    for _ in range(20):
        g = random_mixed_graph(rng, rng.randint(1, 5))
        p = sample_parameters(g, seed=rng.randint(0, 10**6))
        analytic = sigma_jacobian(g, p)
        fd = _finite_difference_jacobian(g, p)
        scale = max(1.0, np.max(np.abs(analytic)))
        assert np.max(np.abs(analytic - fd)) < 1e-6 * scale


def _finite_difference_jacobian(g, p, h=1e-6):
    from semid.oracle import _free_parameters

    coords = _free_parameters(g)
    n = g.n
    tri = [(i, j) for i in range(n) for j in range(i, n)]
    out = np.empty((len(tri), len(coords)))
    for c, (kind, u, w) in enumerate(coords):
        def shifted(delta):
            lam, om = p.lam.copy(), p.omega.copy()
            target = lam if kind == "lam" else om
            target[u - 1, w - 1] += delta
            if kind == "omega" and u != w:
                target[w - 1, u - 1] += delta
            return covariance(Parameters(lam=lam, omega=om))

        d = (shifted(h) - shifted(-h)) / (2 * h)
        out[:, c] = [d[i, j] for i, j in tri]
    return out


def test_jacobian_rank_identifiable_vs_not():
    piv = sample_parameters(IV_GRAPH, seed=41)
    assert jacobian_rank(IV_GRAPH, piv) == n_free_parameters(IV_GRAPH) == 6

    pn = sample_parameters(ONE_EDGE_NONID_GRAPH, seed=41)
    assert jacobian_rank(ONE_EDGE_NONID_GRAPH, pn) < n_free_parameters(ONE_EDGE_NONID_GRAPH)


def test_alternative_parameters_nonid_edge():
    g = ONE_EDGE_NONID_GRAPH
    p = sample_parameters(g, seed=43)
    sig = covariance(p)
    alt = alternative_parameters(g, p, (2, 3), p.lam[1, 2] + 1.0)
    assert np.max(np.abs(covariance(alt) - sig)) < 1e-9
    assert validate_parameters(g, alt, tol=1e-9) == []
    assert alt.lam[1, 2] == pytest.approx(p.lam[1, 2] + 1.0)

    same = alternative_parameters(g, p, (2, 3), p.lam[1, 2])
    assert np.allclose(same.omega, p.omega)


def test_alternative_parameters_infeasible():
    p = sample_parameters(IV_GRAPH, seed=43)
    with pytest.raises(InfeasibleEdgeError):
        alternative_parameters(IV_GRAPH, p, (2, 3), 0.5)


def test_alternative_parameters_boundary_construction_fails():
    tiny = MixedGraph(2, [(1, 2)], [])
    p = sample_parameters(tiny, seed=0)
    with pytest.raises(DegenerateSampleError):
        alternative_parameters(tiny, p, (1, 2), p.lam[0, 1] + 1.0)


def test_solve_determinantal_system_joint_graph():
    g = JOINT_SYSTEM_GRAPH
    p = sample_parameters(g, seed=47)
    sig = covariance(p)
    values = solve_determinantal_system(sig, [([3, 5], [1]), ([2, 4], [1])], 6, [4, 5])
    assert values[(4, 6)] == pytest.approx(p.lam[3, 5], rel=1e-9)
    assert values[(5, 6)] == pytest.approx(p.lam[4, 5], rel=1e-9)


def test_solve_determinantal_system_k1_matches_ratio():
    p = sample_parameters(HTC_FAIL_GRAPH, seed=53)
    sig = covariance(p)
    joint = solve_determinantal_system(sig, [([1, 2, 4], [1, 3])], 5, [4])
    ratio = recover_edge_ratio(sig, [1, 2, 4], [1, 3], 5, 4)
    assert joint[(4, 5)] == pytest.approx(ratio, rel=1e-12)
    assert solve_determinantal_system(sig, [], 5, []) == {}


def test_recovered_values_are_sample_independent():
    g = JOINT_SYSTEM_GRAPH
    results = []
    for seed in (61, 62):
        p = sample_parameters(g, seed=seed)
        sig = covariance(p)
        vals = solve_determinantal_system(sig, [([3, 5], [1]), ([2, 4], [1])], 6, [4, 5])
        results.append((vals[(4, 6)] / p.lam[3, 5], vals[(5, 6)] / p.lam[4, 5]))
    for r in results:
        assert r == pytest.approx((1.0, 1.0), rel=1e-6)


def test_restricted_covariance_full_sides_match():
    p = sample_parameters(IV_GRAPH, seed=67)
    full = restricted_covariance(p, IV_GRAPH.directed, IV_GRAPH.directed)
    assert np.allclose(full, covariance(p))


def test_numeric_rank_thresholding():
    assert numeric_rank(np.zeros((3, 3))) == 0
    assert numeric_rank(np.diag([1.0, 1e-12, 0.5])) == 2


def test_sampling_rejection_budget_exhausted():
    from semid import SampleConfig

    cyclic = MixedGraph(2, [(1, 2), (2, 1)], [])
    impossible = SampleConfig(rejection_tolerance=1e9, max_rejections=3)
    with pytest.raises(DegenerateSampleError):
        sample_parameters(cyclic, seed=0, config=impossible)


def test_solve_recovery_system_degenerate():
    sigma = np.ones((3, 3))
    with pytest.raises(DegenerateSampleError):
        solve_recovery_system(sigma, 3, [1, 2], [], [1, 2], [[], []])


def test_solve_determinantal_system_degenerate():
    p = sample_parameters(JOINT_SYSTEM_GRAPH, seed=71)
    sig = covariance(p)
    rows = [([3, 5], [1]), ([3, 5], [1])]  # identical rows force det 0
    with pytest.raises(DegenerateSampleError):
        solve_determinantal_system(sig, rows, 6, [4, 5])
