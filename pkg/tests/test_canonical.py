from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from atomlab.atoms import catalogue_atom, compute_symmetry, count_placements
from atomlab.canonical import (
    _checked_series,
    _series_terms,
    CanonicalCountSpec,
    aggregate_orbits_canonical,
    check_sparse_feasibility,
    effective_degrees,
    entropy_degree_corrected,
    entropy_homogeneous,
    orbit_degree_bounds,
    placement_probability_homogeneous,
    placement_probability_sparse,
    solve_multipliers_exact,
    sparse_probabilities,
)
from atomlab.configuration import DegreeSpec, OrbitGroup, Placement, placement_array
from atomlab.errors import InfeasibleConstraintError, SeriesDivergenceError
from atomlab.oracle import exact_canonical_solution, maxent_over_configurations

EDGE = catalogue_atom("edge")
TRI = catalogue_atom("triangle")
PATH = catalogue_atom("path-3")


def h(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log(p), 0) - np.where(p < 1, (1 - p) * np.log1p(-p), 0)
    return float(np.sum(out))


def single(atom, k):
    return DegreeSpec(len(k), {atom: [np.asarray(k, dtype=float)]})


# -- homogeneous -------------------------------------------------------------------------


def test_homogeneous_probability_examples():
    spec = CanonicalCountSpec([EDGE, TRI], {EDGE: 1.5, TRI: 1.0})
    assert placement_probability_homogeneous(spec, 3, EDGE) == pytest.approx(0.5)
    assert placement_probability_homogeneous(spec, 3, TRI) == 1.0
    assert placement_probability_homogeneous(CanonicalCountSpec([EDGE], {}), 3, EDGE) == 0.0
    with pytest.raises(InfeasibleConstraintError):
        placement_probability_homogeneous(CanonicalCountSpec([EDGE], {EDGE: 4}), 3, EDGE)


def test_homogeneous_entropy_examples():
    assert entropy_homogeneous(CanonicalCountSpec([EDGE], {EDGE: 1.5}), 3).exact == pytest.approx(3 * math.log(2))
    assert entropy_homogeneous(CanonicalCountSpec([EDGE], {EDGE: 0}), 3).exact == 0.0
    assert entropy_homogeneous(CanonicalCountSpec([EDGE], {EDGE: 6}), 4).exact == 0.0


@given(st.integers(3, 40), st.floats(0.01, 0.99))
def test_homogeneous_edges_reproduce_gnp(n, p):
    spec = CanonicalCountSpec([EDGE], {EDGE: p * count_placements(n, EDGE)})
    assert placement_probability_homogeneous(spec, n, EDGE) == pytest.approx(p)
    assert entropy_homogeneous(spec, n).exact == pytest.approx(count_placements(n, EDGE) * h(p))


def test_sparse_homogeneous_entropy_approaches_exact():
    gaps = []
    for n in (50, 200, 800):
        spec = CanonicalCountSpec([TRI], {TRI: float(n)})
        e = entropy_homogeneous(spec, n)
        gaps.append(abs(e.exact - e.sparse) / e.exact)
    assert gaps[0] > gaps[1] > gaps[2]


# -- sparse degree-corrected ------------------------------------------------------------


def test_sparse_edge_probability_is_expected_degree_model():
    k = np.array([1.0, 2.0, 3.0, 2.0, 2.0])
    spec = single(EDGE, k)
    n_bar = k.sum() / 2
    for u, v in [(0, 1), (2, 4), (1, 3)]:
        p = placement_probability_sparse(spec, Placement(EDGE, (u, v)), check="none")
        assert p == pytest.approx(k[u] * k[v] / (2 * n_bar))


def test_sparse_triangle_probability_uniform_degrees():
    n, k = 30, 0.6
    spec = single(TRI, np.full(n, k))
    n_bar = n * k / 3
    p = placement_probability_sparse(spec, Placement(TRI, (0, 5, 9)))
    assert p == pytest.approx(6 * n_bar * (k / (3 * n_bar)) ** 3)


def test_feasibility_bound():
    # for the edge the uniform cap is sqrt(sum k)
    assert orbit_degree_bounds(EDGE, 8.0)[0] == pytest.approx(4.0)
    with pytest.raises(InfeasibleConstraintError, match="vertex 0"):
        check_sparse_feasibility(single(EDGE, [5.0, 1.0, 1.0, 1.0]))
    spec = single(EDGE, [3.0, 1.0, 1.0, 1.0])
    with pytest.raises(InfeasibleConstraintError):
        placement_probability_sparse(spec, Placement(EDGE, (1, 2)))
    # the strict mode only looks at the placement asked about
    assert placement_probability_sparse(spec, Placement(EDGE, (1, 2)), check="strict") == pytest.approx(1 / 6)
    with pytest.raises(InfeasibleConstraintError):
        placement_probability_sparse(single(EDGE, [6.0, 6.0, 0.0, 0.0]), Placement(EDGE, (0, 1)), check="strict")


def test_entropy_zero_degrees():
    assert entropy_degree_corrected(single(EDGE, np.zeros(6))).value == 0.0


def test_series_divergence_is_reported():
    # behind the feasibility check every p_s <= 1 and the terms shrink, so
    # growth only appears when the series is asked about infeasible degrees
    k = np.array([6.0, 6.0, 0.5, 0.5])
    with pytest.raises(SeriesDivergenceError, match="exact solver"):
        _checked_series(EDGE, k.sum() / 2, [k], 5)


@settings(max_examples=40)
@given(st.lists(st.floats(0.05, 4.0), min_size=4, max_size=30))
def test_feasible_degrees_never_diverge(k):
    spec = single(EDGE, k)
    try:
        check_sparse_feasibility(spec)
    except InfeasibleConstraintError:
        return
    terms = _series_terms(EDGE, sum(k) / 2, [np.asarray(k)], 10)
    assert all(b <= a for a, b in zip(terms, terms[1:]))


def test_series_diagnostic_shrinks_with_l_max():
    k = np.random.default_rng(0).uniform(1, 3, 200)
    spec = single(EDGE, k)
    assert entropy_degree_corrected(spec, l_max=3).last_term > entropy_degree_corrected(spec, l_max=8).last_term
    assert entropy_degree_corrected(spec, l_max=0).last_term == 0.0


@pytest.mark.parametrize("atom, scale, sizes", [(EDGE, 2.5, (100, 400, 1600)), (TRI, 1.2, (30, 60, 120))])
def test_sparse_entropy_matches_direct_sum(atom, scale, sizes):
    """Closed form against summing h(p_s) over every placement; the gap is O(1/N)."""
    gaps = []
    for n in sizes:
        k = np.random.default_rng(3).uniform(0.5, 1.5, n) * scale
        spec = single(atom, k)
        p = sparse_probabilities(spec, atom, placement_array(n, atom))
        gaps.append(abs(entropy_degree_corrected(spec).value - h(p)) / h(p))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] * sizes[2] < 2 * gaps[0] * sizes[0]


@pytest.mark.parametrize("n", [100, 400])
def test_sparse_probabilities_sum_to_targets(n):
    k = np.random.default_rng(1).uniform(1, 4, n)
    spec = single(EDGE, k)
    rows = placement_array(n, EDGE)
    p = sparse_probabilities(spec, EDGE, rows)
    assert abs(p.sum() - k.sum() / 2) / (k.sum() / 2) < 3.0 / n * 4
    got = np.bincount(rows.ravel(), weights=np.repeat(p, 2), minlength=n)
    assert np.max(np.abs(got - k) / k) < 5.0 * k.max() / k.sum() * 4


def test_triangle_sums_to_targets():
    rel = []
    for n in (30, 60):
        k = np.random.default_rng(2).uniform(0.5, 1.5, n)
        spec = single(TRI, k)
        p = sparse_probabilities(spec, TRI, placement_array(n, TRI))
        rel.append(abs(p.sum() - k.sum() / 3) / (k.sum() / 3))
    assert rel[1] < rel[0]


# -- aggregation ---------------------------------------------------------------------------


def test_aggregation_examples():
    k = np.full(5, 4.0)
    split = aggregate_orbits_canonical([(EDGE, 0), (TRI, 0)], {EDGE: 3.0, TRI: 2.0}, k)
    assert np.allclose(split[(EDGE, 0)], 2.0) and np.allclose(split[(TRI, 0)], 2.0)
    assert np.allclose(aggregate_orbits_canonical([(EDGE, 0)], {EDGE: 3.0}, k)[(EDGE, 0)], k)
    sym = compute_symmetry(PATH)
    split = aggregate_orbits_canonical([(PATH, 0), (PATH, 1)], {PATH: 2.0}, k)
    assert split[(PATH, 0)][0] + split[(PATH, 1)][0] == pytest.approx(4.0)
    ratio = split[(PATH, 0)][0] / split[(PATH, 1)][0]
    assert ratio == pytest.approx(sym.orbit_sizes[0] / sym.orbit_sizes[1])
    with pytest.raises(InfeasibleConstraintError):
        aggregate_orbits_canonical([(EDGE, 0)], {EDGE: 0.0}, k)


@given(st.permutations(range(3)))
def test_aggregation_is_order_independent(order):
    n = 6
    rng = np.random.default_rng(4)
    star = catalogue_atom("star-2")
    groups = [
        OrbitGroup(((EDGE, 0), (TRI, 0)), rng.uniform(1, 2, n)),
        OrbitGroup(((PATH, 0), (PATH, 1)), rng.uniform(1, 2, n)),
        OrbitGroup(((star, 0), (star, 1)), rng.uniform(1, 2, n)),
    ]
    totals = {EDGE: 2.0, TRI: 1.0, PATH: 1.5, star: 1.0}
    base = effective_degrees(DegreeSpec(n, {}, groups, totals))
    shuffled = effective_degrees(DegreeSpec(n, {}, [groups[i] for i in order], totals))
    for atom in base:
        for a, b in zip(base[atom], shuffled[atom]):
            assert np.allclose(a, b)


# -- exact solver --------------------------------------------------------------------------


def test_exact_solver_regular_square():
    sol = solve_multipliers_exact(single(EDGE, [2.0, 2.0, 2.0, 2.0]))
    assert np.allclose(sol.probabilities[EDGE], 2 / 3, atol=1e-8)
    assert sol.entropy == pytest.approx(6 * h(2 / 3), abs=1e-8)
    lam = next(iter(sol.multipliers.values()))
    assert np.ptp(lam) < 1e-8


def test_exact_solver_zero_target_excludes():
    sol = solve_multipliers_exact(single(EDGE, [0.0, 1.0, 1.0, 1.0, 1.0]))
    rows = sol.placements[EDGE]
    touching = (rows == 0).any(axis=1)
    assert np.all(sol.probabilities[EDGE][touching] == 0.0)
    assert np.allclose(sol.expected_degrees[((EDGE, 0),)], [0, 1, 1, 1, 1], atol=1e-8)


def test_exact_solver_saturated_target():
    sol = solve_multipliers_exact(single(EDGE, [3.0, 1.0, 1.0, 1.0]))
    assert sol.entropy == pytest.approx(0.0, abs=1e-12)
    assert sol.probability(Placement(EDGE, (0, 2))) == 1.0
    assert sol.probability(Placement(EDGE, (1, 2))) == 0.0


def test_exact_solver_infeasible():
    with pytest.raises(InfeasibleConstraintError):
        solve_multipliers_exact(single(EDGE, [4.0, 1.0, 1.0, 1.0]))
    # every row fits on its own, but vertex 0 can collect at most 1.25
    with pytest.raises(InfeasibleConstraintError, match="no placement probabilities"):
        solve_multipliers_exact(single(EDGE, [1.5, 0.5, 0.5, 0.25]))


def test_exact_solver_grouped_spec_matches_oracle():
    n = 5
    group = OrbitGroup(((EDGE, 0), (TRI, 0)), np.array([2.0, 1.5, 1.5, 1.0, 1.0]))
    spec = DegreeSpec(n, {}, [group], {EDGE: 2.0, TRI: 1.0})
    sol = solve_multipliers_exact(spec)
    ref = exact_canonical_solution(spec)
    assert sol.entropy == pytest.approx(ref.entropy, abs=1e-6)
    for placement, q in zip(ref.placements, ref.probabilities):
        assert sol.probability(placement) == pytest.approx(q, abs=1e-5)


def test_exact_solver_is_the_maximum_over_all_configurations():
    """Maximising over every distribution on 2^6 configurations gives the same entropy."""
    spec = single(EDGE, [1.5, 1.0, 1.0, 0.5])
    ref = maxent_over_configurations(spec)
    assert solve_multipliers_exact(spec).entropy == pytest.approx(ref.entropy, abs=1e-6)


@pytest.mark.parametrize("n, tol", [(4, 0.15), (8, 0.05), (16, 0.02)])
def test_sparse_entropy_against_exact_small_degrees(n, tol):
    k = 0.3 * np.random.default_rng(0).uniform(0.5, 1.5, n)
    spec = single(EDGE, k)
    exact = solve_multipliers_exact(spec).entropy
    assert abs(entropy_degree_corrected(spec).value - exact) / exact < tol


@settings(max_examples=25)
@given(st.lists(st.floats(0.2, 1.6), min_size=4, max_size=6))
def test_exact_solver_meets_targets_and_matches_oracle(k):
    spec = single(EDGE, k)
    try:
        ref = exact_canonical_solution(spec)
    except InfeasibleConstraintError:
        with pytest.raises(InfeasibleConstraintError):
            solve_multipliers_exact(spec)
        return
    sol = solve_multipliers_exact(spec)
    assert np.allclose(sol.expected_degrees[((EDGE, 0),)], k, atol=1e-7)
    assert sol.entropy == pytest.approx(ref.entropy, abs=1e-6)


@settings(max_examples=15)
@given(st.lists(st.floats(0.2, 1.6), min_size=4, max_size=5), st.integers(0, 2 ** 32 - 1))
def test_exact_solution_beats_other_feasible_product_laws(k, seed):
    """Perturbing p along the null space of the constraints never raises the entropy."""
    spec = single(EDGE, k)
    try:
        sol = solve_multipliers_exact(spec)
    except InfeasibleConstraintError:
        assume(False)
    inner = (sol.probabilities[EDGE] > 1e-9) & (sol.probabilities[EDGE] < 1 - 1e-9)
    p = sol.probabilities[EDGE][inner]
    rows = sol.placements[EDGE][inner]
    a = np.zeros((len(k), len(p)))
    a[rows[:, 0], np.arange(len(p))] = 1
    a[rows[:, 1], np.arange(len(p))] = 1
    null = np.linalg.svd(a)[2][np.linalg.matrix_rank(a):]
    if not len(null):
        return
    direction = np.random.default_rng(seed).normal(size=len(null)) @ null
    step = 0.5 * min(p.min(), (1 - p).min()) / np.abs(direction).max()
    for s in (step, -step):
        assert h(p + s * direction) <= h(p) + 1e-9
