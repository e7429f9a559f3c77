from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomlab.atoms import catalogue_atom
from atomlab.configuration import DegreeSpec, OrbitGroup
from atomlab.errors import InfeasibleConstraintError, NonGraphicalError
from atomlab.microcanonical import (
    aggregate_orbits_micro,
    entropy_analytic,
    entropy_combinatorial,
    entropy_per_atom_degrees,
    entropy_total_degree,
    log_count_fixed_counts,
    log_multi_subgraph_correction,
    log_self_match_correction,
    log_self_match_vertex,
    log_stub_matchings,
    per_atom_degree_spec,
    placement_repeat_probability,
    split_probabilities,
    total_degree_spec,
)
from atomlab.oracle import enumerate_configurations, exact_matching_count, matching_census
from atomlab.special_models import edge_configuration_entropy
from atomlab.validation import matching_identity_error, poisson_degree_spec

from strategies import edge_degree_sequences

EDGE = catalogue_atom("edge")
TRI = catalogue_atom("triangle")
PATH = catalogue_atom("path-3")
ARC = catalogue_atom("directed-edge")


def single(atom, d):
    return DegreeSpec(len(d), {atom: [np.asarray(d, dtype=np.int64)]})


# -- fixed counts -------------------------------------------------------------------------


def test_fixed_count_examples():
    assert log_count_fixed_counts(3, [EDGE], {EDGE: 2}) == pytest.approx(math.log(3))
    assert log_count_fixed_counts(5, [EDGE, TRI], {}) == 0.0
    assert log_count_fixed_counts(4, [TRI], {TRI: 2}) == pytest.approx(math.log(6))
    with pytest.raises(InfeasibleConstraintError):
        log_count_fixed_counts(3, [TRI], {TRI: 2})


@pytest.mark.parametrize("n", [3, 4, 5])
def test_fixed_counts_match_enumeration(n):
    for ne in range(0, 4):
        for nt in range(0, 3):
            counts = {EDGE: ne, TRI: nt}
            try:
                want = log_count_fixed_counts(n, [EDGE, TRI], counts)
            except InfeasibleConstraintError:
                continue
            got = enumerate_configurations(n, [EDGE, TRI], counts, count_only=True)
            assert round(math.exp(want)) == got


# -- stub matchings and corrections -----------------------------------------------------------


def test_stub_matching_examples():
    assert log_stub_matchings(single(EDGE, [1, 1])) == pytest.approx(0.0, abs=1e-12)
    assert log_stub_matchings(single(EDGE, [1, 1, 1, 1])) == pytest.approx(math.log(3))
    assert log_stub_matchings(single(TRI, [1, 1, 1])) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(NonGraphicalError):
        log_stub_matchings(single(EDGE, [1, 1, 1]))


def test_self_match_examples():
    for k in (1, 2, 3, 5):
        assert log_self_match_correction(single(EDGE, [k] * 10)) == pytest.approx(-(k - 1) / 2)
    assert log_self_match_correction(single(TRI, [1] * 6)) == pytest.approx(0.0, abs=1e-12)


def test_multi_subgraph_examples():
    for k in (1, 2, 3, 5):
        assert log_multi_subgraph_correction(single(EDGE, [k] * 10)).value == pytest.approx(-(k - 1) ** 2 / 4)
    assert log_multi_subgraph_correction(single(TRI, [1] * 9)).value == 0.0
    assert log_multi_subgraph_correction(single(EDGE, [1, 1, 0, 1, 1])).value == 0.0


def test_multi_subgraph_triangles_negligible():
    d = np.random.default_rng(5).integers(1, 5, 1000)
    d[0] += (-d.sum()) % 3
    tri = log_multi_subgraph_correction(single(TRI, d))
    assert tri.negligible[TRI]
    e = d.copy()
    e[0] += e.sum() % 2
    edge = log_multi_subgraph_correction(single(EDGE, e))
    assert not edge.negligible[EDGE]
    assert abs(tri.value) < 1e-2 * abs(edge.value)


def test_combinatorial_examples():
    assert entropy_combinatorial(single(EDGE, [0, 0, 0])).value == 0.0
    s = entropy_combinatorial(single(EDGE, [1, 1, 1, 1]))
    assert s.value == pytest.approx(math.log(3))
    assert s.self_match == 0.0 and s.multi_subgraph == 0.0


@settings(max_examples=100)
@given(edge_degree_sequences(n_max=40, d_max=8))
def test_single_edge_reduces_to_classical_expression(d):
    spec = single(EDGE, d)
    got = entropy_combinatorial(spec).value
    want = edge_configuration_entropy(d)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("d", [[1, 1], [2, 1, 1], [1, 1, 1, 1], [2, 2, 2], [3, 1, 1, 1], [2, 2, 1, 1]])
def test_matching_identity_edges(d):
    assert matching_identity_error(single(EDGE, d)) < 1e-9


@pytest.mark.parametrize("d", [[1, 1, 1], [2, 1, 1, 1, 1], [2, 2, 2], [1] * 6, [3, 2, 1, 1, 1, 1]])
def test_matching_identity_triangles(d):
    assert matching_identity_error(single(TRI, d)) < 1e-9


def test_matching_identity_two_orbit_atom():
    spec = DegreeSpec(4, {PATH: [np.array([1, 1, 1, 1]), np.array([1, 0, 1, 0])]})
    assert matching_identity_error(spec) < 1e-9


def test_exact_self_match_factor_against_census():
    """With a single vertex carrying the high degree, P_c is the whole acceptance story."""
    spec = single(EDGE, [2, 1, 1, 1, 1])
    census = matching_census(spec)
    ok_at_0 = 1 - census.self_matched / census.total
    assert math.exp(log_self_match_vertex(spec, 0)) == pytest.approx(ok_at_0)
    assert log_self_match_vertex(spec, 1) == pytest.approx(0.0, abs=1e-12)


def test_repeat_probability():
    spec = single(EDGE, [2, 2, 0, 0])
    census = matching_census(spec)
    assert placement_repeat_probability(spec, EDGE, (0, 1)) == pytest.approx(census.repeated / census.total)
    assert placement_repeat_probability(spec, EDGE, (0, 2)) == 0.0


@given(edge_degree_sequences(n_max=12, d_max=5), st.randoms(use_true_random=False))
def test_log_counts_are_permutation_equivariant(d, rnd):
    perm = list(range(len(d)))
    rnd.shuffle(perm)
    a, b = single(EDGE, d), single(EDGE, [d[i] for i in perm])
    assert entropy_combinatorial(a).value == pytest.approx(entropy_combinatorial(b).value, abs=1e-9)
    try:
        sa = entropy_analytic(a).value
    except InfeasibleConstraintError:
        # outside the sparse regime the refusal must not depend on labels either
        with pytest.raises(InfeasibleConstraintError):
            entropy_analytic(b)
        return
    assert sa == pytest.approx(entropy_analytic(b).value, abs=1e-9)


# -- analytic entropy -------------------------------------------------------------------------


def test_analytic_zero_degrees():
    assert entropy_analytic(single(EDGE, [0] * 5)).value == 0.0


def test_analytic_close_to_combinatorial_at_n1000():
    spec = poisson_degree_spec(1000, {"edge": 3}, np.random.default_rng(11))
    gap = abs(entropy_analytic(spec).value - entropy_combinatorial(spec).value)
    assert gap <= 5 * math.log(1000)


@pytest.mark.parametrize("means", [{"edge": 3}, {"edge": 3, "triangle": 3}])
def test_analytic_gap_per_vertex_shrinks(means):
    gaps = []
    for n in (100, 400, 1600):
        spec = poisson_degree_spec(n, means, np.random.default_rng(100))
        gaps.append(abs(entropy_analytic(spec).value - entropy_combinatorial(spec).value) / n)
    assert gaps[0] > gaps[1] > gaps[2]


# -- aggregation and relaxed variants -------------------------------------------------------------


def test_single_member_group_changes_nothing():
    spec = single(EDGE, [3, 2, 2, 1, 2])
    merged = aggregate_orbits_micro(spec, [(EDGE, 0)])
    assert entropy_combinatorial(merged).value == pytest.approx(entropy_combinatorial(spec).value)


def test_merging_symmetric_orbits_raises_entropy():
    d = np.array([2, 1, 3, 1, 2, 1])
    spec = DegreeSpec(6, {ARC: [d, d]})
    merged = aggregate_orbits_micro(spec, [(ARC, 0), (ARC, 1)])
    assert entropy_combinatorial(merged).value > entropy_combinatorial(spec).value
    shares = split_probabilities(merged)
    assert shares[(ARC, 0)] == pytest.approx(0.5) and shares[(ARC, 1)] == pytest.approx(0.5)


def test_aggregation_rejects_wrong_totals():
    spec = DegreeSpec(4, {ARC: [np.array([1, 1, 0, 0]), np.array([0, 0, 1, 1])]})
    with pytest.raises(InfeasibleConstraintError):
        aggregate_orbits_micro(spec, [(ARC, 0), (ARC, 1)], degrees=[1, 1, 1, 0])


def test_group_spanning_two_atoms_splits_by_orbit_share():
    group = OrbitGroup(((EDGE, 0), (TRI, 0)), np.array([3, 2, 2, 2, 1]))
    spec = DegreeSpec(5, {}, [group], {EDGE: 2, TRI: 2})
    shares = split_probabilities(spec)
    assert shares[(EDGE, 0)] == pytest.approx(4 / 10)
    assert shares[(TRI, 0)] == pytest.approx(6 / 10)
    assert math.isfinite(entropy_combinatorial(spec).value)


@settings(max_examples=40)
@given(st.lists(st.integers(0, 3), min_size=4, max_size=10), st.lists(st.integers(0, 3), min_size=4, max_size=10))
def test_relaxation_never_lowers_entropy(d_out, d_in):
    n = min(len(d_out), len(d_in))
    d_out, d_in = np.array(d_out[:n]), np.array(d_in[:n])
    if d_out.sum() != d_in.sum() or d_out.sum() == 0:
        d_in = d_out[::-1].copy()
    if d_out.sum() == 0:
        return
    spec = DegreeSpec(n, {ARC: [d_out, d_in]})
    merged = aggregate_orbits_micro(spec, [(ARC, 0), (ARC, 1)])
    assert entropy_combinatorial(merged).value >= entropy_combinatorial(spec).value - 1e-9


def test_per_atom_degree_examples():
    d = np.array([2, 1, 1, 2, 0, 3])
    assert entropy_per_atom_degrees([TRI], {TRI: d}) == pytest.approx(entropy_combinatorial(single(TRI, d)).value)
    assert entropy_per_atom_degrees([TRI], {TRI: np.zeros(4)}) == 0.0
    with pytest.raises(NonGraphicalError):
        entropy_per_atom_degrees([TRI], {TRI: np.array([1, 1, 0])})


def test_per_atom_degrees_relax_path_orbits():
    ends = np.array([2, 2, 1, 1, 1, 1, 2, 2])
    centre = np.array([1, 1, 0, 1, 0, 1, 1, 1])
    spec = DegreeSpec(8, {PATH: [ends, centre]})
    relaxed = entropy_per_atom_degrees([PATH], {PATH: ends + centre})
    assert relaxed >= entropy_combinatorial(spec).value
    # the general machinery with every orbit pooled gives the same number
    pooled = per_atom_degree_spec(8, [PATH], {PATH: ends + centre})
    assert entropy_combinatorial(pooled).value == pytest.approx(relaxed, rel=1e-9)


def test_total_degree_examples():
    d = np.array([2, 1, 1, 2, 0, 3])
    s42 = entropy_combinatorial(single(TRI, d)).value
    assert entropy_total_degree([TRI], {TRI: 3}, d) == pytest.approx(s42)
    assert entropy_per_atom_degrees([TRI], {TRI: d}) == pytest.approx(s42)
    assert entropy_total_degree([EDGE], {EDGE: 0}, np.zeros(4)) == 0.0
    with pytest.raises(NonGraphicalError):
        entropy_total_degree([EDGE], {EDGE: 2}, [1, 1, 1])


def test_total_degree_relaxes_per_atom_degrees():
    rng = np.random.default_rng(8)
    de = rng.integers(0, 4, 30)
    de[0] += de.sum() % 2
    dt = rng.integers(0, 3, 30)
    dt[0] += (-dt.sum()) % 3
    per_atom = entropy_per_atom_degrees([EDGE, TRI], {EDGE: de, TRI: dt})
    total = entropy_total_degree([EDGE, TRI], {EDGE: de.sum() // 2, TRI: dt.sum() // 3}, de + dt)
    assert total >= per_atom
    pooled = total_degree_spec(30, [EDGE, TRI], {EDGE: de.sum() // 2, TRI: dt.sum() // 3}, de + dt)
    assert entropy_combinatorial(pooled).value == pytest.approx(total, rel=1e-9)


def test_matching_count_is_exact_integer():
    spec = single(EDGE, [2, 2, 1, 1])
    # 6 distinguishable stubs pair up in 5!! = 15 ways
    assert exact_matching_count(spec) == 15
