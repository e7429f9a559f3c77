from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomlab.atoms import (
    MAX_ORDER,
    Atom,
    canonical_key,
    catalogue_atom,
    compute_symmetry,
    count_placements,
    log_count_placements,
    mu,
    star,
)
from atomlab.errors import AtomTooLargeError, SpecError
from atomlab.oracle import brute_force_automorphisms, enumerate_subgraphs_bruteforce

from strategies import connected_atoms, relabellings


@pytest.mark.parametrize(
    "name, aut, orbits",
    [
        ("edge", 2, [(0, 1)]),
        ("directed-edge", 1, [(0,), (1,)]),
        ("triangle", 6, [(0, 1, 2)]),
        ("path-3", 2, [(0, 2), (1,)]),
        ("4-cycle", 8, [(0, 1, 2, 3)]),
        ("4-clique", 24, [(0, 1, 2, 3)]),
    ],
)
def test_symmetry_examples(name, aut, orbits):
    sym = compute_symmetry(catalogue_atom(name))
    assert sym.aut_size == aut
    assert sorted(sym.orbits) == sorted(orbits)


def test_self_loop_atom():
    sym = compute_symmetry(catalogue_atom("self-loop"))
    assert (sym.order, sym.aut_size, sym.n_orbits) == (1, 1, 1)


def test_star_has_centre_and_leaf_orbits():
    sym = compute_symmetry(star(3))
    assert sorted(sym.orbit_sizes) == [1, 3]
    assert sym.aut_size == 6


def test_canonical_key_examples():
    tri = catalogue_atom("triangle")
    shuffled = Atom(3, ((2, 1), (0, 2), (1, 0)))
    assert canonical_key(tri) == canonical_key(shuffled)
    assert canonical_key(tri) != canonical_key(catalogue_atom("path-3"))
    assert canonical_key(Atom(2, ((0, 1),), directed=True)) == canonical_key(Atom(2, ((1, 0),), directed=True))


def test_labels_are_part_of_the_isomorphism_class():
    plain = catalogue_atom("edge")
    mixed = Atom(2, ((0, 1),), vertex_labels=("a", "b"))
    same = Atom(2, ((0, 1),), vertex_labels=("a", "a"))
    assert canonical_key(plain) != canonical_key(mixed)
    assert compute_symmetry(mixed).aut_size == 1
    assert compute_symmetry(same).aut_size == 2
    red = Atom(2, ((0, 1),), edge_labels=("red",))
    assert canonical_key(red) != canonical_key(plain)


@pytest.mark.parametrize(
    "name, n, want",
    [("edge", 4, 6), ("4-cycle", 4, 3), ("triangle", 3, 1), ("directed-edge", 4, 12), ("triangle", 2, 0)],
)
def test_count_placements_examples(name, n, want):
    assert count_placements(n, catalogue_atom(name)) == want


def test_log_count_placements_matches_exact():
    for name in ("edge", "triangle", "4-clique"):
        a = catalogue_atom(name)
        assert log_count_placements(40, a) == pytest.approx(math.log(count_placements(40, a)), rel=1e-12)
    assert log_count_placements(2, catalogue_atom("triangle")) == -math.inf


@pytest.mark.parametrize("name, want", [("triangle", 1), ("4-cycle", 3), ("path-3", 1), ("edge", 1)])
def test_mu_examples(name, want):
    assert mu(catalogue_atom(name)) == want


def test_order_cap_is_explicit():
    path = Atom(MAX_ORDER, tuple((v, v + 1) for v in range(MAX_ORDER - 1)))
    assert compute_symmetry(path).aut_size == 2
    with pytest.raises(AtomTooLargeError, match="too large"):
        compute_symmetry(star(MAX_ORDER))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(order=3, edges=((0, 1),)),  # disconnected
        dict(order=2, edges=((0, 2),)),
        dict(order=2, edges=((0, 1), (1, 0))),
        dict(order=3, edges=((0, 0), (0, 1), (1, 2))),
        dict(order=0),
    ],
)
def test_invalid_atoms_rejected(kwargs):
    with pytest.raises(SpecError):
        Atom(**kwargs)


def test_catalogue_lookup():
    assert catalogue_atom("clique-4") == catalogue_atom("4-clique")
    assert compute_symmetry(catalogue_atom("star-5")).aut_size == 120
    with pytest.raises(SpecError):
        catalogue_atom("pentagon")


def test_dict_round_trip():
    a = Atom(3, ((0, 1), (1, 2)), directed=True, vertex_labels=("x", "y", "x"), name="walk")
    b = Atom.from_dict(a.to_dict())
    assert a == b and b.name == "walk"


# -- properties ---------------------------------------------------------------------------


@settings(max_examples=40)
@given(connected_atoms(max_order=5), st.integers(0, 7))
def test_count_placements_matches_brute_force(atom, n):
    assert count_placements(n, atom) == len(enumerate_subgraphs_bruteforce(n, atom))


@given(connected_atoms(max_order=6, labels=True))
def test_automorphisms_match_permutation_search(atom):
    sym = compute_symmetry(atom)
    brute = brute_force_automorphisms(atom)
    assert sorted(sym.automorphisms) == sorted(brute)
    assert sym.aut_size == len(brute)


@given(connected_atoms(max_order=6))
def test_mu_times_aut_is_product_of_orbit_factorials(atom):
    sym = compute_symmetry(atom)
    assert mu(sym) * sym.aut_size == math.prod(math.factorial(s) for s in sym.orbit_sizes)


@given(st.data())
def test_canonical_key_is_relabelling_invariant(data):
    atom = data.draw(connected_atoms(max_order=6, labels=True))
    other = data.draw(relabellings(atom))
    assert canonical_key(atom) == canonical_key(other)


@given(connected_atoms(max_order=6))
def test_orbits_are_automorphism_images(atom):
    sym = compute_symmetry(atom)
    for v in range(atom.order):
        images = {beta[v] for beta in sym.automorphisms}
        assert images == set(sym.orbits[sym.orbit_of[v]])
    assert sorted(v for o in sym.orbits for v in o) == list(range(atom.order))
