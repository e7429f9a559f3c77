"""Microcanonical (hard-constraint) ensembles of subgraph configurations.

Counts follow from stub matching: every orbit (or aggregation group) is a
stub type, copies of an atom are assembled by drawing one stub per atom
vertex, and the two correction factors discount matchings that put two stubs
of one copy on the same vertex or that produce the same placement twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from atomlab._math import log_binomial, log_factorial, log_poisson_self, sum_log_factorial
from atomlab.atoms import Atom, compute_symmetry, count_placements
from atomlab.canonical import entropy_degree_corrected
from atomlab.configuration import DegreeSpec, OrbitGroup, check_graphicality
from atomlab.errors import InfeasibleConstraintError, NonGraphicalError, SpecError

MicroDegreeSpec = DegreeSpec


def log_count_fixed_counts(n_vertices: int, atoms, counts) -> float:
    """ln of the number of configurations with exactly ``counts[m]`` copies of each atom."""
    total = 0.0
    for atom in atoms:
        n = int(counts.get(atom, 0))
        h = count_placements(n_vertices, atom)
        if n < 0 or n > h:
            raise InfeasibleConstraintError(f"{n} copies of {atom!r} do not fit in {h} placements")
        total += log_binomial(h, n)
    return total


# -- stub-type bookkeeping -------------------------------------------------------


@dataclass
class StubType:
    members: tuple
    degrees: np.ndarray
    size: int  # T_t = sum over members of |O| n_m
    shares: dict  # (atom, orbit) -> |O| n_m / T_t


@dataclass
class _Layout:
    counts: dict
    types: list
    type_of: dict = field(default_factory=dict)


def _layout(spec: DegreeSpec) -> _Layout:
    g = check_graphicality(spec, integral=True)
    if not g.ok:
        raise NonGraphicalError("; ".join(g.reasons))
    counts = g.counts
    types = []
    type_of = {}
    for members, degrees in spec.stub_types():
        sizes = {key: compute_symmetry(key[0]).orbit_sizes[key[1]] * counts[key[0]] for key in members}
        big_t = sum(sizes.values())
        shares = {key: (s / big_t if big_t else 0.0) for key, s in sizes.items()}
        for key in members:
            type_of[key] = len(types)
        types.append(StubType(members, np.asarray(degrees, dtype=np.int64), int(big_t), shares))
    return _Layout(counts, types, type_of)


def split_probabilities(spec: DegreeSpec) -> dict:
    """Share p_{m,i} = |O_{m,i}| n_m / T of every orbit within its stub type."""
    lay = _layout(spec)
    out = {}
    for t in lay.types:
        out.update(t.shares)
    return out


def aggregate_orbits_micro(spec: DegreeSpec, members, degrees=None) -> DegreeSpec:
    """Replace the listed orbits by one group with shared degree d(v).

    When ``degrees`` is omitted the shared sequence is the sum of the
    members' current sequences, so the result is a relaxation of ``spec``.
    """
    members = tuple((a, int(i)) for a, i in members)
    lay = _layout(spec)
    involved = set()
    for key in members:
        if key not in lay.type_of:
            raise SpecError(f"orbit {key[1]} of {key[0]!r} has no degrees here")
        involved.add(lay.type_of[key])
    # pull in every member of groups we are merging so groups stay disjoint
    merged = []
    for t in sorted(involved):
        for key in lay.types[t].members:
            if key not in merged:
                merged.append(key)
    if degrees is None:
        degrees = sum(lay.types[t].degrees for t in sorted(involved))
    degrees = np.asarray(degrees)
    want = sum(compute_symmetry(a).orbit_sizes[i] * lay.counts[a] for a, i in merged)
    if int(degrees.sum()) != want:
        raise InfeasibleConstraintError(
            f"shared degrees sum to {int(degrees.sum())}, the group needs {want}"
        )
    od = {a: list(seqs) for a, seqs in spec.orbit_degrees.items()}
    for a, i in merged:
        od[a][i] = None
    groups = [g for g in spec.groups if not any(k in merged for k in g.members)]
    groups.append(OrbitGroup(tuple(merged), degrees))
    totals = dict(spec.totals)
    for a, _ in merged:
        totals[a] = lay.counts[a]
    return DegreeSpec(spec.n_vertices, od, groups, totals)


# -- the three factors ------------------------------------------------------------


def log_stub_matchings(spec: DegreeSpec) -> float:
    """ln of the number of stub matchings, with Aut-equivalent assemblies identified."""
    lay = _layout(spec)
    total = 0.0
    for atom, n in lay.counts.items():
        total -= log_factorial(n) + n * math.log(compute_symmetry(atom).aut_size)
    for t in lay.types:
        total += log_factorial(t.size) - sum_log_factorial(t.degrees)
    return total


def _type_moments(t: StubType) -> tuple[float, float]:
    d = t.degrees.astype(float)
    return float(d.mean()), float((d * d).mean())


def _ratio_minus_one(t: StubType) -> float:
    m1, m2 = _type_moments(t)
    return m2 / m1 - 1.0 if m1 > 0 else 0.0


def _self_match_terms(lay: _Layout) -> dict:
    terms = {}
    for atom, n in lay.counts.items():
        if n == 0:
            continue
        sym = compute_symmetry(atom)
        # orbits of one atom drawn from one stub type move together
        q_by_type: dict[int, float] = {}
        own = 0.0
        for i in range(sym.n_orbits):
            t = lay.type_of[(atom, i)]
            q = lay.types[t].shares[(atom, i)]
            q_by_type[t] = q_by_type.get(t, 0.0) + q
            own += q * _ratio_minus_one(lay.types[t])
        square = 0.0
        variance = 0.0
        for t, q in q_by_type.items():
            d = lay.types[t].degrees.astype(float)
            square = square + q * d
            variance += float(np.mean(d * q * (1.0 - q)))
        mean_d = float(square.mean())
        if mean_d <= 0:
            raise InfeasibleConstraintError(f"{atom!r} has copies but zero mean degree")
        second = float(np.mean(square * square)) + variance
        terms[atom] = -0.5 * (sym.order * (second / mean_d - 1.0) - own)
    return terms


def log_self_match_correction(spec: DegreeSpec) -> float:
    """ln P_c under vertex independence, for ungrouped and grouped orbits alike."""
    return float(sum(_self_match_terms(_layout(spec)).values()))


class MultiSubgraphCorrection(NamedTuple):
    value: float
    per_atom: dict
    negligible: dict

    def __float__(self):
        return self.value


def _multi_subgraph_terms(lay: _Layout) -> dict:
    terms = {}
    for atom, n in lay.counts.items():
        if n == 0:
            continue
        sym = compute_symmetry(atom)
        log_mag = math.log(sym.aut_size) + 2 * math.log(n) - math.log(2)
        zero = False
        for i, size in enumerate(sym.orbit_sizes):
            t = lay.types[lay.type_of[(atom, i)]]
            r = _ratio_minus_one(t)
            if r <= 0:
                zero = True
                break
            log_mag += size * (math.log(r) - math.log(t.size))
        terms[atom] = 0.0 if zero else -math.exp(log_mag)
    return terms


def log_multi_subgraph_correction(spec: DegreeSpec) -> MultiSubgraphCorrection:
    """ln P_ml, assuming placements repeat independently and rarely.

    Atoms with more than two vertices are flagged negligible: their term falls
    off as a power of 1/N. The value is still computed and included.
    """
    terms = _multi_subgraph_terms(_layout(spec))
    flags = {a: a.order > 2 for a in terms}
    return MultiSubgraphCorrection(float(sum(terms.values())), terms, flags)


class CombinatorialEntropy(NamedTuple):
    value: float
    matching: float
    self_match: float
    multi_subgraph: float
    negligible: dict

    def __float__(self):
        return self.value


def entropy_combinatorial(spec: DegreeSpec) -> CombinatorialEntropy:
    lay = _layout(spec)
    match = log_stub_matchings(spec)
    pc = float(sum(_self_match_terms(lay).values()))
    ml_terms = _multi_subgraph_terms(lay)
    pml = float(sum(ml_terms.values()))
    return CombinatorialEntropy(match + pc + pml, match, pc, pml, {a: a.order > 2 for a in ml_terms})


class AnalyticEntropy(NamedTuple):
    value: float
    canonical: float
    poisson: float
    last_term: float

    def __float__(self):
        return self.value


def entropy_analytic(spec: DegreeSpec, l_max: int = 10) -> AnalyticEntropy:
    """Canonical entropy at k = d, minus the Poisson fluctuation term of every degree constraint."""
    lay = _layout(spec)
    real = DegreeSpec(
        spec.n_vertices,
        {a: [None if s is None else np.asarray(s, dtype=float) for s in seqs] for a, seqs in spec.orbit_degrees.items()},
        [OrbitGroup(g.members, np.asarray(g.degrees, dtype=float)) for g in spec.groups],
        {a: float(n) for a, n in lay.counts.items()},
    )
    series = entropy_degree_corrected(real, l_max=l_max)
    poisson = sum(log_poisson_self(t.degrees) for t in lay.types)
    return AnalyticEntropy(series.value + poisson, series.value, poisson, series.last_term)


# -- per-vertex and per-placement pieces --------------------------------------------


def log_self_match_vertex(spec: DegreeSpec, vertex: int) -> float:
    """Exact ln P_c for one vertex of an ungrouped spec (no Stirling expansion)."""
    if spec.groups:
        raise SpecError("the per-vertex factor is defined for ungrouped orbits")
    lay = _layout(spec)
    total = 0.0
    for atom, n in lay.counts.items():
        sym = compute_symmetry(atom)
        ds = [int(spec.orbit_degrees[atom][i][vertex]) for i in range(sym.n_orbits)]
        if sum(ds) > n:
            return -math.inf
        total += log_factorial(n) - log_factorial(n - sum(ds))
        for d, size in zip(ds, sym.orbit_sizes):
            total += log_factorial(size * n - d) + d * math.log(size) - log_factorial(size * n)
    return total


def placement_repeat_probability(spec: DegreeSpec, atom: Atom, vertices) -> float:
    """P_2(s): chance that stub matching creates placement ``vertices`` at least twice."""
    if spec.groups:
        raise SpecError("the repeat probability is defined for ungrouped orbits")
    lay = _layout(spec)
    n = lay.counts.get(atom, 0)
    if n < 2:
        return 0.0
    sym = compute_symmetry(atom)
    log_p = 2 * math.log(sym.aut_size) - math.log(2) + log_factorial(n) - log_factorial(n - 2)
    for size in sym.orbit_sizes:
        log_p += log_factorial(size * (n - 2)) - log_factorial(size * n)
    for j, v in enumerate(vertices):
        d = int(spec.orbit_degrees[atom][sym.orbit_of[j]][v])
        if d < 2:
            return 0.0
        log_p += log_factorial(d) - log_factorial(d - 2)
    return math.exp(log_p)


# -- relaxed variants ---------------------------------------------------------------


def _relaxed_terms(counts: dict, degrees: np.ndarray, weights: dict, big_t: int) -> float:
    d = degrees.astype(float)
    m1 = float(d.mean())
    r = float((d * d).mean()) / m1 - 1.0 if m1 > 0 else 0.0
    total = 0.0
    for atom, n in counts.items():
        if n == 0:
            continue
        sym = compute_symmetry(atom)
        if r > 0:
            total -= sym.aut_size * n * n / 2.0 * (r / big_t) ** sym.order
        total -= (sym.order - 1) / 2.0 * weights[atom] * r
    return total


def _check_atom_total(atom, n, seq):
    if int(np.sum(seq)) != atom.order * n:
        raise NonGraphicalError(
            f"{atom!r}: degrees sum to {int(np.sum(seq))} but |m| n = {atom.order * n}"
        )


def entropy_per_atom_degrees(atoms, degrees: dict) -> float:
    """Entropy when only d_m(v), the sum over an atom's orbits, is fixed."""
    total = 0.0
    for atom in atoms:
        d = np.asarray(degrees[atom], dtype=np.int64)
        if np.any(d < 0):
            raise NonGraphicalError(f"{atom!r}: negative degree")
        k = atom.order
        if int(d.sum()) % k:
            raise NonGraphicalError(f"{atom!r}: degree sum {int(d.sum())} not divisible by {k}")
        n = int(d.sum()) // k
        _check_atom_total(atom, n, d)
        if n == 0:
            continue
        sym = compute_symmetry(atom)
        total += -log_factorial(n) - n * math.log(sym.aut_size)
        total += log_factorial(k * n) - sum_log_factorial(d)
        total += _relaxed_terms({atom: n}, d, {atom: 1.0}, k * n)
    return total


def entropy_total_degree(atoms, counts: dict, degrees) -> float:
    """Entropy when only the total number of atom slots per vertex is fixed."""
    d = np.asarray(degrees, dtype=np.int64)
    if np.any(d < 0):
        raise NonGraphicalError("negative degree")
    big_t = sum(a.order * int(counts.get(a, 0)) for a in atoms)
    if int(d.sum()) != big_t:
        raise NonGraphicalError(f"degrees sum to {int(d.sum())} but the atoms need {big_t} slots")
    if big_t == 0:
        return 0.0
    total = log_factorial(big_t) - sum_log_factorial(d)
    weights = {}
    for a in atoms:
        n = int(counts.get(a, 0))
        total -= log_factorial(n) + n * math.log(compute_symmetry(a).aut_size)
        weights[a] = a.order * n / big_t
    total += _relaxed_terms({a: int(counts.get(a, 0)) for a in atoms}, d, weights, big_t)
    return total


def per_atom_degree_spec(n_vertices: int, atoms, degrees: dict) -> DegreeSpec:
    """General-machinery spec with every atom's orbits pooled into one group."""
    groups = []
    totals = {}
    for a in atoms:
        d = np.asarray(degrees[a], dtype=np.int64)
        groups.append(OrbitGroup(tuple((a, i) for i in range(compute_symmetry(a).n_orbits)), d))
        totals[a] = int(d.sum()) // a.order
    return DegreeSpec(n_vertices, {}, groups, totals)


def total_degree_spec(n_vertices: int, atoms, counts: dict, degrees) -> DegreeSpec:
    """General-machinery spec with every orbit of every atom in one group."""
    members = tuple((a, i) for a in atoms for i in range(compute_symmetry(a).n_orbits))
    return DegreeSpec(
        n_vertices, {}, [OrbitGroup(members, np.asarray(degrees, dtype=np.int64))],
        {a: int(counts.get(a, 0)) for a in atoms},
    )
