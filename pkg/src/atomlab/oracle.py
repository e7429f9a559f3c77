"""Exhaustive ground truth for tiny instances.

Everything here is deliberately naive: plain enumeration with hard size caps
and an explicit refusal beyond them, so that each answer is easy to trust.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from atomlab._math import binary_entropy
from atomlab.atoms import Atom, compute_symmetry
from atomlab.configuration import (
    Configuration,
    DegreeSpec,
    canonical_tuple,
    check_graphicality,
    enumerate_placements,
)
from atomlab.errors import InfeasibleConstraintError, SpecError

MAX_FREE_PLACEMENTS = 24
MAX_CONSTRAINED_CANDIDATES = 2_000_000
MAX_STUBS = 12
MAX_CANONICAL_PLACEMENTS = 10_000
MAX_MAXENT_PLACEMENTS = 20


class OracleRefusal(SpecError):
    """The instance is beyond the oracle's exhaustive budget."""


# -- brute-force symmetry and placements ---------------------------------------------


def brute_force_automorphisms(atom: Atom) -> list[tuple[int, ...]]:
    """Every permutation of the atom's vertices that preserves edges, directions and labels."""
    edges = Counter(atom.labelled_edges())
    labels = [atom.vertex_label(v) for v in range(atom.order)]
    out = []
    for perm in permutations(range(atom.order)):
        if any(labels[perm[v]] != labels[v] for v in range(atom.order)):
            continue
        image = Counter()
        for u, v, lab in edges.elements():
            a, b = perm[u], perm[v]
            if not atom.directed and a > b:
                a, b = b, a
            image[(a, b, lab)] += 1
        if image == edges:
            out.append(perm)
    return out


def enumerate_subgraphs_bruteforce(n_vertices: int, atom: Atom) -> set:
    """Distinct m-subgraphs of K_N found by mapping the atom every possible way."""
    found = set()
    for image in permutations(range(n_vertices), atom.order):
        verts = frozenset((image[v], atom.vertex_label(v)) for v in range(atom.order))
        edges = []
        for u, v, lab in atom.labelled_edges():
            a, b = image[u], image[v]
            if not atom.directed and a > b:
                a, b = b, a
            edges.append((a, b, lab))
        found.add((verts, frozenset(Counter(edges).items())))
    return found


# -- configuration enumeration -----------------------------------------------------------


def _degrees_of(n_vertices, placements, types_of):
    out = {}
    for p in placements:
        for v, i in p.orbit_membership():
            key = (types_of[(p.atom, i)], v)
            out[key] = out.get(key, 0) + 1
    return out


def enumerate_configurations(n_vertices: int, atoms, constraint=None, count_only: bool = False):
    """All configurations over ``atoms`` meeting ``constraint``.

    ``constraint`` is ``None`` (every subset), a map atom -> exact count, or a
    :class:`DegreeSpec` of exact orbit degrees. Returns a list, or its length
    when ``count_only`` is set.
    """
    atoms = list(atoms)
    pools = {a: list(enumerate_placements(n_vertices, a)) for a in atoms}
    total = sum(len(p) for p in pools.values())

    if constraint is None:
        if total > MAX_FREE_PLACEMENTS:
            raise OracleRefusal(f"{total} placements: 2^{total} subsets is beyond the oracle")
        flat = [p for a in atoms for p in pools[a]]
        if count_only:
            return 2 ** len(flat)
        out = []
        for mask in range(2 ** len(flat)):
            out.append(Configuration(n_vertices, frozenset(p for j, p in enumerate(flat) if mask >> j & 1)))
        return out

    if isinstance(constraint, DegreeSpec):
        spec = constraint
        if spec.n_vertices != n_vertices:
            raise SpecError("constraint has a different vertex count")
        g = check_graphicality(spec)
        if not g.ok:
            return 0 if count_only else []
        counts = g.counts
        types_of = {}
        targets = {}
        for t, (members, degrees) in enumerate(spec.stub_types()):
            for key in members:
                types_of[key] = t
            for v, d in enumerate(degrees):
                if d:
                    targets[(t, v)] = int(d)
        # placements that would exceed a zero target can never appear
        for a in atoms:
            pools[a] = [
                p for p in pools[a]
                if all((types_of[(a, i)], v) in targets for v, i in p.orbit_membership())
            ]
        check = lambda chosen: _degrees_of(n_vertices, chosen, types_of) == targets
    else:
        counts = {a: int(constraint.get(a, 0)) for a in atoms}
        check = None

    budget = 1
    for a in atoms:
        budget *= math.comb(len(pools[a]), counts.get(a, 0))
    if budget > MAX_CONSTRAINED_CANDIDATES:
        raise OracleRefusal(f"{budget} candidate configurations is beyond the oracle")

    found = 0
    out = []
    choices = [list(combinations(pools[a], counts.get(a, 0))) for a in atoms]
    for pick in product(*choices):
        chosen = [p for group in pick for p in group]
        if check is not None and not check(chosen):
            continue
        found += 1
        if not count_only:
            out.append(Configuration(n_vertices, frozenset(chosen)))
    return found if count_only else out


# -- stub matchings -----------------------------------------------------------------------


@dataclass
class MatchingCensus:
    total: int
    self_matched: int
    repeated: int
    valid: int

    @property
    def acceptance(self) -> float:
        return self.valid / self.total if self.total else 0.0


def _stub_lists(spec: DegreeSpec):
    g = check_graphicality(spec)
    if not g.ok:
        raise InfeasibleConstraintError("; ".join(g.reasons))
    stubs_by_type = []
    vertex_of = []
    type_of = {}
    for t, (members, degrees) in enumerate(spec.stub_types()):
        ids = []
        for v, d in enumerate(degrees):
            for _ in range(int(d)):
                ids.append(len(vertex_of))
                vertex_of.append(v)
        stubs_by_type.append(ids)
        for key in members:
            type_of[key] = t
    if len(vertex_of) > MAX_STUBS:
        raise OracleRefusal(f"{len(vertex_of)} stubs is beyond the matching oracle")
    return g.counts, stubs_by_type, vertex_of, type_of


def _matchings(spec: DegreeSpec):
    """Yield each matching as a list of (atom, stub tuple); stubs are distinguishable."""
    counts, stubs_by_type, vertex_of, type_of = _stub_lists(spec)
    slots = [(a, c) for a in spec.atoms for c in range(counts[a])]
    used = set()
    copies = []

    def positions(atom):
        sym = compute_symmetry(atom)
        return [stubs_by_type[type_of[(atom, sym.orbit_of[j])]] for j in range(atom.order)]

    def fill(slot):
        if slot == len(slots):
            yield list(copies)
            return
        atom, c = slots[slot]
        options = positions(atom)

        def assign(j, acc):
            if j == atom.order:
                tup = tuple(acc)
                # one representative per Aut-class, copies of an atom in increasing order
                if canonical_tuple(atom, tup) != tup:
                    return
                if c > 0 and tup <= copies[-1][1]:
                    return
                copies.append((atom, tup))
                used.update(tup)
                yield from fill(slot + 1)
                used.difference_update(tup)
                copies.pop()
                return
            for s in options[j]:
                if s not in used and s not in acc:
                    acc.append(s)
                    yield from assign(j + 1, acc)
                    acc.pop()

        yield from assign(0, [])

    return vertex_of, fill(0)


def exact_matching_count(spec: DegreeSpec) -> int:
    """Number of stub matchings, degenerate ones included.

    Stubs are distinguishable; copies of an atom are unordered and a copy is
    identified up to Aut(m). Dividing by the product of d(v)! over stub types
    gives the stub-matching formula's own convention.
    """
    _, it = _matchings(spec)
    return sum(1 for _ in it)


def matching_census(spec: DegreeSpec) -> MatchingCensus:
    """Splits all matchings into self-matched, repeated-placement and valid ones."""
    vertex_of, it = _matchings(spec)
    total = selfm = rep = 0
    for copies in it:
        total += 1
        seen = set()
        bad_self = False
        bad_rep = False
        for atom, tup in copies:
            verts = tuple(vertex_of[s] for s in tup)
            if len(set(verts)) < len(verts):
                bad_self = True
                continue
            key = (atom, canonical_tuple(atom, verts))
            if key in seen:
                bad_rep = True
            seen.add(key)
        selfm += bad_self
        rep += bad_rep and not bad_self
    return MatchingCensus(total, selfm, rep, total - selfm - rep)


# -- canonical maximum entropy ------------------------------------------------------------


@dataclass
class CanonicalOracleSolution:
    placements: list
    probabilities: np.ndarray
    entropy: float


def _incidence(spec: DegreeSpec):
    n = spec.n_vertices
    types = spec.stub_types()
    type_of = {key: t for t, (members, _) in enumerate(types) for key in members}
    placements = [p for a in spec.atoms for p in enumerate_placements(n, a)]
    rows = []
    for p in placements:
        r = np.zeros(len(types) * n)
        for v, i in p.orbit_membership():
            r[type_of[(p.atom, i)] * n + v] += 1
        rows.append(r)
    a_mat = np.array(rows).T if rows else np.zeros((len(types) * n, 0))
    target = np.concatenate([np.asarray(d, dtype=float) for _, d in types]) if types else np.zeros(0)
    # atoms sharing a multi-member group also carry their own count constraint
    extra = [
        a for a in spec.atoms
        if any(len(g.members) > 1 and any(m[0] == a for m in g.members) for g in spec.groups)
    ]
    for a in extra:
        a_mat = np.vstack([a_mat, [1.0 if p.atom == a else 0.0 for p in placements]])
        target = np.append(target, float(spec.total(a)))
    return placements, a_mat, target


def exact_canonical_solution(spec: DegreeSpec, n_vertices: int | None = None) -> CanonicalOracleSolution:
    """Maximise the sum of binary entropies of p_s subject to the expected degrees."""
    if n_vertices is not None and n_vertices != spec.n_vertices:
        raise SpecError("n_vertices disagrees with the degree spec")
    placements, a_mat, target = _incidence(spec)
    if len(placements) > MAX_CANONICAL_PLACEMENTS:
        raise OracleRefusal(f"{len(placements)} placements is beyond the canonical oracle")
    p = np.full(len(placements), np.nan)
    # forced values: zero targets exclude, saturated targets include
    for r in range(len(target)):
        touch = a_mat[r] > 0
        if target[r] == 0:
            p[touch] = 0.0
    for r in range(len(target)):
        touch = a_mat[r] > 0
        free = touch & np.isnan(p)
        room = float(a_mat[r] @ np.nan_to_num(p)) + float(a_mat[r, free].sum())
        if touch.any() and abs(room - target[r]) < 1e-12:
            p[free] = 1.0
        elif room < target[r] - 1e-9:
            raise InfeasibleConstraintError(f"target {target[r]:g} exceeds what the placements allow")
    free = np.isnan(p)
    fixed = np.nan_to_num(p)
    a_free = a_mat[:, free]
    rhs = target - a_mat[:, ~free] @ fixed[~free]
    # drop linearly dependent rows (grouped totals repeat the count constraints)
    if len(rhs):
        u, sv, _ = np.linalg.svd(a_free, full_matrices=False)
        rank = int(np.sum(sv > 1e-10 * max(sv.max(initial=0.0), 1.0)))
        if np.linalg.norm(rhs - u[:, :rank] @ (u[:, :rank].T @ rhs)) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
            raise InfeasibleConstraintError("degree targets are inconsistent")
        a_free, rhs = u[:, :rank].T @ a_free, u[:, :rank].T @ rhs
    eps = 1e-12

    def neg_entropy(x):
        x = np.clip(x, eps, 1 - eps)
        return float(np.sum(x * np.log(x) + (1 - x) * np.log(1 - x)))

    def grad(x):
        x = np.clip(x, eps, 1 - eps)
        return np.log(x / (1 - x))

    if free.any():
        x0 = np.full(free.sum(), 0.5)
        if len(rhs):
            # least-squares feasible start nudged into the interior
            x0 = np.clip(np.linalg.lstsq(a_free, rhs, rcond=None)[0], 0.01, 0.99)
        res = minimize(
            neg_entropy, x0, jac=grad, method="SLSQP",
            bounds=[(0.0, 1.0)] * len(x0),
            constraints=[{"type": "eq", "fun": lambda x: a_free @ x - rhs, "jac": lambda x: a_free}],
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        if np.max(np.abs(a_free @ res.x - rhs), initial=0.0) > 1e-6:
            raise InfeasibleConstraintError(f"no feasible probabilities found ({res.message})")
        p[free] = res.x
    p = np.clip(p, 0.0, 1.0)
    return CanonicalOracleSolution(placements, p, float(np.sum(binary_entropy(p))))


@dataclass
class MaxEntOverConfigurations:
    entropy: float
    probabilities: np.ndarray
    configurations: np.ndarray
    placements: list


def maxent_over_configurations(spec: DegreeSpec) -> MaxEntOverConfigurations:
    """Maximum-entropy distribution over every configuration, with expected degrees fixed.

    Makes no independence assumption: solves the convex dual over the full
    2^|H| configuration space.
    """
    placements, a_mat, target = _incidence(spec)
    n_p = len(placements)
    if n_p > MAX_MAXENT_PLACEMENTS:
        raise OracleRefusal(f"2^{n_p} configurations is beyond the oracle")
    masks = np.arange(2 ** n_p, dtype=np.int64)
    x = ((masks[:, None] >> np.arange(n_p)) & 1).astype(float)
    deg = x @ a_mat.T
    keep = np.ones(len(x), dtype=bool)
    active = []
    for r in range(len(target)):
        hi = a_mat[r].sum()
        if target[r] == 0 or abs(target[r] - hi) < 1e-12:
            keep &= np.abs(deg[:, r] - target[r]) < 1e-9
        elif 0 < target[r] < hi:
            active.append(r)
        else:
            raise InfeasibleConstraintError(f"target {target[r]:g} outside [0, {hi:g}]")
    x, deg = x[keep], deg[keep][:, active]
    k = target[active]

    def dual(lam):
        e = -deg @ lam
        lz = logsumexp(e)
        w = np.exp(e - lz)
        return lz + lam @ k, k - w @ deg

    lam = np.zeros(len(active))
    if len(active):
        res = minimize(dual, lam, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 10_000})
        lam = res.x
    e = -deg @ lam
    w = np.exp(e - logsumexp(e))
    nz = w > 0
    ent = float(-np.sum(w[nz] * np.log(w[nz])))
    return MaxEntOverConfigurations(ent, w, x, placements)


# -- microcanonical sampler reference -------------------------------------------------------


@dataclass
class SamplerDistribution:
    support: dict
    graphical: bool

    def __len__(self):
        return len(self.support)


def exact_sampler_distribution(spec: DegreeSpec) -> SamplerDistribution:
    """Uniform law over every configuration with exactly the given orbit degrees."""
    if not check_graphicality(spec).ok:
        return SamplerDistribution({}, False)
    configs = enumerate_configurations(spec.n_vertices, spec.atoms, spec)
    if not configs:
        return SamplerDistribution({}, True)
    w = 1.0 / len(configs)
    return SamplerDistribution({c: w for c in configs}, True)
