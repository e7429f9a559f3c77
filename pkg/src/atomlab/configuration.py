"""Subgraph configurations: placements, orbit degrees, graphicality and projection."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Iterable, Iterator, Sequence

import numpy as np

from atomlab.atoms import Atom, AtomTooLargeError, canonical_key, compute_symmetry
from atomlab.errors import SpecError

MOTIF_COUNT_MAX_ORDER = 5


def canonical_tuple(atom: Atom, vertices: Sequence[int]) -> tuple[int, ...]:
    """Lexicographically smallest image of ``vertices`` under Aut(atom)."""
    autos = compute_symmetry(atom).automorphisms
    return min(tuple(vertices[b] for b in beta) for beta in autos)


def canonicalize_array(atom: Atom, tuples: np.ndarray) -> np.ndarray:
    """Row-wise :func:`canonical_tuple` for an ``(P, order)`` integer array."""
    tuples = np.asarray(tuples)
    best = tuples.copy()
    for beta in compute_symmetry(atom).automorphisms[1:]:
        cand = tuples[:, beta]
        # row-wise lexicographic comparison
        diff = cand != best
        first = np.argmax(diff, axis=1)
        rows = np.arange(len(best))
        smaller = diff.any(axis=1) & (cand[rows, first] < best[rows, first])
        best[smaller] = cand[smaller]
    return best


@dataclass(frozen=True)
class Placement:
    """One copy of ``atom`` on the host vertices; atom vertex ``i`` sits on ``vertices[i]``.

    The tuple is stored in Aut-canonical form, so automorphic images compare equal.
    """

    atom: Atom
    vertices: tuple[int, ...]

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        if len(verts) != self.atom.order:
            raise SpecError(
                f"placement of an order-{self.atom.order} atom needs {self.atom.order} vertices"
            )
        if len(set(verts)) != len(verts):
            raise SpecError(f"placement vertices {verts} are not distinct")
        object.__setattr__(self, "vertices", canonical_tuple(self.atom, verts))

    def edges(self) -> list[tuple[int, int, str]]:
        out = []
        t = self.vertices
        for u, v, lab in self.atom.labelled_edges():
            a, b = t[u], t[v]
            if not self.atom.directed and a > b:
                a, b = b, a
            out.append((a, b, lab))
        return out

    def orbit_membership(self) -> Iterator[tuple[int, int]]:
        """Yields ``(host_vertex, orbit_index)`` pairs."""
        orbit_of = compute_symmetry(self.atom).orbit_of
        for i, v in enumerate(self.vertices):
            yield v, orbit_of[i]


@dataclass(frozen=True)
class Configuration:
    n_vertices: int
    placements: frozenset = frozenset()

    def __post_init__(self):
        ps = frozenset(self.placements)
        for p in ps:
            if max(p.vertices) >= self.n_vertices or min(p.vertices) < 0:
                raise SpecError(f"placement {p.vertices} outside 0..{self.n_vertices - 1}")
        object.__setattr__(self, "placements", ps)

    def __len__(self):
        return len(self.placements)

    def __iter__(self):
        return iter(self.sorted())

    def sorted(self) -> list[Placement]:
        return sorted(self.placements, key=lambda p: (canonical_key(p.atom), p.vertices))

    def with_placements(self, extra: Iterable[Placement]) -> "Configuration":
        return Configuration(self.n_vertices, self.placements | frozenset(extra))

    @property
    def atoms(self) -> list[Atom]:
        seen = {}
        for p in self.sorted():
            seen.setdefault(p.atom, None)
        return list(seen)


@dataclass(eq=False)
class OrbitGroup:
    """Orbits ``(atom, orbit_index)`` whose degrees are constrained only through their sum."""

    members: tuple[tuple[Atom, int], ...]
    degrees: np.ndarray

    def __post_init__(self):
        self.members = tuple((a, int(i)) for a, i in self.members)
        if len(set(self.members)) != len(self.members):
            raise SpecError("orbit group lists a member twice")
        self.degrees = np.asarray(self.degrees)


@dataclass(eq=False)
class DegreeSpec:
    """Per-atom, per-orbit degree sequences with optional aggregation groups.

    ``orbit_degrees[atom][i]`` is the sequence for orbit ``i`` or ``None`` when
    that orbit belongs to a group. ``totals`` carries n_m where it cannot be
    read off an ungrouped orbit. Values are expectations in canonical
    ensembles and integers in microcanonical ones.
    """

    n_vertices: int
    orbit_degrees: dict
    groups: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def __post_init__(self):
        od = {}
        for atom, seqs in self.orbit_degrees.items():
            sym = compute_symmetry(atom)
            if isinstance(seqs, np.ndarray) and seqs.ndim == 1:
                seqs = [seqs]
            seqs = list(seqs)
            if len(seqs) != sym.n_orbits:
                raise SpecError(
                    f"{atom!r} has {sym.n_orbits} orbits but {len(seqs)} sequences were given"
                )
            od[atom] = [None if s is None else np.asarray(s) for s in seqs]
        for g in self.groups:
            for atom, i in g.members:
                sym = compute_symmetry(atom)
                if not 0 <= i < sym.n_orbits:
                    raise SpecError(f"orbit {i} out of range for {atom!r}")
                od.setdefault(atom, [None] * sym.n_orbits)
        covered = Counter()
        for g in self.groups:
            covered.update(g.members)
        for atom, seqs in od.items():
            for i, s in enumerate(seqs):
                n_cover = covered[(atom, i)] + (s is not None)
                if n_cover != 1:
                    raise SpecError(
                        f"orbit {i} of {atom!r} must be given exactly once (found {n_cover})"
                    )
                if s is not None and s.shape != (self.n_vertices,):
                    raise SpecError(f"degree sequence for {atom!r} orbit {i} has wrong length")
        for g in self.groups:
            if g.degrees.shape != (self.n_vertices,):
                raise SpecError("group degree sequence has wrong length")
        self.orbit_degrees = od
        self.totals = {a: v for a, v in self.totals.items()}

    @property
    def atoms(self) -> list[Atom]:
        return list(self.orbit_degrees)

    def group_of(self, atom: Atom, orbit: int):
        for g in self.groups:
            if (atom, orbit) in g.members:
                return g
        return None

    def total(self, atom: Atom) -> float:
        """n_m: given explicitly, or read off the first ungrouped orbit."""
        if atom in self.totals:
            return self.totals[atom]
        sym = compute_symmetry(atom)
        for i, s in enumerate(self.orbit_degrees[atom]):
            if s is not None:
                return float(s.sum()) / sym.orbit_sizes[i]
        raise SpecError(f"total count for fully aggregated {atom!r} must be supplied")

    def stub_types(self) -> list[tuple[tuple[tuple[Atom, int], ...], np.ndarray]]:
        """Ungrouped orbits as singleton types, then groups, as ``(members, degrees)``."""
        out = []
        for atom, seqs in self.orbit_degrees.items():
            for i, s in enumerate(seqs):
                if s is not None:
                    out.append((((atom, i),), s))
        for g in self.groups:
            out.append((g.members, g.degrees))
        return out

    def relabelled(self, perm: Sequence[int]) -> "DegreeSpec":
        """Vertex ``v`` becomes ``perm[v]``."""
        inv = np.argsort(np.asarray(perm))
        od = {a: [None if s is None else s[inv] for s in seqs] for a, seqs in self.orbit_degrees.items()}
        groups = [OrbitGroup(g.members, g.degrees[inv]) for g in self.groups]
        return DegreeSpec(self.n_vertices, od, groups, dict(self.totals))


@dataclass
class Graphicality:
    ok: bool
    counts: dict
    reasons: list

    def __bool__(self):
        return self.ok


def check_graphicality(spec: DegreeSpec, integral: bool = True) -> Graphicality:
    """Orbit totals must divide into one common count n_m per atom.

    Group totals must equal the sum of |O| n_m over their members.
    """
    counts: dict = {}
    reasons: list[str] = []
    for atom, seqs in spec.orbit_degrees.items():
        sym = compute_symmetry(atom)
        implied = []
        for i, s in enumerate(seqs):
            if s is None:
                continue
            if np.any(s < 0):
                reasons.append(f"{atom!r} orbit {i}: negative degree")
            if integral and not np.all(np.equal(np.mod(s, 1), 0)):
                reasons.append(f"{atom!r} orbit {i}: non-integer degree")
            tot = float(s.sum())
            size = sym.orbit_sizes[i]
            if integral and round(tot) % size:
                reasons.append(f"{atom!r} orbit {i}: sum {tot:g} not divisible by |O|={size}")
            implied.append(tot / size)
        if atom in spec.totals:
            implied.append(float(spec.totals[atom]))
        if not implied:
            reasons.append(f"{atom!r}: count not determined")
            continue
        if any(abs(x - implied[0]) > 1e-9 * max(1.0, abs(implied[0])) for x in implied):
            reasons.append(f"{atom!r}: orbits imply different counts {implied}")
        n = implied[0]
        counts[atom] = int(round(n)) if integral else n
        if integral and abs(n - round(n)) > 1e-9:
            reasons.append(f"{atom!r}: count {n} is not an integer")
    for g in spec.groups:
        if np.any(g.degrees < 0):
            reasons.append("group has a negative degree")
        if integral and not np.all(np.equal(np.mod(g.degrees, 1), 0)):
            reasons.append("group has a non-integer degree")
        if any(a not in counts for a, _ in g.members):
            continue
        want = sum(compute_symmetry(a).orbit_sizes[i] * counts[a] for a, i in g.members)
        got = float(g.degrees.sum())
        if abs(want - got) > 1e-9 * max(1.0, abs(want)):
            reasons.append(f"group total {got:g} differs from sum of |O| n_m = {want:g}")
    return Graphicality(ok=not reasons, counts=counts, reasons=reasons)


def enumerate_placements(n_vertices: int, atom: Atom) -> Iterator[Placement]:
    """Every m-subgraph of K_N once, by ascending vertex set then canonical tuple."""
    for row in placement_array(n_vertices, atom):
        p = Placement.__new__(Placement)
        object.__setattr__(p, "atom", atom)
        object.__setattr__(p, "vertices", tuple(int(x) for x in row))
        yield p


def _patterns(atom: Atom) -> list[tuple[int, ...]]:
    k = atom.order
    return sorted({canonical_tuple(atom, perm) for perm in permutations(range(k))})


def placement_array(n_vertices: int, atom: Atom) -> np.ndarray:
    """All canonical placement tuples as an ``(|H|, order)`` array in enumeration order."""
    k = atom.order
    if n_vertices < k:
        return np.zeros((0, k), dtype=np.int64)
    # canonical forms of a sorted vertex set follow the same pattern as those of range(k)
    pats = np.array(_patterns(atom), dtype=np.int64)
    combos = np.array(list(combinations(range(n_vertices), k)), dtype=np.int64).reshape(-1, k)
    return combos[:, pats].reshape(-1, k)


def atom_counts(config: Configuration) -> Counter:
    """n_m(C) keyed by canonical key; missing motifs read as zero."""
    return Counter(canonical_key(p.atom) for p in config.placements)


def orbit_degrees(config: Configuration, atoms: Iterable[Atom] = ()) -> DegreeSpec:
    """d_{m,i}(v) for every atom in ``config`` (plus any extra ``atoms``)."""
    n = config.n_vertices
    od = {}
    for a in list(atoms) + config.atoms:
        if a not in od:
            od[a] = [np.zeros(n, dtype=np.int64) for _ in compute_symmetry(a).orbits]
    totals = Counter()
    for p in config.placements:
        seqs = od[p.atom]
        for v, i in p.orbit_membership():
            seqs[i][v] += 1
        totals[p.atom] += 1
    return DegreeSpec(n, od, totals={a: totals[a] for a in od})


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    directed: bool = False
    edges: frozenset = frozenset()
    loops: bool = False
    collapsed: int = field(default=0, compare=False)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            lab = e[2] if len(e) > 2 else None
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise SpecError(f"edge {(u, v)} outside 0..{self.n_vertices - 1}")
            if u == v and not self.loops:
                raise SpecError("self-loop in a graph without loops enabled")
            if not self.directed and u > v:
                u, v = v, u
            norm.add((u, v, lab))
        object.__setattr__(self, "edges", frozenset(norm))

    @property
    def labelled(self) -> bool:
        return any(e[2] is not None for e in self.edges)

    def sorted_edges(self) -> list[tuple[int, int, object]]:
        return sorted(self.edges, key=lambda e: (e[0], e[1], "" if e[2] is None else str(e[2])))

    def neighbours(self) -> list[set[int]]:
        nb = [set() for _ in range(self.n_vertices)]
        for u, v, _ in self.edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb


def project(
    config: Configuration,
    mode: str = "simple",
    loops: bool | None = None,
    directed: bool | None = None,
) -> Graph:
    """Union of placement edge sets.

    ``mode="simple"`` drops edge labels; ``mode="labelled"`` keeps one edge per
    (pair, label), as needed for multilayer graphs. Parallel copies collapse and
    are counted in ``Graph.collapsed``.
    """
    if mode not in ("simple", "labelled"):
        raise SpecError(f"unknown projection mode {mode!r}")
    kinds = {p.atom.directed for p in config.placements}
    if len(kinds) > 1:
        raise SpecError("cannot project a configuration mixing directed and undirected atoms")
    is_directed = kinds.pop() if kinds else bool(directed)
    if directed is not None and kinds and directed != is_directed:
        raise SpecError("requested directedness does not match the atoms")
    edges = set()
    total = 0
    for p in config.placements:
        for a, b, lab in p.edges():
            total += 1
            edges.add((a, b, (lab or None) if mode == "labelled" else None))
    has_loops = any(a == b for a, b, _ in edges)
    if loops is None:
        loops = has_loops
    elif has_loops and not loops:
        raise SpecError("configuration projects to self-loops; pass loops=True")
    return Graph(config.n_vertices, is_directed, frozenset(edges), loops, collapsed=total - len(edges))


def covers(config: Configuration, graph: Graph) -> bool:
    """True iff the projection of ``config`` is exactly ``graph``."""
    if config.n_vertices != graph.n_vertices:
        raise SpecError(
            f"vertex counts differ: configuration {config.n_vertices}, graph {graph.n_vertices}"
        )
    mode = "labelled" if graph.labelled else "simple"
    try:
        g = project(config, mode, loops=True, directed=graph.directed)
    except SpecError:
        return False
    return g.directed == graph.directed and g.edges == graph.edges


def count_motif_in_graph(graph: Graph, atom: Atom) -> int:
    """Number of distinct (not necessarily induced) m-subgraphs of ``graph``.

    Counts embeddings by backtracking and divides by |Aut(m)|. Vertex labels on
    the atom are ignored since graphs carry none; an unlabelled atom edge
    matches any graph edge on that pair.
    """
    if atom.order > MOTIF_COUNT_MAX_ORDER:
        raise AtomTooLargeError(
            f"atom too large: motif counting is capped at order {MOTIF_COUNT_MAX_ORDER}"
        )
    if atom.directed and not graph.directed:
        raise SpecError("directed atom on an undirected graph")
    if graph.directed and not atom.directed:
        raise SpecError("undirected atom on a directed graph")
    sym = compute_symmetry(atom)
    k = atom.order
    if _is_plain_triangle(atom) and not graph.directed:
        return _count_triangles(graph)

    pair_labels: dict[tuple[int, int], set] = {}
    for u, v, lab in graph.edges:
        pair_labels.setdefault((u, v), set()).add(lab)
        if not graph.directed:
            pair_labels.setdefault((v, u), set()).add(lab)
    nb = graph.neighbours()

    need: dict[tuple[int, int], list[str]] = {}
    for u, v, lab in atom.labelled_edges():
        need.setdefault((u, v), []).append(lab)

    def edge_ok(a, b, labs):
        have = pair_labels.get((a, b))
        if not have:
            return False
        named = [l for l in labs if l]
        if not named:
            return True
        return all(l in have for l in named)

    # BFS order so every later atom vertex touches an earlier one
    adj_atom = [set() for _ in range(k)]
    for u, v in atom.edges:
        adj_atom[u].add(v)
        adj_atom[v].add(u)
    order = [0]
    for x in order:
        for y in sorted(adj_atom[x]):
            if y not in order:
                order.append(y)
    anchor = {}
    for pos, x in enumerate(order[1:], 1):
        anchor[x] = next(y for y in order[:pos] if y in adj_atom[x])

    checks = []
    for pos, x in enumerate(order):
        cs = []
        for y in order[: pos + 1]:
            if (x, y) in need:
                cs.append((x, y, need[(x, y)]))
            if x != y and (y, x) in need:
                cs.append((y, x, need[(y, x)]))
        checks.append(cs)

    phi = {}
    used = set()
    count = 0

    def extend(pos):
        nonlocal count
        if pos == k:
            count += 1
            return
        x = order[pos]
        cands = range(graph.n_vertices) if pos == 0 else nb[phi[anchor[x]]]
        for c in cands:
            if c in used:
                continue
            phi[x] = c
            if all(edge_ok(phi[a], phi[b], labs) for a, b, labs in checks[pos]):
                used.add(c)
                extend(pos + 1)
                used.discard(c)
            del phi[x]

    extend(0)
    return count // sym.aut_size


def _is_plain_triangle(atom: Atom) -> bool:
    return (atom.order == 3 and not atom.directed and atom.edge_labels is None
            and len(set(atom.edges)) == 3 and all(u != v for u, v in atom.edges))


def _count_triangles(graph: Graph) -> int:
    # each triangle is seen once from its two lowest vertices
    nb = graph.neighbours()
    total = 0
    for u in range(graph.n_vertices):
        for v in nb[u]:
            if v > u:
                total += sum(1 for w in nb[u] & nb[v] if w > v)
    return total
