"""Atomic subgraphs: symmetry groups, orbits, canonical keys and placement counts.

An :class:`Atom` is a small connected pattern on vertices ``0..order-1``.
Directions, vertex labels and edge labels all take part in isomorphism, so
two atoms are the same motif only if some relabelling preserves all three.
Automorphisms are found by exhaustive search over vertex permutations,
pruned only by partial-map consistency, so the result is always the full group.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from atomlab.errors import AtomTooLargeError, SpecError

MAX_ORDER = 10

Edge = tuple[int, int]


def _labels_tuple(labels, size, keys=None) -> tuple[str, ...] | None:
    if labels is None:
        return None
    if isinstance(labels, Mapping):
        if keys is None:
            out = ["" for _ in range(size)]
            for k, lab in labels.items():
                k = int(k)
                if not 0 <= k < size:
                    raise SpecError(f"vertex label key {k} out of range")
                out[k] = "" if lab is None else str(lab)
        else:
            out = ["" if labels.get(k) is None else str(labels[k]) for k in keys]
    else:
        out = ["" if lab is None else str(lab) for lab in labels]
        if len(out) != size:
            raise SpecError(f"expected {size} labels, got {len(out)}")
    if all(lab == "" for lab in out):
        return None
    return tuple(out)


@dataclass(frozen=True)
class Atom:
    """A small connected graph pattern.

    ``edges`` are normalised on construction: undirected pairs are stored as
    ``(min, max)`` and the list is sorted together with ``edge_labels``.
    Parallel edges are allowed only when their labels differ (multilayer
    edge patterns). A loop is admitted only on a single-vertex atom.
    """

    order: int
    edges: tuple[Edge, ...] = ()
    directed: bool = False
    vertex_labels: tuple[str, ...] | None = None
    edge_labels: tuple[str, ...] | None = None
    name: str | None = field(default=None, compare=False)
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        order = int(self.order)
        if order < 1:
            raise SpecError("atom order must be at least 1")
        raw = [tuple(int(x) for x in e) for e in self.edges]
        if any(len(e) != 2 for e in raw):
            raise SpecError("edges must be vertex pairs")
        labels = self.edge_labels
        if isinstance(labels, Mapping):
            labels = [labels.get(tuple(e)) for e in self.edges]
        labels = _labels_tuple(labels, len(raw))
        triples = []
        for k, (u, v) in enumerate(raw):
            if not (0 <= u < order and 0 <= v < order):
                raise SpecError(f"edge {(u, v)} has an endpoint outside 0..{order - 1}")
            if u == v and order != 1:
                raise SpecError("self-loops are only allowed on single-vertex atoms")
            if not self.directed and u > v:
                u, v = v, u
            triples.append((u, v, labels[k] if labels else ""))
        if len(set(triples)) != len(triples):
            raise SpecError("atom has duplicate edges")
        triples.sort()
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "directed", bool(self.directed))
        object.__setattr__(self, "edges", tuple((u, v) for u, v, _ in triples))
        object.__setattr__(
            self, "edge_labels", _labels_tuple([t[2] for t in triples], len(triples))
        )
        object.__setattr__(self, "vertex_labels", _labels_tuple(self.vertex_labels, order))
        if not _is_connected(order, self.edges):
            raise SpecError("atoms must be connected")
        object.__setattr__(
            self,
            "_hash",
            hash((self.order, self.edges, self.directed, self.vertex_labels, self.edge_labels)),
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.name:
            return f"Atom({self.name!r})"
        return f"Atom(order={self.order}, edges={self.edges}, directed={self.directed})"

    @property
    def label(self) -> str:
        return self.name or canonical_key(self).decode()

    def labelled_edges(self) -> tuple[tuple[int, int, str], ...]:
        labs = self.edge_labels or ("",) * len(self.edges)
        return tuple((u, v, lab) for (u, v), lab in zip(self.edges, labs))

    def vertex_label(self, v: int) -> str:
        return self.vertex_labels[v] if self.vertex_labels else ""

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "directed": self.directed,
            "order": self.order,
            "edges": [list(e) for e in self.edges],
        }
        if self.vertex_labels:
            out["vertex_labels"] = list(self.vertex_labels)
        if self.edge_labels:
            out["edge_labels"] = list(self.edge_labels)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "Atom":
        try:
            order = int(d["order"])
            edges = [tuple(e) for e in d.get("edges", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad atom definition: {exc}") from exc
        return cls(
            order=order,
            edges=tuple(edges),
            directed=bool(d.get("directed", False)),
            vertex_labels=d.get("vertex_labels"),
            edge_labels=d.get("edge_labels"),
            name=d.get("name"),
        )


def _is_connected(order: int, edges) -> bool:
    parent = list(range(order))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        parent[find(u)] = find(v)
    return len({find(v) for v in range(order)}) == 1


@dataclass(frozen=True)
class AtomSymmetry:
    order: int
    aut_size: int
    automorphisms: tuple[tuple[int, ...], ...]
    orbits: tuple[tuple[int, ...], ...]
    orbit_of: tuple[int, ...]
    canonical_key: bytes

    @property
    def orbit_sizes(self) -> tuple[int, ...]:
        return tuple(len(o) for o in self.orbits)

    @property
    def n_orbits(self) -> int:
        return len(self.orbits)


def _relation(atom: Atom) -> dict[tuple[int, int], frozenset]:
    rel: dict[tuple[int, int], set] = {}
    for u, v, lab in atom.labelled_edges():
        rel.setdefault((u, v), set()).add(lab)
        if not atom.directed and u != v:
            rel.setdefault((v, u), set()).add(lab)
    return {k: frozenset(s) for k, s in rel.items()}


def _check_cap(atom: Atom):
    if atom.order > MAX_ORDER:
        raise AtomTooLargeError(
            f"atom too large: order {atom.order} exceeds the brute-force cap of {MAX_ORDER}"
        )


def _vertex_colours(atom: Atom, rel) -> list[int]:
    """Colour refinement; colours are ranks of sorted signatures, hence relabelling-invariant."""
    n = atom.order
    empty = frozenset()

    def lab(s):
        return tuple(sorted(s))

    colours = [
        (atom.vertex_label(v), lab(rel.get((v, v), empty))) for v in range(n)
    ]
    ranks = _rank(colours)
    for _ in range(n):
        sigs = []
        for v in range(n):
            out_sig = sorted(
                (lab(rel[(v, u)]), ranks[u]) for u in range(n) if u != v and (v, u) in rel
            )
            in_sig = sorted(
                (lab(rel[(u, v)]), ranks[u]) for u in range(n) if u != v and (u, v) in rel
            )
            sigs.append((ranks[v], tuple(out_sig), tuple(in_sig)))
        new = _rank(sigs)
        if len(set(new)) == len(set(ranks)):
            ranks = new
            break
        ranks = new
    return ranks


def _rank(items) -> list[int]:
    order = {s: i for i, s in enumerate(sorted(set(items)))}
    return [order[s] for s in items]


def _automorphisms(atom: Atom, rel, colours) -> np.ndarray:
    """Every colour-respecting permutation preserving the relation, found level by level.

    ``perms[r, j]`` is the image of vertex ``j``; all partial maps of one
    length are extended together, so the work is vectorised over the search front.
    """
    n = atom.order
    ids = {lab: i + 1 for i, lab in enumerate(sorted(set(rel.values()), key=sorted))}
    mat = np.array([[ids.get(rel.get((u, v)), 0) for v in range(n)] for u in range(n)], dtype=np.int16)
    colours = np.asarray(colours)
    perms = np.zeros((1, 0), dtype=np.int8)
    used = np.zeros(1, dtype=np.int64)  # bitmask of images taken so far
    for k in range(n):
        fronts, masks = [], []
        for c in np.flatnonzero(colours == colours[k]):
            if mat[k, k] != mat[c, c]:
                continue
            keep = (used >> c) & 1 == 0
            if k:
                rows = perms[keep]
                ok = np.all(mat[c, rows] == mat[k, :k], axis=1) & np.all(mat[rows, c] == mat[:k, k], axis=1)
                rows = rows[ok]
                mask = used[keep][ok]
            else:
                rows, mask = perms, used
            if len(rows):
                fronts.append(np.column_stack([rows, np.full(len(rows), c, dtype=np.int8)]))
                masks.append(mask | (1 << int(c)))
        if not fronts:
            return np.zeros((0, n), dtype=np.int8)
        perms, used = np.concatenate(fronts), np.concatenate(masks)
    return perms[np.lexsort(perms.T[::-1])]


def _orbits(autos: np.ndarray) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    # in a group the orbit of v is just the set of images of v
    n = autos.shape[1]
    orbits = tuple(sorted({tuple(np.unique(autos[:, v]).tolist()) for v in range(n)}))
    orbit_of = [0] * n
    for i, orb in enumerate(orbits):
        for v in orb:
            orbit_of[v] = i
    return orbits, tuple(orbit_of)


def _encode(atom: Atom, position: Sequence[int]) -> tuple:
    """Serialise ``atom`` with old vertex ``v`` renamed to ``position[v]``."""
    inv = [0] * atom.order
    for v, p in enumerate(position):
        inv[p] = v
    labels = tuple(atom.vertex_label(inv[p]) for p in range(atom.order))
    edges = []
    for u, v, lab in atom.labelled_edges():
        a, b = position[u], position[v]
        if not atom.directed and a > b:
            a, b = b, a
        edges.append((a, b, lab))
    return labels, tuple(sorted(edges))


def _canonical_encoding(atom: Atom, colours, autos) -> tuple:
    """Smallest encoding over orderings that respect the colour classes.

    Orderings are built one position at a time. Candidates that an
    automorphism fixing the placed prefix maps onto each other lead to the
    same set of encodings, so only one per stabiliser orbit is expanded.
    """
    n = atom.order
    slots = sorted(range(n), key=lambda v: colours[v])
    slot_colour = [colours[v] for v in slots]
    best = None
    position = [0] * n
    used = [False] * n

    def visit(k, stab):
        nonlocal best
        if k == n:
            enc = _encode(atom, position)
            if best is None or enc < best:
                best = enc
            return
        seen = set()
        for c in range(n):
            if used[c] or colours[c] != slot_colour[k] or c in seen:
                continue
            seen.update(np.unique(stab[:, c]).tolist())
            position[c] = k
            used[c] = True
            visit(k + 1, stab[stab[:, c] == c])
            used[c] = False

    visit(0, autos)
    return best


def _key_bytes(atom: Atom, encoding) -> bytes:
    labels, edges = encoding
    payload = [int(atom.directed), atom.order, list(labels), [list(e) for e in edges]]
    return json.dumps(payload, separators=(",", ":")).encode()


@lru_cache(maxsize=None)
def compute_symmetry(atom: Atom) -> AtomSymmetry:
    """Automorphism group, orbit partition and canonical key of ``atom``.

    Raises :class:`AtomTooLargeError` above ``MAX_ORDER`` vertices.
    """
    _check_cap(atom)
    rel = _relation(atom)
    colours = _vertex_colours(atom, rel)
    autos = _automorphisms(atom, rel, colours)
    orbits, orbit_of = _orbits(autos)
    key = _key_bytes(atom, _canonical_encoding(atom, colours, autos))
    return AtomSymmetry(
        order=atom.order,
        aut_size=len(autos),
        automorphisms=tuple(map(tuple, autos.tolist())),
        orbits=orbits,
        orbit_of=orbit_of,
        canonical_key=key,
    )


def canonical_key(atom: Atom) -> bytes:
    """Byte string equal for two atoms iff they are isomorphic (labels and directions kept)."""
    return compute_symmetry(atom).canonical_key


def _sym(x) -> AtomSymmetry:
    return x if isinstance(x, AtomSymmetry) else compute_symmetry(x)


def count_placements(n_vertices: int, symmetry) -> int:
    """|H_{N,m}| = N! / ((N - |m|)! |Aut(m)|), exactly. Zero when N < |m|."""
    sym = _sym(symmetry)
    if n_vertices < sym.order:
        return 0
    return math.perm(n_vertices, sym.order) // sym.aut_size


def log_count_placements(n_vertices: int, symmetry) -> float:
    sym = _sym(symmetry)
    if n_vertices < sym.order:
        return -math.inf
    return (
        math.lgamma(n_vertices + 1)
        - math.lgamma(n_vertices - sym.order + 1)
        - math.log(sym.aut_size)
    )


def mu(symmetry) -> int:
    """Distinct m-subgraphs compatible with a fixed orbit assignment of |m| vertices."""
    sym = _sym(symmetry)
    num = math.prod(math.factorial(s) for s in sym.orbit_sizes)
    return num // sym.aut_size


# -- built-in catalogue -----------------------------------------------------

_STATIC = {
    "edge": dict(order=2, edges=[(0, 1)]),
    "directed-edge": dict(order=2, edges=[(0, 1)], directed=True),
    "path-3": dict(order=3, edges=[(0, 1), (1, 2)]),
    "triangle": dict(order=3, edges=[(0, 1), (1, 2), (0, 2)]),
    "4-cycle": dict(order=4, edges=[(0, 1), (1, 2), (2, 3), (0, 3)]),
    "4-clique": dict(order=4, edges=[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
    "self-loop": dict(order=1, edges=[(0, 0)]),
}

CATALOGUE = tuple(_STATIC) + ("star-k", "clique-k")


def clique(k: int, name: str | None = None) -> Atom:
    if k == 1:
        return Atom(order=1, edges=((0, 0),), name=name or "clique-1")
    edges = tuple((u, v) for u in range(k) for v in range(u + 1, k))
    return Atom(order=k, edges=edges, name=name or f"clique-{k}")


def star(k: int) -> Atom:
    return Atom(order=k + 1, edges=tuple((0, v) for v in range(1, k + 1)), name=f"star-{k}")


def catalogue_atom(name: str) -> Atom:
    """Look up a built-in atom: edge, directed-edge, path-3, triangle, 4-cycle,
    4-clique, self-loop, ``star-k`` (k leaves) or ``clique-k``."""
    if name in _STATIC:
        return Atom(name=name, **_STATIC[name])
    m = re.fullmatch(r"star-(\d+)", name)
    if m and int(m.group(1)) >= 1:
        return star(int(m.group(1)))
    m = re.fullmatch(r"clique-(\d+)", name)
    if m and int(m.group(1)) >= 1:
        return clique(int(m.group(1)))
    raise SpecError(f"unknown catalogue atom {name!r}")
