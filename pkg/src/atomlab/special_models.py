"""Closed-form entropies of named models and the labelled atoms that reproduce them.

Each closed form here has a counterpart built by :func:`build_labelled_atoms`
that the general microcanonical machinery evaluates; the test suite checks
the two against each other.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from atomlab._math import log_factorial, sum_log_factorial
from atomlab.atoms import Atom, compute_symmetry
from atomlab.configuration import DegreeSpec, OrbitGroup
from atomlab.errors import InfeasibleConstraintError, NonGraphicalError, SpecError


@dataclass
class BlockAssignment:
    """Block label of every vertex; labels may be any sortable tokens."""

    block_of: list

    def __post_init__(self):
        self.block_of = list(self.block_of)

    @property
    def blocks(self) -> list:
        return sorted(set(self.block_of))

    @property
    def n_vertices(self) -> int:
        return len(self.block_of)

    def members(self, r) -> np.ndarray:
        return np.array([v for v, b in enumerate(self.block_of) if b == r], dtype=np.int64)

    def index(self) -> np.ndarray:
        pos = {b: i for i, b in enumerate(self.blocks)}
        return np.array([pos[b] for b in self.block_of], dtype=np.int64)


@dataclass
class BipartiteDegrees:
    top: np.ndarray
    bottom: np.ndarray

    def __post_init__(self):
        self.top = np.asarray(self.top, dtype=np.int64)
        self.bottom = np.asarray(self.bottom, dtype=np.int64)
        if np.any(self.top < 0) or np.any(self.bottom < 0):
            raise NonGraphicalError("negative degree")
        if int(self.top.sum()) != int(self.bottom.sum()):
            raise NonGraphicalError(
                f"top degrees sum to {int(self.top.sum())}, bottom to {int(self.bottom.sum())}"
            )

    @property
    def n_edges(self) -> int:
        return int(self.top.sum())


def _excess(d) -> float:
    """<d^2>/<d> - 1, zero for an all-zero sequence."""
    d = np.asarray(d, dtype=float)
    s = d.sum()
    return float((d * d).sum() / s - 1.0) if s > 0 else 0.0


def edge_configuration_entropy(degrees) -> float:
    """Classical configuration-model entropy with self-loop and multi-edge corrections."""
    d = np.asarray(degrees, dtype=np.int64)
    if np.any(d < 0) or int(d.sum()) % 2:
        raise NonGraphicalError("edge degrees must be non-negative with an even sum")
    e = int(d.sum()) // 2
    if e == 0:
        return 0.0
    r = _excess(d)
    return (log_factorial(2 * e) - e * math.log(2) - log_factorial(e) - sum_log_factorial(d)
            - r / 2.0 - r * r / 4.0)


def entropy_bipartite(degrees: BipartiteDegrees) -> float:
    n = degrees.n_edges
    return (log_factorial(n) - sum_log_factorial(degrees.top) - sum_log_factorial(degrees.bottom)
            - 0.5 * _excess(degrees.top) * _excess(degrees.bottom))


def entropy_bipartite_cliques(clique_sizes, degrees, distinguishable: bool = True) -> float:
    """Clique configuration model where every clique is a distinct atom used once.

    With ``distinguishable=False`` cliques of equal size are interchangeable
    and ln(n_k!) is subtracted for every size k.
    """
    sizes = np.asarray(clique_sizes, dtype=np.int64)
    d = np.asarray(degrees, dtype=np.int64)
    if np.any(sizes < 1) or np.any(d < 0):
        raise NonGraphicalError("clique sizes must be positive and degrees non-negative")
    total = int(sizes.sum())
    if int(d.sum()) != total:
        raise NonGraphicalError(f"degrees sum to {int(d.sum())} but the cliques need {total}")
    if total == 0:
        return 0.0
    s = (log_factorial(total) - sum_log_factorial(d) - sum_log_factorial(sizes)
         - 0.5 * float(np.sum(sizes * sizes - sizes)) / total * _excess(d))
    if not distinguishable:
        s -= sum(log_factorial(c) for c in Counter(sizes.tolist()).values())
    return s


def _block_half_edges(counts: np.ndarray) -> np.ndarray:
    # n_r = 2 n_rr + sum over s != r of n_rs
    return counts.sum(axis=1) + np.diag(counts)


def _symmetric_counts(edge_counts, b: int) -> np.ndarray:
    m = np.asarray(edge_counts, dtype=np.int64)
    if m.shape != (b, b):
        raise SpecError(f"edge counts must be a {b}x{b} matrix")
    if np.any(m < 0):
        raise InfeasibleConstraintError("negative edge count")
    if not np.array_equal(m, m.T):
        raise SpecError("undirected block edge counts must be symmetric")
    return m


def _dcsbm_single(idx: np.ndarray, counts: np.ndarray, degrees: np.ndarray) -> float:
    b = counts.shape[0]
    half = _block_half_edges(counts)
    for r in range(b):
        got = int(degrees[idx == r].sum())
        if got != half[r]:
            raise NonGraphicalError(f"block {r}: degrees sum to {got}, edge counts need {half[r]}")
    exc = [_excess(degrees[idx == r]) for r in range(b)]
    s = 0.0
    for r in range(b):
        for t in range(r, b):
            n = int(counts[r, t])
            aut = 2 if r == t else 1
            s -= log_factorial(n) + n * math.log(aut)
            if n == 0:
                continue
            if r == t:
                term = (exc[r] / half[r]) ** 2
            else:
                term = exc[r] * exc[t] / (half[r] * half[t])
            s -= aut * n * n / 2.0 * term
    for r in range(b):
        s += log_factorial(int(half[r]))
        if half[r]:
            s -= counts[r, r] / half[r] * exc[r]
    s -= sum_log_factorial(degrees)
    return s


def entropy_dcsbm(assignment: BlockAssignment, edge_counts, degrees, variant: str = "total") -> float:
    """Degree-corrected SBM with block-level aggregated degrees.

    ``variant="total"`` fixes each vertex's total degree. ``variant="in-out"``
    fixes within-block and between-block degrees separately; pass
    ``degrees=(d_within, d_between)``. Its entropy is the sum of the
    diagonal-only and off-diagonal-only evaluations.
    """
    idx = assignment.index()
    b = len(assignment.blocks)
    counts = _symmetric_counts(edge_counts, b)
    if variant == "total":
        return _dcsbm_single(idx, counts, np.asarray(degrees, dtype=np.int64))
    if variant == "in-out":
        within, between = (np.asarray(x, dtype=np.int64) for x in degrees)
        diag = np.diag(np.diag(counts))
        return _dcsbm_single(idx, diag, within) + _dcsbm_single(idx, counts - diag, between)
    raise SpecError(f"unknown SBM variant {variant!r}")


def entropy_directed_dcsbm(assignment: BlockAssignment, edge_counts, out_degrees, in_degrees) -> float:
    """Directed degree-corrected SBM with block-aggregated out- and in-degrees.

    ``edge_counts[r][s]`` counts edges from block r to block s.
    """
    idx = assignment.index()
    b = len(assignment.blocks)
    counts = np.asarray(edge_counts, dtype=np.int64)
    if counts.shape != (b, b) or np.any(counts < 0):
        raise SpecError(f"edge counts must be a non-negative {b}x{b} matrix")
    d_out = np.asarray(out_degrees, dtype=np.int64)
    d_in = np.asarray(in_degrees, dtype=np.int64)
    n_out = counts.sum(axis=1)
    n_in = counts.sum(axis=0)
    for r in range(b):
        if int(d_out[idx == r].sum()) != n_out[r] or int(d_in[idx == r].sum()) != n_in[r]:
            raise NonGraphicalError(f"block {r}: degree sums disagree with the edge counts")
    exc_out = [_excess(d_out[idx == r]) for r in range(b)]
    exc_in = [_excess(d_in[idx == r]) for r in range(b)]
    s = -sum(log_factorial(int(n)) for n in counts.ravel())
    s += sum(log_factorial(int(n)) for n in n_out) + sum(log_factorial(int(n)) for n in n_in)
    s -= sum_log_factorial(d_out) + sum_log_factorial(d_in)
    for r in range(b):
        for t in range(b):
            n = int(counts[r, t])
            if n:
                s -= n * n / 2.0 * exc_out[r] * exc_in[t] / (n_out[r] * n_in[t])
    # a loop needs the same vertex at both ends of an edge inside one block
    for r in range(b):
        n = int(counts[r, r])
        if n:
            members = idx == r
            s -= n * float(np.sum(d_out[members] * d_in[members])) / (n_out[r] * n_in[r])
    return s


def entropy_multilayer_vertex_coupled(layer_counts, aggregate_degrees=None, mode: str = "coupled",
                                      layer_degrees=None) -> float:
    """Layers coupled through their aggregate degree sequence.

    ``mode="coupled"``: configuration-model entropy at the aggregate degrees
    plus the log multinomial for assigning edges to layers.
    ``mode="uncoupled"``: independent layers, the sum of per-layer entropies
    from ``layer_degrees``.
    """
    counts = [int(n) for n in layer_counts]
    if mode == "uncoupled":
        if layer_degrees is None or len(layer_degrees) != len(counts):
            raise SpecError("uncoupled mode needs one degree sequence per layer")
        for n, d in zip(counts, layer_degrees):
            if int(np.sum(d)) != 2 * n:
                raise NonGraphicalError("layer degrees disagree with the layer edge count")
        return float(sum(edge_configuration_entropy(d) for d in layer_degrees))
    if mode != "coupled":
        raise SpecError(f"unknown multilayer mode {mode!r}")
    d = np.asarray(aggregate_degrees, dtype=np.int64)
    total = sum(counts)
    if int(d.sum()) != 2 * total:
        raise NonGraphicalError(f"aggregate degrees sum to {int(d.sum())}, layers need {2 * total}")
    multinomial = log_factorial(total) - sum(log_factorial(n) for n in counts)
    return edge_configuration_entropy(d) + multinomial


# -- labelled atoms for the general machinery ----------------------------------------------


@dataclass
class LabelledModel:
    kind: str
    atoms: list
    spec: DegreeSpec
    info: dict = field(default_factory=dict)


def labelled_edge(r, s, directed: bool = False) -> Atom:
    """Single edge whose endpoints carry vertex labels r and s."""
    name = f"e[{r}{'>' if directed else ','}{s}]"
    return Atom(2, ((0, 1),), directed=directed, vertex_labels=(str(r), str(s)), name=name)


def layer_edge(layer) -> Atom:
    return Atom(2, ((0, 1),), edge_labels=(str(layer),), name=f"edge[{layer}]")


def edge_pattern(layers) -> Atom:
    """Parallel edges on one vertex pair, one per listed layer."""
    layers = [str(x) for x in layers]
    if len(set(layers)) != len(layers):
        raise SpecError("an edge pattern lists a layer twice")
    return Atom(2, ((0, 1),) * len(layers), edge_labels=tuple(layers), name="edge[" + "+".join(layers) + "]")


def _orbit_of_vertex(atom: Atom, v: int) -> int:
    return compute_symmetry(atom).orbit_of[v]


def build_labelled_atoms(kind: str, **params) -> LabelledModel:
    """Atoms, groups and degrees that express a named model in the general form.

    kinds and parameters:

    - ``bipartite``: ``top``, ``bottom`` degree sequences; vertices are the
      top set followed by the bottom set.
    - ``sbm``: ``assignment`` (block per vertex), ``edge_counts`` (B x B,
      symmetric), ``degrees``; ``variant`` "total" or "in-out" as in
      :func:`entropy_dcsbm`. ``degrees`` may instead be a (B, N) array of
      per-label degrees, which gives the overlapping model.
    - ``directed-sbm``: ``assignment``, ``edge_counts`` (r -> s),
      ``out_degrees``, ``in_degrees``.
    - ``link-community``: ``layer_degrees``, one sequence per edge label.
    - ``multilayer-edge-pattern``: ``patterns`` (tuples of layer labels) and
      ``pattern_degrees``.
    - ``multilayer-vertex-coupled``: ``layer_counts`` and ``aggregate_degrees``.
    """
    builder = _BUILDERS.get(kind)
    if builder is None:
        raise SpecError(f"unsupported model kind {kind!r}; choose from {sorted(_BUILDERS)}")
    return builder(**params)


def _build_bipartite(top, bottom) -> LabelledModel:
    deg = BipartiteDegrees(top, bottom)
    nt, nb = len(deg.top), len(deg.bottom)
    atom = labelled_edge("t", "b")
    zeros_t, zeros_b = np.zeros(nt, dtype=np.int64), np.zeros(nb, dtype=np.int64)
    seqs = [None, None]
    seqs[_orbit_of_vertex(atom, 0)] = np.concatenate([deg.top, zeros_b])
    seqs[_orbit_of_vertex(atom, 1)] = np.concatenate([zeros_t, deg.bottom])
    spec = DegreeSpec(nt + nb, {atom: seqs})
    return LabelledModel("bipartite", [atom], spec, {"n_top": nt, "n_bottom": nb})


def _build_sbm(assignment, edge_counts, degrees, variant: str = "total") -> LabelledModel:
    assignment = assignment if isinstance(assignment, BlockAssignment) else BlockAssignment(assignment)
    blocks = assignment.blocks
    b = len(blocks)
    n = assignment.n_vertices
    counts = _symmetric_counts(edge_counts, b)
    idx = assignment.index()
    atoms = {}
    for r in range(b):
        for t in range(r, b):
            atoms[(r, t)] = labelled_edge(blocks[r], blocks[t])

    def per_label(d):
        d = np.asarray(d, dtype=np.int64)
        if d.ndim == 2:
            return d
        out = np.zeros((b, n), dtype=np.int64)
        out[idx, np.arange(n)] = d
        return out

    groups = []
    totals = {atoms[k]: int(counts[k]) for k in atoms}
    if variant == "total":
        dl = per_label(degrees)
        for r in range(b):
            members = []
            for key, a in atoms.items():
                if key[0] == r:
                    members.append((a, _orbit_of_vertex(a, 0)))
                if key[1] == r and key[0] != r:
                    members.append((a, _orbit_of_vertex(a, 1)))
            groups.append(OrbitGroup(tuple(members), dl[r]))
    elif variant == "in-out":
        within, between = (per_label(d) for d in degrees)
        for r in range(b):
            groups.append(OrbitGroup(((atoms[(r, r)], 0),), within[r]))
            members = []
            for key, a in atoms.items():
                if key[0] == r and key[1] != r:
                    members.append((a, _orbit_of_vertex(a, 0)))
                if key[1] == r and key[0] != r:
                    members.append((a, _orbit_of_vertex(a, 1)))
            if members:
                groups.append(OrbitGroup(tuple(members), between[r]))
            elif np.any(between[r]):
                raise NonGraphicalError("between-block degrees with a single block")
    else:
        raise SpecError(f"unknown SBM variant {variant!r}")
    spec = DegreeSpec(n, {}, groups, totals)
    return LabelledModel("sbm", list(atoms.values()), spec, {"blocks": blocks, "atoms": atoms})


def _build_directed_sbm(assignment, edge_counts, out_degrees, in_degrees) -> LabelledModel:
    assignment = assignment if isinstance(assignment, BlockAssignment) else BlockAssignment(assignment)
    blocks = assignment.blocks
    b = len(blocks)
    n = assignment.n_vertices
    counts = np.asarray(edge_counts, dtype=np.int64)
    if counts.shape != (b, b):
        raise SpecError(f"edge counts must be a {b}x{b} matrix")
    idx = assignment.index()
    atoms = {(r, t): labelled_edge(blocks[r], blocks[t], directed=True) for r in range(b) for t in range(b)}
    d_out = np.zeros((b, n), dtype=np.int64)
    d_in = np.zeros((b, n), dtype=np.int64)
    d_out[idx, np.arange(n)] = np.asarray(out_degrees, dtype=np.int64)
    d_in[idx, np.arange(n)] = np.asarray(in_degrees, dtype=np.int64)
    groups = []
    for r in range(b):
        groups.append(OrbitGroup(tuple((atoms[(r, t)], _orbit_of_vertex(atoms[(r, t)], 0)) for t in range(b)), d_out[r]))
        groups.append(OrbitGroup(tuple((atoms[(t, r)], _orbit_of_vertex(atoms[(t, r)], 1)) for t in range(b)), d_in[r]))
    totals = {a: int(counts[k]) for k, a in atoms.items()}
    spec = DegreeSpec(n, {}, groups, totals)
    return LabelledModel("directed-sbm", list(atoms.values()), spec, {"blocks": blocks, "atoms": atoms})


def _build_link_community(layer_degrees) -> LabelledModel:
    seqs = [np.asarray(d, dtype=np.int64) for d in layer_degrees]
    if not seqs:
        raise SpecError("link-community model needs at least one layer")
    n = len(seqs[0])
    atoms = [layer_edge(l) for l in range(len(seqs))]
    spec = DegreeSpec(n, {a: [d] for a, d in zip(atoms, seqs)})
    return LabelledModel("link-community", atoms, spec)


def _build_edge_patterns(patterns, pattern_degrees) -> LabelledModel:
    if len(patterns) != len(pattern_degrees) or not patterns:
        raise SpecError("need one degree sequence per edge pattern")
    atoms = [edge_pattern(p) for p in patterns]
    if len(set(atoms)) != len(atoms):
        raise SpecError("edge patterns repeat")
    seqs = [np.asarray(d, dtype=np.int64) for d in pattern_degrees]
    spec = DegreeSpec(len(seqs[0]), {a: [d] for a, d in zip(atoms, seqs)})
    return LabelledModel("multilayer-edge-pattern", atoms, spec)


def _build_vertex_coupled(layer_counts, aggregate_degrees) -> LabelledModel:
    atoms = [layer_edge(l) for l in range(len(layer_counts))]
    d = np.asarray(aggregate_degrees, dtype=np.int64)
    group = OrbitGroup(tuple((a, 0) for a in atoms), d)
    spec = DegreeSpec(len(d), {}, [group], {a: int(n) for a, n in zip(atoms, layer_counts)})
    return LabelledModel("multilayer-vertex-coupled", atoms, spec)


_BUILDERS = {
    "bipartite": _build_bipartite,
    "sbm": _build_sbm,
    "directed-sbm": _build_directed_sbm,
    "link-community": _build_link_community,
    "multilayer-edge-pattern": _build_edge_patterns,
    "multilayer-vertex-coupled": _build_vertex_coupled,
}

MODEL_KINDS = tuple(_BUILDERS)
