"""Reading and writing atom specs, ensemble specs, configurations and edge lists."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from atomlab.atoms import Atom, catalogue_atom, compute_symmetry
from atomlab.canonical import CanonicalCountSpec
from atomlab.configuration import Configuration, DegreeSpec, Graph, OrbitGroup, Placement
from atomlab.errors import SpecError

ENSEMBLE_MODES = (
    "canonical-counts",
    "canonical-degrees",
    "micro-counts",
    "micro-degrees",
    "micro-atom-degrees",
    "micro-total-degree",
    "named-model",
)


def load_json(path) -> object:
    """Parse a JSON file; syntax errors become :class:`SpecError` with line and column."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None


def atom_from_json(obj) -> Atom:
    if isinstance(obj, str):
        return catalogue_atom(obj)
    if isinstance(obj, dict):
        return Atom.from_dict(obj)
    raise SpecError(f"an atom is a catalogue name or an object, not {type(obj).__name__}")


class AtomTable:
    """Resolves atom references (catalogue names or names of inline definitions)."""

    def __init__(self, atoms=()):
        self.by_name: dict[str, Atom] = {}
        self.order: list[Atom] = []
        for a in atoms:
            self.add(a)

    def add(self, obj) -> Atom:
        atom = atom_from_json(obj) if not isinstance(obj, Atom) else obj
        name = obj if isinstance(obj, str) else atom.name
        if name is None:
            raise SpecError("inline atom definitions need a name")
        if name in self.by_name and self.by_name[name] != atom:
            raise SpecError(f"atom name {name!r} is defined twice")
        if name not in self.by_name:
            self.by_name[name] = atom
            self.order.append(atom)
        return self.by_name[name]

    def get(self, ref) -> Atom:
        if isinstance(ref, dict):
            return self.add(ref)
        if ref in self.by_name:
            return self.by_name[ref]
        if isinstance(ref, str):
            return self.add(ref)
        raise SpecError(f"unknown atom {ref!r}")

    def name_of(self, atom: Atom) -> str:
        for name, a in self.by_name.items():
            if a == atom:
                return name
        return atom.label


@dataclass
class EnsembleSpec:
    mode: str
    n_vertices: int | None
    atoms: list
    table: AtomTable
    raw: dict
    degree_spec: DegreeSpec | None = None
    counts: dict = field(default_factory=dict)
    canonical_counts: CanonicalCountSpec | None = None
    atom_degrees: dict = field(default_factory=dict)
    total_degrees: np.ndarray | None = None

    def spec_hash(self) -> str:
        return spec_hash(self.raw)


def spec_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _require(raw: dict, key: str):
    if key not in raw:
        raise SpecError(f"ensemble spec is missing {key!r}")
    return raw[key]


def _seq(values, n, what, integral):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n,):
        raise SpecError(f"{what}: expected {n} values, got shape {arr.shape}")
    if integral:
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise SpecError(f"{what}: degrees must be integers")
        return arr.astype(np.int64)
    return arr


def _degree_spec(raw: dict, table: AtomTable, atoms: list, n: int, integral: bool) -> DegreeSpec:
    od = {}
    for name, seqs in (raw.get("degrees") or {}).items():
        atom = table.get(name)
        sym = compute_symmetry(atom)
        if sym.n_orbits == 1 and seqs and not isinstance(seqs[0], (list, type(None))):
            seqs = [seqs]
        od[atom] = [None if s is None else _seq(s, n, f"{name} orbit {i}", integral) for i, s in enumerate(seqs)]
    groups = []
    for g in raw.get("aggregation_groups") or []:
        members = tuple((table.get(m[0]), int(m[1])) for m in _require(g, "members"))
        groups.append(OrbitGroup(members, _seq(_require(g, "degrees"), n, "group degrees", integral)))
    totals = {table.get(k): v for k, v in (raw.get("totals") or {}).items()}
    for a in atoms:
        if a not in od and not any(a == m[0] for g in groups for m in g.members):
            od[a] = [np.zeros(n, dtype=np.int64 if integral else float) for _ in compute_symmetry(a).orbits]
    return DegreeSpec(n, od, groups, totals)


def parse_ensemble(raw: dict, mode: str | None = None) -> EnsembleSpec:
    if not isinstance(raw, dict):
        raise SpecError("an ensemble spec is a JSON object")
    mode = mode or _require(raw, "mode")
    if mode not in ENSEMBLE_MODES:
        raise SpecError(f"unknown mode {mode!r}; choose from {ENSEMBLE_MODES}")
    table = AtomTable()
    atoms = [table.get(a) for a in raw.get("atoms", [])]
    n = raw.get("n_vertices")
    if n is not None:
        n = int(n)
        if n < 0:
            raise SpecError("n_vertices must be non-negative")
    out = EnsembleSpec(mode, n, atoms, table, raw)
    if mode == "named-model":
        _require(raw, "model")
        return out
    if n is None:
        raise SpecError(f"mode {mode!r} needs n_vertices")
    if mode in ("canonical-counts", "micro-counts"):
        counts = {table.get(k): v for k, v in _require(raw, "counts").items()}
        for a in counts:
            if a not in atoms:
                atoms.append(a)
        if mode == "canonical-counts":
            out.canonical_counts = CanonicalCountSpec(atoms, {a: float(v) for a, v in counts.items()})
        else:
            if any(float(v) != int(v) for v in counts.values()):
                raise SpecError("fixed counts must be integers")
            out.counts = {a: int(v) for a, v in counts.items()}
    elif mode in ("canonical-degrees", "micro-degrees"):
        if not raw.get("aggregation_groups"):
            _require(raw, "degrees")
        spec = _degree_spec(raw, table, atoms, n, integral=mode == "micro-degrees")
        for a in spec.atoms:
            if a not in atoms:
                atoms.append(a)
        out.degree_spec = spec
    elif mode == "micro-atom-degrees":
        degs = {table.get(k): _seq(v, n, k, True) for k, v in _require(raw, "degrees").items()}
        for a in degs:
            if a not in atoms:
                atoms.append(a)
        out.atom_degrees = degs
    elif mode == "micro-total-degree":
        counts = {table.get(k): int(v) for k, v in _require(raw, "counts").items()}
        for a in counts:
            if a not in atoms:
                atoms.append(a)
        out.counts = counts
        out.total_degrees = _seq(_require(raw, "degrees"), n, "total degrees", True)
    out.atoms = atoms
    return out


def load_ensemble(path, mode: str | None = None) -> EnsembleSpec:
    return parse_ensemble(load_json(path), mode)


# -- configurations and graphs --------------------------------------------------------------


def write_configuration(config: Configuration, table: AtomTable | None = None) -> str:
    """JSONL text: a header line, then one ``{atom, vertices}`` object per placement."""
    table = table or AtomTable()
    atoms = []
    for a in config.atoms:
        name = table.name_of(a) if table.by_name else (a.name or a.label)
        atoms.append((name, a))
    defs = [dict(a.to_dict(), name=name) for name, a in atoms]
    lines = [json.dumps({"n_vertices": config.n_vertices, "atoms": defs}, sort_keys=True)]
    names = {a: name for name, a in atoms}
    for p in config.sorted():
        lines.append(json.dumps({"atom": names[p.atom], "vertices": list(p.vertices)}, sort_keys=True))
    return "\n".join(lines) + "\n"


def read_configuration(text: str, n_vertices: int | None = None, table: AtomTable | None = None) -> Configuration:
    table = table or AtomTable()
    placements = []
    header_n = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise SpecError(f"line {lineno}, column {err.colno}: {err.msg}") from None
        if "vertices" not in obj:
            header_n = obj.get("n_vertices", header_n)
            for d in obj.get("atoms", []):
                table.add(d)
            continue
        atom = table.get(_require(obj, "atom"))
        placements.append(Placement(atom, tuple(obj["vertices"])))
    n = n_vertices if n_vertices is not None else header_n
    if n is None:
        n = 1 + max((max(p.vertices) for p in placements), default=-1)
    return Configuration(int(n), frozenset(placements))


def write_graph(graph: Graph) -> str:
    lines = [f"# n_vertices={graph.n_vertices} directed={int(graph.directed)}"]
    for u, v, lab in graph.sorted_edges():
        lines.append(f"{u} {v}" if lab is None else f"{u} {v} {lab}")
    return "\n".join(lines) + "\n"


def read_graph(text: str) -> Graph:
    n = None
    directed = False
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    if k == "n_vertices":
                        n = int(v)
                    elif k == "directed":
                        directed = v not in ("0", "false", "False")
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise SpecError(f"line {lineno}: expected 'u v [label]'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise SpecError(f"line {lineno}: vertex ids must be integers") from None
        edges.append((u, v, parts[2] if len(parts) == 3 else None))
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in edges), default=-1)
    loops = any(u == v for u, v, _ in edges)
    return Graph(n, directed, frozenset(edges), loops)
