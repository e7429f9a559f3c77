"""Samplers for canonical (independent placements) and microcanonical (stub matching) ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from atomlab.atoms import Atom, compute_symmetry, count_placements
from atomlab.canonical import (
    CanonicalCountSpec,
    ExactCanonicalSolution,
    check_sparse_feasibility,
    effective_degrees,
    placement_probability_homogeneous,
    solve_multipliers_exact,
    sparse_probabilities,
)
from atomlab.configuration import (
    Configuration,
    DegreeSpec,
    Graph,
    Placement,
    canonicalize_array,
    check_graphicality,
    placement_array,
    project,
)
from atomlab.errors import NonGraphicalError, SamplerExhaustedError, SpecError
from atomlab.microcanonical import log_multi_subgraph_correction, log_self_match_correction

ALGORITHMS = ("PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937")
ENUMERATE_LIMIT = 2_000_000


@dataclass(frozen=True)
class RandomSource:
    """Seeded bit generator; the algorithm name is recorded next to every output."""

    seed: int
    algorithm: str = "PCG64"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SpecError(f"unknown generator {self.algorithm!r}; choose from {ALGORITHMS}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise SpecError("seed must fit in 64 unsigned bits")

    def _make(self, seq: np.random.SeedSequence) -> np.random.Generator:
        return np.random.Generator(getattr(np.random, self.algorithm)(seq))

    def generator(self) -> np.random.Generator:
        return self._make(np.random.SeedSequence(int(self.seed)))

    def spawn(self, n: int) -> list[np.random.Generator]:
        """Independent streams, one per sample, stable under parallel execution."""
        return [self._make(s) for s in np.random.SeedSequence(int(self.seed)).spawn(n)]


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RandomSource(0 if rng is None else int(rng)).generator()
    raise SpecError(f"cannot use {type(rng).__name__} as a random source")


def _placement(atom: Atom, row) -> Placement:
    # rows handed in here are already canonical
    p = Placement.__new__(Placement)
    object.__setattr__(p, "atom", atom)
    object.__setattr__(p, "vertices", tuple(int(x) for x in row))
    return p


def configuration_from_arrays(n_vertices: int, rows: dict) -> Configuration:
    """Build a configuration from per-atom arrays of canonical placement tuples."""
    ps = [_placement(a, r) for a, arr in rows.items() for r in arr]
    return Configuration(n_vertices, frozenset(ps))


class _PlacementCache:
    def __init__(self):
        self._arrays = {}

    def get(self, n: int, atom: Atom) -> np.ndarray:
        key = (n, atom)
        if key not in self._arrays:
            self._arrays[key] = placement_array(n, atom)
        return self._arrays[key]


_CACHE = _PlacementCache()


def _distinct_rows_mask(rows: np.ndarray) -> np.ndarray:
    s = np.sort(rows, axis=1)
    return np.all(s[:, 1:] != s[:, :-1], axis=1)


def uniform_placements(n_vertices: int, atom: Atom, count: int, gen: np.random.Generator) -> np.ndarray:
    """``count`` distinct m-subgraphs of K_N, uniformly without replacement."""
    k = atom.order
    h = count_placements(n_vertices, atom)
    if count > h:
        raise SpecError(f"cannot choose {count} of {h} placements")
    if count == 0:
        return np.zeros((0, k), dtype=np.int64)
    if h <= ENUMERATE_LIMIT and (count * 4 > h or h <= 50_000):
        idx = gen.choice(h, size=count, replace=False)
        return _CACHE.get(n_vertices, atom)[idx]
    # sequential rejection: a uniform injective tuple hits each m-subgraph with equal chance
    chosen: dict[tuple, None] = {}
    while len(chosen) < count:
        batch = max(2 * (count - len(chosen)), 64)
        raw = gen.integers(0, n_vertices, size=(batch, k))
        raw = raw[_distinct_rows_mask(raw)]
        for row in map(tuple, canonicalize_array(atom, raw)):
            if row not in chosen:
                chosen[row] = None
                if len(chosen) == count:
                    break
    return np.array(list(chosen), dtype=np.int64).reshape(-1, k)


# -- canonical ------------------------------------------------------------------------


class CanonicalSampler:
    """Independent-placement sampler; probabilities are computed once and reused."""

    def __init__(self, spec, n_vertices: int | None = None, method: str = "exact",
                 solution: ExactCanonicalSolution | None = None):
        self.spec = spec
        if isinstance(spec, CanonicalCountSpec):
            if n_vertices is None:
                raise SpecError("homogeneous sampling needs n_vertices")
            self.n_vertices = n_vertices
            self.homogeneous = {
                a: (count_placements(n_vertices, a), placement_probability_homogeneous(spec, n_vertices, a))
                for a in spec.atoms
            }
            return
        if not isinstance(spec, DegreeSpec):
            raise SpecError("canonical sampling needs expected counts or expected degrees")
        if n_vertices is not None and n_vertices != spec.n_vertices:
            raise SpecError("n_vertices disagrees with the degree spec")
        self.n_vertices = spec.n_vertices
        self.homogeneous = None
        if method == "exact":
            sol = solution or solve_multipliers_exact(spec)
            self.rows = sol.placements
            self.probs = sol.probabilities
        elif method == "sparse":
            check_sparse_feasibility(spec)
            eff = effective_degrees(spec)
            self.rows = {a: _CACHE.get(self.n_vertices, a) for a in spec.atoms}
            self.probs = {a: sparse_probabilities(spec, a, r, eff) for a, r in self.rows.items()}
        else:
            raise SpecError(f"unknown canonical sampling method {method!r}")

    def sample_arrays(self, gen: np.random.Generator) -> dict:
        out = {}
        if self.homogeneous is not None:
            for a, (h, p) in self.homogeneous.items():
                count = int(gen.binomial(h, p)) if 0 < p < 1 else (h if p >= 1 else 0)
                out[a] = uniform_placements(self.n_vertices, a, count, gen)
            return out
        for a, rows in self.rows.items():
            out[a] = rows[gen.random(len(rows)) < self.probs[a]]
        return out

    def sample(self, gen: np.random.Generator) -> Configuration:
        return configuration_from_arrays(self.n_vertices, self.sample_arrays(gen))


def sample_canonical(spec, n_vertices: int | None = None, rng=None, method: str = "exact") -> Configuration:
    """One draw from a canonical ensemble.

    Homogeneous specs use the two-stage shortcut: a Binomial count, then that
    many distinct placements chosen uniformly. Degree specs include each
    placement independently with its exact (or sparse-limit) probability.
    """
    return CanonicalSampler(spec, n_vertices, method).sample(_generator(rng))


# -- microcanonical ----------------------------------------------------------------------


class SampleResult(NamedTuple):
    configuration: Configuration
    restarts: int


@dataclass
class AttemptStats:
    attempts: int = 0
    accepted: int = 0
    self_matched: int = 0
    repeated: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


@dataclass
class MicrocanonicalSampler:
    """Stub matching with full restart on any self-match or repeated placement.

    Each stub type (an orbit, or a pooled aggregation group) is shuffled and
    dealt into the atom slots that need it, which makes every matching of
    distinguishable stubs equally likely.
    """

    spec: DegreeSpec
    stats: AttemptStats = field(default_factory=AttemptStats)

    def __post_init__(self):
        g = check_graphicality(self.spec)
        if not g.ok:
            raise NonGraphicalError("; ".join(g.reasons))
        self.counts = g.counts
        n = self.spec.n_vertices
        types = self.spec.stub_types()
        type_of = {key: t for t, (members, _) in enumerate(types) for key in members}
        self.stubs = [np.repeat(np.arange(n), np.asarray(d, dtype=np.int64)) for _, d in types]
        # slot layout: for each type, which (atom, copy, position) cells it fills
        self.cells = [[] for _ in types]
        for a in self.spec.atoms:
            sym = compute_symmetry(a)
            for j in range(a.order):
                self.cells[type_of[(a, sym.orbit_of[j])]].append((a, j))
        for t, cells in enumerate(self.cells):
            need = sum(self.counts[a] for a, _ in cells)
            if need != len(self.stubs[t]):
                raise NonGraphicalError(f"stub type {t} has {len(self.stubs[t])} stubs for {need} slots")

    def attempt(self, gen: np.random.Generator):
        """One matching; returns per-atom placement arrays, or None if it must be redone."""
        tuples = {a: np.empty((self.counts[a], a.order), dtype=np.int64) for a in self.spec.atoms}
        for t, cells in enumerate(self.cells):
            deck = gen.permutation(self.stubs[t])
            pos = 0
            for a, j in cells:
                n = self.counts[a]
                tuples[a][:, j] = deck[pos:pos + n]
                pos += n
        self.stats.attempts += 1
        out = {}
        for a, rows in tuples.items():
            if a.order > 1 and len(rows) and not np.all(_distinct_rows_mask(rows)):
                self.stats.self_matched += 1
                return None
        for a, rows in tuples.items():
            canon = canonicalize_array(a, rows) if len(rows) else rows
            if len(np.unique(canon, axis=0)) < len(canon):
                self.stats.repeated += 1
                return None
            out[a] = canon
        self.stats.accepted += 1
        return out

    def attempt_batch(self, gen: np.random.Generator, size: int) -> list:
        """``size`` independent matchings at once; returns the accepted ones in attempt order.

        Same law as calling :meth:`attempt` ``size`` times, but vectorised
        across attempts, which pays off for small specs drawn many times.
        """
        n = self.spec.n_vertices
        if any(float(n) ** a.order >= 2.0 ** 62 for a in self.spec.atoms):
            return [r for r in (self.attempt(gen) for _ in range(size)) if r is not None]
        tuples = {a: np.empty((size, self.counts[a], a.order), dtype=np.int64) for a in self.spec.atoms}
        for t, cells in enumerate(self.cells):
            decks = gen.permuted(np.tile(self.stubs[t], (size, 1)), axis=1)
            pos = 0
            for a, j in cells:
                c = self.counts[a]
                tuples[a][:, :, j] = decks[:, pos:pos + c]
                pos += c
        bad_self = np.zeros(size, dtype=bool)
        bad_rep = np.zeros(size, dtype=bool)
        canon = {}
        for a, rows in tuples.items():
            c = self.counts[a]
            if c == 0:
                canon[a] = rows
                continue
            if a.order > 1:
                s = np.sort(rows, axis=2)
                bad_self |= np.any(s[:, :, 1:] == s[:, :, :-1], axis=(1, 2))
            canon[a] = canonicalize_array(a, rows.reshape(-1, a.order)).reshape(rows.shape)
            codes = np.sort(canon[a] @ (n ** np.arange(a.order - 1, -1, -1, dtype=np.int64)), axis=1)
            bad_rep |= np.any(codes[:, 1:] == codes[:, :-1], axis=1)
        ok = ~bad_self & ~bad_rep
        self.stats.attempts += size
        self.stats.self_matched += int(bad_self.sum())
        self.stats.repeated += int((bad_rep & ~bad_self).sum())
        self.stats.accepted += int(ok.sum())
        return [{a: canon[a][i] for a in canon} for i in np.flatnonzero(ok)]

    def sample_arrays(self, gen: np.random.Generator, max_restarts: int = 10 ** 6):
        for restarts in range(max_restarts + 1):
            rows = self.attempt(gen)
            if rows is not None:
                return rows, restarts
        raise SamplerExhaustedError(
            f"no valid matching in {max_restarts + 1} attempts "
            f"(observed acceptance {self.stats.acceptance:.3g})",
            attempts=self.stats.attempts,
            accepted=self.stats.accepted,
        )

    def sample(self, gen: np.random.Generator, max_restarts: int = 10 ** 6) -> SampleResult:
        rows, restarts = self.sample_arrays(gen, max_restarts)
        return SampleResult(configuration_from_arrays(self.spec.n_vertices, rows), restarts)


def sample_microcanonical(spec: DegreeSpec, rng=None, max_restarts: int = 10 ** 6) -> SampleResult:
    """Uniform draw among configurations with exactly the given orbit degrees."""
    return MicrocanonicalSampler(spec).sample(_generator(rng), max_restarts)


def sample_fixed_counts(n_vertices: int, counts: dict, rng=None) -> Configuration:
    """Uniform draw among configurations with exactly ``counts[m]`` copies of each atom."""
    gen = _generator(rng)
    rows = {a: uniform_placements(n_vertices, a, int(c), gen) for a, c in counts.items()}
    return configuration_from_arrays(n_vertices, rows)


def predicted_acceptance(spec: DegreeSpec) -> float:
    """exp(ln P_c + ln P_ml), clamped into (0, 1]."""
    log_p = log_self_match_correction(spec) + log_multi_subgraph_correction(spec).value
    return min(1.0, max(math.exp(log_p), np.finfo(float).tiny))


def observed_acceptance(spec: DegreeSpec, rng=None, attempts: int = 10_000) -> AttemptStats:
    """Run ``attempts`` independent matchings and tally how many survive."""
    sampler = MicrocanonicalSampler(spec)
    gen = _generator(rng)
    for _ in range(attempts):
        sampler.attempt(gen)
    return sampler.stats


# -- composition -------------------------------------------------------------------------


class ProjectedSample(NamedTuple):
    graph: Graph
    configuration: Configuration
    restarts: int


def sample_and_project(spec, rng=None, ensemble: str | None = None, n_vertices: int | None = None,
                       projection: str = "simple", max_restarts: int = 10 ** 6) -> ProjectedSample:
    """Draw a configuration and return its projected graph alongside it.

    ``spec`` may be a :class:`CanonicalCountSpec`, a :class:`DegreeSpec` (with
    ``ensemble`` "canonical" or "microcanonical", the default) or a plain map
    of exact atom counts.
    """
    gen = _generator(rng)
    restarts = 0
    if isinstance(spec, CanonicalCountSpec):
        config = CanonicalSampler(spec, n_vertices).sample(gen)
    elif isinstance(spec, DegreeSpec):
        if ensemble in (None, "microcanonical"):
            config, restarts = MicrocanonicalSampler(spec).sample(gen, max_restarts)
        elif ensemble == "canonical":
            config = CanonicalSampler(spec).sample(gen)
        else:
            raise SpecError(f"unknown ensemble {ensemble!r}")
    elif isinstance(spec, dict):
        if n_vertices is None:
            raise SpecError("fixed-count sampling needs n_vertices")
        config = sample_fixed_counts(n_vertices, spec, gen)
    else:
        raise SpecError(f"cannot sample from {type(spec).__name__}")
    directed = any(a.directed for a in _atoms_of(spec))
    graph = project(config, projection, directed=directed if not config.placements else None)
    return ProjectedSample(graph, config, restarts)


def _atoms_of(spec):
    if isinstance(spec, CanonicalCountSpec):
        return spec.atoms
    if isinstance(spec, DegreeSpec):
        return spec.atoms
    return list(spec)
