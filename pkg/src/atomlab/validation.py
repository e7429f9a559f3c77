"""Oracle-equivalence battery behind ``atomlab validate``.

Every check compares a closed-form or solver result with brute force at toy
scale. Checks return :class:`CheckResult` records rather than raising, so a
report lists every failure at once.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import stats

from atomlab import canonical, microcanonical, oracle, special_models
from atomlab.atoms import catalogue_atom, compute_symmetry, count_placements, mu, star
from atomlab.configuration import DegreeSpec, check_graphicality
from atomlab.sampler import MicrocanonicalSampler, RandomSource

SUITES = ("small", "full")

SYMMETRY_TABLE = {
    "edge": (2, 1),
    "directed-edge": (1, 2),
    "path-3": (2, 2),
    "triangle": (6, 1),
    "4-cycle": (8, 1),
    "4-clique": (24, 1),
}
MU_TABLE = {"triangle": 1, "4-cycle": 3}


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    seconds: float = 0.0


def _timed(name, fn) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as err:  # a crash is a failed check, not an aborted report
        ok, detail = False, f"{type(err).__name__}: {err}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def compositions(total: int):
    """Ordered tuples of positive integers summing to ``total``."""
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in compositions(total - first):
            yield (first,) + rest


def single_orbit_specs(atom, max_stubs: int):
    """Graphical specs of one single-orbit atom with every vertex used."""
    for s in range(atom.order, max_stubs + 1, atom.order):
        for d in compositions(s):
            spec = DegreeSpec(len(d), {atom: [np.array(d, dtype=np.int64)]})
            if check_graphicality(spec).ok:
                yield spec


# -- individual checks ------------------------------------------------------------------


def placement_atoms():
    names = ["edge", "directed-edge", "path-3", "triangle", "4-cycle", "4-clique"]
    return [catalogue_atom(n) for n in names] + [star(3), star(4)]


def check_placement_counts(max_n: int):
    bad = []
    checked = 0
    for atom in placement_atoms():
        for n in range(0, max_n + 1):
            got = count_placements(n, atom)
            want = len(oracle.enumerate_subgraphs_bruteforce(n, atom))
            checked += 1
            if got != want:
                bad.append(f"{atom.label} N={n}: {got} vs {want}")
    return not bad, "; ".join(bad) or f"{checked} (atom, N) pairs agree"


def check_symmetry_table():
    bad = []
    for name, (aut, n_orbits) in SYMMETRY_TABLE.items():
        atom = catalogue_atom(name)
        sym = compute_symmetry(atom)
        brute = oracle.brute_force_automorphisms(atom)
        if (sym.aut_size, sym.n_orbits, len(brute)) != (aut, n_orbits, aut):
            bad.append(f"{name}: |Aut|={sym.aut_size} (brute {len(brute)}), orbits={sym.n_orbits}")
    for name, want in MU_TABLE.items():
        got = mu(catalogue_atom(name))
        if got != want:
            bad.append(f"mu({name})={got}, expected {want}")
    return not bad, "; ".join(bad) or "automorphism counts, orbits and mu agree"


def matching_identity_error(spec: DegreeSpec) -> float:
    """|ln(exhaustive count) - sum ln d! - formula| for one spec."""
    count = oracle.exact_matching_count(spec)
    stub_fact = sum(float(np.sum([math.lgamma(d + 1) for d in degrees])) for _, degrees in spec.stub_types())
    # resolved through the module so that a patched formula is what gets tested
    return abs(math.log(count) - stub_fact - microcanonical.log_stub_matchings(spec))


def check_matching_counts(edge_stubs: int, triangle_stubs: int, tol: float = 1e-9):
    worst = 0.0
    n = 0
    bad = []
    for atom, cap in ((catalogue_atom("edge"), edge_stubs), (catalogue_atom("triangle"), triangle_stubs)):
        for spec in single_orbit_specs(atom, cap):
            err = matching_identity_error(spec)
            n += 1
            worst = max(worst, err)
            if err > tol:
                bad.append(f"{atom.label} d={spec.orbit_degrees[atom][0].tolist()}: error {err:.3g}")
    if bad:
        return False, f"{len(bad)}/{n} specs off, e.g. " + "; ".join(bad[:3])
    return True, f"{n} specs, worst log error {worst:.2g}"


def check_fixed_counts(max_n: int):
    e, t = catalogue_atom("edge"), catalogue_atom("triangle")
    bad = []
    n_checked = 0
    for n in range(1, max_n + 1):
        he, ht = count_placements(n, e), count_placements(n, t)
        for atoms in ([e], [t], [e, t]):
            ranges = [range(0, (he if a == e else ht) + 1) for a in atoms]
            for combo in product(*ranges):
                counts = dict(zip(atoms, combo))
                if math.prod(math.comb(he if a == e else ht, c) for a, c in counts.items()) > 5_000:
                    continue
                want = oracle.enumerate_configurations(n, atoms, counts, count_only=True)
                got = microcanonical.log_count_fixed_counts(n, atoms, counts)
                n_checked += 1
                if round(math.exp(got)) != want:
                    bad.append(f"N={n} {[(a.label, c) for a, c in counts.items()]}: {math.exp(got)} vs {want}")
    return not bad, "; ".join(bad[:3]) or f"{n_checked} count vectors agree"


def uniformity_specs():
    """Small degree specs with between 2 and 50 valid configurations."""
    e, t, p = catalogue_atom("edge"), catalogue_atom("triangle"), catalogue_atom("path-3")
    arr = lambda *x: np.array(x, dtype=np.int64)
    return [
        ("edge (1,1,1,1)", DegreeSpec(4, {e: [arr(1, 1, 1, 1)]})),
        ("edge (2,2,2,2)", DegreeSpec(4, {e: [arr(2, 2, 2, 2)]})),
        ("edge (2,2,1,1,1,1)", DegreeSpec(6, {e: [arr(2, 2, 1, 1, 1, 1)]})),
        ("edge (1,)*6", DegreeSpec(6, {e: [arr(1, 1, 1, 1, 1, 1)]})),
        ("edge (3,2,2,2,1)", DegreeSpec(5, {e: [arr(3, 2, 2, 2, 1)]})),
        ("edge (2,2,2,2,1,1)", DegreeSpec(6, {e: [arr(2, 2, 2, 2, 1, 1)]})),
        ("triangle (2,1,1,1,1)", DegreeSpec(5, {t: [arr(2, 1, 1, 1, 1)]})),
        ("triangle (2,2,2,1,1,1)", DegreeSpec(6, {t: [arr(2, 2, 2, 1, 1, 1)]})),
        ("path-3 ends (1,1,1,1,0,0) centres (0,0,0,0,1,1)",
         DegreeSpec(6, {p: _path_orbits(p, arr(1, 1, 1, 1, 0, 0), arr(0, 0, 0, 0, 1, 1))})),
        ("edge+triangle", DegreeSpec(5, {e: [arr(1, 1, 0, 1, 1)], t: [arr(1, 1, 1, 0, 0)]})),
    ]


def _path_orbits(atom, ends, centres):
    sym = compute_symmetry(atom)
    centre_orbit = sym.orbit_of[next(v for v in range(3) if sum(v in e for e in atom.edges) == 2)]
    out = [None, None]
    out[centre_orbit] = centres
    out[1 - centre_orbit] = ends
    return out


def _row_key(rows: dict) -> frozenset:
    return frozenset((a, tuple(int(x) for x in r)) for a, arr in rows.items() for r in arr)


def uniformity_test(spec: DegreeSpec, n_samples: int, seed: int = 0):
    """Chi-square p-value of sampler output against the enumerated uniform law."""
    dist = oracle.exact_sampler_distribution(spec)
    keys = {frozenset((p.atom, p.vertices) for p in c.placements): i for i, c in enumerate(dist.support)}
    sampler = MicrocanonicalSampler(spec)
    gen = RandomSource(seed).generator()
    tally = Counter()
    drawn = 0
    while drawn < n_samples:
        for rows in sampler.attempt_batch(gen, 4096)[: n_samples - drawn]:
            tally[keys[_row_key(rows)]] += 1
            drawn += 1
    observed = np.array([tally[i] for i in range(len(keys))], dtype=float)
    if len(keys) == 1:
        return 1.0, len(keys)
    return float(stats.chisquare(observed).pvalue), len(keys)


def check_uniformity(n_samples: int, alpha: float = 1e-3):
    bad = []
    worst = 1.0
    for name, spec in uniformity_specs():
        p, size = uniformity_test(spec, n_samples)
        worst = min(worst, p)
        if p < alpha:
            bad.append(f"{name} ({size} configs): p={p:.2g}")
    return not bad, "; ".join(bad) or f"{len(uniformity_specs())} specs, smallest p={worst:.3g}"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b else abs(a)


def check_reductions(instances: int, tol: float = 1e-9, seed: int = 7):
    """Named closed forms against each other and against the general machinery."""
    rng = np.random.default_rng(seed)
    general = lambda m: microcanonical.entropy_combinatorial(m.spec).value
    worst = {}

    def note(name, a, b):
        worst[name] = max(worst.get(name, 0.0), _rel(a, b))

    for _ in range(instances):
        top = rng.poisson(2, 12) + 1
        bottom = np.bincount(rng.integers(0, 8, int(top.sum())), minlength=8)
        bottom = bottom[bottom > 0]
        bip = special_models.entropy_bipartite(special_models.BipartiteDegrees(top, bottom))
        note("bipartite=cliques", special_models.entropy_bipartite_cliques(bottom, top), bip)
        note("bipartite=general", general(special_models.build_labelled_atoms("bipartite", top=top, bottom=bottom)), bip)

        d = rng.poisson(3, 30)
        d[0] += d.sum() % 2
        one = special_models.BlockAssignment([0] * 30)
        cm = special_models.edge_configuration_entropy(d)
        note("sbm B=1 = configuration model", special_models.entropy_dcsbm(one, [[d.sum() // 2]], d), cm)

        n = 24
        blocks = rng.integers(0, 3, n)
        blocks[:3] = [0, 1, 2]
        assign = special_models.BlockAssignment(blocks)
        counts = np.zeros((3, 3), dtype=np.int64)
        deg = np.zeros(n, dtype=np.int64)
        for _ in range(30):
            u, v = rng.choice(n, 2, replace=False)
            deg[u] += 1
            deg[v] += 1
            r, s = blocks[u], blocks[v]
            counts[r, s] += 1
            if r != s:
                counts[s, r] += 1
        model = special_models.build_labelled_atoms("sbm", assignment=blocks, edge_counts=counts, degrees=deg)
        note("sbm=general", general(model), special_models.entropy_dcsbm(assign, counts, deg))

        layers = []
        for _ in range(2):
            x = rng.poisson(2, 15)
            x[0] += x.sum() % 2
            layers.append(x)
        model = special_models.build_labelled_atoms("link-community", layer_degrees=layers)
        note("link-community=general", general(model),
             sum(special_models.edge_configuration_entropy(x) for x in layers))
    bad = [f"{k}: {v:.2g}" for k, v in worst.items() if v > tol]
    summary = ", ".join(f"{k} {v:.1g}" for k, v in worst.items())
    return not bad, ("; ".join(bad) if bad else f"{instances} instances each; worst relative error: {summary}")


def check_exact_solver(tol: float = 1e-6):
    e = catalogue_atom("edge")
    spec = DegreeSpec(4, {e: [np.full(4, 2.0)]})
    sol = canonical.solve_multipliers_exact(spec)
    ref = oracle.exact_canonical_solution(spec)
    h = -(2 / 3) * math.log(2 / 3) - (1 / 3) * math.log(1 / 3)
    p_err = float(np.max(np.abs(np.asarray(sol.probabilities[e]) - 2 / 3)))
    s_err = max(abs(sol.entropy - 6 * h), abs(sol.entropy - ref.entropy))
    ok = p_err <= tol and s_err <= tol
    return ok, f"max |p - 2/3| = {p_err:.2g}, entropy error {s_err:.2g}"


# -- suites -----------------------------------------------------------------------------


def run_suite(suite: str = "small") -> list[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    full = suite == "full"
    checks = [
        ("placement counts", lambda: check_placement_counts(8 if full else 6)),
        ("symmetry table", check_symmetry_table),
        ("matching counts", lambda: check_matching_counts(8 if full else 6, 9 if full else 6)),
        ("fixed counts", lambda: check_fixed_counts(5 if full else 4)),
        ("microcanonical uniformity", lambda: check_uniformity(100_000 if full else 10_000)),
        ("reduction identities", lambda: check_reductions(50 if full else 5)),
        ("exact canonical solver", check_exact_solver),
    ]
    return [_timed(name, fn) for name, fn in checks]


def poisson_degree_spec(n: int, means: dict, rng: np.random.Generator) -> DegreeSpec:
    """Single-orbit atoms with Poisson orbit degrees, nudged to a graphical total.

    Vertex 0 absorbs the remainder so the degree sum is a multiple of the atom
    order; each atom's sequence is drawn in the order ``means`` lists them.
    """
    od = {}
    for name, mean in means.items():
        atom = catalogue_atom(name) if isinstance(name, str) else name
        if compute_symmetry(atom).n_orbits != 1:
            raise ValueError(f"{atom!r} has more than one orbit")
        d = rng.poisson(mean, n).astype(np.int64)
        short = (-int(d.sum())) % atom.order
        d[0] += short
        od[atom] = [d]
    return DegreeSpec(n, od)
