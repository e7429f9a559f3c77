"""Canonical (soft-constraint) ensembles of subgraph configurations.

Placements occur independently. With fixed expected counts every m-subgraph
has the same probability; with fixed expected orbit degrees the probabilities
follow from Lagrange multipliers, either solved exactly on an enumerable
vertex set or taken from the sparse closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import expit

from atomlab._math import binary_entropy, xlogx
from atomlab.atoms import Atom, compute_symmetry, count_placements
from atomlab.configuration import DegreeSpec, Placement, placement_array
from atomlab.errors import (
    InfeasibleConstraintError,
    NonConvergenceError,
    SeriesDivergenceError,
    SpecError,
)

CanonicalDegreeSpec = DegreeSpec

EXACT_SOLVER_MAX_PLACEMENTS = 5_000_000


@dataclass
class CanonicalCountSpec:
    atoms: list
    expected_counts: dict

    def count(self, atom: Atom) -> float:
        return float(self.expected_counts.get(atom, 0.0))


class HomogeneousEntropy(NamedTuple):
    exact: float
    sparse: float


class SeriesEntropy(NamedTuple):
    value: float
    last_term: float

    def __float__(self):
        return self.value


def placement_probability_homogeneous(spec: CanonicalCountSpec, n_vertices: int, atom: Atom) -> float:
    h = count_placements(n_vertices, atom)
    c = spec.count(atom)
    if c < 0:
        raise InfeasibleConstraintError(f"negative expected count for {atom!r}")
    if c == 0:
        return 0.0
    if c > h:
        raise InfeasibleConstraintError(
            f"expected count {c:g} for {atom!r} exceeds the {h} available placements"
        )
    return c / h


def entropy_homogeneous(spec: CanonicalCountSpec, n_vertices: int) -> HomogeneousEntropy:
    """Exact sum of binary entropies and its sparse approximation c - c ln(c/|H|)."""
    exact = 0.0
    sparse = 0.0
    for atom in spec.atoms:
        p = placement_probability_homogeneous(spec, n_vertices, atom)
        h = count_placements(n_vertices, atom)
        exact += h * binary_entropy(p)
        c = spec.count(atom)
        if c > 0:
            sparse += c - c * math.log(p)
    return HomogeneousEntropy(exact, sparse)


# -- orbit aggregation --------------------------------------------------------


def aggregate_orbits_canonical(members, totals: dict, degrees) -> dict:
    """Split a shared expected degree k(v) over the member orbits.

    Member ``(m, i)`` receives k(v) |O_{m,i}| n_m / sum over the group of |O| n.
    """
    degrees = np.asarray(degrees, dtype=float)
    weights = {}
    for atom, i in members:
        if atom not in totals:
            raise SpecError(f"aggregated orbit of {atom!r} needs its expected total")
        weights[(atom, i)] = compute_symmetry(atom).orbit_sizes[i] * float(totals[atom])
    denom = sum(weights.values())
    if denom <= 0:
        raise InfeasibleConstraintError("aggregation group has zero total |O| n")
    return {key: degrees * w / denom for key, w in weights.items()}


def effective_degrees(spec: DegreeSpec) -> dict:
    """Per-orbit expected degrees with every group split by its substitution rule."""
    totals = {a: spec.total(a) for a in spec.atoms if a in spec.totals or _has_free_orbit(spec, a)}
    out = {a: [None if s is None else np.asarray(s, dtype=float) for s in seqs]
           for a, seqs in spec.orbit_degrees.items()}
    for g in spec.groups:
        split = aggregate_orbits_canonical(g.members, totals, g.degrees)
        for (atom, i), k in split.items():
            out[atom][i] = k
    return out


def _has_free_orbit(spec: DegreeSpec, atom: Atom) -> bool:
    return any(s is not None for s in spec.orbit_degrees[atom])


# -- sparse closed form ---------------------------------------------------------


def orbit_degree_bounds(atom: Atom, n_bar: float) -> tuple[float, ...]:
    """Uniform per-orbit caps on k_{m,i}(v) that guarantee every p_s <= 1.

    Choosing each orbit's cap as |O_i| (n^{|m|-1}/|Aut|)^{1/|m|} makes the
    product over any placement equal the well-definedness bound; for the single
    edge this is k_max <= sqrt(sum_v k(v)).
    """
    sym = compute_symmetry(atom)
    m = sym.order
    base = (n_bar ** (m - 1) / sym.aut_size) ** (1.0 / m)
    return tuple(size * base for size in sym.orbit_sizes)


def check_sparse_feasibility(spec: DegreeSpec) -> None:
    eff = effective_degrees(spec)
    for atom, seqs in eff.items():
        n_bar = spec.total(atom)
        if n_bar <= 0:
            continue
        for i, (k, cap) in enumerate(zip(seqs, orbit_degree_bounds(atom, n_bar))):
            worst = float(np.max(k))
            if worst > cap * (1 + 1e-12):
                v = int(np.argmax(k))
                raise InfeasibleConstraintError(
                    f"{atom!r} orbit {i}: degree {worst:g} at vertex {v} exceeds the "
                    f"sparse-model bound {cap:g}; use the exact solver"
                )


def sparse_probabilities(spec: DegreeSpec, atom: Atom, tuples: np.ndarray, eff=None) -> np.ndarray:
    """Vectorised p_s = n |Aut| prod_v k_{m,i}(v) / (|O_{m,i}| n) for placement rows."""
    eff = effective_degrees(spec) if eff is None else eff
    sym = compute_symmetry(atom)
    n_bar = spec.total(atom)
    tuples = np.asarray(tuples)
    if n_bar <= 0:
        return np.zeros(len(tuples))
    p = np.full(len(tuples), n_bar * sym.aut_size, dtype=float)
    for j in range(sym.order):
        i = sym.orbit_of[j]
        p *= eff[atom][i][tuples[:, j]] / (sym.orbit_sizes[i] * n_bar)
    return p


def placement_probability_sparse(spec: DegreeSpec, placement: Placement, check: str = "uniform") -> float:
    """Sparse-limit probability of one placement.

    ``check="uniform"`` enforces the sufficient per-orbit degree caps over the
    whole spec; ``check="strict"`` only requires this placement's p_s <= 1.
    """
    if check == "uniform":
        check_sparse_feasibility(spec)
    elif check not in ("strict", "none"):
        raise SpecError(f"unknown feasibility check {check!r}")
    p = float(sparse_probabilities(spec, placement.atom, np.array([placement.vertices]))[0])
    if check == "strict" and p > 1.0:
        raise InfeasibleConstraintError(
            f"placement {placement.vertices} of {placement.atom!r} has p_s = {p:g} > 1"
        )
    return p


def _moment_ratio(k: np.ndarray, power: int) -> float:
    return float(np.mean(k ** power) / np.mean(k))


def _series_terms(atom: Atom, n_bar: float, seqs, l_max: int) -> list[float]:
    """Terms l = 1..l_max of the binary-entropy expansion summed over placements."""
    sym = compute_symmetry(atom)
    log_norm = sum(size * math.log(size * n_bar) for size in sym.orbit_sizes)
    terms = []
    for l in range(1, l_max + 1):
        log_t = l * math.log(sym.aut_size) - math.log(l * (l + 1)) + (l + 1) * math.log(n_bar)
        log_t -= l * log_norm
        for size, k in zip(sym.orbit_sizes, seqs):
            log_t += size * math.log(_moment_ratio(k, l + 1))
        terms.append(math.exp(log_t))
    return terms


def _checked_series(atom: Atom, n_bar: float, seqs, l_max: int) -> list[float]:
    terms = _series_terms(atom, n_bar, seqs, l_max)
    for l in range(1, len(terms)):
        if terms[l] > terms[l - 1]:
            raise SeriesDivergenceError(
                f"series for {atom!r} grows at l={l + 1}: outside the sparse regime, "
                "use the exact solver"
            )
    return terms


def entropy_degree_corrected(spec: DegreeSpec, l_max: int = 10) -> SeriesEntropy:
    """Sparse-limit entropy with the l-series truncated at ``l_max``.

    Returns the value and the summed magnitude of the last included series
    term, which bounds the truncation error in the convergent regime.
    """
    check_sparse_feasibility(spec)
    eff = effective_degrees(spec)
    total = 0.0
    last = 0.0
    for atom, seqs in eff.items():
        n_bar = float(spec.total(atom))
        if n_bar <= 0:
            continue
        sym = compute_symmetry(atom)
        s = n_bar - n_bar * math.log(sym.aut_size * n_bar)
        for size, k in zip(sym.orbit_sizes, seqs):
            s += n_bar * size * math.log(n_bar * size)
            s -= float(np.sum(xlogx(k)))
        terms = _checked_series(atom, n_bar, seqs, l_max) if l_max > 0 else []
        s -= sum(terms)
        last += terms[-1] if terms else 0.0
        total += s
    return SeriesEntropy(total, last)


# -- exact multipliers ------------------------------------------------------------


@dataclass
class ExactCanonicalSolution:
    placements: dict
    probabilities: dict
    multipliers: dict
    count_multipliers: dict
    entropy: float
    iterations: int
    residual: float
    expected_degrees: dict = field(default_factory=dict)

    def probability(self, placement: Placement) -> float:
        rows = self.placements[placement.atom]
        idx = np.flatnonzero((rows == np.array(placement.vertices)).all(axis=1))
        return float(self.probabilities[placement.atom][idx[0]])


class _Incidence:
    """Placement arrays and a flat multiplier layout for the exact solver.

    Multiplier ``t * N + v`` belongs to stub type ``t`` at vertex ``v``; count
    multipliers for atoms sharing a multi-member group follow after them.
    """

    def __init__(self, spec: DegreeSpec):
        self.spec = spec
        n = self.n = spec.n_vertices
        self.types = spec.stub_types()
        type_of = {key: t for t, (members, _) in enumerate(self.types) for key in members}
        self.rows = {}
        self.index = {}
        total = 0
        for atom in spec.atoms:
            rows = placement_array(n, atom)
            sym = compute_symmetry(atom)
            offs = np.array([type_of[(atom, sym.orbit_of[j])] * n for j in range(sym.order)])
            self.rows[atom] = rows
            self.index[atom] = rows + offs
            total += len(rows)
        if total > EXACT_SOLVER_MAX_PLACEMENTS:
            raise SpecError(f"{total} placements is too many to enumerate")
        self.count_atoms = [
            a for a in spec.atoms
            if any(len(g.members) > 1 and any(m[0] == a for m in g.members) for g in spec.groups)
        ]
        base = len(self.types) * n
        self.count_slot = {a: base + c for c, a in enumerate(self.count_atoms)}
        targets = [np.asarray(d, dtype=float) for _, d in self.types]
        targets.append(np.array([float(spec.total(a)) for a in self.count_atoms]))
        self.target = np.concatenate(targets)

        self.fixed = {a: np.full(len(r), np.nan) for a, r in self.rows.items()}

    def pin(self) -> np.ndarray:
        """Fix every placement whose value the targets force; returns the still-free rows.

        A row whose remaining target is zero excludes its free placements, and
        one whose remaining target equals its free placement count includes
        them. Repeats until nothing changes.
        """
        k = self.target
        while True:
            ones = self.expected({a: np.nan_to_num(f) for a, f in self.fixed.items()})
            free = self.expected({a: np.isnan(f).astype(float) for a, f in self.fixed.items()})
            rest = k - ones
            if np.any(rest < -1e-9) or np.any(rest > free + 1e-9):
                r = int(np.flatnonzero((rest < -1e-9) | (rest > free + 1e-9))[0])
                raise InfeasibleConstraintError(
                    f"target {k[r]:g} of multiplier {r} cannot be met by the available placements"
                )
            to_zero = (free > 0) & (rest <= 1e-12)
            to_one = (free > 0) & ~to_zero & (rest >= free - 1e-12)
            if not (to_zero.any() or to_one.any()):
                return (free > 0)
            for atom, idx in self.index.items():
                cols = idx
                if atom in self.count_slot:
                    cols = np.hstack([idx, np.full((len(idx), 1), self.count_slot[atom])])
                f = self.fixed[atom]
                open_ = np.isnan(f)
                f[open_ & to_zero[cols].any(axis=1)] = 0.0
                f[np.isnan(f) & to_one[cols].any(axis=1)] = 1.0

    def pin_boundary(self, eps: float = 1e-6) -> np.ndarray:
        """Fix the free placements that every solution holds at 0 or 1.

        One LP maximises the summed slack ``s_i <= min(p_i, 1 - p_i, eps)``.
        Averaging solutions shows an optimum lifts every placement that can be
        interior at all, so a placement with no slack is stuck at its bound.
        Returns the rows that still have free placements.
        """
        ones = self.expected({a: np.nan_to_num(f) for a, f in self.fixed.items()})
        rows, cols, owners = [], [], []
        n_free = 0
        for atom, idx in self.index.items():
            free = np.flatnonzero(np.isnan(self.fixed[atom]))
            sub = idx[free]
            if atom in self.count_slot:
                sub = np.hstack([sub, np.full((len(sub), 1), self.count_slot[atom])])
            rows.append(sub.ravel())
            cols.append(np.repeat(np.arange(n_free, n_free + len(sub)), sub.shape[1]))
            owners.append((atom, free))
            n_free += len(sub)
        m = len(self.target)
        a_eq = sparse.csr_matrix(
            (np.ones(sum(len(r) for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m, 2 * n_free),
        )
        eye = sparse.identity(n_free, format="csr")
        # variables: p then s; s - p <= 0 and p + s <= 1
        a_ub = sparse.vstack([sparse.hstack([-eye, eye]), sparse.hstack([eye, eye])])
        b_ub = np.concatenate([np.zeros(n_free), np.ones(n_free)])
        c = np.concatenate([np.zeros(n_free), -np.ones(n_free)])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=self.target - ones,
                      bounds=[(0, 1)] * n_free + [(0, eps)] * n_free, method="highs")
        if res.status == 2:
            raise InfeasibleConstraintError("no placement probabilities in [0, 1] meet these targets")
        if res.status != 0:
            raise NonConvergenceError(f"feasibility LP failed: {res.message}")
        p, slack = res.x[:n_free], res.x[n_free:]
        stuck = slack < 0.5 * eps
        for atom, free in owners:
            take = slice(0, len(free))
            f = self.fixed[atom]
            f[free[stuck[take]]] = np.round(p[take][stuck[take]])
            p, slack, stuck = p[len(free):], slack[len(free):], stuck[len(free):]
        free = self.expected({a: np.isnan(f).astype(float) for a, f in self.fixed.items()})
        return free > 0

    def probabilities(self, lam: np.ndarray) -> dict:
        probs = {}
        for atom, idx in self.index.items():
            f = self.fixed[atom]
            free = np.isnan(f)
            energy = lam[idx[free]].sum(axis=1)
            if atom in self.count_slot:
                energy = energy + lam[self.count_slot[atom]]
            p = f.copy()
            p[free] = expit(-energy)
            probs[atom] = p
        return probs

    def expected(self, probs: dict) -> np.ndarray:
        out = np.zeros(len(self.target))
        for atom, idx in self.index.items():
            w = probs[atom]
            out += np.bincount(idx.ravel(), weights=np.repeat(w, idx.shape[1]), minlength=len(out))
            if atom in self.count_slot:
                out[self.count_slot[atom]] += w.sum()
        return out

    def hessian(self, probs: dict, live: np.ndarray) -> np.ndarray:
        """Covariance of the constrained degrees, restricted to the ``live`` multipliers."""
        pos = -np.ones(len(self.target), dtype=np.int64)
        pos[live] = np.arange(live.sum())
        size = int(live.sum())
        h = np.zeros((size, size))
        for atom, idx in self.index.items():
            w = probs[atom] * (1.0 - probs[atom])
            cols = pos[idx]
            if atom in self.count_slot:
                cols = np.hstack([cols, np.full((len(cols), 1), pos[self.count_slot[atom]])])
            for a in range(cols.shape[1]):
                for b in range(cols.shape[1]):
                    ok = (cols[:, a] >= 0) & (cols[:, b] >= 0)
                    np.add.at(h, (cols[ok, a], cols[ok, b]), w[ok])
        return h


def _initial_multipliers(inc: _Incidence) -> np.ndarray:
    lam = np.zeros(len(inc.target))
    spec = inc.spec
    n = inc.n
    for t, (members, k) in enumerate(inc.types):
        atom = members[0][0]
        sym = compute_symmetry(atom)
        big_t = sum(compute_symmetry(a).orbit_sizes[o] * spec.total(a) for a, o in members)
        n_bar = max(spec.total(atom), 1e-300)
        x = np.asarray(k, dtype=float) / max(big_t, 1e-300) * (n_bar * sym.aut_size) ** (1.0 / sym.order)
        with np.errstate(divide="ignore"):
            lam[t * n:(t + 1) * n] = -np.log(np.clip(x, 0, 0.5))
    return lam


def _dual(inc: _Incidence, lam: np.ndarray, live: np.ndarray) -> float:
    ones = inc.expected({a: np.nan_to_num(f) for a, f in inc.fixed.items()})
    total = float(lam[live] @ (inc.target[live] - ones[live]))
    for atom, idx in inc.index.items():
        free = np.isnan(inc.fixed[atom])
        energy = lam[idx[free]].sum(axis=1)
        if atom in inc.count_slot:
            energy = energy + lam[inc.count_slot[atom]]
        total += float(np.sum(np.logaddexp(0.0, -energy)))
    return total


def solve_multipliers_exact(
    spec: DegreeSpec,
    n_vertices: int | None = None,
    tolerance: float = 1e-8,
    damping: float = 0.5,
    max_iter: int = 10_000,
) -> ExactCanonicalSolution:
    """Solve for the exact multipliers on an enumerable vertex set.

    The main loop is the fixed-point update ``lambda += eta * ln(E[d] / k)``
    with ``eta = damping`` for edges, scaled by ``2 / |m|`` for larger atoms
    and halved whenever the residual grows. If that loop stalls, Newton steps
    on the convex dual finish the job. Zero targets fix the multiplier at
    +inf, which excludes every placement putting that vertex in that orbit.
    """
    if n_vertices is not None and n_vertices != spec.n_vertices:
        raise SpecError("n_vertices disagrees with the degree spec")
    inc = _Incidence(spec)
    max_order = max((a.order for a in spec.atoms), default=2)
    eta = damping * 2.0 / max(max_order, 2)
    lam = _initial_multipliers(inc)
    k = inc.target
    live = inc.pin()
    lam[~live] = 0.0

    def residual_of(e):
        return float(np.max(np.abs(e - k), initial=0.0))

    probs = inc.probabilities(lam)
    exp_d = inc.expected(probs)
    residual = residual_of(exp_d)
    best = residual
    stall = 0
    newton = False
    it = 0
    while residual >= tolerance and it < max_iter:
        it += 1
        if np.any(live & (exp_d <= 0)):
            r = int(np.flatnonzero(live & (exp_d <= 0))[0])
            raise InfeasibleConstraintError(
                f"multiplier {r} has a positive target but no admissible placements"
            )
        if newton:
            grad = k[live] - exp_d[live]
            h = inc.hessian(probs, live)
            try:
                step = np.linalg.solve(h + 1e-12 * np.eye(len(h)), grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(h, grad, rcond=None)[0]
            f0 = _dual(inc, lam, live)
            slope = float(grad @ step)
            scale = 1.0
            while scale > 1e-10:
                trial = lam.copy()
                trial[live] -= scale * step
                if _dual(inc, trial, live) <= f0 - 1e-4 * scale * slope + 1e-12 * abs(f0):
                    break
                scale *= 0.5
            lam = trial
        else:
            lam[live] += eta * np.log(exp_d[live] / k[live])
        probs = inc.probabilities(lam)
        exp_d = inc.expected(probs)
        new = residual_of(exp_d)
        if not newton:
            if new > residual:
                eta *= 0.5
            if new < 0.9 * best:
                best, stall = new, 0
            else:
                stall += 1
            newton = stall >= 50
            if newton:
                live = inc.pin_boundary()
                lam[~live] = 0.0
                probs = inc.probabilities(lam)
                exp_d = inc.expected(probs)
                new = residual_of(exp_d)
        residual = new
    if residual >= tolerance:
        raise NonConvergenceError(
            f"exact solver did not converge in {max_iter} iterations (residual {residual:.3g})",
            residual=residual,
            iterations=it,
        )
    entropy = float(sum(np.sum(binary_entropy(p)) for p in probs.values()))
    n = inc.n
    multipliers = {members: lam[t * n:(t + 1) * n] for t, (members, _) in enumerate(inc.types)}
    expected = {members: exp_d[t * n:(t + 1) * n] for t, (members, _) in enumerate(inc.types)}
    return ExactCanonicalSolution(
        placements=inc.rows,
        probabilities=probs,
        multipliers=multipliers,
        count_multipliers={a: float(lam[j]) for a, j in inc.count_slot.items()},
        entropy=entropy,
        iterations=it,
        residual=residual,
        expected_degrees=expected,
    )
