"""``atomlab`` command line: atoms, entropy, sample, project, count, validate."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from atomlab import canonical, microcanonical, special_models, validation
from atomlab.atoms import CATALOGUE, canonical_key, catalogue_atom, compute_symmetry, mu
from atomlab.configuration import DegreeSpec, count_motif_in_graph, project
from atomlab.errors import (
    InfeasibleConstraintError,
    NonConvergenceError,
    SamplerExhaustedError,
    SeriesDivergenceError,
    SpecError,
)
from atomlab.io import (
    AtomTable,
    atom_from_json,
    load_ensemble,
    load_json,
    read_configuration,
    read_graph,
    write_configuration,
    write_graph,
)
from atomlab.sampler import (
    ALGORITHMS,
    CanonicalSampler,
    MicrocanonicalSampler,
    RandomSource,
    configuration_from_arrays,
    predicted_acceptance,
    sample_fixed_counts,
)

EXIT_OK, EXIT_SPEC, EXIT_INFEASIBLE, EXIT_EXHAUSTED, EXIT_VALIDATION = 0, 2, 3, 4, 5


class ValidationFailed(Exception):
    pass


def _emit(obj: dict, as_json: bool, out=None):
    out = out or sys.stdout
    if as_json:
        out.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
        return
    for key, value in obj.items():
        if isinstance(value, float):
            value = f"{value:.12g}"
        elif isinstance(value, (list, tuple)):
            value = " ".join(map(str, value)) if value else "none"
        out.write(f"{key}: {value}\n")


# -- atoms ------------------------------------------------------------------------------


def atom_report(atom) -> dict:
    sym = compute_symmetry(atom)
    return {
        "name": atom.name,
        "order": atom.order,
        "directed": atom.directed,
        "aut": sym.aut_size,
        "orbits": list(sym.orbit_sizes),
        "mu": mu(sym),
        "canonical_key": canonical_key(atom).decode(),
    }


def cmd_atoms(args) -> int:
    if args.file:
        atoms = [atom_from_json(load_json(args.file))]
    elif args.name:
        atoms = [catalogue_atom(n) for n in args.name]
    else:
        names = [n for n in CATALOGUE if not n.endswith("-k")] + ["star-3", "clique-5"]
        atoms = [catalogue_atom(n) for n in names]
    reports = [atom_report(a) for a in atoms]
    if args.json:
        _emit(reports[0] if len(reports) == 1 else {"atoms": reports}, True)
        return EXIT_OK
    for r in reports:
        sys.stdout.write(
            f"{r['name']}: order={r['order']} aut={r['aut']} orbits={r['orbits']} "
            f"mu={r['mu']} key={r['canonical_key']}\n"
        )
    return EXIT_OK


# -- entropy ----------------------------------------------------------------------------


def _closed_form_model(model: dict) -> float:
    kind = model["kind"]
    p = model
    if kind == "bipartite":
        if p.get("formulation") == "cliques":
            return special_models.entropy_bipartite_cliques(
                p["bottom"], p["top"], distinguishable=p.get("distinguishable", True))
        return special_models.entropy_bipartite(special_models.BipartiteDegrees(p["top"], p["bottom"]))
    if kind == "sbm":
        return special_models.entropy_dcsbm(special_models.BlockAssignment(p["assignment"]),
                                            p["edge_counts"], p["degrees"], p.get("variant", "total"))
    if kind == "directed-sbm":
        return special_models.entropy_directed_dcsbm(special_models.BlockAssignment(p["assignment"]),
                                                     p["edge_counts"], p["out_degrees"], p["in_degrees"])
    if kind == "link-community":
        return float(sum(special_models.edge_configuration_entropy(d) for d in p["layer_degrees"]))
    if kind == "multilayer-edge-pattern":
        return float(sum(special_models.edge_configuration_entropy(d) for d in p["pattern_degrees"]))
    if kind == "multilayer-vertex-coupled":
        return special_models.entropy_multilayer_vertex_coupled(
            p["layer_counts"], p.get("aggregate_degrees"), p.get("mode", "coupled"), p.get("layer_degrees"))
    raise SpecError(f"unknown model kind {kind!r}; choose from {special_models.MODEL_KINDS}")


_BUILD_KEYS = {
    "bipartite": ("top", "bottom"),
    "sbm": ("assignment", "edge_counts", "degrees", "variant"),
    "directed-sbm": ("assignment", "edge_counts", "out_degrees", "in_degrees"),
    "link-community": ("layer_degrees",),
    "multilayer-edge-pattern": ("patterns", "pattern_degrees"),
    "multilayer-vertex-coupled": ("layer_counts", "aggregate_degrees"),
}


def build_model(model: dict) -> special_models.LabelledModel:
    kind = model.get("kind")
    if kind not in _BUILD_KEYS:
        raise SpecError(f"unknown model kind {kind!r}; choose from {special_models.MODEL_KINDS}")
    params = {k: model[k] for k in _BUILD_KEYS[kind] if k in model}
    return special_models.build_labelled_atoms(kind, **params)


def named_model_entropy(model: dict) -> dict:
    if not isinstance(model, dict) or "kind" not in model:
        raise SpecError("'model' must be an object with a 'kind'")
    try:
        if model.get("formulation") == "general":
            res = microcanonical.entropy_combinatorial(build_model(model).spec)
            return _combinatorial_fields(res) | {"model": model["kind"], "formulation": "general"}
        value = _closed_form_model(model)
    except KeyError as err:
        raise SpecError(f"model {model['kind']!r} is missing {err.args[0]!r}") from None
    return {"entropy": value, "model": model["kind"], "formulation": model.get("formulation", "closed-form")}


def _combinatorial_fields(res) -> dict:
    return {
        "entropy": res.value,
        "matching": res.matching,
        "self_match_correction": res.self_match,
        "multi_subgraph_correction": res.multi_subgraph,
        # atoms whose repeat term falls off as a power of 1/N
        "multi_subgraph_negligible": sorted(a.name or a.label for a, flag in res.negligible.items() if flag),
    }


def compute_entropy(ens, method: str = "combinatorial", l_max: int = 10, exact: bool = False) -> dict:
    """Entropy in nats plus its component breakdown, dispatched on the ensemble mode."""
    mode = ens.mode
    out = {"mode": mode}
    if mode == "named-model":
        return out | named_model_entropy(ens.raw["model"])
    if mode == "canonical-counts":
        h = canonical.entropy_homogeneous(ens.canonical_counts, ens.n_vertices)
        return out | {"entropy": h.exact, "exact": h.exact, "sparse": h.sparse}
    if mode == "canonical-degrees":
        if exact:
            sol = canonical.solve_multipliers_exact(ens.degree_spec)
            return out | {"entropy": sol.entropy, "method": "exact", "iterations": sol.iterations,
                          "residual": sol.residual}
        s = canonical.entropy_degree_corrected(ens.degree_spec, l_max=l_max)
        return out | {"entropy": s.value, "method": "sparse", "l_max": l_max, "series_last_term": s.last_term}
    if mode == "micro-counts":
        return out | {"entropy": microcanonical.log_count_fixed_counts(ens.n_vertices, ens.atoms, ens.counts)}
    if mode == "micro-degrees":
        if method == "analytic":
            a = microcanonical.entropy_analytic(ens.degree_spec, l_max=l_max)
            return out | {"entropy": a.value, "method": "analytic", "canonical": a.canonical,
                          "poisson": a.poisson, "series_last_term": a.last_term, "l_max": l_max}
        res = microcanonical.entropy_combinatorial(ens.degree_spec)
        return out | {"method": "combinatorial"} | _combinatorial_fields(res)
    if mode == "micro-atom-degrees":
        return out | {"entropy": microcanonical.entropy_per_atom_degrees(ens.atoms, ens.atom_degrees)}
    if mode == "micro-total-degree":
        return out | {"entropy": microcanonical.entropy_total_degree(ens.atoms, ens.counts, ens.total_degrees)}
    raise SpecError(f"unknown mode {mode!r}")


_ENTROPY_KEYS = ("entropy", "exact", "sparse", "matching", "self_match_correction",
                 "multi_subgraph_correction", "canonical", "poisson", "series_last_term")


def cmd_entropy(args) -> int:
    ens = load_ensemble(args.spec, args.mode)
    res = compute_entropy(ens, args.method, args.l_max, args.exact)
    unit = "nats"
    if args.bits:
        unit = "bits"
        for k in _ENTROPY_KEYS:
            if isinstance(res.get(k), float):
                res[k] = res[k] / math.log(2)
    res["unit"] = unit
    _emit(res, args.json)
    return EXIT_OK


# -- sampling ---------------------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get("ATOMLAB_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise SpecError(f"ATOMLAB_THREADS must be an integer, got {raw!r}") from None


def _micro_spec(ens) -> DegreeSpec | None:
    if ens.mode == "micro-degrees":
        return ens.degree_spec
    if ens.mode == "micro-atom-degrees":
        return microcanonical.per_atom_degree_spec(ens.n_vertices, ens.atoms, ens.atom_degrees)
    if ens.mode == "micro-total-degree":
        return microcanonical.total_degree_spec(ens.n_vertices, ens.atoms, ens.counts, ens.total_degrees)
    if ens.mode == "named-model":
        return build_model(ens.raw["model"]).spec
    return None


def _draw_chunk(ens, micro, canon, gens, max_restarts):
    """Samples for one worker: (config, restarts) list plus attempt statistics."""
    out = []
    sampler = MicrocanonicalSampler(micro) if micro is not None else None
    for gen in gens:
        if sampler is not None:
            rows, restarts = sampler.sample_arrays(gen, max_restarts)
            out.append((configuration_from_arrays(micro.n_vertices, rows), restarts))
        elif canon is not None:
            out.append((canon.sample(gen), 0))
        else:
            out.append((sample_fixed_counts(ens.n_vertices, ens.counts, gen), 0))
    stats = sampler.stats if sampler is not None else None
    return out, stats


def draw_samples(ens, seed: int, n_samples: int, algorithm: str = "PCG64", max_restarts: int = 10 ** 6,
                 canonical_method: str = "exact", threads: int = 1):
    """Deterministic draws: sample i always uses the i-th spawned stream, whatever the thread count."""
    gens = RandomSource(seed, algorithm).spawn(n_samples)
    micro = _micro_spec(ens)
    canon = None
    if ens.mode == "canonical-counts":
        canon = CanonicalSampler(ens.canonical_counts, ens.n_vertices)
    elif ens.mode == "canonical-degrees":
        canon = CanonicalSampler(ens.degree_spec, method=canonical_method)
    threads = max(1, min(threads, n_samples))
    bounds = np.linspace(0, n_samples, threads + 1).astype(int)
    chunks = [gens[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    if threads == 1:
        parts = [_draw_chunk(ens, micro, canon, chunks[0], max_restarts)] if n_samples else []
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _draw_chunk(ens, micro, canon, c, max_restarts), chunks))
    samples = [s for part, _ in parts for s in part]
    attempts = sum(st.attempts for _, st in parts if st is not None)
    accepted = sum(st.accepted for _, st in parts if st is not None)
    acceptance = None
    if micro is not None:
        acceptance = {
            "attempts": attempts,
            "accepted": accepted,
            "observed": accepted / attempts if attempts else None,
            "predicted": predicted_acceptance(micro),
        }
    return samples, acceptance, micro


def cmd_sample(args) -> int:
    ens = load_ensemble(args.spec, args.mode)
    samples, acceptance, micro = draw_samples(ens, args.seed, args.samples, args.algorithm,
                                              args.max_restarts, args.canonical_method, _threads())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = AtomTable(ens.table.order) if ens.table.order else None
    width = max(4, len(str(max(args.samples - 1, 0))))
    restarts = []
    for i, (config, r) in enumerate(samples):
        restarts.append(r)
        (out / f"sample-{i:0{width}d}.jsonl").write_text(write_configuration(config, table))
        if args.project:
            graph = project(config, args.projection)
            (out / f"sample-{i:0{width}d}.edges").write_text(write_graph(graph))
    meta = {
        "seed": args.seed,
        "algorithm": args.algorithm,
        "spec_hash": ens.spec_hash(),
        "mode": ens.mode,
        "samples": args.samples,
        "restarts": restarts,
        "total_restarts": int(sum(restarts)),
        "projection": args.projection if args.project else None,
        "acceptance": acceptance,
    }
    (out / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(f"wrote {args.samples} samples to {out}\n")
    return EXIT_OK


# -- project / count / validate ---------------------------------------------------------


def cmd_project(args) -> int:
    config = read_configuration(Path(args.config).read_text())
    text = write_graph(project(config, args.projection))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_count(args) -> int:
    graph = read_graph(Path(args.graph).read_text())
    atoms = [atom_from_json(load_json(args.atom_file))] if args.atom_file else []
    atoms += [catalogue_atom(n) for n in args.atom or []]
    if not atoms:
        raise SpecError("name at least one atom with --atom or --atom-file")
    counts = {a.label: count_motif_in_graph(graph, a) for a in atoms}
    _emit(counts, args.json)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = validation.run_suite(args.suite)
    if args.json:
        _emit({"suite": args.suite,
               "checks": [{"name": r.name, "ok": r.ok, "detail": r.detail} for r in results]}, True)
    else:
        for r in results:
            sys.stdout.write(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail} ({r.seconds:.1f}s)\n")
    failed = [r.name for r in results if not r.ok]
    if failed:
        raise ValidationFailed(", ".join(failed))
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atomlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("atoms", help="symmetry report for atoms")
    p.add_argument("--name", action="append", help="catalogue name (repeatable)")
    p.add_argument("--file", help="atom definition (JSON)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_atoms)

    p = sub.add_parser("entropy", help="ensemble entropy in nats")
    p.add_argument("spec", help="ensemble spec (JSON)")
    p.add_argument("--mode", help="override the mode named in the ensemble file")
    p.add_argument("--method", choices=("combinatorial", "analytic"), default="combinatorial",
                   help="microcanonical degree specs only")
    p.add_argument("--l-max", type=int, default=10, help="series truncation order")
    p.add_argument("--exact", action="store_true", help="solve canonical multipliers exactly")
    p.add_argument("--json", action="store_true")
    p.add_argument("--bits", action="store_true", help="report in bits instead of nats")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sample", help="draw configurations")
    p.add_argument("spec")
    p.add_argument("--mode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="PCG64")
    p.add_argument("--max-restarts", type=int, default=10 ** 6)
    p.add_argument("--canonical-method", choices=("exact", "sparse"), default="exact")
    p.add_argument("--project", action="store_true", help="also write projected edge lists")
    p.add_argument("--projection", choices=("simple", "labelled"), default="simple")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("project", help="project a configuration to a graph")
    p.add_argument("config", help="configuration JSONL")
    p.add_argument("--projection", choices=("simple", "labelled"), default="simple")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("count", help="count atom copies in a graph")
    p.add_argument("graph", help="edge list")
    p.add_argument("--atom", action="append", help="catalogue name (repeatable)")
    p.add_argument("--atom-file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("validate", help="run the oracle battery")
    p.add_argument("--suite", choices=validation.SUITES, default="small")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailed as err:
        sys.stderr.write(f"atomlab: validation failed: {err}\n")
        return EXIT_VALIDATION
    except SamplerExhaustedError as err:
        sys.stderr.write(f"atomlab: sampler exhausted: {err}\n")
        return EXIT_EXHAUSTED
    except (InfeasibleConstraintError, NonConvergenceError, SeriesDivergenceError) as err:
        sys.stderr.write(f"atomlab: infeasible: {err}\n")
        return EXIT_INFEASIBLE
    except (SpecError, OSError) as err:
        sys.stderr.write(f"atomlab: error: {err}\n")
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
