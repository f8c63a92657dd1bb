"""Pipeline command line: ingest, ratios, annealed selection, clustering, export.

``rnasel run`` executes a sweep over subset sizes and blend weights. Every
(n, alpha) cell gets its own deterministically derived seed, runs the
annealer, clusters the samples on the selected features, and writes its
artifacts into one directory. A summary JSON collects the stable facts of
all cells; wall-clock timings go to a separate timings file so reruns with
the same seed are byte-identical.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 parameter error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import clustering, ingest, render, synth
from .annealer import AnnealSchedule, run
from .errors import ParameterError, ValidationError
from .model import ROLE_TREATED, ExpressionMatrix, PairWeights, SampleMeta, Selection
from .objective import ObjectiveContext, ObjectiveParams
from .oracle import exhaustive_optimum

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PARAMETER = 4

_FORMATS = ("newick", "json", "svg", "all")
_CLUSTER_MODES = ("ratios", "levels")

log = logging.getLogger("rnasel")


class _Parser(argparse.ArgumentParser):
    # usage mistakes are parameter errors, exit code 4
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAMETER, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one pipeline invocation."""

    matrix: str
    meta: str
    weights: str | None
    n: tuple[int, ...]
    alpha: tuple[float, ...]
    t_init: float
    t_final: float
    gamma: float
    swaps_per_temp: int
    restarts: int
    seed: int
    default_weight: int
    cluster_mode: str
    cluster_all_features: bool
    cut_k: int | None
    out_dir: str
    format: str
    return_final: bool
    scatter_compound: str | None
    jobs: int

    def __post_init__(self):
        if not self.n or not self.alpha:
            raise ParameterError("sweep lists for n and alpha must be non-empty")
        if any(not isinstance(v, int) or v < 1 for v in self.n):
            raise ParameterError(f"every n must be a positive integer, got {self.n}")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha):
            raise ParameterError(f"every alpha must be in [0, 1], got {self.alpha}")
        if self.default_weight not in (-1, 0, 1):
            raise ParameterError(f"default weight must be -1, 0 or 1, got {self.default_weight}")
        if self.cluster_mode not in _CLUSTER_MODES:
            raise ParameterError(f"cluster mode must be one of {_CLUSTER_MODES}, got {self.cluster_mode!r}")
        if self.format not in _FORMATS:
            raise ParameterError(f"format must be one of {_FORMATS}, got {self.format!r}")
        if self.cut_k is not None and (not isinstance(self.cut_k, int) or self.cut_k < 1):
            raise ParameterError(f"cut k must be a positive integer, got {self.cut_k!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ParameterError(f"jobs must be a positive integer, got {self.jobs!r}")
        if not self.matrix or not self.meta:
            raise ParameterError("matrix and metadata paths are required")


_DEFAULTS = {
    "weights": None,
    "n": (1000,),
    "alpha": (0.2,),
    "t_init": 1.0,
    "t_final": 1e-4,
    "gamma": 0.999,
    "swaps_per_temp": 1,
    "restarts": 1,
    "seed": 0,
    "default_weight": 1,
    "cluster_mode": "ratios",
    "cluster_all_features": False,
    "cut_k": None,
    "out_dir": "out",
    "format": "all",
    "return_final": False,
    "scatter_compound": None,
    "jobs": 1,
}

_CONFIG_COERCE = {
    "matrix": str,
    "meta": str,
    "weights": str,
    "n": lambda s: tuple(int(tok) for tok in s.replace(",", " ").split()),
    "alpha": lambda s: tuple(float(tok) for tok in s.replace(",", " ").split()),
    "t_init": float,
    "t_final": float,
    "gamma": float,
    "swaps_per_temp": int,
    "restarts": int,
    "seed": int,
    "default_weight": int,
    "cluster_mode": str,
    "cluster_all_features": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "cut_k": int,
    "out_dir": str,
    "format": str,
    "return_final": lambda s: s.lower() in ("1", "true", "yes", "on"),
    "scatter_compound": str,
    "jobs": int,
}


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{line_no}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_COERCE:
                raise ParameterError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_COERCE[key](value.strip())
            except ValueError:
                raise ParameterError(f"{path}:{line_no}: bad value for {key!r}: {value.strip()!r}") from None
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: command-line flags > config file > defaults."""
    merged = dict(_DEFAULTS)
    merged["matrix"] = None
    merged["meta"] = None
    if args.config:
        merged.update(load_config_file(args.config))
    for key in RunConfig.__dataclass_fields__:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = tuple(flag_value) if key in ("n", "alpha") else flag_value
    if merged["matrix"] is None or merged["meta"] is None:
        raise ParameterError("matrix and metadata paths are required (flags or config file)")
    return RunConfig(**merged)


def derive_cell_seed(seed: int, cell_index: int) -> int:
    """Stable per-cell seed: child ``cell_index`` of the run seed."""
    child = np.random.SeedSequence(entropy=seed, spawn_key=(cell_index,))
    return int(child.generate_state(1, np.uint64)[0])


def _alpha_token(alpha: float) -> str:
    return repr(float(alpha))


def _leaf_compound(label: str) -> str | None:
    head, _, tail = label.rpartition("_")
    if head and tail.isdigit():
        return head
    return None


def report_groups(dend, k: int) -> str:
    """Text listing of the k-cut; replicate leaves collapse to their compound
    when every replicate of that compound lands in the same group."""
    groups = clustering.cut(dend, k)
    homes: dict[str, set[int]] = {}
    for gi, group in enumerate(groups):
        for label in group:
            compound = _leaf_compound(label)
            if compound is not None:
                homes.setdefault(compound, set()).add(gi)
    lines = [f"k={k} groups:"]
    for gi, group in enumerate(groups, start=1):
        shown = []
        seen = set()
        for label in group:
            compound = _leaf_compound(label)
            if compound is not None and len(homes[compound]) == 1:
                if compound not in seen:
                    seen.add(compound)
                    shown.append(compound)
            else:
                shown.append(label)
        lines.append(f"group {gi}: " + ", ".join(shown))
    return "\n".join(lines) + "\n"


def _sample_labels(meta: SampleMeta, sample_ids) -> list[str]:
    labels = []
    for sid in sample_ids:
        rec = meta.record(sid)
        labels.append(f"{rec.compound}_{rec.replicate}" if rec.role == ROLE_TREATED else sid)
    if len(set(labels)) != len(labels):
        return list(sample_ids)
    return labels


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_dissimilarity(path, dis: clustering.DissimilarityMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label\t" + "\t".join(dis.labels) + "\n")
        for i, label in enumerate(dis.labels):
            fh.write(label + "\t" + "\t".join(f"{v:.17g}" for v in dis.d[i]) + "\n")


def _cluster_outputs(cell_dir: Path, labels, profiles, config: RunConfig, title: str) -> dict:
    dis = clustering.dissimilarity(labels, profiles)
    _write_dissimilarity(cell_dir / "dissimilarity.tsv", dis)
    dend = clustering.average_linkage(dis)
    entry: dict = {"dissimilarity": "dissimilarity.tsv", "dendrogram": {}}
    want = (config.format,) if config.format != "all" else ("newick", "json", "svg")
    if "newick" in want:
        (cell_dir / "dendrogram.nwk").write_text(clustering.to_newick(dend) + "\n", encoding="utf-8")
        entry["dendrogram"]["newick"] = "dendrogram.nwk"
    if "json" in want:
        _write_json(cell_dir / "dendrogram.json", clustering.to_merge_dict(dend))
        entry["dendrogram"]["json"] = "dendrogram.json"
    if "svg" in want:
        (cell_dir / "dendrogram.svg").write_text(render.dendrogram_svg(dend, title), encoding="utf-8")
        entry["dendrogram"]["svg"] = "dendrogram.svg"
    if config.cut_k is not None:
        k = min(config.cut_k, dend.n_leaves)
        text = report_groups(dend, k)
        (cell_dir / f"groups_k{k}.txt").write_text(text, encoding="utf-8")
        entry["groups"] = clustering.cut(dend, k)
        entry["groups_file"] = f"groups_k{k}.txt"
    return entry


def _scatter_columns(matrix: ExpressionMatrix, meta: SampleMeta, compound: str | None):
    by_compound: dict[str, list] = {}
    for rec in meta.samples:
        if rec.role == ROLE_TREATED:
            by_compound.setdefault(rec.compound, []).append(rec)
    candidates = {c: recs for c, recs in by_compound.items() if len(recs) >= 2}
    if not candidates:
        return None
    if compound is None:
        compound = sorted(candidates)[0]
    elif compound not in candidates:
        raise ParameterError(f"compound {compound!r} does not have two treated replicates")
    recs = sorted(candidates[compound], key=lambda r: r.replicate)[:2]
    return compound, recs[0], recs[1]


def _run_cell(
    cell_index: int,
    n: int,
    alpha: float,
    context: ObjectiveContext,
    matrix: ExpressionMatrix,
    meta: SampleMeta,
    ratio_labels: list[str],
    weights: PairWeights,
    config: RunConfig,
    out_root: Path,
) -> tuple[str, dict, float]:
    started = time.perf_counter()
    params = ObjectiveParams(alpha=alpha, n=n, weights=weights)
    if n > context.n_features:
        raise ParameterError(f"n = {n} exceeds the {context.n_features} available features")
    cell_seed = derive_cell_seed(config.seed, cell_index)
    schedule = AnnealSchedule(
        t_init=config.t_init,
        t_final=config.t_final,
        gamma=config.gamma,
        swaps_per_temperature=config.swaps_per_temp,
        seed=cell_seed,
        restarts=config.restarts,
    )
    best, trace = run(context, params, schedule, return_final=config.return_final)

    cell_name = f"n{n}_alpha{_alpha_token(alpha)}"
    cell_dir = out_root / cell_name
    cell_dir.mkdir(parents=True, exist_ok=True)
    sel_payload = {
        "n": n,
        "alpha": alpha,
        "seed": cell_seed,
        "u": best.objective,
        "u1": best.u1,
        "u2": best.u2,
        "indices": list(best.indices),
        "feature_ids": [matrix.feature_ids[i] for i in best.indices],
    }
    _write_json(cell_dir / "selection.json", sel_payload)
    trace.to_csv(cell_dir / "trace.csv")

    idx = np.array(best.indices, dtype=np.int64)
    if config.cluster_mode == "ratios":
        labels = ratio_labels
        profiles = context.ratios[idx].T
    else:
        labels = _sample_labels(meta, matrix.sample_ids)
        profiles = matrix.values[idx].T
    entry = _cluster_outputs(cell_dir, labels, profiles, config, f"n={n}, alpha={_alpha_token(alpha)}")
    entry.update(
        n=n, alpha=alpha, seed=cell_seed,
        u=best.objective, u1=best.u1, u2=best.u2,
        selection="selection.json", trace="trace.csv", directory=cell_name,
    )

    wants_svg = config.format in ("svg", "all")
    if wants_svg:
        picked = _scatter_columns(matrix, meta, config.scatter_compound)
        if picked is not None:
            compound, rec1, rec2 = picked
            mask = np.zeros(matrix.n_features, dtype=bool)
            mask[idx] = True
            svg = render.scatter_svg(
                matrix.values[:, matrix.sample_index(rec1.sample_id)],
                matrix.values[:, matrix.sample_index(rec2.sample_id)],
                mask,
                f"{compound}_{rec1.replicate} level",
                f"{compound}_{rec2.replicate} level",
                f"{compound}: selected features, n={n}, alpha={_alpha_token(alpha)}",
            )
            (cell_dir / "scatter.svg").write_text(svg, encoding="utf-8")
            entry["scatter"] = "scatter.svg"

    key = f"n={n},alpha={_alpha_token(alpha)}"
    return key, entry, time.perf_counter() - started


def run_pipeline(config: RunConfig) -> int:
    out_root = Path(config.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    matrix, report = ingest.load_matrix(config.matrix)
    meta = ingest.load_meta(config.meta)
    entries = ingest.load_weights(config.weights) if config.weights else []
    ratio_matrix = ingest.compute_ratios(matrix, meta, report)
    weights = PairWeights.from_entries(ratio_matrix.treated_ids, entries, config.default_weight)
    context = ObjectiveContext.from_matrices(matrix, ratio_matrix)
    for message in report.warnings:
        log.warning("%s", message)
    for sample_id, value, count in report.zero_replacements:
        log.info("replaced %d zero(s) in column %s with %.6g", count, sample_id, value)

    ratio_labels = _sample_labels(meta, ratio_matrix.treated_ids)
    summary: dict = {
        "features": matrix.n_features,
        "samples": matrix.n_samples,
        "treated": ratio_matrix.n_treated,
        "dropped_features": report.dropped_features,
        "seed": config.seed,
        "cells": {},
    }
    timings: dict = {"cells": {}}
    total_start = time.perf_counter()

    if config.cluster_all_features:
        cell_dir = out_root / "all_features"
        cell_dir.mkdir(parents=True, exist_ok=True)
        if config.cluster_mode == "ratios":
            labels, profiles = ratio_labels, ratio_matrix.ratios.T
        else:
            labels, profiles = _sample_labels(meta, matrix.sample_ids), matrix.values.T
        entry = _cluster_outputs(
            cell_dir, labels, profiles, config, f"all features ({config.cluster_mode})"
        )
        entry["directory"] = "all_features"
        entry["mode"] = config.cluster_mode
        summary["all_features"] = entry
        timings["cells"]["all_features"] = time.perf_counter() - total_start
    else:
        cells = list(product(config.n, config.alpha))
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = [
                pool.submit(
                    _run_cell, i, n, alpha, context, matrix, meta,
                    ratio_labels, weights, config, out_root,
                )
                for i, (n, alpha) in enumerate(cells)
            ]
            for future in futures:
                key, entry, elapsed = future.result()
                summary["cells"][key] = entry
                timings["cells"][key] = elapsed

    timings["total"] = time.perf_counter() - total_start
    _write_json(out_root / "summary.json", summary)
    _write_json(out_root / "timings.json", timings)
    for key in summary["cells"]:
        cell = summary["cells"][key]
        print(f"{key}: u={cell['u']!r} u1={cell['u1']!r} u2={cell['u2']!r} -> {cell['directory']}")
    if "all_features" in summary:
        print(f"all_features ({config.cluster_mode}) -> all_features")
    print(f"summary: {out_root / 'summary.json'}")
    return EXIT_OK


def _add_run_parser(sub) -> None:
    p = sub.add_parser("run", help="run the selection + clustering pipeline")
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--matrix", help="expression matrix file (tsv/csv)")
    p.add_argument("--meta", help="sample metadata file")
    p.add_argument("--weights", help="pair weights file (optional)")
    p.add_argument("--n", action="append", type=int, help="subset size; repeat to sweep")
    p.add_argument("--alpha", action="append", type=float, help="blend weight; repeat to sweep")
    p.add_argument("--t-init", dest="t_init", type=float, help="initial temperature")
    p.add_argument("--t-final", dest="t_final", type=float, help="final temperature")
    p.add_argument("--gamma", type=float, help="cooling rate in (0, 1)")
    p.add_argument("--swaps-per-temp", dest="swaps_per_temp", type=int, help="proposals per temperature")
    p.add_argument("--restarts", type=int, help="independent chains per cell")
    p.add_argument("--seed", type=int, help="run seed (unsigned 64-bit)")
    p.add_argument("--default-weight", dest="default_weight", type=int, choices=(-1, 0, 1),
                   help="weight for pairs not listed in the weights file")
    p.add_argument("--cluster-mode", dest="cluster_mode", choices=_CLUSTER_MODES,
                   help="cluster log2 ratios (treated samples) or raw levels (all samples)")
    p.add_argument("--cluster-all-features", dest="cluster_all_features", action="store_true",
                   default=None, help="skip selection and cluster on all features")
    p.add_argument("--cut-k", dest="cut_k", type=int, help="also report the k-group cut")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.add_argument("--format", choices=_FORMATS, help="dendrogram export format")
    p.add_argument("--return-final", dest="return_final", action="store_true", default=None,
                   help="report the final annealing state instead of the best one")
    p.add_argument("--scatter-compound", dest="scatter_compound",
                   help="compound for the replicate scatter plot (default: first)")
    p.add_argument("--jobs", type=int, help="concurrent sweep cells")


def _add_synth_parser(sub) -> None:
    p = sub.add_parser("synth", help="generate a synthetic dataset in the pipeline formats")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--groups", default="G1:cmpA,cmpB;G2:cmpC,cmpD",
                   help="planted groups, e.g. 'G1:a,b;G2:c,d'")
    p.add_argument("--replicates", type=int, default=2)
    p.add_argument("--features", type=int, default=500)
    p.add_argument("--informative", type=int, default=50)
    p.add_argument("--effect-size", dest="effect_size", type=float, default=2.0)
    p.add_argument("--compound-effect-sd", dest="compound_effect_sd", type=float, default=0.4)
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=0.3)
    p.add_argument("--control-noise-sd", dest="control_noise_sd", type=float, default=0.0)
    p.add_argument("--baseline-log-mean", dest="baseline_log_mean", type=float, default=1.0)
    p.add_argument("--baseline-log-sd", dest="baseline_log_sd", type=float, default=2.0)
    p.add_argument("--zero-fraction", dest="zero_fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)


def _add_oracle_parser(sub) -> None:
    # intentionally undocumented: exhaustive golden-file generation for tests
    p = sub.add_parser("oracle")
    p.add_argument("--matrix", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--weights")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--default-weight", dest="default_weight", type=int, choices=(-1, 0, 1), default=1)
    p.add_argument("--out", required=True)


def _parse_groups(spec: str):
    groups = []
    for chunk in spec.split(";"):
        if ":" not in chunk:
            raise ParameterError(f"bad group spec {chunk!r}, expected 'label:compound,compound'")
        label, _, compounds = chunk.partition(":")
        groups.append((label.strip(), tuple(c.strip() for c in compounds.split(",") if c.strip())))
    return tuple(groups)


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.SynthSpec(
        groups=_parse_groups(args.groups),
        replicates=args.replicates,
        n_features=args.features,
        n_informative=args.informative,
        effect_size=args.effect_size,
        compound_effect_sd=args.compound_effect_sd,
        noise_sd=args.noise_sd,
        control_noise_sd=args.control_noise_sd,
        baseline_log_mean=args.baseline_log_mean,
        baseline_log_sd=args.baseline_log_sd,
        zero_fraction=args.zero_fraction,
        seed=args.seed,
    )
    matrix, meta, truth = synth.generate(spec)
    paths = synth.write_dataset(args.out_dir, matrix, meta, truth)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    matrix, report = ingest.load_matrix(args.matrix)
    meta = ingest.load_meta(args.meta)
    entries = ingest.load_weights(args.weights) if args.weights else []
    ratio_matrix = ingest.compute_ratios(matrix, meta, report)
    weights = PairWeights.from_entries(ratio_matrix.treated_ids, entries, args.default_weight)
    context = ObjectiveContext.from_matrices(matrix, ratio_matrix)
    params = ObjectiveParams(alpha=args.alpha, n=args.n, weights=weights)
    result = exhaustive_optimum(context, params)
    best: Selection = result.best_subset
    _write_json(
        args.out,
        {
            "n": args.n,
            "alpha": args.alpha,
            "u": best.objective,
            "u1": best.u1,
            "u2": best.u2,
            "indices": list(best.indices),
            "feature_ids": [matrix.feature_ids[i] for i in best.indices],
            "evaluated": result.evaluated_count,
        },
    )
    print(f"evaluated {result.evaluated_count} subsets, best u = {best.objective!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnasel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,synth}")
    _add_run_parser(sub)
    _add_synth_parser(sub)
    _add_oracle_parser(sub)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_pipeline(resolve_config(args))
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        parser.error(f"unknown command {args.command!r}")
    except ParameterError as exc:
        log.error("parameter error: %s", exc)
        return EXIT_PARAMETER
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO
    return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
