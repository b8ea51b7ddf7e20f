"""Command line front end.

Every subcommand writes its artifacts under --out together with a
manifest.json recording the invocation, the input and output file
digests, the seed, and the wall time, so a run can be audited later.
Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    apply_ixp_labels,
    apply_sibling_labels,
    balance_and_split,
    load_ixp_list,
    load_label_source,
    load_org_map,
    vote_intersection,
)
from .evaluate import (
    accuracy,
    confusion_matrix,
    feature_importance,
    format_confusion,
    metrics,
    sweep,
)
from .gcn import (
    BINARY_DEFAULTS,
    MULTI_DEFAULTS,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    write_history_csv,
)
from .ingest import AllocationTable, ingest_file, write_paths_file
from .pipeline import (
    DataFiles,
    adjacency_for,
    build_bundle,
    degree_gap_baseline,
    importance_runner,
    majority_baseline,
    make_dataset,
    prepare_labels,
    restrict_to_graph,
    run_training,
)
from .gcn import predict as gcn_predict
from .synth import SynthConfig, export, generate, is_valley_free, simulate_paths
from .topology import build_graph, write_features_csv


# -- manifest --------------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    inputs: dict[str, Path | None],
    outputs: dict[str, Path],
    seed: int | None,
    started: float,
) -> Path:
    doc = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {
            name: {"path": str(p), "sha256": _sha256(p)}
            for name, p in sorted(inputs.items())
            if p is not None
        },
        "outputs": {
            name: {"path": str(p), "sha256": _sha256(p)}
            for name, p in sorted(outputs.items())
        },
        "wall_time_s": time.perf_counter() - started,
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- argument plumbing -----------------------------------------------------


def _blocks(text: str) -> tuple[int, int]:
    try:
        nb, nl = text.lower().split("x")
        return int(nb), int(nl)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected BLOCKSxLAYERS such as 2x1, got {text!r}"
        ) from None


def _add_data_flags(p: argparse.ArgumentParser, labels: bool = True) -> None:
    p.add_argument("--data", help="directory holding the conventional file names")
    p.add_argument("--paths", help="AS path observations, one a|b|c line each")
    p.add_argument("--alloc", help="allocated ASN ranges, one lo-hi line each")
    if labels:
        p.add_argument(
            "--labels",
            action="append",
            help="relationship source in a|b|code form; repeat per source",
        )
        p.add_argument("--orgs", help="asn,org_id file for sibling overrides")
        p.add_argument("--ixps", help="route server ASN list for x2x overrides")
    p.add_argument("--types", help="asn,type file of registered business types")
    p.add_argument("--clique", help="fixed core member list; skips inference")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("binary", "multi"), default="multi")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--wd", type=float, help="weight decay strength")
    p.add_argument("--epochs", type=int)
    p.add_argument("--blocks", type=_blocks, help="BLOCKSxLAYERS, e.g. 2x1")
    p.add_argument("--hidden", type=int)
    p.add_argument("--delta", type=float, default=0.05,
                   help="edge weight floor in the propagation matrix")
    p.add_argument("--seed", type=int, default=0)


def _require(path_str: str | None, what: str) -> Path:
    if not path_str:
        raise SystemExit2(f"missing required flag for {what}")
    p = Path(path_str)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


class SystemExit2(Exception):
    """Usage error discovered after argparse."""


def _files_from_args(
    args, need_labels: bool = True, need_paths: bool = True
) -> DataFiles:
    if getattr(args, "data", None):
        files = DataFiles.discover(args.data)
    else:
        paths_str = getattr(args, "paths", None)
        if need_paths:
            paths = _require(paths_str, "paths")
        elif paths_str:
            paths = Path(paths_str)
            if not paths.is_file():
                raise FileNotFoundError(f"paths file not found: {paths}")
        else:
            paths = Path("")  # never read when paths are optional
        files = DataFiles(paths=paths, labels=[])
    # explicit flags override whatever discovery found

    def opt(name: str) -> Path | None:
        value = getattr(args, name, None)
        if not value:
            return None
        p = Path(value)
        if not p.is_file():
            raise FileNotFoundError(f"{name} file not found: {p}")
        return p

    for name in ("orgs", "ixps", "types", "alloc", "clique"):
        found = opt(name)
        if found is not None:
            setattr(files, name, found)
    if getattr(args, "labels", None):
        files.labels = [_require(l, "labels") for l in args.labels]
    if need_labels and len(files.labels) < 2:
        raise SystemExit2(
            f"need at least two --labels sources, got {len(files.labels)}"
        )
    return files


def _overrides(args) -> dict:
    out = {}
    if args.lr is not None:
        out["learning_rate"] = args.lr
    if args.wd is not None:
        out["weight_decay"] = args.wd
    if args.epochs is not None:
        out["epochs"] = args.epochs
    if args.blocks is not None:
        out["block_spec"] = args.blocks
    if args.hidden is not None:
        out["hidden"] = args.hidden
    return out


def _prepare(files: DataFiles, mode: str, seed: int, k_candidates: int = 20):
    bundle = build_bundle(files, k_candidates)
    labeled, report = prepare_labels(files)
    usable, dropped = restrict_to_graph(labeled, bundle.graph)
    dataset = make_dataset(usable, bundle.features.index, mode, seed)
    return bundle, report, dropped, dataset


def _metrics_doc(class_names, outcome=None, splits=None) -> dict:
    """Accuracy and one-vs-rest precision/recall per split."""
    doc: dict = {"classes": list(class_names)}
    pieces = splits or {
        "val": outcome.val_confusion,
        "test": outcome.test_confusion,
    }
    for name, cm in pieces.items():
        per_class = {}
        for k, cls in enumerate(class_names):
            m = metrics(cm, k)
            per_class[cls] = {
                "precision": m.precision,
                "recall": m.recall,
                "precision_defined": m.precision_defined,
                "recall_defined": m.recall_defined,
            }
        doc[name] = {
            "accuracy": accuracy(cm),
            "confusion": cm.tolist(),
            "per_class": per_class,
        }
    return doc


# -- subcommands -----------------------------------------------------------


def cmd_ingest(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    paths_file = _require(args.paths, "paths")
    table = None
    if args.alloc:
        table = AllocationTable.load(_require(args.alloc, "alloc"))
    paths, report = ingest_file(paths_file, table)
    clean = out / "paths_clean.txt"
    write_paths_file(paths, clean)
    report_file = out / "ingest_report.json"
    report_file.write_text(report.to_json(), encoding="utf-8")
    write_manifest(
        out, "ingest", {"alloc": bool(table)},
        {"paths": paths_file, "alloc": Path(args.alloc) if args.alloc else None},
        {"paths_clean": clean, "report": report_file}, None, started,
    )
    print(f"parsed {report.parsed} paths, kept {report.accepted}")
    print(
        f"compressed {report.compressed}, loops {report.rejected_loop}, "
        f"unallocated {report.rejected_unallocated}, malformed {report.malformed}"
    )
    return 0


def cmd_features(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    files = _files_from_args(args, need_labels=False)
    bundle = build_bundle(files, args.k_candidates)
    features_file = out / "features.csv"
    write_features_csv(bundle.features, features_file)
    clique_file = out / "clique.txt"
    clique_file.write_text(
        "".join(f"{a}\n" for a in sorted(bundle.clique)), encoding="utf-8"
    )
    write_manifest(
        out, "features", {"k_candidates": args.k_candidates},
        {"paths": files.paths, "alloc": files.alloc, "types": files.types,
         "clique": files.clique},
        {"features": features_file, "clique": clique_file}, None, started,
    )
    print(f"graph: {bundle.graph.num_nodes} nodes, {bundle.graph.num_edges} edges")
    print(f"clique: {sorted(bundle.clique)}")
    diag = bundle.features.diagnostics
    if diag.get("unreachable_clique_pairs"):
        print(f"unreachable clique pairs: {diag['unreachable_clique_pairs']}")
    return 0


def cmd_dataset(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    files = _files_from_args(args, need_labels=True, need_paths=False)
    sources = [load_label_source(p) for p in files.labels]
    edges, report = vote_intersection(sources)
    if files.ixps:
        edges = apply_ixp_labels(edges, load_ixp_list(files.ixps))
    if files.orgs:
        edges = apply_sibling_labels(edges, load_org_map(files.orgs))
    dropped = 0
    if files.paths.is_file():
        paths, _ = ingest_file(files.paths)
        edges, dropped = restrict_to_graph(edges, build_graph(paths))
    split_set = balance_and_split(edges, args.seed, args.mode)
    edges_file = out / "edges.csv"
    split_set.write_csv(edges_file)
    vote_file = out / "vote_report.json"
    vote_file.write_text(report.to_json(), encoding="utf-8")
    write_manifest(
        out, "dataset", {"mode": args.mode, "dropped_offgraph": dropped},
        {"paths": files.paths if files.paths.is_file() else None,
         **{f"labels_{i}": p for i, p in enumerate(files.labels, 1)},
         "orgs": files.orgs, "ixps": files.ixps},
        {"edges": edges_file, "vote_report": vote_file}, args.seed, started,
    )
    counts = split_set.counts()
    print(f"voted pairs: {report.intersection_pairs} of {report.union_pairs} "
          f"(coincidence rate {report.coincidence_rate:.4f})")
    print("class counts: " + ", ".join(
        f"{c.value}={n}" for c, n in counts.items() if n
    ))
    return 0


def cmd_train(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    files = _files_from_args(args)
    bundle, report, dropped, dataset = _prepare(
        files, args.mode, args.seed, args.k_candidates
    )
    config = TrainConfig.for_mode(args.mode, args.seed, **_overrides(args))
    a_hat = adjacency_for(bundle.graph, bundle.features, True, args.delta)
    outcome = run_training(bundle.features.values, a_hat, dataset, config)

    checkpoint = out / "checkpoint.json"
    save_checkpoint(
        checkpoint,
        outcome.result.model,
        meta={
            "mode": args.mode,
            "seed": args.seed,
            "delta": args.delta,
            "classes": dataset.class_names,
            "best_epoch": outcome.result.best_epoch,
        },
    )
    history = out / "history.csv"
    write_history_csv(outcome.result.history, history)
    metrics_file = out / "metrics.json"
    doc = _metrics_doc(dataset.class_names, outcome)
    doc["best_epoch"] = outcome.result.best_epoch
    doc["best_val_accuracy"] = outcome.result.best_val_accuracy
    doc["vote"] = json.loads(report.to_json())
    doc["dropped_offgraph"] = dropped
    doc["clique"] = sorted(bundle.clique)
    metrics_file.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    inputs = {
        "paths": files.paths,
        **{f"labels_{i}": p for i, p in enumerate(files.labels, 1)},
        "orgs": files.orgs, "ixps": files.ixps, "types": files.types,
        "alloc": files.alloc, "clique": files.clique,
    }
    write_manifest(
        out, "train",
        {**asdict(config), "block_spec": list(config.block_spec),
         "delta": args.delta},
        inputs,
        {"checkpoint": checkpoint, "history": history, "metrics": metrics_file},
        args.seed, started,
    )
    print(f"best epoch {outcome.result.best_epoch}: "
          f"val accuracy {outcome.val_accuracy:.4f}, "
          f"test accuracy {outcome.test_accuracy:.4f}")
    print(format_confusion(outcome.test_confusion, dataset.class_names))
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    checkpoint = _require(args.checkpoint, "checkpoint")
    model, meta = load_checkpoint(checkpoint)
    mode = args.mode or meta.get("mode", "multi")
    seed = args.seed if args.seed is not None else int(meta.get("seed", 0))
    delta = args.delta if args.delta is not None else float(meta.get("delta", 0.05))
    files = _files_from_args(args)
    bundle, _, _, dataset = _prepare(files, mode, seed)
    if model.input_dim != bundle.features.values.shape[1]:
        raise ValueError(
            f"checkpoint expects {model.input_dim} feature columns, "
            f"data has {bundle.features.values.shape[1]}"
        )
    a_hat = adjacency_for(bundle.graph, bundle.features, True, delta)
    splits = {}
    split_accuracy = {}
    for name in ("val", "test"):
        pairs, labels = dataset.split(name)
        pred, _ = gcn_predict(model, a_hat, bundle.features.values, pairs)
        cm = confusion_matrix(labels, pred, len(dataset.classes))
        splits[name] = cm
        split_accuracy[name] = accuracy(cm)
    doc = _metrics_doc(dataset.class_names, splits=splits)
    metrics_file = out / "metrics.json"
    metrics_file.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(
        out, "eval", {"mode": mode, "delta": delta},
        {"checkpoint": checkpoint, "paths": files.paths,
         **{f"labels_{i}": p for i, p in enumerate(files.labels, 1)}},
        {"metrics": metrics_file}, seed, started,
    )
    print(f"val accuracy {split_accuracy['val']:.4f}, "
          f"test accuracy {split_accuracy['test']:.4f}")
    print(format_confusion(splits["test"], dataset.class_names))
    return 0


def cmd_predict(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    checkpoint = _require(args.checkpoint, "checkpoint")
    model, meta = load_checkpoint(checkpoint)
    delta = args.delta if args.delta is not None else float(meta.get("delta", 0.05))
    files = _files_from_args(args, need_labels=False)
    bundle = build_bundle(files, args.k_candidates)
    if model.input_dim != bundle.features.values.shape[1]:
        raise ValueError(
            f"checkpoint expects {model.input_dim} feature columns, "
            f"data has {bundle.features.values.shape[1]}"
        )
    classes = meta.get("classes") or ["p2p", "p2c", "s2s", "x2x"][: model.n_classes]

    if args.pairs:
        pair_file = _require(args.pairs, "pairs")
        wanted = []
        with open(pair_file, encoding="utf-8") as fh:
            for n, raw in enumerate(fh, start=1):
                text = raw.strip()
                if not text or text.startswith("#"):
                    continue
                bits = text.split("|")
                if len(bits) < 2:
                    raise ValueError(f"pairs line {n}: expected a|b, got {text!r}")
                wanted.append((int(bits[0]), int(bits[1])))
    else:
        wanted = bundle.graph.edges()

    index = bundle.features.index
    for a, b in wanted:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise ValueError(f"AS{missing} does not appear in the paths")
    rows = np.array([(index[a], index[b]) for a, b in wanted], dtype=np.intp)
    rows = rows.reshape(len(wanted), 2)
    a_hat = adjacency_for(bundle.graph, bundle.features, True, delta)
    pred, logp = gcn_predict(model, a_hat, bundle.features.values, rows)
    pred_file = out / "predictions.csv"
    with open(pred_file, "w", encoding="utf-8") as fh:
        fh.write("a,b,label," + ",".join(f"logp_{c}" for c in classes) + "\n")
        for (a, b), k, lp in zip(wanted, pred, logp):
            fh.write(f"{a},{b},{classes[k]}," + ",".join(repr(v) for v in lp) + "\n")
    write_manifest(
        out, "predict", {"pairs": len(wanted), "delta": delta},
        {"checkpoint": checkpoint, "paths": files.paths},
        {"predictions": pred_file}, None, started,
    )
    print(f"wrote {len(wanted)} predictions to {pred_file}")
    return 0


def cmd_importance(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    files = _files_from_args(args)
    bundle, _, _, dataset = _prepare(files, args.mode, args.seed, args.k_candidates)
    config = TrainConfig.for_mode(args.mode, args.seed, **_overrides(args))
    runner = importance_runner(bundle.graph, bundle.features, dataset, config,
                               args.delta)
    report = feature_importance(runner, threads=args.threads)
    csv_file = out / "importance.csv"
    report.write_csv(csv_file)
    json_file = out / "importance.json"
    json_file.write_text(report.to_json(), encoding="utf-8")
    write_manifest(
        out, "importance",
        {**asdict(config), "block_spec": list(config.block_spec),
         "threads": args.threads},
        {"paths": files.paths,
         **{f"labels_{i}": p for i, p in enumerate(files.labels, 1)}},
        {"importance_csv": csv_file, "importance_json": json_file},
        args.seed, started,
    )
    print(f"baseline accuracy {report.baseline_accuracy:.4f}")
    if report.degenerate:
        print("importance degenerate: removals never changed accuracy")
    for e in sorted(report.entries, key=lambda e: -(e.score or 0.0)):
        share = "n/a" if e.score is None else f"{e.score:6.2f}%"
        print(f"  {e.feature:<16} {share}  (without: {e.accuracy_without:.4f})")
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    files = _files_from_args(args)
    bundle, _, _, dataset = _prepare(files, args.mode, args.seed, args.k_candidates)
    a_hat = adjacency_for(bundle.graph, bundle.features, True, args.delta)

    grid: dict[str, list] = {}
    if args.lr:
        grid["learning_rate"] = [float(v) for v in args.lr.split(",")]
    if args.wd:
        grid["weight_decay"] = [float(v) for v in args.wd.split(",")]
    if args.blocks:
        grid["block_spec"] = [_blocks(v) for v in args.blocks.split(",")]
    if not grid:
        raise SystemExit2("sweep needs at least one of --lr, --wd, --blocks lists")
    defaults = BINARY_DEFAULTS if args.mode == "binary" else MULTI_DEFAULTS
    preferred = {k: defaults[k] for k in grid if k in defaults}
    fixed = {}
    if args.epochs is not None:
        fixed["epochs"] = args.epochs
    if args.hidden is not None:
        fixed["hidden"] = args.hidden

    def run_one(params: dict) -> tuple[float, float]:
        config = TrainConfig.for_mode(args.mode, args.seed, **fixed, **params)
        outcome = run_training(bundle.features.values, a_hat, dataset, config)
        return outcome.val_accuracy, outcome.test_accuracy

    report = sweep(run_one, grid, preferred=preferred, threads=args.threads)
    csv_file = out / "sweep.csv"
    report.write_csv(csv_file)
    json_file = out / "sweep.json"
    json_file.write_text(report.to_json(), encoding="utf-8")
    write_manifest(
        out, "sweep", {"grid": {k: [repr(v) for v in vs] for k, vs in grid.items()}},
        {"paths": files.paths,
         **{f"labels_{i}": p for i, p in enumerate(files.labels, 1)}},
        {"sweep_csv": csv_file, "sweep_json": json_file}, args.seed, started,
    )
    print(f"swept {len(report.rows)} settings; best: {report.best}")
    return 0


def cmd_synth(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    config = SynthConfig(
        n_tier1=args.n_tier1,
        n_mid=args.n_mid,
        n_stub=args.n_stub,
        n_ixp=args.n_ixp,
        n_orgs=args.n_orgs,
        n_vps=args.n_vps,
        paths_per_vp=args.paths_per_vp,
        seed=args.seed,
    )
    graph, truth = generate(config)
    paths, stats = simulate_paths(truth, config)
    bad = sum(1 for p in paths if not is_valley_free(p.hops, truth))
    files = export(
        truth, paths, out,
        n_sources=args.n_sources,
        perturbation=args.perturbation,
        seed=args.seed,
    )
    write_manifest(
        out, "synth",
        {**asdict(config), "n_sources": args.n_sources,
         "perturbation": args.perturbation},
        {}, files, args.seed, started,
    )
    counts = truth.counts()
    print(f"planted {graph.num_nodes} nodes, {graph.num_edges} edges "
          f"({', '.join(f'{c.value}={n}' for c, n in counts.items())})")
    print(f"emitted {stats.emitted} paths from {len(stats.vantage_points)} "
          f"vantage points ({stats.unreachable} unreachable, "
          f"{bad} policy violations)")
    return 0


# -- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bgprel",
        description="Infer AS business relationships from BGP path observations.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and sanitize a paths file")
    p.add_argument("--paths", required=True)
    p.add_argument("--alloc")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="build the node feature matrix")
    _add_data_flags(p, labels=False)
    p.add_argument("--k-candidates", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("dataset", help="vote, override, balance and split labels")
    _add_data_flags(p)
    p.add_argument("--mode", choices=("binary", "multi"), default="multi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the edge classifier")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--k-candidates", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on the held-out splits")
    _add_data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("binary", "multi"))
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify AS pairs with a checkpoint")
    _add_data_flags(p, labels=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", help="a|b lines; defaults to every observed edge")
    p.add_argument("--delta", type=float)
    p.add_argument("--k-candidates", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("importance", help="leave-one-out feature importance")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--k-candidates", type=int, default=20)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("sweep", help="grid search over training settings")
    _add_data_flags(p)
    p.add_argument("--mode", choices=("binary", "multi"), default="multi")
    p.add_argument("--lr", help="comma list of learning rates")
    p.add_argument("--wd", help="comma list of weight decays")
    p.add_argument("--blocks", help="comma list of BLOCKSxLAYERS specs")
    p.add_argument("--epochs", type=int, help="fixed for every grid entry")
    p.add_argument("--hidden", type=int, help="fixed for every grid entry")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-candidates", type=int, default=20)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic topology bundle")
    p.add_argument("--n-tier1", type=int, default=8)
    p.add_argument("--n-mid", type=int, default=500)
    p.add_argument("--n-stub", type=int, default=800)
    p.add_argument("--n-ixp", type=int, default=30)
    p.add_argument("--n-orgs", type=int, default=100)
    p.add_argument("--n-vps", type=int, default=70)
    p.add_argument("--paths-per-vp", type=int, default=1500)
    p.add_argument("--n-sources", type=int, default=3)
    p.add_argument("--perturbation", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
