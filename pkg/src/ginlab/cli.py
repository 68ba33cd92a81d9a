"""Single command-line entry point for dataset inspection, refinement tests,
kernel classification, model training, and the expressiveness suites."""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import datasets as ds
from . import expressiveness as xp
from . import train as tr
from . import wl
from .gnn import GnnConfig, PRESET_NAMES, UnknownPresetError, preset_config
from .graphs import counterexample_pairs, dedup_by_isomorphism, enumerate_connected_graphs, random_graph
from .tensor import save_checkpoint

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": message}) + "\n")
    return code


def _out_dir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path | None, name: str, text: str) -> None:
    if out is not None:
        (out / name).write_text(text, encoding="utf-8", newline="")


def _load_dataset(args) -> ds.Dataset:
    if getattr(args, "json", None):
        dataset = ds.load_json_dataset(args.json)
    elif getattr(args, "data", None) and getattr(args, "name", None):
        dataset = ds.load_tud_dataset(args.data, args.name)
    elif getattr(args, "synth", None):
        dataset = _make_synth(args.synth, getattr(args, "num_per_class", 50), args.seed)
    else:
        raise ds.DatasetLoadError(
            "no dataset given: use --json FILE, --data DIR --name PREFIX, or --synth KIND"
        )
    features = getattr(args, "features", "as-is")
    if features == "uniform":
        dataset = ds.uniform_features(dataset)
    elif features == "degree":
        dataset = ds.degree_onehot_features(dataset, getattr(args, "degree_cap", ds.DEFAULT_DEGREE_CAP))
    return dataset


def _make_synth(kind: str, num_per_class: int, seed: int) -> ds.Dataset:
    if kind == "cycles-stars":
        return ds.degree_onehot_features(
            ds.cycles_vs_stars(num_per_class=num_per_class, seed=seed), cap=16
        )
    if kind == "density":
        return ds.density_surrogate(num_per_class=num_per_class, seed=seed)
    raise ds.DatasetLoadError(f"unknown synthetic kind {kind!r}; use cycles-stars or density")


def _load_graph(path_or_name: str):
    pairs = {p.name: p for p in counterexample_pairs()}
    if ":" in path_or_name and path_or_name.split(":", 1)[0] in pairs:
        name, side = path_or_name.split(":", 1)
        pair = pairs[name]
        return pair.g1 if side == "a" else pair.g2
    dataset = ds.load_json_dataset(path_or_name)
    return dataset.graphs[0]


def _resolve_presets(text: str, hidden: int, dropout: float, readout: str, num_layers: int):
    names = [t.strip() for t in text.split(",") if t.strip()]
    if names == ["all"]:
        names = list(PRESET_NAMES)
    return [
        (
            name,
            preset_config(
                name,
                hidden_dim=hidden,
                dropout_p=dropout,
                readout=readout,
                num_layers=num_layers,
            ),
        )
        for name in names
    ]


def _configs_sidecar(out: Path | None, configs: list[tuple[str, GnnConfig]]) -> None:
    if out is not None:
        payload = {name: json.loads(cfg.to_json()) for name, cfg in configs}
        _write(out, "configs.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_dataset_stats(args) -> int:
    stats = ds.dataset_stats(_load_dataset(args))
    text = json.dumps(stats, sort_keys=True)
    print(text)
    _write(_out_dir(args), "stats.json", text + "\n")
    return EXIT_OK


def cmd_wl(args) -> int:
    g1 = _load_graph(args.a)
    g2 = _load_graph(args.b)
    iters = args.iters if args.iters is not None else max(g1.num_nodes, g2.num_nodes)
    result = wl.wl_test(g1, g2, iters)
    print(result.verdict)
    payload = {
        "verdict": result.verdict,
        "decided_at": result.decided_at,
        "iterations_run": result.iterations_run,
    }
    _write(_out_dir(args), "wl.json", json.dumps(payload, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_wl_classify(args) -> int:
    dataset = _load_dataset(args)
    if args.sweep:
        results = [
            wl.wl_classify(dataset, k, folds=args.folds, seed=args.seed)
            for k in range(1, 7)
        ]
        best = max(results, key=lambda r: r.accuracy_mean)
    else:
        best = wl.wl_classify(dataset, args.iters, folds=args.folds, seed=args.seed)
    payload = {
        "dataset": dataset.name,
        "iterations": best.iterations,
        "accuracy_mean": best.accuracy_mean,
        "accuracy_std": best.accuracy_std,
        "best_strength": best.best_strength,
        "train_accuracy_mean": best.train_accuracy_mean,
    }
    text = json.dumps(payload, sort_keys=True)
    print(text)
    _write(_out_dir(args), "wl_classify.json", text + "\n")
    return EXIT_OK


def _spec_from_args(args, cfg: GnnConfig) -> tr.TrainSpec:
    return tr.TrainSpec(
        config=cfg,
        epochs=args.epochs,
        batch_size=args.batch_size,
        folds=args.folds,
        seed=args.seed,
        allow_off_grid=args.off_grid,
    )


def _readout_for(args, dataset) -> str:
    return tr.default_readout(dataset) if args.readout == "auto" else args.readout


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    readout = _readout_for(args, dataset)
    configs = _resolve_presets(args.preset, args.hidden, args.dropout, readout, args.layers)
    name, cfg = configs[0]
    record = tr.train_model(_spec_from_args(args, cfg), dataset)
    out = _out_dir(args)
    _configs_sidecar(out, configs)
    long_rows, summary_rows = [], [
        dict(config=name, mean=record.val_mean, std=record.val_std,
             selected_epoch=record.selected_epoch)
    ]
    for f, fc in enumerate(record.folds):
        for epoch in range(len(fc.train_acc)):
            for split, metric, value in (
                ("train", "loss", fc.train_loss[epoch]),
                ("train", "accuracy", fc.train_acc[epoch]),
                ("val", "accuracy", fc.val_acc[epoch]),
            ):
                long_rows.append(
                    dict(dataset=dataset.name, config=name, fold=f, epoch=epoch,
                         split=split, metric=metric, value=value)
                )
    _write(out, "results.csv", tr.rows_to_csv(
        long_rows, ["dataset", "config", "fold", "epoch", "split", "metric", "value"]))
    _write(out, "summary.csv", tr.rows_to_csv(
        summary_rows, ["config", "mean", "std", "selected_epoch"]))
    print(json.dumps(
        {"config": name, "val_mean": record.val_mean, "val_std": record.val_std,
         "selected_epoch": record.selected_epoch,
         "final_train_acc": record.final_train_acc_mean()}, sort_keys=True))
    return EXIT_OK


def cmd_table(args) -> int:
    dataset = _load_dataset(args)
    readout = _readout_for(args, dataset)
    configs = _resolve_presets(args.presets, args.hidden, args.dropout, readout, args.layers)
    specs = [(name, _spec_from_args(args, cfg)) for name, cfg in configs]
    long_rows, summary_rows = tr.run_table(dataset, specs, wl_iterations=args.wl_iters,
                                           wl_seed=args.seed)
    out = _out_dir(args)
    _configs_sidecar(out, configs)
    results = tr.rows_to_csv(
        long_rows, ["dataset", "config", "fold", "epoch", "split", "metric", "value"])
    summary = tr.rows_to_csv(summary_rows, ["config", "mean", "std", "selected_epoch"])
    _write(out, "results.csv", results)
    _write(out, "summary.csv", summary)
    print(summary, end="")
    return EXIT_OK


def cmd_curves(args) -> int:
    dataset = _load_dataset(args)
    readout = _readout_for(args, dataset)
    configs = _resolve_presets(args.presets, args.hidden, args.dropout, readout, args.layers)
    out = _out_dir(args)
    _configs_sidecar(out, configs)
    rows = []
    for name, cfg in configs:
        curves, model = tr.fit_training_curve(_spec_from_args(args, cfg), dataset)
        for epoch in range(len(curves.train_acc)):
            rows.append(dict(dataset=dataset.name, config=name, fold=0, epoch=epoch,
                             split="train", metric="loss", value=curves.train_loss[epoch]))
            rows.append(dict(dataset=dataset.name, config=name, fold=0, epoch=epoch,
                             split="train", metric="accuracy", value=curves.train_acc[epoch]))
        if out is not None:
            save_checkpoint(model.named_parameters(), out / f"model-{name}")
    rows.append(dict(dataset=dataset.name, config=tr.WL_ROW_NAME, fold=0, epoch="",
                     split="train", metric="accuracy",
                     value=wl.wl_training_accuracy(dataset, args.wl_iters)))
    text = tr.rows_to_csv(
        rows, ["dataset", "config", "fold", "epoch", "split", "metric", "value"])
    _write(out, "curves.csv", text)
    print(text, end="")
    return EXIT_OK


def _atlas_pairs(max_nodes: int, random_pairs: int, seed: int):
    reps = []
    for n in range(1, max_nodes + 1):
        reps.extend(dedup_by_isomorphism(enumerate_connected_graphs(n)))
    pairs = []
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            pairs.append((f"enum_{i}_vs_{j}", reps[i], reps[j]))
    for p in counterexample_pairs():
        if p.name == "c6_vs_2c3":
            pairs.append((p.name, p.g1, p.g2))
    rng = np.random.default_rng(seed)
    for k in range(random_pairs):
        n = int(rng.integers(4, 9))
        g1 = random_graph(n, float(rng.uniform(0.2, 0.6)), int(rng.integers(0, 2**31)))
        g2 = random_graph(n, float(rng.uniform(0.2, 0.6)), int(rng.integers(0, 2**31)))
        pairs.append((f"rand_{k}", g1, g2))
    return pairs


def cmd_atlas(args) -> int:
    configs: list = list(
        _resolve_presets(args.presets, args.hidden, 0.0, "sum", args.layers)
    )
    if args.ideal:
        configs.append(xp.IDEAL_CONFIG_NAME)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    pairs = _atlas_pairs(args.max_nodes, args.random_pairs, args.seed)
    if args.threads > 1 and len(pairs) > 1:
        chunks = np.array_split(np.arange(len(pairs)), args.threads)
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            parts = list(
                pool.map(
                    lambda idx: xp.distinguishability_atlas(
                        [pairs[i] for i in idx], configs, seeds
                    ),
                    [c for c in chunks if len(c)],
                )
            )
        rows = [row for part in parts for row in part.rows]
        result = xp.AtlasResult(rows=rows)
    else:
        result = xp.distinguishability_atlas(pairs, configs, seeds)
    out = _out_dir(args)
    _configs_sidecar(out, [c for c in configs if isinstance(c, tuple)])
    text = result.to_csv()
    _write(out, "atlas.csv", text)
    print(f"atlas: {len(result.rows)} rows over {len(pairs)} pairs; containment holds")
    return EXIT_OK


def cmd_lemmas(args) -> int:
    suites = ("sum", "gin", "onelayer", "mean", "max") if args.suite == "all" else (args.suite,)
    report = []
    for suite in suites:
        if suite == "sum":
            n = xp.certify_sum_injectivity()
            report.append(f"sum: {n} multisets, all encodings pairwise distinct")
        elif suite == "gin":
            n = xp.certify_gin_injectivity()
            report.append(f"gin: {n} (center, multiset) pairs, all encodings distinct")
        elif suite == "onelayer":
            from .graphs import Multiset

            worst = 0.0
            scale = 0.0
            for dim in range(1, 9):
                rep = xp.one_layer_collision(
                    Multiset.from_iterable([1] * 5),
                    Multiset.from_iterable([2, 3]),
                    trials=100, dim=dim, seed=args.seed + dim,
                )
                worst = max(worst, rep.max_abs_diff)
                scale = max(scale, rep.scale)
            if worst >= 1e-9 * scale:
                raise AssertionError(
                    f"one-layer collision identity failed: max diff {worst} vs scale {scale}"
                )
            report.append(f"onelayer: max diff {worst:.3e} < 1e-9 * scale ({scale:.3e})")
        elif suite == "mean":
            n = xp.certify_mean_max_semantics()
            report.append(f"mean: {n} pairs, collisions exactly on distribution-equal pairs")
        elif suite == "max":
            n = xp.certify_mean_max_semantics()
            report.append(f"max: {n} pairs, collisions exactly on set-equal pairs")
        else:
            return _fail("usage", f"unknown suite {suite!r}", EXIT_USAGE)
        # figure verdicts come along with every full run
    if args.suite == "all":
        for name, x1, x2, expected in xp.fig3_multiset_pairs():
            enc = xp.InjectiveEncoder(sorted({*x1.elements(), *x2.elements(), "a"}), 5)
            got = xp.aggregator_semantics_check(x1, x2, enc, seed=args.seed)
            if got != expected:
                raise AssertionError(f"{name}: verdicts {got} != expected {expected}")
            report.append(f"{name}: verdicts match ({got.as_dict()})")
    text = "\n".join(report) + "\n"
    print(text, end="")
    _write(_out_dir(args), "lemmas.txt", text)
    return EXIT_OK


def cmd_synth(args) -> int:
    dataset = _make_synth(args.kind, args.num_per_class, args.seed)
    out = _out_dir(args)
    target = (out or Path(".")) / f"{dataset.name}.json"
    ds.save_json_dataset(dataset, target)
    print(json.dumps({"written": str(target), **ds.dataset_stats(dataset)}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p, with_out=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if with_out:
        p.add_argument("--out", type=str, default=None, help="output directory")


def _add_dataset_args(p):
    p.add_argument("--data", type=str, default=None, help="TU-format dataset directory")
    p.add_argument("--name", type=str, default=None, help="TU dataset prefix")
    p.add_argument("--json", type=str, default=None, help="JSON dataset file")
    p.add_argument("--synth", type=str, default=None,
                   help="synthetic dataset kind (cycles-stars or density)")
    p.add_argument("--num-per-class", type=int, default=50, dest="num_per_class")
    p.add_argument("--features", choices=("as-is", "uniform", "degree"), default="as-is")
    p.add_argument("--degree-cap", type=int, default=ds.DEFAULT_DEGREE_CAP, dest="degree_cap")


def _add_model_args(p, multi: bool):
    if multi:
        p.add_argument("--presets", type=str, default="all")
    else:
        p.add_argument("--preset", type=str, required=True)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--readout", choices=("auto", "sum", "mean"), default="auto")
    p.add_argument("--epochs", type=int, default=350)
    p.add_argument("--batch-size", type=int, default=128, dest="batch_size")
    p.add_argument("--folds", type=int, default=tr.PROTOCOL_FOLDS)
    p.add_argument("--off-grid", action="store_true", dest="off_grid",
                   help="permit hyperparameters outside the standard grid")
    p.add_argument("--wl-iters", type=int, default=4, dest="wl_iters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ginlab",
        description="Graph model expressiveness laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-stats", help="graph/class counts and average size")
    _add_dataset_args(p)
    _add_common(p)
    p.set_defaults(fn=cmd_dataset_stats)

    p = sub.add_parser("wl", help="refinement-based isomorphism test on two graphs")
    p.add_argument("--a", required=True, help="JSON graph file or builtin pair 'name:a'")
    p.add_argument("--b", required=True)
    p.add_argument("--iters", type=int, default=None)
    _add_common(p)
    p.set_defaults(fn=cmd_wl)

    p = sub.add_parser("wl-classify", help="kernel-features classification accuracy")
    _add_dataset_args(p)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--sweep", action="store_true", help="sweep iterations 1..6, keep best")
    p.add_argument("--folds", type=int, default=tr.PROTOCOL_FOLDS)
    _add_common(p)
    p.set_defaults(fn=cmd_wl_classify)

    p = sub.add_parser("train", help="cross-validated training for one preset")
    _add_dataset_args(p)
    _add_model_args(p, multi=False)
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("table", help="summary table over presets plus kernel baseline")
    _add_dataset_args(p)
    _add_model_args(p, multi=True)
    _add_common(p)
    p.set_defaults(fn=cmd_table)

    p = sub.add_parser("curves", help="whole-dataset training curves per preset")
    _add_dataset_args(p)
    _add_model_args(p, multi=True)
    _add_common(p)
    p.set_defaults(fn=cmd_curves)

    p = sub.add_parser("atlas", help="three-way distinguishability harness")
    p.add_argument("--max-nodes", type=int, default=6, dest="max_nodes")
    p.add_argument("--presets", type=str, default="all")
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--seeds", type=str, default="0,1,2,3,4")
    p.add_argument("--random-pairs", type=int, default=0, dest="random_pairs")
    p.add_argument("--no-ideal", action="store_false", dest="ideal")
    _add_common(p)
    p.set_defaults(fn=cmd_atlas)

    p = sub.add_parser("lemmas", help="exact-arithmetic certification suites")
    p.add_argument("--suite", choices=("all", "sum", "gin", "onelayer", "mean", "max"),
                   default="all")
    _add_common(p)
    p.set_defaults(fn=cmd_lemmas)

    p = sub.add_parser("synth", help="write a synthetic dataset as JSON")
    p.add_argument("--kind", choices=("cycles-stars", "density"), required=True)
    p.add_argument("--num-per-class", type=int, default=50, dest="num_per_class")
    _add_common(p)
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if "GINLAB_SEED" in os.environ:
        args.seed = int(os.environ["GINLAB_SEED"])
    try:
        return args.fn(args)
    except (ds.DatasetLoadError, ds.DatasetFormatError, UnknownPresetError) as exc:
        return _fail("input", str(exc), EXIT_USAGE)
    except (xp.ContainmentViolation, xp.RankingViolation, AssertionError) as exc:
        return _fail("invariant", str(exc), EXIT_INVARIANT)


if __name__ == "__main__":
    sys.exit(main())
