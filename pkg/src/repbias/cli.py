"""Command-line orchestration of the audit pipeline.

Subcommands: gap | colorbias | shapebias | distort | knn | probe.
Every command is a pure function of (config file, input files, seed):
reruns emit byte-identical reports. Validation failures exit 2, data errors
exit 1; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audit, corpus, distort, embedspace, reports
from .embedspace import KnnConfig, ProbeConfig


class ConfigError(Exception):
    pass


def load_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _require(cfg: dict, key: str) -> object:
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _existing_path(cfg_path: str, role: str) -> Path:
    p = Path(cfg_path)
    if not p.is_file():
        raise ConfigError(f"{role}: file not found: {cfg_path}")
    return p


def _dataset(cfg: dict, split: str) -> corpus.Dataset:
    datasets = _require(cfg, "datasets")
    if split not in datasets:
        raise ConfigError(f"config: datasets has no split {split!r}")
    return corpus.load_cifar_batch(_existing_path(datasets[split], f"dataset {split}"), split)


def _features(cfg: dict, model: str, split: str, normalized: bool = True) -> corpus.FeatureMatrix:
    features = _require(cfg, "features")
    if model not in features or split not in features[model]:
        raise ConfigError(f"config: no feature file for model {model!r} split {split!r}")
    fm = corpus.read_features(
        _existing_path(features[model][split], f"features {model}/{split}"),
        model_id=model,
        split_name=split,
    )
    return embedspace.normalize_rows(fm) if normalized else fm


def _predictions(cfg: dict, model: str, table: dict | None = None) -> corpus.PredictionTable:
    source = table if table is not None else _require(cfg, "predictions")
    if model not in source:
        raise ConfigError(f"config: no prediction file for model {model!r}")
    return corpus.read_predictions(_existing_path(source[model], f"predictions {model}"), model)


def _manifest(cfg: dict, name: str) -> corpus.SubsetManifest:
    manifests = _require(cfg, "manifests")
    if name not in manifests:
        raise ConfigError(f"config: manifests has no entry {name!r}")
    return corpus.read_manifest(_existing_path(manifests[name], f"manifest {name}"), name)


def _knn_config(cfg: dict) -> KnnConfig:
    raw = dict(cfg.get("knn", {}))
    k = int(raw.get("k", 4))
    if k < 1:
        raise ConfigError(f"config: knn k must be >= 1, got {k}")
    return KnnConfig(k=k, exclude_self=bool(raw.get("exclude_self", False)))

def _probe_config(cfg: dict) -> ProbeConfig:
    raw = dict(cfg.get("probe", {}))
    return ProbeConfig(
        step_size=float(raw.get("step_size", 0.1)),
        iterations=int(raw.get("iterations", 500)),
        l2_penalty=float(raw.get("l2_penalty", 0.0)),
    )


def _model_list(cfg: dict, section: dict) -> list[str]:
    if "models" in section:
        return list(section["models"])
    return sorted(_require(cfg, "features"))


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gap(cfg: dict) -> int:
    unsup_ids = list(_require(cfg, "unsupervised_models"))
    sup_id = _require(cfg, "supervised_model")
    if not unsup_ids:
        raise ConfigError("config: unsupervised_models must name at least one model")
    predictions = _require(cfg, "predictions")
    if sup_id not in predictions:
        raise ConfigError(f"config: no prediction file for supervised model {sup_id!r}")
    unsup = [_predictions(cfg, m) for m in unsup_ids]
    sup = _predictions(cfg, sup_id)
    gap = audit.agreement_and_gap(unsup, sup)
    out = _out_dir(cfg)
    corpus.write_manifest(gap.indices, out / "gap_manifest.txt")
    payload = reports.report_envelope("gap", cfg, int(cfg.get("seed", 0)))
    payload.update(
        {
            "counts": {
                "shared_wrong": gap.shared_wrong_count,
                "shared_wrong_same": gap.shared_wrong_same_count,
                "gap": gap.gap_count,
            },
            "unsupervised_models": unsup_ids,
            "supervised_model": sup_id,
            "manifest": "gap_manifest.txt",
        }
    )
    reports.write_json(out / "gap.json", payload)
    return 0


def cmd_colorbias(cfg: dict) -> int:
    section = dict(cfg.get("colorbias", {}))
    subset_name = section.get("subset", "gap")
    query_split = section.get("query_split", "test")
    ref_split = section.get("reference_split", "train")
    knn_cfg = _knn_config(cfg)
    manifest = _manifest(cfg, subset_name)
    query_imgs = _dataset(cfg, query_split)
    ref_imgs = query_imgs if ref_split == query_split else _dataset(cfg, ref_split)
    models = _model_list(cfg, section)
    per_model: dict[str, dict] = {}
    rows = []
    for model in models:
        query_feats = _features(cfg, model, query_split)
        ref_feats = query_feats if ref_split == query_split else _features(cfg, model, ref_split)
        rep = audit.color_bias_score(manifest, query_feats, ref_feats, query_imgs, ref_imgs, knn_cfg)
        per_model[model] = {
            "mean_emd": rep.mean_emd,
            "per_query": [[i, v] for i, v in rep.per_query_emd],
        }
        rows.append([model, f"{rep.mean_emd:.2f}"])
    out = _out_dir(cfg)
    payload = reports.report_envelope("colorbias", cfg, int(cfg.get("seed", 0)))
    payload.update(
        {"k": knn_cfg.k, "subset": subset_name, "query_split": query_split,
         "reference_split": ref_split, "models": per_model}
    )
    reports.write_json(out / "colorbias.json", payload)
    reports.write_text(out / "colorbias.txt", reports.render_table(["model", "mean EMD"], rows))
    return 0


def cmd_shapebias(cfg: dict) -> int:
    section = dict(cfg.get("shapebias", {}))
    train_split = section.get("train_split", "train")
    sil_split = section.get("silhouette_split", "silhouette")
    subset_name = section.get("subset", "silhouette")
    probe_cfg = _probe_config(cfg)
    manifest = _manifest(cfg, subset_name)
    train_ds = _dataset(cfg, train_split)
    sil_ds = _dataset(cfg, sil_split)
    models = _model_list(cfg, section)
    per_model: dict[str, dict] = {}
    rows = []
    for model in models:
        train_feats = _features(cfg, model, train_split)
        sil_feats = _features(cfg, model, sil_split)
        probe = embedspace.train_probe(
            train_feats, train_ds.labels(), probe_cfg, num_classes=corpus.NUM_CLASSES
        )
        rep = audit.shape_bias_eval(sil_feats, manifest, sil_ds.labels(), probe)
        per_model[model] = {"accuracy": rep.accuracy, "n": rep.n}
        rows.append([model, reports.pct(rep.accuracy)])
    out = _out_dir(cfg)
    payload = reports.report_envelope("shapebias", cfg, int(cfg.get("seed", 0)))
    payload.update(
        {"subset": subset_name, "models": per_model,
         "probe": {"step_size": probe_cfg.step_size, "iterations": probe_cfg.iterations,
                   "l2_penalty": probe_cfg.l2_penalty}}
    )
    reports.write_json(out / "shapebias.json", payload)
    reports.write_text(out / "shapebias.txt", reports.render_table(["model", "accuracy"], rows))
    return 0


def _jitter_from(params: dict, seed: int) -> distort.JitterParams:
    def pair(key, default):
        v = params.get(key, default)
        return (float(v[0]), float(v[1]))

    return distort.JitterParams(
        brightness=pair("brightness", (0.6, 1.4)),
        contrast=pair("contrast", (0.6, 1.4)),
        saturation=pair("saturation", (0.6, 1.4)),
        hue_shift=pair("hue_shift", (-18.0, 18.0)),
        seed=int(params.get("seed", seed)),
    )


def cmd_distort(cfg: dict) -> int:
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    generated: dict[str, str] = {}
    specs = cfg.get("distortions", [])
    if specs:
        source = _dataset(cfg, cfg.get("distort_source", "test"))
        gen_dir = out / "distorted"
        gen_dir.mkdir(exist_ok=True)
        for spec in specs:
            kind = spec.get("kind")
            if kind not in distort.DISTORTION_KINDS:
                raise ConfigError(f"config: unknown distortion kind {kind!r}")
            name = spec.get("name", kind)
            params: distort.JitterParams | distort.RotateParams | None = None
            if kind == "color":
                params = _jitter_from(spec.get("params", {}), seed)
            elif kind == "rotate":
                raw = spec.get("params", {})
                deg = raw.get("degrees", (-15.0, 15.0))
                params = distort.RotateParams(
                    degrees=(float(deg[0]), float(deg[1])), seed=int(raw.get("seed", seed))
                )
            distorted = distort.distort_dataset(source, kind, params, seed)
            out_bin = gen_dir / f"{name}.bin"
            corpus.write_cifar_batch(distorted, out_bin)
            reports.write_json(gen_dir / f"{name}.json", distort.sidecar_metadata(kind, params, seed))
            generated[name] = str(out_bin.relative_to(out))
    per_model: dict[str, dict] = {}
    rows = []
    distorted_preds = cfg.get("distorted_predictions", {})
    names: list[str] = []
    for model in sorted(distorted_preds):
        baseline = _predictions(cfg, model)
        tables = {
            name: corpus.read_predictions(
                _existing_path(path, f"distorted predictions {model}/{name}"), model
            )
            for name, path in distorted_preds[model].items()
        }
        rep = audit.distortion_eval(baseline, tables)
        per_model[model] = {"baseline_acc": rep.baseline_acc, "deltas": rep.deltas}
        names = sorted(set(names) | set(rep.deltas))
    for model in sorted(per_model):
        rep = per_model[model]
        rows.append(
            [model, reports.pct(rep["baseline_acc"])]
            + [reports.signed_pct(rep["deltas"].get(n, 0.0)) if n in rep["deltas"] else "-"
               for n in names]
        )
    payload = reports.report_envelope("distort", cfg, seed)
    payload.update({"generated_datasets": generated, "models": per_model})
    reports.write_json(out / "distortion.json", payload)
    if per_model:
        reports.write_text(
            out / "distortion.txt",
            reports.render_table(["model", "baseline"] + names, rows),
        )
    return 0


def cmd_knn(cfg: dict) -> int:
    section = dict(cfg.get("knn_eval", {}))
    query_split = section.get("query_split", "test")
    ref_split = section.get("reference_split", "train")
    subset_name = section.get("subset", "gap")
    knn_cfg = _knn_config(cfg)
    manifest = _manifest(cfg, subset_name)
    query_ds = _dataset(cfg, query_split)
    ref_ds = query_ds if ref_split == query_split else _dataset(cfg, ref_split)
    manifest.validate(dataset_size=len(query_ds))
    rows_sel = np.array(manifest.indices, dtype=np.int64)
    models = _model_list(cfg, section)
    per_model: dict[str, dict] = {}
    rows = []
    out = _out_dir(cfg)
    for model in models:
        query_feats = _features(cfg, model, query_split)
        ref_feats = query_feats if ref_split == query_split else _features(cfg, model, ref_split)
        queries = corpus.FeatureMatrix(
            query_feats.rows[rows_sel], model_id=model, split_name=query_split
        )
        table = embedspace.knn_classify(
            queries,
            query_ds.labels()[rows_sel],
            ref_feats,
            ref_ds.labels(),
            knn_cfg,
            query_indices=rows_sel,
        )
        acc = embedspace.probe_accuracy(table)
        corpus.write_predictions(table, out / f"knn_{model}.csv")
        per_model[model] = {"accuracy": acc, "n": len(table)}
        rows.append([model, reports.pct(acc)])
    payload = reports.report_envelope("knn", cfg, int(cfg.get("seed", 0)))
    payload.update(
        {"k": knn_cfg.k, "subset": subset_name, "query_split": query_split,
         "reference_split": ref_split, "models": per_model}
    )
    reports.write_json(out / "knn.json", payload)
    reports.write_text(out / "knn.txt", reports.render_table(["model", "accuracy"], rows))
    return 0


def cmd_probe(cfg: dict) -> int:
    section = dict(cfg.get("probe_eval", {}))
    train_split = section.get("train_split", "train")
    eval_split = section.get("eval_split", "test")
    probe_cfg = _probe_config(cfg)
    train_ds = _dataset(cfg, train_split)
    eval_ds = _dataset(cfg, eval_split)
    models = _model_list(cfg, section)
    per_model: dict[str, dict] = {}
    rows = []
    out = _out_dir(cfg)
    for model in models:
        train_feats = _features(cfg, model, train_split)
        eval_feats = _features(cfg, model, eval_split)
        probe = embedspace.train_probe(
            train_feats, train_ds.labels(), probe_cfg, num_classes=corpus.NUM_CLASSES
        )
        table = embedspace.probe_predict(probe, eval_feats, eval_ds.labels())
        acc = embedspace.probe_accuracy(table)
        corpus.write_predictions(table, out / f"probe_{model}.csv")
        per_model[model] = {"accuracy": acc, "n": len(table), "train_n": len(train_ds)}
        rows.append([model, reports.pct(acc)])
    payload = reports.report_envelope("probe", cfg, int(cfg.get("seed", 0)))
    payload.update(
        {"train_split": train_split, "eval_split": eval_split, "models": per_model,
         "probe": {"step_size": probe_cfg.step_size, "iterations": probe_cfg.iterations,
                   "l2_penalty": probe_cfg.l2_penalty}}
    )
    reports.write_json(out / "probe.json", payload)
    reports.write_text(out / "probe.txt", reports.render_table(["model", "accuracy"], rows))
    return 0


_COMMANDS = {
    "gap": cmd_gap,
    "colorbias": cmd_colorbias,
    "shapebias": cmd_shapebias,
    "distort": cmd_distort,
    "knn": cmd_knn,
    "probe": cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON audit configuration")
    common.add_argument("--out", help="output directory (overrides config out_dir)")
    common.add_argument("--seed", type=int, help="seed (overrides config)")
    common.add_argument("--k", type=int, help="kNN neighbor count (overrides config)")
    parser = argparse.ArgumentParser(
        prog="repbias", description="Representation bias audit pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg["out_dir"] = args.out
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.k is not None:
            cfg.setdefault("knn", {})["k"] = args.k
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"repbias: config error: {exc}", file=sys.stderr)
        return 2
    except (corpus.CorpusError, audit.AlignmentError, ValueError, OSError) as exc:
        print(f"repbias: error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
