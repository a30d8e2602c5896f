"""Experiment harness: config-driven baseline/HDC runs and report emission.

A run is described by a JSON config on disk (paths to a tree, a dataset,
maybe a replay matrix). The CLI resolves those paths into a self-contained
payload, the service turns the payload into an :class:`ExperimentSpec`,
and :func:`run_experiment` does the work. Everything downstream of the
payload is deterministic: identical payloads produce byte-identical
reports and traces.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DatasetMismatchError
from .flat import FlatConfig, classify_flat
from .hierarchical import DYNAMIC_SIGMA, FIXED_TOPK, HdcConfig, PruneStrategy, classify_hdc
from .metrics import EvalReport, confusion_subtree, overall_topk, speedup
from .scoring import (
    ImageRef,
    RemoteScorer,
    ReplayScorer,
    SyntheticScorer,
    SyntheticScorerConfig,
)
from .tree import INDENTED_TEXT, JSON_ADJACENCY, LabelTree, load_tree

ENDPOINT_ENV_VAR = "HDC_SCORER_ENDPOINT"


# -- datasets ---------------------------------------------------------------


def make_synthetic_dataset(tree: LabelTree, per_class: int, seed: int) -> list[ImageRef]:
    """``per_class`` images per leaf class, ids deterministic from the seed."""
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    images = []
    for label in sorted(tree.leaf_labels()):
        for i in range(per_class):
            images.append(ImageRef(image_id=f"{label}#{seed}#{i}", true_class=label))
    return images


def dataset_hash(images: list[ImageRef]) -> str:
    canon = json.dumps(
        [[img.image_id, img.true_class] for img in images],
        separators=(",", ":"),
        sort_keys=True,
    )
    return hashlib.sha256(canon.encode()).hexdigest()


def dataset_to_doc(images: list[ImageRef], meta: dict | None = None) -> dict:
    return {
        "meta": dict(meta or {}),
        "images": [
            {"image_id": img.image_id, "true_class": img.true_class} for img in images
        ],
    }


def dataset_from_doc(doc: dict) -> tuple[list[ImageRef], dict]:
    images = [
        ImageRef(image_id=e["image_id"], true_class=e.get("true_class"))
        for e in doc["images"]
    ]
    if not images:
        raise ConfigError("dataset has no images")
    return images, dict(doc.get("meta", {}))


# -- scorers ------------------------------------------------------------------


def build_scorer(spec: dict, tree: LabelTree):
    kind = spec.get("kind")
    if kind == "synthetic":
        config = SyntheticScorerConfig(
            tree=tree,
            base_error=spec.get("base_error", 0.1),
            distance_gain=spec.get("distance_gain", 0.05),
            noise_sigma=spec.get("noise_sigma", 0.0),
            alpha_bar_schedule=spec.get("alpha_bar_schedule", "linear"),
            seed=spec.get("seed", 0),
            t_max=spec.get("t_max", 1000),
        )
        return SyntheticScorer(config)
    if kind == "replay":
        if "rows" in spec:
            return ReplayScorer.from_rows(spec["rows"])
        if "matrix_path" in spec:
            return ReplayScorer.from_file(spec["matrix_path"])
        raise ConfigError("replay scorer needs rows or matrix_path")
    if kind == "remote":
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or spec.get("endpoint")
        if not endpoint:
            raise ConfigError(
                f"remote scorer needs an endpoint (or ${ENDPOINT_ENV_VAR})"
            )
        return RemoteScorer.from_endpoint(endpoint)
    raise ConfigError(f"unknown scorer kind {kind!r}")


# -- specs ----------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: no file paths, just data."""

    tree: LabelTree
    method: str  # flat | hdc
    scorer_spec: dict
    images: list[ImageRef]
    dataset_meta: dict = field(default_factory=dict)
    flat: FlatConfig | None = None
    hdc: HdcConfig | None = None
    workers: int | None = None
    confusion_synsets: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in ("flat", "hdc"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method == "flat" and self.flat is None:
            raise ConfigError("flat runs need a flat config")
        if self.method == "hdc" and self.hdc is None:
            raise ConfigError("hdc runs need an hdc config")
        for img in self.images:
            if img.true_class is None:
                raise ConfigError(f"image {img.image_id!r} has no true_class")
            if img.true_class not in self.tree.leaf_labels():
                raise ConfigError(
                    f"image {img.image_id!r} has true_class {img.true_class!r} "
                    "which is not a class of the tree"
                )


def strategy_from_doc(doc: dict) -> PruneStrategy:
    kind = doc.get("kind", FIXED_TOPK)
    if kind == FIXED_TOPK:
        return PruneStrategy.fixed(
            default_ratio=doc.get("default_ratio", 0.5),
            ratios={int(k): float(v) for k, v in doc.get("ratios", {}).items()},
        )
    if kind == DYNAMIC_SIGMA:
        return PruneStrategy.dynamic(sigma_multiplier=doc.get("sigma_multiplier", 2.0))
    raise ConfigError(f"unknown pruning strategy {kind!r}")


def flat_config_from_doc(doc: dict) -> FlatConfig:
    try:
        return FlatConfig(
            m_final=doc["m_final"],
            sample_seed=doc.get("sample_seed", 0),
            prompt_template=doc.get("prompt_template", "A photo of a {label}"),
            t_max=doc.get("t_max", 1000),
        )
    except KeyError as exc:
        raise ConfigError(f"flat config missing field {exc}") from None


def hdc_config_from_doc(doc: dict) -> HdcConfig:
    try:
        return HdcConfig(
            m_final=doc["m_final"],
            m_prune=doc.get("m_prune"),
            start_level=doc.get("start_level", 1),
            strategy=strategy_from_doc(doc.get("strategy", {})),
            sample_seed=doc.get("sample_seed", 0),
            prompt_template=doc.get("prompt_template", "A photo of a {label}"),
            t_max=doc.get("t_max", 1000),
        )
    except KeyError as exc:
        raise ConfigError(f"hdc config missing field {exc}") from None


def spec_from_payload(payload: dict) -> ExperimentSpec:
    """Turn a self-contained run payload (inline tree/dataset) into a spec."""
    try:
        tree = load_tree(json.dumps(payload["tree"]))
        method = payload["method"]
        scorer_spec = dict(payload["scorer"])
        images, meta = dataset_from_doc(payload["dataset"])
    except KeyError as exc:
        raise ConfigError(f"run payload missing field {exc}") from None
    flat = flat_config_from_doc(payload["flat"]) if payload.get("flat") else None
    hdc = hdc_config_from_doc(payload["hdc"]) if payload.get("hdc") else None
    return ExperimentSpec(
        tree=tree,
        method=method,
        scorer_spec=scorer_spec,
        images=images,
        dataset_meta=meta,
        flat=flat,
        hdc=hdc,
        workers=payload.get("workers"),
        confusion_synsets=list(payload.get("confusion_synsets", [])),
    )


def load_experiment_config(path) -> dict:
    """Read a config file and inline every referenced resource."""
    path = Path(path)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve_experiment_config(config, path.parent)


def resolve_experiment_config(config: dict, base: Path) -> dict:
    """Turn an on-disk config into the wire payload for the run endpoint.

    Referenced files (tree, dataset, replay matrix) are read relative to
    ``base`` and inlined, so the service never touches the caller's
    filesystem.
    """

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        tree_path = resolve(config["tree_path"])
        method = config["method"]
        scorer = dict(config["scorer"])
        dataset = dict(config["dataset"])
    except KeyError as exc:
        raise ConfigError(f"config missing field {exc}") from None

    fmt = JSON_ADJACENCY if str(tree_path).endswith(".json") else INDENTED_TEXT
    try:
        tree = load_tree(tree_path.read_text(encoding="utf-8"), fmt)
    except OSError as exc:
        raise ConfigError(f"cannot read tree {tree_path}: {exc}") from exc

    kind = dataset.get("kind")
    if kind == "synthetic":
        images = make_synthetic_dataset(
            tree, dataset.get("per_class", 1), dataset.get("seed", 0)
        )
        meta = {"kind": "synthetic", "per_class": dataset.get("per_class", 1),
                "seed": dataset.get("seed", 0)}
    elif kind == "file":
        try:
            doc = json.loads(resolve(dataset["path"]).read_text(encoding="utf-8"))
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read dataset file: {exc}") from exc
        images, meta = dataset_from_doc(doc)
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")

    if scorer.get("kind") == "replay" and "matrix_path" in scorer:
        rows = json.loads(resolve(scorer.pop("matrix_path")).read_text(encoding="utf-8"))
        scorer["rows"] = rows["rows"] if isinstance(rows, dict) else rows

    payload = {
        "tree": tree.to_adjacency(),
        "method": method,
        "scorer": scorer,
        "dataset": dataset_to_doc(images, meta),
        "flat": config.get("flat"),
        "hdc": config.get("hdc"),
        "workers": config.get("workers"),
        "confusion_synsets": config.get("confusion_synsets", []),
    }
    # fail fast on config problems before anything is sent anywhere
    spec_from_payload(payload)
    return payload


# -- running ----------------------------------------------------------------------


def run_experiment(spec: ExperimentSpec) -> tuple[EvalReport, dict[str, dict]]:
    """Classify every image; aggregate metrics and per-image traces.

    Images are processed by a bounded worker pool but reduced in dataset
    order; per-image outcomes depend only on (tree, image, scorer, config),
    so the pool size never changes the outputs.
    """
    scorer = build_scorer(spec.scorer_spec, spec.tree)

    def one(image: ImageRef):
        if spec.method == "flat":
            result = classify_flat(spec.tree, image, scorer, spec.flat)
            return image, result, None
        result = classify_hdc(spec.tree, image, scorer, spec.hdc)
        return image, result, result.trace

    workers = spec.workers or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, spec.images))
    else:
        outcomes = [one(img) for img in spec.images]

    m_final = (spec.flat or spec.hdc).m_final
    baseline_calls_per_image = spec.tree.leaf_count * m_final

    rankings, pairs, per_image, traces = [], [], [], {}
    per_class_hits: dict[str, list[int]] = {}
    per_class_calls: dict[str, list[int]] = {}
    confusion_counts: dict[tuple[str, str], int] = {}
    total_calls = 0
    for image, result, trace in outcomes:
        truth = image.true_class
        ranking = result.ranking()
        rankings.append((truth, ranking))
        pairs.append((truth, result.prediction))
        calls = result.metrics.eps_calls_total
        total_calls += calls
        per_class_hits.setdefault(truth, []).append(
            1 if result.prediction == truth else 0
        )
        per_class_calls.setdefault(truth, []).append(calls)
        confusion_counts[(truth, result.prediction)] = (
            confusion_counts.get((truth, result.prediction), 0) + 1
        )
        per_image.append(
            {
                "image_id": image.image_id,
                "truth": truth,
                "prediction": result.prediction,
                **result.metrics.to_dict(),
            }
        )
        if trace is not None:
            traces[image.image_id] = trace.to_dict()

    n = len(spec.images)
    report = EvalReport(
        method=spec.method,
        dataset_hash=dataset_hash(spec.images),
        n_images=n,
        top_k_overall={k: overall_topk(rankings, k) for k in (1, 3, 5)},
        top1_classwise=100.0
        * sum(sum(v) / len(v) for v in per_class_hits.values())
        / len(per_class_hits),
        mean_calls_per_image=total_calls / n,
        total_calls=total_calls,
        speedup_vs_baseline=speedup(baseline_calls_per_image * n, total_calls),
        per_class_top1={
            label: 100.0 * sum(v) / len(v) for label, v in per_class_hits.items()
        },
        per_class_mean_calls={
            label: sum(v) / len(v) for label, v in per_class_calls.items()
        },
        confusion=sorted((t, p, c) for (t, p), c in confusion_counts.items()),
        per_image=per_image,
        config=_config_echo(spec),
    )
    return report, traces


def _config_echo(spec: ExperimentSpec) -> dict:
    scorer = {k: v for k, v in spec.scorer_spec.items() if k != "rows"}
    echo = {"method": spec.method, "scorer": scorer, "dataset": spec.dataset_meta}
    if spec.flat is not None:
        echo["flat"] = {
            "m_final": spec.flat.m_final,
            "sample_seed": spec.flat.sample_seed,
            "prompt_template": spec.flat.prompt_template,
            "t_max": spec.flat.t_max,
        }
    if spec.hdc is not None:
        strategy = {"kind": spec.hdc.strategy.kind}
        if spec.hdc.strategy.kind == FIXED_TOPK:
            strategy["default_ratio"] = spec.hdc.strategy.default_ratio
            strategy["ratios"] = {str(k): v for k, v in spec.hdc.strategy.ratios.items()}
        else:
            strategy["sigma_multiplier"] = spec.hdc.strategy.sigma_multiplier
        echo["hdc"] = {
            "m_final": spec.hdc.m_final,
            "m_prune": spec.hdc.m_prune,
            "start_level": spec.hdc.start_level,
            "sample_seed": spec.hdc.sample_seed,
            "prompt_template": spec.hdc.prompt_template,
            "t_max": spec.hdc.t_max,
            "strategy": strategy,
        }
    return echo


def confusion_subtrees_for(
    spec: ExperimentSpec, report: EvalReport
) -> dict[str, dict]:
    """Synset-restricted confusion matrices requested by the config."""
    out = {}
    pairs = [(e["truth"], e["prediction"]) for e in report.per_image]
    for label in spec.confusion_synsets:
        nodes = [
            n for n in spec.tree.nodes_by_label(label)
            if not spec.tree.node(n).is_leaf
        ]
        if not nodes:
            raise ConfigError(f"confusion synset {label!r} is not an internal node")
        cm = confusion_subtree(pairs, spec.tree, nodes[0])
        out[label] = {
            "synset": cm.synset_label,
            "rows": cm.row_labels,
            "cols": cm.col_labels,
            "counts": cm.counts,
        }
    return out


# -- comparison ----------------------------------------------------------------------


def compare_reports(baseline: dict, method: dict) -> dict:
    """Accuracy deltas and speed-up between two runs of the same dataset."""
    if baseline.get("dataset_hash") != method.get("dataset_hash"):
        raise DatasetMismatchError(
            "reports come from different datasets "
            f"({baseline.get('dataset_hash')} vs {method.get('dataset_hash')})"
        )
    rows = {}
    for k in ("1", "3", "5"):
        b = baseline["top_k_overall"][k]
        m = method["top_k_overall"][k]
        rows[f"top{k}"] = {"baseline": b, "method": m, "delta": m - b}
    rows["top1_classwise"] = {
        "baseline": baseline["top1_classwise"],
        "method": method["top1_classwise"],
        "delta": method["top1_classwise"] - baseline["top1_classwise"],
    }
    return {
        "dataset_hash": baseline["dataset_hash"],
        "baseline_method": baseline["method"],
        "method": method["method"],
        "metrics": rows,
        "mean_calls_per_image": {
            "baseline": baseline["mean_calls_per_image"],
            "method": method["mean_calls_per_image"],
        },
        "speedup_pct": speedup(
            baseline["mean_calls_per_image"], method["mean_calls_per_image"]
        ),
    }


def comparison_table(comparison: dict) -> str:
    rows = comparison["metrics"]
    calls = comparison["mean_calls_per_image"]
    lines = [
        f"{'metric':<18}{'baseline':>12}{'method':>12}{'delta':>10}",
        "-" * 52,
    ]
    for name in ("top1", "top3", "top5", "top1_classwise"):
        r = rows[name]
        lines.append(
            f"{name:<18}{r['baseline']:>12.2f}{r['method']:>12.2f}{r['delta']:>+10.2f}"
        )
    lines.append(
        f"{'calls/image':<18}{calls['baseline']:>12.2f}{calls['method']:>12.2f}"
    )
    lines.append(f"{'speed-up [%]':<18}{comparison['speedup_pct']:>34.2f}")
    return "\n".join(lines)


# -- output files ------------------------------------------------------------------


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def safe_filename(name: str) -> str:
    stem = re.sub(r"[^A-Za-z0-9._-]+", "_", name)
    suffix = hashlib.sha256(name.encode()).hexdigest()[:8]
    return f"{stem}.{suffix}"


def write_run_outputs(
    output_dir,
    report_doc: dict,
    traces: dict[str, dict],
    confusion_subtrees: dict[str, dict] | None = None,
) -> list[Path]:
    """Write report.json / summary.csv / confusion.csv and per-image traces."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out / "report.json"
    report_path.write_text(canonical_json(report_doc), encoding="utf-8")
    written.append(report_path)

    report = EvalReport.from_dict(report_doc)
    summary = out / "summary.csv"
    summary.write_text(report.summary_csv_text(), encoding="utf-8")
    written.append(summary)

    confusion = out / "confusion.csv"
    lines = ["truth,prediction,count"]
    lines += [f"{t},{p},{c}" for t, p, c in report.confusion]
    confusion.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(confusion)

    for label, cm in (confusion_subtrees or {}).items():
        path = out / f"confusion_{safe_filename(label)}.csv"
        rows = ["true\\predicted," + ",".join(cm["cols"])]
        for row_label, row in zip(cm["rows"], cm["counts"]):
            rows.append(row_label + "," + ",".join(str(c) for c in row))
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(path)

    if traces:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        for image_id in sorted(traces):
            path = trace_dir / f"{safe_filename(image_id)}.json"
            path.write_text(canonical_json(traces[image_id]), encoding="utf-8")
            written.append(path)
    return written
