"""Cost accounting and evaluation metrics.

The cost unit everywhere is the noise-prediction call count: wall-clock
time depends on hardware, while the number of model invocations does not,
and for the flat baseline it is exactly ``leaf_count * m_final`` per
image. Wall-clock is recorded for curiosity but never asserted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .tree import LabelTree, NodeId


@dataclass
class RunMetrics:
    """Noise-prediction call counts for one classification run."""

    eps_calls_prune: int = 0
    eps_calls_final: int = 0
    surviving_leaves: int = 0
    wall_clock: float | None = None

    @property
    def eps_calls_total(self) -> int:
        return self.eps_calls_prune + self.eps_calls_final

    def to_dict(self) -> dict:
        return {
            "eps_calls_prune": self.eps_calls_prune,
            "eps_calls_final": self.eps_calls_final,
            "eps_calls_total": self.eps_calls_total,
            "surviving_leaves": self.surviving_leaves,
        }


def speedup(baseline_cost: float, method_cost: float) -> float:
    """Percent cost saved relative to a baseline: 100 * (1 - method/baseline)."""
    if baseline_cost <= 0:
        raise ValueError("baseline_cost must be positive")
    return 100.0 * (1.0 - method_cost / baseline_cost)


def top_k_hit(ranking: Sequence[str], truth: str, k: int) -> bool:
    """Whether the truth appears in the first k ranked labels.

    ``ranking`` is ordered by ascending mean error with the argmin tie
    rule already applied. A truth pruned out of the ranking is a miss.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return truth in list(ranking)[:k]


def classwise_top1(results: Sequence[tuple[str, str]]) -> float:
    """Mean of per-class accuracies, in percent.

    Differs from overall accuracy when classes have unequal image counts.
    """
    if not results:
        raise ValueError("no results")
    per_class: dict[str, list[int]] = {}
    for truth, pred in results:
        per_class.setdefault(truth, []).append(1 if pred == truth else 0)
    accs = [sum(v) / len(v) for v in per_class.values()]
    return 100.0 * sum(accs) / len(accs)


def overall_topk(rankings: Sequence[tuple[str, Sequence[str]]], k: int) -> float:
    """Percent of images whose truth is within the k best-ranked labels."""
    if not rankings:
        raise ValueError("no results")
    hits = sum(1 for truth, ranking in rankings if top_k_hit(ranking, truth, k))
    return 100.0 * hits / len(rankings)


@dataclass
class ConfusionMatrix:
    """Counts of (true leaf, predicted leaf) restricted to one synset.

    Rows are ground-truth leaves under the synset; columns are the same
    leaves plus a trailing "other" bucket for predictions outside the
    subtree.
    """

    synset_label: str
    row_labels: list[str]
    col_labels: list[str]  # row_labels + ["other"]
    counts: list[list[int]]

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["true\\predicted"] + self.col_labels)
        for label, row in zip(self.row_labels, self.counts):
            writer.writerow([label] + row)
        return buf.getvalue()


def confusion_subtree(
    results: Sequence[tuple[str, str]], tree: LabelTree, synset: NodeId
) -> ConfusionMatrix:
    """Confusion matrix over the classes under one internal node."""
    node = tree.node(synset)
    if node.is_leaf:
        raise ValueError(f"node {synset} ({node.label!r}) is a leaf, not a synset")
    members = sorted(tree.node(n).label for n in tree.leaves_under(synset))
    member_set = set(members)
    col_labels = members + ["other"]
    col_index = {label: i for i, label in enumerate(col_labels)}
    counts = [[0] * len(col_labels) for _ in members]
    row_index = {label: i for i, label in enumerate(members)}
    for truth, pred in results:
        if truth not in member_set:
            continue
        j = col_index[pred] if pred in member_set else col_index["other"]
        counts[row_index[truth]][j] += 1
    return ConfusionMatrix(
        synset_label=node.label,
        row_labels=members,
        col_labels=col_labels,
        counts=counts,
    )


@dataclass
class EvalReport:
    """Aggregated results of one experiment run, JSON/CSV serializable."""

    method: str
    dataset_hash: str
    n_images: int
    top_k_overall: dict[int, float]
    top1_classwise: float
    mean_calls_per_image: float
    total_calls: int
    speedup_vs_baseline: float
    per_class_top1: dict[str, float]
    per_class_mean_calls: dict[str, float]
    confusion: list[tuple[str, str, int]]
    per_image: list[dict]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset_hash": self.dataset_hash,
            "n_images": self.n_images,
            "top_k_overall": {str(k): v for k, v in sorted(self.top_k_overall.items())},
            "top1_classwise": self.top1_classwise,
            "mean_calls_per_image": self.mean_calls_per_image,
            "total_calls": self.total_calls,
            "speedup_vs_baseline": self.speedup_vs_baseline,
            "per_class_top1": dict(sorted(self.per_class_top1.items())),
            "per_class_mean_calls": dict(sorted(self.per_class_mean_calls.items())),
            "confusion": [list(entry) for entry in self.confusion],
            "per_image": self.per_image,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvalReport":
        return cls(
            method=doc["method"],
            dataset_hash=doc["dataset_hash"],
            n_images=doc["n_images"],
            top_k_overall={int(k): v for k, v in doc["top_k_overall"].items()},
            top1_classwise=doc["top1_classwise"],
            mean_calls_per_image=doc["mean_calls_per_image"],
            total_calls=doc["total_calls"],
            speedup_vs_baseline=doc["speedup_vs_baseline"],
            per_class_top1=dict(doc["per_class_top1"]),
            per_class_mean_calls=dict(doc["per_class_mean_calls"]),
            confusion=[tuple(e) for e in doc["confusion"]],
            per_image=list(doc["per_image"]),
            config=dict(doc.get("config", {})),
        )

    def summary_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["metric", "value"])
        writer.writerow(["method", self.method])
        writer.writerow(["dataset_hash", self.dataset_hash])
        writer.writerow(["n_images", self.n_images])
        for k in sorted(self.top_k_overall):
            writer.writerow([f"top{k}_overall_pct", self.top_k_overall[k]])
        writer.writerow(["top1_classwise_pct", self.top1_classwise])
        writer.writerow(["mean_calls_per_image", self.mean_calls_per_image])
        writer.writerow(["total_calls", self.total_calls])
        writer.writerow(["speedup_vs_baseline_pct", self.speedup_vs_baseline])
        return buf.getvalue()


class CountingScorer:
    """Wraps a scorer, recording every request key it sees.

    Used to certify cost accounting and memoization: a duplicate
    (image, label, t, noise_id) key means some node/sample pair was
    evaluated twice.
    """

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.keys: list[tuple] = []

    def score(self, request) -> float:
        self.calls += 1
        self.keys.append(
            (
                request.image.image_id,
                request.prompt.label,
                request.sample.t,
                request.sample.noise_id,
            )
        )
        return self.inner.score(request)

    def duplicate_keys(self) -> list[tuple]:
        seen, dups = set(), []
        for key in self.keys:
            if key in seen:
                dups.append(key)
            seen.add(key)
        return dups

    def calls_per_label(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for _, label, _, _ in self.keys:
            out[label] = out.get(label, 0) + 1
        return out
