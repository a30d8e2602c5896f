"""Hierarchical classification: level-by-level pruning, then flat refinement.

The traversal starts from a configurable tree level, evaluates the pooled
children of all currently selected nodes with a small per-depth sample
budget, keeps the most promising candidates (fixed top-k ratio or a
dynamic 2-sigma band above the minimum), and descends. Leaves stand in
for themselves, so once the loop reaches the bottom the frontier holds
only leaf classes; those survivors get the full flat treatment with an
independent sample set.

Node errors are memoized across depths: a node evaluated once (a leaf
carried along the frontier, say) is never re-scored during pruning.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

from .errors import ScorerFailure
from .estimator import (
    NodeErrorAccumulator,
    Posterior,
    argmin_label,
    mc_mean,
    rank_labels,
    softmax_posterior,
)
from .flat import score_label_means
from .metrics import RunMetrics
from .scoring import (
    DEFAULT_T_MAX,
    DEFAULT_TEMPLATE,
    ImageRef,
    SamplePoint,
    Scorer,
    ScoreRequest,
    build_sample_set,
    derive_seed,
    render_prompt,
)
from .tree import LabelTree, NodeId, descend_to_level, effective_children

FIXED_TOPK = "fixed-topk"
DYNAMIC_SIGMA = "dynamic-sigma"


@dataclass(frozen=True)
class PruneStrategy:
    """How many candidates survive at each depth.

    fixed-topk keeps the ``ceil(ratio * n)`` lowest-error candidates, with
    per-depth ratios falling back to ``default_ratio``. dynamic-sigma
    keeps every candidate within ``sigma_multiplier`` population standard
    deviations of the minimum error.
    """

    kind: str = FIXED_TOPK
    ratios: dict[int, float] = field(default_factory=dict)
    default_ratio: float = 0.5
    sigma_multiplier: float = 2.0

    def __post_init__(self):
        if self.kind not in (FIXED_TOPK, DYNAMIC_SIGMA):
            raise ValueError(f"unknown pruning strategy {self.kind!r}")
        if self.kind == FIXED_TOPK:
            for depth, ratio in {**self.ratios, -1: self.default_ratio}.items():
                if not 0.0 < ratio <= 1.0:
                    raise ValueError(f"ratio {ratio} at depth {depth} outside (0, 1]")
        if self.kind == DYNAMIC_SIGMA and self.sigma_multiplier <= 0:
            raise ValueError("sigma_multiplier must be > 0")

    @classmethod
    def fixed(cls, default_ratio: float = 0.5, ratios: dict[int, float] | None = None):
        return cls(kind=FIXED_TOPK, default_ratio=default_ratio, ratios=ratios or {})

    @classmethod
    def dynamic(cls, sigma_multiplier: float = 2.0):
        return cls(kind=DYNAMIC_SIGMA, sigma_multiplier=sigma_multiplier)

    def ratio_for(self, depth: int) -> float:
        return self.ratios.get(depth, self.default_ratio)


@dataclass(frozen=True)
class HdcConfig:
    m_final: int
    m_prune: int | None = None  # defaults to m_final // 4, at least 1
    start_level: int = 1
    strategy: PruneStrategy = field(default_factory=PruneStrategy)
    sample_seed: int = 0
    prompt_template: str = DEFAULT_TEMPLATE
    t_max: int = DEFAULT_T_MAX

    def __post_init__(self):
        if self.m_final < 1:
            raise ValueError("m_final must be >= 1")
        if self.start_level < 1:
            raise ValueError("start_level must be >= 1")
        if self.m_prune is None:
            object.__setattr__(self, "m_prune", max(1, self.m_final // 4))
        if self.m_prune < 1:
            raise ValueError("m_prune must be >= 1")
        if self.m_prune > self.m_final:
            warnings.warn(
                f"m_prune={self.m_prune} exceeds m_final={self.m_final}; the "
                "pruning stage will cost more per node than the final stage",
                stacklevel=2,
            )


@dataclass
class FrontierState:
    """Selected nodes and their error accumulators during traversal."""

    depth: int
    selected: list[NodeId]
    accumulators: dict[NodeId, NodeErrorAccumulator] = field(default_factory=dict)


@dataclass
class DepthRecord:
    """What one pruning step saw and kept."""

    depth: int
    candidates: list[NodeId]
    means: dict[NodeId, float]
    kept: list[NodeId]
    sample_counts: dict[NodeId, int]
    labels: dict[NodeId, str]

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "candidates": list(self.candidates),
            "means": {str(n): self.means[n] for n in sorted(self.means)},
            "kept": list(self.kept),
            "sample_counts": {str(n): self.sample_counts[n] for n in sorted(self.sample_counts)},
            "labels": {str(n): self.labels[n] for n in sorted(self.labels)},
        }


@dataclass
class PruneTrace:
    """Per-depth record of the pruning stage for one image."""

    image_id: str
    start_level: int
    records: list[DepthRecord] = field(default_factory=list)
    survivors: list[str] = field(default_factory=list)
    prediction: str | None = None

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "start_level": self.start_level,
            "records": [r.to_dict() for r in self.records],
            "survivors": list(self.survivors),
            "prediction": self.prediction,
        }


@dataclass(frozen=True)
class HdcResult:
    prediction: str
    posterior: Posterior
    trace: PruneTrace
    metrics: RunMetrics
    mean_errors: dict[str, float]  # final-stage means over surviving leaves

    def ranking(self) -> list[str]:
        return rank_labels(self.mean_errors)


def evaluate_frontier(
    tree: LabelTree,
    image: ImageRef,
    scorer: Scorer,
    frontier: FrontierState,
    m_prune: int,
    depth_samples: list[SamplePoint],
    template: str = DEFAULT_TEMPLATE,
) -> dict[NodeId, float]:
    """Mean error for every effective child of the selected nodes.

    All candidates at this depth share the same (t, noise) pairs, one per
    stage index. Nodes whose errors were already calculated at an earlier
    depth are reused as-is, costing zero scorer calls.
    """
    if not frontier.selected:
        raise ValueError("frontier has no selected nodes")
    if len(depth_samples) < m_prune:
        raise ValueError("not enough shared samples for this depth")

    candidates: list[NodeId] = []
    seen: set[NodeId] = set()
    for parent in frontier.selected:
        for child in effective_children(tree, parent):
            if child not in seen:
                seen.add(child)
                candidates.append(child)

    means: dict[NodeId, float] = {}
    for nid in candidates:
        acc = frontier.accumulators.get(nid)
        if acc is None:
            acc = NodeErrorAccumulator(node=nid)
            frontier.accumulators[nid] = acc
        if not acc.finalized:
            prompt = render_prompt(template, tree.node(nid).label)
            for sample in depth_samples[:m_prune]:
                try:
                    acc.append(scorer.score(ScoreRequest(image, prompt, sample)))
                except Exception as exc:
                    raise ScorerFailure(
                        image.image_id, tree.node(nid).label, sample, exc
                    ) from exc
            acc.finalize()
        means[nid] = mc_mean(acc)
    return means


def prune(
    candidates: dict[NodeId, float], strategy: PruneStrategy, depth: int
) -> list[NodeId]:
    """Select the surviving candidates at one depth, ordered by
    ascending mean error then node id. Never returns an empty set."""
    if not candidates:
        raise ValueError("no candidates to prune")
    ranked = sorted(candidates, key=lambda n: (candidates[n], n))
    if strategy.kind == FIXED_TOPK:
        k = max(1, math.ceil(strategy.ratio_for(depth) * len(candidates)))
        return ranked[:k]
    lowest = candidates[ranked[0]]
    values = list(candidates.values())
    mean = sum(values) / len(values)
    sigma = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    threshold = lowest + strategy.sigma_multiplier * sigma
    return [n for n in ranked if candidates[n] <= threshold]


def classify_hdc(
    tree: LabelTree, image: ImageRef, scorer: Scorer, config: HdcConfig
) -> HdcResult:
    """Prune the label tree level by level, then refine among survivors.

    Pruning uses a fresh shared sample set per depth (derived from the run
    seed); the final stage draws its own independent set of ``m_final``
    samples, so a run that prunes nothing is exactly the flat baseline.
    """
    if config.start_level > tree.depth:
        raise ValueError(
            f"start_level {config.start_level} exceeds tree depth {tree.depth}"
        )
    started = time.perf_counter()
    frontier = FrontierState(
        depth=config.start_level, selected=descend_to_level(tree, config.start_level)
    )
    trace = PruneTrace(image_id=image.image_id, start_level=config.start_level)
    prune_calls = 0

    for depth in range(config.start_level, tree.depth + 1):
        depth_samples = list(
            build_sample_set(
                derive_seed(config.sample_seed, "prune", depth),
                config.m_prune,
                config.t_max,
            )
        )
        already_final = {
            nid for nid, acc in frontier.accumulators.items() if acc.finalized
        }
        means = evaluate_frontier(
            tree, image, scorer, frontier, config.m_prune,
            depth_samples, config.prompt_template,
        )
        prune_calls += config.m_prune * sum(
            1 for nid in means if nid not in already_final
        )
        kept = prune(means, config.strategy, depth)
        trace.records.append(
            DepthRecord(
                depth=depth,
                candidates=list(means),
                means=dict(means),
                kept=list(kept),
                sample_counts={
                    nid: len(frontier.accumulators[nid].sample_errors) for nid in means
                },
                labels={nid: tree.node(nid).label for nid in means},
            )
        )
        frontier.selected = kept
        frontier.depth = depth + 1

    survivors = frontier.selected
    assert all(tree.node(n).is_leaf for n in survivors)
    survivor_labels = [tree.node(n).label for n in survivors]
    trace.survivors = sorted(survivor_labels)

    final_samples = build_sample_set(config.sample_seed, config.m_final, config.t_max)
    means = score_label_means(
        image, survivor_labels, scorer, final_samples, config.prompt_template
    )
    prediction = argmin_label(means)
    trace.prediction = prediction
    metrics = RunMetrics(
        eps_calls_prune=prune_calls,
        eps_calls_final=len(survivors) * config.m_final,
        surviving_leaves=len(survivors),
        wall_clock=time.perf_counter() - started,
    )
    return HdcResult(
        prediction=prediction,
        posterior=softmax_posterior(means),
        trace=trace,
        metrics=metrics,
        mean_errors=means,
    )
